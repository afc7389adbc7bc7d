//! Drives a command from a JSON run config, as the binary does.

use kesten_evt::cli::{self, RunConfig};

const CONFIG: &str = r#"{
  "model": {
    "dimension": 1,
    "a_law": { "ScalarTwoPoint": { "a1": 2.0, "a2": 0.5, "p": 0.3333333333333333 } },
    "b_law": { "Constant": [1.0] }
  },
  "budget": { "path_length": 100000, "replicas": 500, "batch": 100000 },
  "seed": 11
}"#;

fn main() -> kesten_evt::Result<()> {
    let out = std::env::temp_dir().join("kesten-evt-run-config");
    let cfg = RunConfig::from_json(CONFIG, &["options.alpha_bracket=[0.1,3.0]".into()], None, Some(&out))?;
    for command in ["alpha", "tail", "theta"] {
        let summary = cli::execute(command, &cfg, 2)?;
        println!("{command}: exit {} artifacts {:?} flags {:?}", summary.exit_code(), summary.artifacts, summary.flags);
    }
    println!("outputs in {}", out.display());
    Ok(())
}
