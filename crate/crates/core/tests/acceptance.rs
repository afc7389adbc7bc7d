//! Runs every acceptance criterion and prints one PASS/FAIL line each.

use std::io::Write;

use kesten_evt::acceptance::{Suite, CRITERIA};

const SEED: u64 = 1;

#[test]
fn acceptance_criteria() {
    let scratch = tempfile::tempdir().unwrap();
    let suite = Suite::new(SEED, scratch.path());
    let mut failed = Vec::new();
    // written straight to stdout so the lines survive output capture
    let mut out = std::io::stdout();
    // start below libtest's "test acceptance_criteria ..." prefix
    writeln!(out).unwrap();
    for (id, _) in CRITERIA {
        let o = suite.run(id);
        writeln!(out, "{}", o.line()).unwrap();
        if !o.pass {
            failed.push(id);
        }
    }
    let passed = CRITERIA.len() - failed.len();
    writeln!(out, "acceptance: {passed}/{} criteria passed", CRITERIA.len()).unwrap();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
