//! Checks the standing hypotheses for a few models.

use kesten_evt::linrw::SimBudget;
use kesten_evt::model::{self, ALaw, AffineLaw, AffineLawSpec, BLaw};
use kesten_evt::RngStream;

fn main() -> kesten_evt::Result<()> {
    let models = [
        ("two-point 2 / 0.5", AffineLawSpec::l2p()),
        (
            "lognormal",
            AffineLawSpec::scalar(ALaw::ScalarLognormal { mu_log: -0.5, sigma_log: 1.0 }, BLaw::Constant(vec![1.0])),
        ),
        ("pure contraction", AffineLawSpec::deterministic(0.5, 1.0)),
    ];
    let budget = SimBudget { path_length: 2_000, replicas: 20_000, ladder_base: 1 };
    let rng = RngStream::new(1, 0);
    for (name, spec) in models {
        let law = AffineLaw::new(spec)?;
        let ce = model::check_ce(&law, &budget, &rng.fork(name))?;
        let ip = model::check_ip(&law, 200, &rng.fork(name))?;
        println!(
            "{name:18} lyapunov {:.4}  alpha {:?}  no fixed point {}  non-arithmetic {:?}",
            ce.lyapunov, ce.alpha_root, ce.no_fixed_point, ip.nonarith_1d
        );
    }
    Ok(())
}
