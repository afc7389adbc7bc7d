//! Solves k(alpha) = 1 exactly for a finite law and by Monte Carlo otherwise.

use kesten_evt::linrw::{self, SimBudget};
use kesten_evt::model::{ALaw, AffineLaw, AffineLawSpec, BLaw};
use kesten_evt::RngStream;

fn main() -> kesten_evt::Result<()> {
    let rng = RngStream::new(2, 0);
    let budget = SimBudget { path_length: 1_000, replicas: 50_000, ladder_base: 1 };

    let l2p = AffineLaw::new(AffineLawSpec::l2p())?;
    let s = linrw::solve_alpha(&l2p, &budget, &rng, (0.1, 3.0), 1e-12)?;
    println!("two-point: alpha = {:.12} (exact curve: {})", s.alpha, s.exact);

    for (name, a_law, truth) in [
        ("lognormal", ALaw::ScalarLognormal { mu_log: -0.5, sigma_log: 1.0 }, 1.0),
        ("garch a=1", ALaw::GarchSquared { a: 1.0 }, 1.0),
        ("garch a=0.5", ALaw::GarchSquared { a: 0.5 }, 2.0),
    ] {
        let law = AffineLaw::new(AffineLawSpec::scalar(a_law, BLaw::Constant(vec![1.0])))?;
        match linrw::solve_alpha(&law, &budget, &rng.fork(name), (0.1, 3.0), 0.05) {
            Ok(s) => println!("{name}: alpha = {:.4} +- {:.4} (true {truth})", s.alpha, s.alpha_stderr),
            Err(e) => println!("{name}: {e}"),
        }
    }

    let curve = linrw::moment_curve(&l2p, &[0.5, 1.0, 1.5, 2.0], &budget, &rng)?;
    for (s, k) in curve.s_grid.iter().zip(&curve.log_k) {
        println!("log k({s}) = {k:+.6}");
    }
    Ok(())
}
