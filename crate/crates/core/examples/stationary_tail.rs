//! Stationary sampling, Hill and tail-constant fits, and the tail process radius.

use kesten_evt::model::{AffineLaw, AffineLawSpec};
use kesten_evt::recursion;
use kesten_evt::stats;
use kesten_evt::tail::{self, TailOptions};
use kesten_evt::RngStream;

fn main() -> kesten_evt::Result<()> {
    let law = AffineLaw::new(AffineLawSpec::l2p())?;
    let rng = RngStream::new(3, 0);
    let sample = recursion::sample_stationary(&law, 1_000_000, 1e-10, &rng.fork("stationary"))?;
    let radii = sample.radii();

    let hill = tail::hill_alpha(&radii, 0.01)?;
    println!("Hill alpha: {hill:.3}");

    let fit = tail::fit_tail(&sample, &TailOptions { alpha: Some(1.0), ..TailOptions::default() })?;
    println!("tail constant c = {:.3} +- {:.3} (plateau ok: {})", fit.c, fit.c_stderr, !fit.no_plateau);
    for n in [1e3, 1e6, 1e9] {
        println!("u_n at n = {n:e}: {:.4e}", tail::u_n(&fit, n));
    }

    let lambda = tail::sample_lambda1(&fit, 100_000, &rng.fork("lambda"))?;
    let r: Vec<f64> = lambda.iter().map(|v| v.abs()).collect();
    println!("median |Lambda_1| = {:.3} (Pareto(1) median is 2)", stats::median(&r));
    Ok(())
}
