//! Hitting times of t A for large t: exponential after scaling by t^-alpha,
//! with rate c theta_A / alpha.

use kesten_evt::extremal::{self, WalkOptions};
use kesten_evt::linalg::VectorNorm;
use kesten_evt::model::{AffineLaw, AffineLawSpec};
use kesten_evt::recursion;
use kesten_evt::ruin::{self, TargetSet};
use kesten_evt::stats;
use kesten_evt::tail::{self, TailOptions};
use kesten_evt::RngStream;

fn main() -> kesten_evt::Result<()> {
    let law = AffineLaw::new(AffineLawSpec::l2p())?;
    let rng = RngStream::new(8, 0);
    let sample = recursion::sample_stationary(&law, 1_000_000, 1e-10, &rng.fork("stationary"))?;
    let fit = tail::fit_tail(&sample, &TailOptions { alpha: Some(1.0), ..TailOptions::default() })?;
    let theory = extremal::theta_theory(&law, &fit, &WalkOptions::default(), &rng.fork("walk"))?;

    let t = stats::quantile_sorted(&stats::sorted(&sample.radii()), 0.999);
    let target = TargetSet::exterior();
    let horizon = ruin::default_horizon(&fit, theory.theta.value, t);
    let hits = ruin::hitting_times(&law, &[0.0], &target, t, 1_000, horizon, VectorNorm::Euclidean, &rng.fork("hits"))?;
    let ef = ruin::exp_fit(&hits, fit.alpha)?;
    let set = ruin::theta_of_set(
        &law,
        &fit,
        &target,
        100_000,
        extremal::DEFAULT_HORIZON_CAP,
        extremal::DEFAULT_EPS_STOP,
        &rng.fork("set"),
    )?;

    println!("t = {t:.1}, horizon {horizon}, censored {}", hits.censored);
    println!("fitted rate {:.4}, KS {:.4}", ef.rate, ef.ks_distance);
    println!("predicted rate c theta_A / alpha = {:.4}", fit.c * set.gamma_a.value / fit.alpha);
    Ok(())
}
