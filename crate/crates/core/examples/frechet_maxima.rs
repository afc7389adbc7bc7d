//! Normalized block maxima against the Frechet law exp(-theta x^-alpha).

use kesten_evt::model::{AffineLaw, AffineLawSpec};
use kesten_evt::pointproc;
use kesten_evt::recursion;
use kesten_evt::tail::{self, TailOptions};
use kesten_evt::RngStream;

fn main() -> kesten_evt::Result<()> {
    let law = AffineLaw::new(AffineLawSpec::l2p())?;
    let rng = RngStream::new(6, 0);
    let sample = recursion::sample_stationary(&law, 1_000_000, 1e-10, &rng.fork("stationary"))?;
    let fit = tail::fit_tail(&sample, &TailOptions { alpha: Some(1.0), ..TailOptions::default() })?;

    let n = 10_000;
    let maxima = pointproc::block_maxima(&law, n, 2_000, 1e-10, &rng.fork("maxima"))?;
    let ff = pointproc::frechet_fit(&maxima, &fit)?;
    println!("n = {n}, u_n = {:.1}", tail::u_n(&fit, n as f64));
    println!("theta from maxima {:.4}, KS {:.4}", ff.theta, ff.ks_distance);
    Ok(())
}
