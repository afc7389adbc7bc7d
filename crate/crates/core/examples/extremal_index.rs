//! Extremal index from one stationary path (blocks, runs) and from the
//! tail-process walk, which for the two-point model is about 0.168.

use kesten_evt::extremal::{self, BlockScheme, WalkOptions};
use kesten_evt::model::{AffineLaw, AffineLawSpec};
use kesten_evt::recursion;
use kesten_evt::tail::{self, TailOptions};
use kesten_evt::RngStream;

fn main() -> kesten_evt::Result<()> {
    let law = AffineLaw::new(AffineLawSpec::l2p())?;
    let rng = RngStream::new(4, 0);
    let sample = recursion::sample_stationary(&law, 1_000_000, 1e-10, &rng.fork("stationary"))?;
    let fit = tail::fit_tail(&sample, &TailOptions { alpha: Some(1.0), ..TailOptions::default() })?;

    let radii = recursion::stationary_path(&law, 1_000_000, 1e-10, &rng.fork("path"))?.radii();
    let n = radii.len();
    let expected = 1_000.0;
    let level = extremal::level_for(&fit, n, expected);
    let scheme = BlockScheme::sparse(n, expected)?;
    let blocks = extremal::theta_blocks(&radii, level, &scheme, &rng.fork("bootstrap"))?;
    let runs = extremal::theta_runs(&radii, level, extremal::DEFAULT_RUN_LENGTH)?;
    let walk = extremal::theta_theory(&law, &fit, &WalkOptions::default(), &rng.fork("walk"))?;

    println!("level {level:.1}, {} blocks of length {}", scheme.k_n, scheme.r_n);
    println!("blocks  {blocks:.4}");
    println!("runs    {runs:.4}");
    println!("walk    {:.4}", walk.theta);
    Ok(())
}
