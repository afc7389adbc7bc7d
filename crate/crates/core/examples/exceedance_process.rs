//! Exceedance point process, the logarithm law of running maxima and the
//! decay of the mixing gap.

use kesten_evt::extremal;
use kesten_evt::model::{AffineLaw, AffineLawSpec};
use kesten_evt::pointproc::{self, TestFunction};
use kesten_evt::recursion;
use kesten_evt::tail::{self, TailOptions};
use kesten_evt::RngStream;

fn main() -> kesten_evt::Result<()> {
    let law = AffineLaw::new(AffineLawSpec::l2p())?;
    let rng = RngStream::new(7, 0);
    let sample = recursion::sample_stationary(&law, 1_000_000, 1e-10, &rng.fork("stationary"))?;
    let fit = tail::fit_tail(&sample, &TailOptions { alpha: Some(1.0), ..TailOptions::default() })?;

    let path = recursion::stationary_path(&law, 100_000, 1e-10, &rng.fork("path"))?;
    let level = extremal::level_for(&fit, path.len(), 100.0);
    let proc = pointproc::exceedances(&path, level, 1.0)?;
    let clusters =
        pointproc::decluster(&proc.events.iter().map(|e| e.i).collect::<Vec<_>>(), extremal::DEFAULT_RUN_LENGTH);
    println!("{} exceedances of {level:.1} in {} clusters", proc.events.len(), clusters.len());

    let maxima: Vec<Vec<f64>> = (0..20)
        .map(|i| {
            let p = recursion::simulate_path(&law, &[0.0], 100_000, &rng.fork("loglaw").substream(i))?;
            Ok(pointproc::running_maxima(&p.radii()))
        })
        .collect::<kesten_evt::Result<_>>()?;
    let loglaw = pointproc::loglaw_from_maxima(&maxima)?;
    println!("log M_n / log n: median ratio {:.3}", loglaw.median_ratio);

    let grid: Vec<usize> = (8..=12).map(|k| 1 << k).collect();
    let curve =
        pointproc::mixing_gap_coupled(&law, &fit, &TestFunction::default(), &grid, 1_000, 1e-10, &rng.fork("mixing"))?;
    println!("mixing gap log-log slope {:.3} +- {:.3}", curve.slope, curve.slope_stderr);
    Ok(())
}
