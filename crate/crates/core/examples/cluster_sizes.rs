//! Cluster-size law from the tail-process walk, checked against declustered
//! exceedances of a long path.

use kesten_evt::extremal::{self, WalkOptions};
use kesten_evt::model::{AffineLaw, AffineLawSpec};
use kesten_evt::pointproc;
use kesten_evt::recursion;
use kesten_evt::tail::{self, TailOptions};
use kesten_evt::RngStream;

fn main() -> kesten_evt::Result<()> {
    let law = AffineLaw::new(AffineLawSpec::l2p())?;
    let rng = RngStream::new(5, 0);
    let sample = recursion::sample_stationary(&law, 1_000_000, 1e-10, &rng.fork("stationary"))?;
    let fit = tail::fit_tail(&sample, &TailOptions { alpha: Some(1.0), ..TailOptions::default() })?;

    let clusters = extremal::cluster_sizes(&law, &fit, &WalkOptions::default(), None, &rng.fork("clusters"))?;
    println!("theta {:.4}, mean cluster size {:.3}", clusters.theta(), clusters.mean_size());
    for (j, p) in clusters.nu.iter().enumerate().take(6) {
        println!("  P(size = {}) = {p:.4}", j + 1);
    }

    let path = recursion::stationary_path(&law, 1_000_000, 1e-10, &rng.fork("path"))?;
    let level = extremal::level_for(&fit, path.len(), 10_000.0);
    let proc = pointproc::exceedances(&path, level, 1.0)?;
    let test = pointproc::interexceedance_test(&proc, &clusters.nu, extremal::DEFAULT_RUN_LENGTH)?;
    println!(
        "{} exceedances in {} clusters; size TV {:.4}, cluster-count KS {:.4}",
        proc.events.len(),
        test.clusters,
        test.size_dist_tv,
        test.cluster_count_poisson_ks
    );
    Ok(())
}
