//! Grid discretization of the transfer operator of x -> x/2 + B with B
//! uniform on {0, 1/2}: uniform stationary law and second eigenvalue 1/2.
//! Also the drift envelope for a heavy-tailed model.

use kesten_evt::model::{ALaw, AffineLaw, AffineLawSpec, BLaw};
use kesten_evt::spectral;
use kesten_evt::RngStream;

fn main() -> kesten_evt::Result<()> {
    let pair = AffineLawSpec::scalar(
        ALaw::FiniteSupport(vec![(vec![vec![0.5]], 1.0)]),
        BLaw::FiniteSupport(vec![(vec![0.0], 0.5), (vec![0.5], 0.5)]),
    );
    let op = spectral::build_grid_operator(&AffineLaw::new(pair)?, 2048, (0.0, 1.0))?;
    let eig = spectral::second_eigenvalue(&op, 1_000)?;
    let mu = op.stationary_vector(10_000);
    println!(
        "lambda_2 = {:.4} (residual {:.1e}), uniformity defect {:.1e}",
        eig.lambda2,
        eig.residual,
        op.uniformity_defect(&mu)
    );

    let l2p = AffineLaw::new(AffineLawSpec::l2p())?;
    let drift =
        spectral::verify_drift(&l2p, 1.0, 0.5, 20, &spectral::default_drift_grid(), 1_000, &RngStream::new(10, 0))?;
    println!(
        "drift: beta {:.3} +- {:.3}, b {:.3} +- {:.3}",
        drift.beta_hat, drift.beta_stderr, drift.b_hat, drift.b_stderr
    );
    Ok(())
}
