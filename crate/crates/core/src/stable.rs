//! Centered and normalized partial sums of the stationary chain, and
//! self-similarity checks of their limit.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::AffineLaw;
use crate::recursion;
use crate::rng::{self, RngStream};
use crate::stats;
use crate::tail::TailFit;

/// Half-width of the band around alpha = 1 routed to the logarithmic regime.
pub const ALPHA_ONE_BAND: f64 = 0.05;
pub const CENTERING_BATCH: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// d_n = 0.
    AlphaBelow1,
    /// d_n = n E[X phi_1(X)] with the tent cutoff phi_1.
    AlphaEq1,
    /// d_n = n E X.
    AlphaIn12,
}

impl Regime {
    pub fn for_alpha(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(Error::AlphaOutOfRange(alpha));
        }
        Ok(if (alpha - 1.0).abs() <= ALPHA_ONE_BAND {
            Regime::AlphaEq1
        } else if alpha < 1.0 {
            Regime::AlphaBelow1
        } else {
            Regime::AlphaIn12
        })
    }
}

/// Tent cutoff: 1 on |v| <= 1, 2 - |v| on 1 < |v| <= 2, 0 beyond.
pub fn tent(r: f64) -> f64 {
    (2.0 - r).clamp(0.0, 1.0)
}

/// n^{-1/alpha} (T_n - d_n) over replicas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialSumSample {
    pub n: usize,
    pub dim: usize,
    /// Flattened row by row.
    pub values: Vec<f64>,
    pub regime: Regime,
    /// Normalizing exponent used (1 in the logarithmic regime).
    pub alpha: f64,
    pub d_n_used: Vec<f64>,
    /// (c / alpha)^{1/alpha}: ratio between u_n and n^{1/alpha}.
    pub scale_constant: f64,
}

impl PartialSumSample {
    pub fn coordinate(&self, k: usize) -> Vec<f64> {
        self.values.chunks(self.dim).map(|v| v[k]).collect()
    }

    pub fn norms(&self) -> Vec<f64> {
        self.values.chunks(self.dim).map(linalg::euclid).collect()
    }

    /// CSV with columns x0, x1, ...
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record((0..self.dim).map(|i| format!("x{i}")))?;
        for row in self.values.chunks(self.dim) {
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Per-step centering E X (or E[X phi_1(X)]) from a stationary batch.
pub fn centering(law: &AffineLaw, regime: Regime, batch: usize, eps_trunc: f64, rng: &RngStream) -> Result<Vec<f64>> {
    let d = law.dim();
    if regime == Regime::AlphaBelow1 {
        return Ok(vec![0.0; d]);
    }
    let s = recursion::sample_stationary(law, batch, eps_trunc, rng)?;
    let mut acc = vec![0.0; d];
    for x in s.values.chunks(d) {
        let w = match regime {
            Regime::AlphaEq1 => tent(linalg::euclid(x)),
            _ => 1.0,
        };
        for (a, v) in acc.iter_mut().zip(x) {
            *a += w * v;
        }
    }
    Ok(acc.into_iter().map(|a| a / batch as f64).collect())
}

/// Options for [`partial_sums`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SumOptions {
    pub replicas: usize,
    pub centering_batch: usize,
    pub eps_trunc: f64,
}

impl Default for SumOptions {
    fn default() -> Self {
        Self { replicas: 1000, centering_batch: CENTERING_BATCH, eps_trunc: 1e-10 }
    }
}

/// Normalized sums at each n in `ns`, sharing one centering estimate.
pub fn partial_sums(
    law: &AffineLaw,
    fit: &TailFit,
    ns: &[usize],
    opts: &SumOptions,
    rng: &RngStream,
) -> Result<Vec<PartialSumSample>> {
    let regime = Regime::for_alpha(fit.alpha)?;
    let alpha = if regime == Regime::AlphaEq1 { 1.0 } else { fit.alpha };
    let per_step = centering(law, regime, opts.centering_batch, opts.eps_trunc, &rng.fork("centering"))?;
    let d = law.dim();
    ns.iter()
        .enumerate()
        .map(|(k, &n)| {
            let stream = rng.fork("sums").substream(k as u64);
            let sums = rng::replicate(&stream, opts.replicas, |i, _| {
                let t = recursion::stationary_path(law, n, opts.eps_trunc, &stream.substream(i as u64))?;
                let mut s = vec![0.0; d];
                for p in t.points.chunks(d) {
                    s.iter_mut().zip(p).for_each(|(a, v)| *a += v);
                }
                Ok(s)
            })
            .into_iter()
            .collect::<Result<Vec<Vec<f64>>>>()?;
            let d_n: Vec<f64> = per_step.iter().map(|m| m * n as f64).collect();
            let scale = (n as f64).powf(-1.0 / alpha);
            let values = sums
                .iter()
                .flat_map(|s| s.iter().zip(&d_n).map(|(t, c)| scale * (t - c)).collect::<Vec<_>>())
                .collect();
            Ok(PartialSumSample {
                n,
                dim: d,
                values,
                regime,
                alpha,
                d_n_used: d_n,
                scale_constant: (fit.c / fit.alpha).powf(1.0 / fit.alpha),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityCheck {
    /// Max over coordinates of the two-sample KS distance; after matching
    /// medians in the logarithmic regime.
    pub ks_distance: f64,
    /// Max over a frequency grid of |phi_n(w)^4 - phi_4n(4^{1/alpha} w)|;
    /// moduli only in the logarithmic regime, where the centering drifts.
    pub ecf_defect: f64,
    pub median_matched: bool,
}

fn ecf(x: &[f64], w: f64) -> (f64, f64) {
    let (c, s) = x.iter().fold((0.0, 0.0), |(c, s), v| {
        let (sn, cs) = (w * v).sin_cos();
        (c + cs, s + sn)
    });
    (c / x.len() as f64, s / x.len() as f64)
}

fn cpow4((re, im): (f64, f64)) -> (f64, f64) {
    let (r2, i2) = (re * re - im * im, 2.0 * re * im);
    (r2 * r2 - i2 * i2, 2.0 * r2 * i2)
}

/// Compares normalized sums at n and 4n.
pub fn stability_check(sample_n: &PartialSumSample, sample_4n: &PartialSumSample) -> Result<StabilityCheck> {
    if sample_n.regime != sample_4n.regime || sample_n.dim != sample_4n.dim || sample_n.alpha != sample_4n.alpha {
        return Err(Error::RegimeMismatch(format!("{:?} vs {:?}", sample_n.regime, sample_4n.regime)));
    }
    if sample_4n.n != 4 * sample_n.n {
        return Err(Error::RegimeMismatch(format!("sizes {} and {} are not n and 4n", sample_n.n, sample_4n.n)));
    }
    let log_regime = sample_n.regime == Regime::AlphaEq1;
    let scale_up = 4f64.powf(1.0 / sample_n.alpha);
    let mut ks: f64 = 0.0;
    let mut defect: f64 = 0.0;
    for k in 0..sample_n.dim {
        let mut a = sample_n.coordinate(k);
        let mut b = sample_4n.coordinate(k);
        if log_regime {
            let (ma, mb) = (stats::median(&a), stats::median(&b));
            a.iter_mut().for_each(|v| *v -= ma);
            b.iter_mut().for_each(|v| *v -= mb);
        }
        ks = ks.max(stats::ks_two_sample(&a, &b));
        let med = stats::median(&a);
        let mad = stats::median(&a.iter().map(|v| (v - med).abs()).collect::<Vec<_>>());
        if !(mad > 0.0) {
            continue;
        }
        // Low frequencies only: beyond ~1/MAD both sides of phi^4 are near zero.
        for j in 1..=10 {
            let w = 0.05 * j as f64 / mad;
            let p4 = cpow4(ecf(&a, w));
            let q = ecf(&b, scale_up * w);
            let dist =
                if log_regime { (p4.0.hypot(p4.1) - q.0.hypot(q.1)).abs() } else { (p4.0 - q.0).hypot(p4.1 - q.1) };
            defect = defect.max(dist);
        }
    }
    Ok(StabilityCheck { ks_distance: ks, ecf_defect: defect, median_matched: log_regime })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ALaw, AffineLawSpec, BLaw};
    use crate::tail;
    use rand::Rng;

    /// Symmetric alpha-stable draws (Chambers-Mallows-Stuck, beta = 0).
    fn sym_stable(alpha: f64, count: usize, seed: u64) -> Vec<f64> {
        let mut g = RngStream::new(seed, 0).generator();
        (0..count)
            .map(|_| {
                let v = std::f64::consts::PI * (g.random::<f64>() - 0.5);
                let w = -(1.0 - g.random::<f64>()).ln();
                (alpha * v).sin() / v.cos().powf(1.0 / alpha)
                    * ((v * (1.0 - alpha)).cos() / w).powf((1.0 - alpha) / alpha)
            })
            .collect()
    }

    fn synthetic(alpha: f64, n: usize, values: Vec<f64>) -> PartialSumSample {
        PartialSumSample {
            n,
            dim: 1,
            values,
            regime: Regime::for_alpha(alpha).unwrap(),
            alpha,
            d_n_used: vec![0.0],
            scale_constant: 1.0,
        }
    }

    pub(crate) fn tuned_two_point(alpha: f64) -> AffineLawSpec {
        let p = (1.0 - 2f64.powf(-alpha)) / (2f64.powf(alpha) - 2f64.powf(-alpha));
        AffineLawSpec::two_point(2.0, 0.5, p)
    }

    #[test]
    fn regimes() {
        assert_eq!(Regime::for_alpha(0.7).unwrap(), Regime::AlphaBelow1);
        assert_eq!(Regime::for_alpha(1.04).unwrap(), Regime::AlphaEq1);
        assert_eq!(Regime::for_alpha(1.5).unwrap(), Regime::AlphaIn12);
        assert!(matches!(Regime::for_alpha(2.0), Err(Error::AlphaOutOfRange(_))));
    }

    #[test]
    fn tent_cutoff() {
        assert_eq!(tent(0.5), 1.0);
        assert_eq!(tent(1.5), 0.5);
        assert_eq!(tent(3.0), 0.0);
    }

    #[test]
    fn exact_stable_draws_are_self_similar() {
        let a = synthetic(1.5, 100, sym_stable(1.5, 1000, 1));
        let b = synthetic(1.5, 400, sym_stable(1.5, 1000, 2));
        let c = stability_check(&a, &b).unwrap();
        assert!(c.ks_distance <= 0.04 && c.ecf_defect <= 0.05, "{c:?}");
        let gauss = synthetic(1.5, 100, vec![0.0; 10]);
        let mut wrong = gauss.clone();
        wrong.n = 300;
        assert!(matches!(stability_check(&gauss, &wrong), Err(Error::RegimeMismatch(_))));
    }

    #[test]
    fn gaussian_index_is_rejected() {
        let law = AffineLaw::new(AffineLawSpec::l2p()).unwrap();
        let fit = TailFit::scalar(2.0, 1.0);
        let r = partial_sums(&law, &fit, &[10], &SumOptions::default(), &RngStream::new(1, 0));
        assert!(matches!(r, Err(Error::AlphaOutOfRange(_))));
    }

    #[test]
    fn two_point_uses_tent_centering() {
        let law = AffineLaw::new(AffineLawSpec::l2p()).unwrap();
        let fit = TailFit::scalar(1.0, 4.5);
        let opts = SumOptions { replicas: 50, centering_batch: 100_000, eps_trunc: 1e-10 };
        let s = partial_sums(&law, &fit, &[1000], &opts, &RngStream::new(2, 0)).unwrap();
        assert_eq!(s[0].regime, Regime::AlphaEq1);
        // X = 1 + A X' >= 2 almost surely, where the tent vanishes; the
        // backward draw is truncated just below its infimum.
        assert!(s[0].d_n_used[0].abs() < 1e-6);
    }

    #[test]
    fn tuned_model_has_no_centering() {
        let law = AffineLaw::new(tuned_two_point(0.7)).unwrap();
        let alpha =
            crate::linrw::solve_alpha(&law, &crate::SimBudget::default(), &RngStream::new(1, 0), (0.1, 3.0), 1e-9)
                .unwrap()
                .alpha;
        assert!((alpha - 0.7).abs() < 1e-9);
        let fit = TailFit::scalar(alpha, 1.0);
        let s = partial_sums(
            &law,
            &fit,
            &[100],
            &SumOptions { replicas: 20, ..SumOptions::default() },
            &RngStream::new(3, 0),
        )
        .unwrap();
        assert_eq!(s[0].regime, Regime::AlphaBelow1);
        assert_eq!(s[0].d_n_used, vec![0.0]);
    }

    #[test]
    fn symmetric_model_sums_are_centred_and_keep_the_index() {
        let p = (1.0 - 2f64.powf(-0.7)) / (2f64.powf(0.7) - 2f64.powf(-0.7));
        let spec = AffineLawSpec::scalar(
            ALaw::FiniteSupport(vec![
                (vec![vec![2.0]], p / 2.0),
                (vec![vec![-2.0]], p / 2.0),
                (vec![vec![0.5]], (1.0 - p) / 2.0),
                (vec![vec![-0.5]], (1.0 - p) / 2.0),
            ]),
            BLaw::FiniteSupport(vec![(vec![1.0], 0.5), (vec![-1.0], 0.5)]),
        );
        let law = AffineLaw::new(spec).unwrap();
        let fit = TailFit::scalar(0.7, 1.0);
        let opts = SumOptions { replicas: 5000, ..SumOptions::default() };
        let s = partial_sums(&law, &fit, &[200], &opts, &RngStream::new(4, 0)).unwrap();
        let m = stats::mean_se(&s[0].values);
        assert!(m.value.abs() <= 3.0 * m.stderr, "{m:?}");
        let h = tail::hill_alpha(&s[0].norms(), 0.1).unwrap();
        assert!((h.value - 0.7).abs() <= 0.3, "{h:?}");
    }
}
