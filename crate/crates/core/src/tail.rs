//! Tail index, tail constant, normalizing levels and the limiting tail
//! measure restricted to the complement of the unit ball.

use std::f64::consts::{PI, TAU};
use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::VectorNorm;
use crate::recursion::StationarySample;
use crate::rng::{Generator, RngStream};
use crate::stats::{self, Estimate};

/// Relative spread of c(t) above which the plateau is rejected.
pub const PLATEAU_SPREAD_MAX: f64 = 0.5;
pub const DIRECTION_CELLS: usize = 64;

/// Histogram of exceedance directions on the unit sphere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionalHist {
    pub dim: usize,
    /// Cell representatives (unit vectors); in d = 2 the cell centres of
    /// equal-angle sectors.
    pub cells: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub count: usize,
}

impl DirectionalHist {
    fn empty(dim: usize) -> Self {
        let cells = if dim == 2 {
            (0..DIRECTION_CELLS)
                .map(|i| {
                    let t = -PI + (i as f64 + 0.5) * TAU / DIRECTION_CELLS as f64;
                    vec![t.cos(), t.sin()]
                })
                .collect()
        } else {
            fibonacci_net(dim, DIRECTION_CELLS)
        };
        Self { dim, weights: vec![0.0; cells.len()], cells, count: 0 }
    }

    /// Cell index of a nonzero direction.
    pub fn cell_of(&self, x: &[f64]) -> usize {
        if self.dim == 2 {
            let t = x[1].atan2(x[0]);
            let i = ((t + PI) / TAU * DIRECTION_CELLS as f64).floor() as usize;
            return i.min(DIRECTION_CELLS - 1);
        }
        let mut best = 0;
        let mut best_dot = f64::NEG_INFINITY;
        for (i, c) in self.cells.iter().enumerate() {
            let dot: f64 = c.iter().zip(x).map(|(a, b)| a * b).sum();
            if dot > best_dot {
                best_dot = dot;
                best = i;
            }
        }
        best
    }

    /// Builds the histogram from the directions of points with radius above
    /// `threshold`.
    pub fn from_points(dim: usize, points: &[f64], radii: &[f64], threshold: f64) -> Self {
        let mut h = Self::empty(dim);
        for (p, r) in points.chunks(dim).zip(radii) {
            if *r > threshold {
                let cell = h.cell_of(p);
                h.weights[cell] += 1.0;
                h.count += 1;
            }
        }
        if h.count > 0 {
            let n = h.count as f64;
            h.weights.iter_mut().for_each(|w| *w /= n);
        }
        h
    }

    /// Euclidean unit vector drawn from the histogram: uniform angle within
    /// the sector in d = 2, the cell representative otherwise.
    pub fn sample(&self, g: &mut Generator) -> Vec<f64> {
        let u: f64 = g.random();
        let mut acc = 0.0;
        let mut cell = self.weights.len() - 1;
        for (i, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                cell = i;
                break;
            }
        }
        if self.dim == 2 {
            let width = TAU / DIRECTION_CELLS as f64;
            let t = -PI + (cell as f64 + g.random::<f64>()) * width;
            return vec![t.cos(), t.sin()];
        }
        self.cells[cell].clone()
    }
}

/// Quasi-uniform net of `m` unit vectors in dimension `d >= 3`: a Fibonacci
/// spiral in d = 3, and Fibonacci points lifted by a fixed rotation
/// sequence of the remaining coordinates otherwise.
fn fibonacci_net(d: usize, m: usize) -> Vec<Vec<f64>> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..m)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / m as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            let mut v = vec![0.0; d];
            v[0] = r * phi.cos();
            v[1] = r * phi.sin();
            v[2] = z;
            for (k, vk) in v.iter_mut().enumerate().skip(3) {
                *vk = ((k as f64) * phi).sin() * 0.5;
            }
            let n = crate::linalg::euclid(&v);
            v.iter_mut().for_each(|x| *x /= n);
            v
        })
        .collect()
}

/// Fitted tail of the stationary law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub dim: usize,
    pub alpha: f64,
    pub alpha_stderr: f64,
    pub c: f64,
    pub c_stderr: f64,
    pub threshold_used: f64,
    pub k_frac: f64,
    /// (P{X > 0}, P{X < 0}) among exceedances, d = 1.
    pub sign_weights: Option<(f64, f64)>,
    pub directional_hist: Option<DirectionalHist>,
    #[serde(default)]
    pub norm: VectorNorm,
    /// Relative spread of c(t) over the fitting grid.
    pub plateau_diag: f64,
    pub no_plateau: bool,
}

impl TailFit {
    /// Tail fit with given constants and symmetric sign weights (d = 1).
    pub fn scalar(alpha: f64, c: f64) -> Self {
        Self {
            dim: 1,
            alpha,
            alpha_stderr: 0.0,
            c,
            c_stderr: 0.0,
            threshold_used: 0.0,
            k_frac: 0.0,
            sign_weights: Some((0.5, 0.5)),
            directional_hist: None,
            norm: VectorNorm::Euclidean,
            plateau_diag: 0.0,
            no_plateau: false,
        }
    }

    /// Same fit with the given sign weights (normalized).
    pub fn with_signs(mut self, positive: f64, negative: f64) -> Self {
        let s = positive + negative;
        self.sign_weights = Some((positive / s, negative / s));
        self
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }
}

/// Hill estimate of the tail index with stderr alpha / sqrt(k).
pub fn hill_alpha(samples: &[f64], k_frac: f64) -> Result<Estimate> {
    if samples.len() < 1000 {
        return Err(Error::InvalidInput(format!("Hill needs at least 1000 samples, got {}", samples.len())));
    }
    if !(k_frac > 0.0 && k_frac <= 0.1) {
        return Err(Error::InvalidInput(format!("k_frac = {k_frac} outside (0, 0.1]")));
    }
    let k = (k_frac * samples.len() as f64).ceil();
    match stats::hill(samples, k_frac) {
        Some(a) if a.is_finite() => Ok(Estimate::new(a, a / k.sqrt())),
        _ => Err(Error::DegenerateTail),
    }
}

/// Plateau estimate of the tail constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailConstant {
    pub c: f64,
    pub c_stderr: f64,
    /// (max - min) / median of c(t) over the grid.
    pub plateau_diag: f64,
    pub no_plateau: bool,
    /// (t, c(t)) pairs.
    pub curve: Vec<(f64, f64)>,
}

impl TailConstant {
    /// CSV with columns t, c_of_t.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "c_of_t"])?;
        for (t, c) in &self.curve {
            w.write_record([t.to_string(), c.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Sixteen log-spaced levels between the empirical quantiles at tail
/// probabilities 1e-2 and max(1e-4, 200 / N).
pub fn default_t_grid(samples: &[f64]) -> Vec<f64> {
    let s = stats::sorted(samples);
    let n = s.len() as f64;
    let p_hi = 1e-2;
    let p_lo = (200.0 / n).max(1e-4).min(p_hi / 2.0);
    let lo = stats::quantile_sorted(&s, 1.0 - p_hi);
    let hi = stats::quantile_sorted(&s, 1.0 - p_lo);
    if !(lo > 0.0 && hi > lo) {
        return vec![lo.max(f64::MIN_POSITIVE)];
    }
    let m = 16;
    (0..m).map(|i| lo * (hi / lo).powf(i as f64 / (m - 1) as f64)).collect()
}

/// c = median over the grid of alpha t^alpha P{|X| > t}.
pub fn tail_constant(samples: &[f64], alpha: f64, t_grid: &[f64]) -> Result<TailConstant> {
    if samples.is_empty() || t_grid.is_empty() {
        return Err(Error::InvalidInput("empty sample or grid".into()));
    }
    if !(alpha > 0.0) {
        return Err(Error::InvalidInput(format!("alpha = {alpha} must be positive")));
    }
    let s = stats::sorted(samples);
    let n = s.len() as f64;
    let mut curve = Vec::with_capacity(t_grid.len());
    let mut ses = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let above = s.len() - s.partition_point(|x| *x <= t);
        let p = above as f64 / n;
        let scale = alpha * t.powf(alpha);
        curve.push((t, scale * p));
        ses.push(scale * (p * (1.0 - p) / n).sqrt());
    }
    let values: Vec<f64> = curve.iter().map(|c| c.1).collect();
    let c = stats::median(&values);
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let spread = if c > 0.0 { (hi - lo) / c } else { f64::INFINITY };
    // stderr of the grid point closest to the median value
    let idx = (0..values.len()).min_by(|&i, &j| (values[i] - c).abs().total_cmp(&(values[j] - c).abs())).unwrap();
    Ok(TailConstant { c, c_stderr: ses[idx], plateau_diag: spread, no_plateau: !(spread <= PLATEAU_SPREAD_MAX), curve })
}

/// Options for [`fit_tail`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailOptions {
    pub k_frac: f64,
    /// Use this tail index (e.g. from the moment curve) instead of Hill.
    pub alpha: Option<f64>,
    pub norm: VectorNorm,
}

impl Default for TailOptions {
    fn default() -> Self {
        Self { k_frac: 0.01, alpha: None, norm: VectorNorm::Euclidean }
    }
}

/// Fits alpha, c and the direction law from a stationary sample.
pub fn fit_tail(sample: &StationarySample, opts: &TailOptions) -> Result<TailFit> {
    let radii = sample.radii_with(opts.norm);
    let hill = hill_alpha(&radii, opts.k_frac)?;
    let (alpha, alpha_stderr) = match opts.alpha {
        Some(a) => (a, 0.0),
        None => (hill.value, hill.stderr),
    };
    let tc = tail_constant(&radii, alpha, &default_t_grid(&radii))?;
    let s = stats::sorted(&radii);
    let k = (opts.k_frac * s.len() as f64).ceil() as usize;
    let threshold = s[s.len() - 1 - k];
    let (sign_weights, directional_hist) = if sample.dim == 1 {
        let pos = sample.values.iter().filter(|x| x.abs() > threshold && **x > 0.0).count() as f64;
        let neg = sample.values.iter().filter(|x| x.abs() > threshold && **x < 0.0).count() as f64;
        (Some((pos / (pos + neg), neg / (pos + neg))), None)
    } else {
        (None, Some(DirectionalHist::from_points(sample.dim, &sample.values, &radii, threshold)))
    };
    Ok(TailFit {
        dim: sample.dim,
        alpha,
        alpha_stderr,
        c: tc.c,
        c_stderr: tc.c_stderr,
        threshold_used: threshold,
        k_frac: opts.k_frac,
        sign_weights,
        directional_hist,
        norm: opts.norm,
        plateau_diag: tc.plateau_diag,
        no_plateau: tc.no_plateau,
    })
}

/// Normalizing level u_n = (c n / alpha)^(1/alpha), at which n steps carry
/// one exceedance on average.
pub fn u_n(fit: &TailFit, n: f64) -> f64 {
    (fit.c * n / fit.alpha).powf(1.0 / fit.alpha)
}

/// Draws one point of the tail measure restricted to {|v| > 1}:
/// Pareto(alpha) radius times a direction from the fitted law.
pub fn draw_lambda1(fit: &TailFit, g: &mut Generator, out: &mut [f64]) -> Result<()> {
    let u: f64 = 1.0 - g.random::<f64>();
    let r = u.powf(-1.0 / fit.alpha);
    if fit.dim == 1 {
        let (pos, _) = fit.sign_weights.unwrap_or((0.5, 0.5));
        out[0] = if g.random::<f64>() < pos { r } else { -r };
        return Ok(());
    }
    let hist = fit.directional_hist.as_ref().ok_or(Error::MissingDirections(fit.dim))?;
    let w = hist.sample(g);
    let scale = r / fit.norm.of(&w);
    for (o, x) in out.iter_mut().zip(&w) {
        *o = scale * x;
    }
    Ok(())
}

/// `count` draws from the restricted tail measure, flattened row by row.
pub fn sample_lambda1(fit: &TailFit, count: usize, rng: &RngStream) -> Result<Vec<f64>> {
    if fit.dim > 1 && fit.directional_hist.is_none() {
        return Err(Error::MissingDirections(fit.dim));
    }
    let mut g = rng.generator();
    let mut out = vec![0.0; count * fit.dim];
    for chunk in out.chunks_mut(fit.dim) {
        draw_lambda1(fit, &mut g, chunk)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ALaw, AffineLaw, AffineLawSpec, AngleLaw, BLaw, RadialLaw};
    use crate::recursion;
    use proptest::prelude::{prop_assert, proptest};

    fn pareto(alpha: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut g = RngStream::new(seed, 0).generator();
        (0..n).map(|_| (1.0 - g.random::<f64>()).powf(-1.0 / alpha)).collect()
    }

    #[test]
    fn hill_on_exact_pareto() {
        let a = hill_alpha(&pareto(2.0, 100_000, 1), 0.01).unwrap();
        assert!((a.value - 2.0).abs() <= 0.15);
        let a = hill_alpha(&pareto(1.0, 100_000, 2), 0.01).unwrap();
        assert!((a.value - 1.0).abs() <= 0.08);
    }

    #[test]
    fn hill_degenerate_and_guards() {
        assert!(matches!(hill_alpha(&vec![3.0; 5000], 0.01), Err(Error::DegenerateTail)));
        assert!(hill_alpha(&[1.0; 10], 0.01).is_err());
        assert!(hill_alpha(&pareto(1.0, 5000, 1), 0.2).is_err());
    }

    #[test]
    fn pareto_constant_is_alpha() {
        for alpha in [1.0, 2.0] {
            let x = pareto(alpha, 1_000_000, 3);
            let tc = tail_constant(&x, alpha, &default_t_grid(&x)).unwrap();
            assert!((tc.c - alpha).abs() < 0.05 * alpha, "{tc:?}");
            assert!(!tc.no_plateau);
        }
    }

    #[test]
    fn bounded_samples_have_no_plateau() {
        let mut g = RngStream::new(4, 0).generator();
        let x: Vec<f64> = (0..100_000).map(|_| g.random::<f64>()).collect();
        let tc = tail_constant(&x, 1.0, &default_t_grid(&x)).unwrap();
        assert!(tc.no_plateau, "{tc:?}");
    }

    #[test]
    fn normalizing_levels() {
        assert!((u_n(&TailFit::scalar(1.0, 1.0), 100.0) - 100.0).abs() < 1e-12);
        assert!((u_n(&TailFit::scalar(2.0, 2.0), 100.0) - 10.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn u_n_increases(alpha in 0.2f64..4.0, c in 0.01f64..10.0, n in 1.0f64..1e9) {
            let f = TailFit::scalar(alpha, c);
            prop_assert!(u_n(&f, 2.0 * n) > u_n(&f, n));
        }
    }

    #[test]
    fn lambda1_radial_law() {
        let f = TailFit::scalar(1.0, 1.0);
        let v = sample_lambda1(&f, 100_000, &RngStream::new(5, 0)).unwrap();
        let r: Vec<f64> = v.iter().map(|x| x.abs()).collect();
        for t in [2.0, 4.0, 8.0] {
            let p = r.iter().filter(|&&x| x > t).count() as f64 / r.len() as f64;
            assert!((p - 1.0 / t).abs() <= 0.01);
        }
        assert!((stats::median(&r) / 2.0 - 1.0).abs() <= 0.02);
        let sign = v.iter().map(|x| x.signum()).sum::<f64>() / v.len() as f64;
        assert!(sign.abs() <= 3.0 / (v.len() as f64).sqrt());
    }

    #[test]
    fn lambda1_is_self_similar() {
        let f = TailFit::scalar(1.5, 1.0);
        let v = sample_lambda1(&f, 100_000, &RngStream::new(6, 0)).unwrap();
        let w = sample_lambda1(&f, 100_000, &RngStream::new(7, 0)).unwrap();
        let t = 3.0;
        let cond: Vec<f64> = v.iter().map(|x| x.abs()).filter(|r| *r > t).map(|r| r / t).collect();
        let base: Vec<f64> = w.iter().map(|x| x.abs()).collect();
        assert!(stats::ks_two_sample(&cond, &base) <= 0.02);
    }

    #[test]
    fn missing_directions() {
        let mut f = TailFit::scalar(1.0, 1.0);
        f.dim = 2;
        f.sign_weights = None;
        assert!(matches!(sample_lambda1(&f, 1, &RngStream::new(1, 0)), Err(Error::MissingDirections(2))));
    }

    #[test]
    fn scaling_b_scales_c_by_two_to_alpha() {
        let base = AffineLaw::new(AffineLawSpec::l2p()).unwrap();
        let doubled = AffineLaw::new(AffineLawSpec::l2p().with_b_scaled(2.0)).unwrap();
        let opts = TailOptions { alpha: Some(1.0), ..TailOptions::default() };
        let s1 = recursion::sample_stationary(&base, 200_000, 1e-10, &RngStream::new(8, 0)).unwrap();
        let s2 = recursion::sample_stationary(&doubled, 200_000, 1e-10, &RngStream::new(9, 0)).unwrap();
        let ratio = fit_tail(&s2, &opts).unwrap().c / fit_tail(&s1, &opts).unwrap().c;
        assert!((ratio - 2.0).abs() <= 0.4, "{ratio}");
    }

    #[test]
    fn directions_stable_under_rethresholding() {
        let spec = AffineLawSpec {
            dimension: 2,
            a_law: ALaw::RotationScale {
                angle_law: AngleLaw::Uniform,
                radial_law: RadialLaw::Lognormal { mu_log: -0.5, sigma_log: 1.0 },
            },
            b_law: BLaw::Constant(vec![1.0, 0.0]),
            seed_domain: 0,
        };
        let law = AffineLaw::new(spec).unwrap();
        let s = recursion::sample_stationary(&law, 200_000, 1e-10, &RngStream::new(10, 0)).unwrap();
        let fit = fit_tail(&s, &TailOptions::default()).unwrap();
        let h1 = fit.directional_hist.clone().unwrap();
        assert!((h1.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let r = s.radii();
        let h2 = DirectionalHist::from_points(2, &s.values, &r, 2.0 * fit.threshold_used);
        for (a, b) in h1.weights.iter().zip(&h2.weights) {
            assert!((a - b).abs() <= 0.05);
        }
        // a rotation-invariant law has a flat direction law
        assert!(h1.weights.iter().all(|w| (w - 1.0 / 64.0).abs() < 0.02));
    }

    #[test]
    fn direction_cells_roundtrip_in_three_dimensions() {
        let h = DirectionalHist::empty(3);
        for (i, c) in h.cells.iter().enumerate() {
            assert_eq!(h.cell_of(c), i);
            assert!((crate::linalg::euclid(c) - 1.0).abs() < 1e-12);
        }
    }
}
