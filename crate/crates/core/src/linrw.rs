//! The linear random walk S_n = A_n ... A_1: product norms, the Lyapunov
//! exponent, the moment-growth curve log k(s) and its unit root alpha.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, MatrixNorm};
use crate::model::AffineLaw;
use crate::rng::{self, Generator, RngStream};
use crate::stats::{self, Estimate};

const RENORM_HI: f64 = 5.363_123_171_977_039e154; // 2^512
const RENORM_LO: f64 = 1.0 / RENORM_HI;

/// Path length / replica budget shared by the Monte Carlo estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimBudget {
    pub path_length: usize,
    pub replicas: usize,
    /// Base n0 of the moment ladder {n0, 2 n0, 4 n0}.
    #[serde(default = "default_ladder_base")]
    pub ladder_base: usize,
}

fn default_ladder_base() -> usize {
    1
}

impl Default for SimBudget {
    fn default() -> Self {
        Self { path_length: 10_000, replicas: 10_000, ladder_base: 1 }
    }
}

/// State needed to restart a product path exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductCheckpoint {
    pub step: usize,
    pub log_scale: f64,
    /// Running product divided by exp(log_scale), row-major.
    pub matrix: Vec<f64>,
    pub word_pos: u128,
}

/// log|S_1|, ..., log|S_n| with optional checkpoints.
#[derive(Debug, Clone)]
pub struct ProductPath {
    pub log_norms: Vec<f64>,
    pub checkpoints: Vec<ProductCheckpoint>,
}

struct ProductWalk<'a> {
    law: &'a AffineLaw,
    d: usize,
    m: Vec<f64>,
    log_scale: f64,
    step: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    tmp: Vec<f64>,
    norm: MatrixNorm,
}

impl<'a> ProductWalk<'a> {
    fn new(law: &'a AffineLaw, norm: MatrixNorm) -> Self {
        let d = law.dim();
        Self {
            law,
            d,
            m: linalg::identity(d),
            log_scale: 0.0,
            step: 0,
            a: vec![0.0; d * d],
            b: vec![0.0; d],
            tmp: vec![0.0; d * d],
            norm,
        }
    }

    fn from_checkpoint(law: &'a AffineLaw, cp: &ProductCheckpoint, norm: MatrixNorm) -> Self {
        let mut w = Self::new(law, norm);
        w.m.copy_from_slice(&cp.matrix);
        w.log_scale = cp.log_scale;
        w.step = cp.step;
        w
    }

    /// Advances one step and returns log|S_step|.
    fn advance(&mut self, g: &mut Generator) -> Result<f64> {
        self.law.draw_into(g, &mut self.a, &mut self.b);
        self.step += 1;
        let det = linalg::det(&self.a, self.d);
        if !(det.abs() > 1e-300) || !det.is_finite() {
            return Err(Error::SingularProduct { step: self.step });
        }
        linalg::mat_mul(&self.a, &self.m, &mut self.tmp, self.d);
        std::mem::swap(&mut self.m, &mut self.tmp);
        let nu = linalg::matrix_norm(&self.m, self.d, self.norm);
        if !(RENORM_LO..=RENORM_HI).contains(&nu) {
            for x in self.m.iter_mut() {
                *x /= nu;
            }
            self.log_scale += nu.ln();
            return Ok(self.log_scale);
        }
        Ok(self.log_scale + nu.ln())
    }

    fn checkpoint(&self, g: &Generator) -> ProductCheckpoint {
        ProductCheckpoint {
            step: self.step,
            log_scale: self.log_scale,
            matrix: self.m.clone(),
            word_pos: g.get_word_pos(),
        }
    }
}

/// Simulates |S_1|, ..., |S_n| in log scale with periodic renormalization.
pub fn simulate_products(law: &AffineLaw, n: usize, rng: &RngStream) -> Result<ProductPath> {
    simulate_products_with(law, n, rng, None, MatrixNorm::Operator)
}

/// As [`simulate_products`], recording a checkpoint every `checkpoint_every`
/// steps (and always at the end).
pub fn simulate_products_with(
    law: &AffineLaw,
    n: usize,
    rng: &RngStream,
    checkpoint_every: Option<usize>,
    norm: MatrixNorm,
) -> Result<ProductPath> {
    if n == 0 {
        return Err(Error::InvalidInput("product path needs n >= 1".into()));
    }
    let mut g = law.stream(rng).generator();
    let mut walk = ProductWalk::new(law, norm);
    run_walk(&mut walk, &mut g, n, checkpoint_every)
}

/// Continues a product path from a checkpoint for `n` further steps.
pub fn resume_products(
    law: &AffineLaw,
    from: &ProductCheckpoint,
    n: usize,
    rng: &RngStream,
    norm: MatrixNorm,
) -> Result<ProductPath> {
    let mut g = law.stream(rng).generator();
    g.set_word_pos(from.word_pos);
    let mut walk = ProductWalk::from_checkpoint(law, from, norm);
    run_walk(&mut walk, &mut g, n, None)
}

fn run_walk(
    walk: &mut ProductWalk<'_>,
    g: &mut Generator,
    n: usize,
    checkpoint_every: Option<usize>,
) -> Result<ProductPath> {
    let mut log_norms = Vec::with_capacity(n);
    let mut checkpoints = Vec::new();
    for k in 1..=n {
        log_norms.push(walk.advance(g)?);
        if checkpoint_every.is_some_and(|c| c > 0 && k % c == 0 && k < n) {
            checkpoints.push(walk.checkpoint(g));
        }
    }
    checkpoints.push(walk.checkpoint(g));
    Ok(ProductPath { log_norms, checkpoints })
}

/// log|S_n| for one replica, without storing the path.
fn final_log_norm(law: &AffineLaw, n: usize, g: &mut Generator, norm: MatrixNorm) -> Result<f64> {
    if law.dim() == 1 {
        let mut acc = 0.0;
        for step in 1..=n {
            let (a, _) = law.draw_scalar(g);
            if !(a.abs() > 1e-300) || !a.is_finite() {
                return Err(Error::SingularProduct { step });
            }
            acc += a.abs().ln();
        }
        return Ok(acc);
    }
    let mut walk = ProductWalk::new(law, norm);
    let mut last = 0.0;
    for _ in 0..n {
        last = walk.advance(g)?;
    }
    Ok(last)
}

fn sample_final_log_norms(law: &AffineLaw, n: usize, replicas: usize, rng: &RngStream) -> Result<Vec<f64>> {
    rng::replicate(&law.stream(rng), replicas, |_, g| final_log_norm(law, n, g, MatrixNorm::Operator))
        .into_iter()
        .collect()
}

/// Batch-mean estimate of the top Lyapunov exponent (nats per step).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    pub value: f64,
    pub stderr: f64,
    pub n: usize,
}

impl From<LyapunovEstimate> for Estimate {
    fn from(l: LyapunovEstimate) -> Self {
        Estimate::new(l.value, l.stderr)
    }
}

pub fn estimate_lyapunov(law: &AffineLaw, budget: &SimBudget, rng: &RngStream) -> Result<Estimate> {
    let n = budget.path_length;
    if n < 1000 {
        return Err(Error::InvalidInput(format!("Lyapunov estimate needs n >= 1000, got {n}")));
    }
    let per_step: Vec<f64> =
        sample_final_log_norms(law, n, budget.replicas.max(2), rng)?.into_iter().map(|l| l / n as f64).collect();
    Ok(stats::mean_se(&per_step))
}

/// Exact log E|A|^s when d = 1 and the matrix law has finite support, since
/// then E|S_n|^s = (E|A|^s)^n.
pub fn exact_log_k(law: &AffineLaw, s: f64) -> Option<f64> {
    if law.dim() != 1 {
        return None;
    }
    let atoms = law.a_atoms()?;
    let terms: Vec<f64> = atoms.iter().map(|(m, w)| w.ln() + s * m[0].abs().ln()).collect();
    let top = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Some(top + terms.iter().map(|t| (t - top).exp()).sum::<f64>().ln())
}

/// Point of the moment-growth curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KEstimate {
    pub log_k: f64,
    pub stderr: f64,
    /// The top 1% of replicas carry more than half of the s-moment mass.
    pub heavy_tail_variance: bool,
    pub exact: bool,
}

/// Replica samples of log|S_n| on the ladder {n0, 2n0, 4n0}, reused across s
/// so that the estimated curve is a smooth function of s.
pub struct MomentSampler {
    levels: Vec<(usize, Vec<f64>)>,
}

impl MomentSampler {
    pub fn new(law: &AffineLaw, budget: &SimBudget, rng: &RngStream) -> Result<Self> {
        let n0 = budget.ladder_base.max(1);
        let levels = [n0, 2 * n0, 4 * n0]
            .into_iter()
            .enumerate()
            .map(|(i, n)| {
                let stream = rng.fork("moment-ladder").substream(i as u64);
                Ok((n, sample_final_log_norms(law, n, budget.replicas.max(2), &stream)?))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { levels })
    }

    pub fn max_n(&self) -> usize {
        self.levels.last().map_or(0, |l| l.0)
    }

    pub fn replicas(&self) -> usize {
        self.levels.first().map_or(0, |l| l.1.len())
    }

    pub fn eval(&self, s: f64) -> KEstimate {
        if s == 0.0 {
            return KEstimate { log_k: 0.0, stderr: 0.0, heavy_tail_variance: false, exact: true };
        }
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        let mut ses = Vec::new();
        let mut heavy = false;
        for (n, logs) in &self.levels {
            let r = logs.len() as f64;
            let top = logs.iter().map(|l| s * l).fold(f64::NEG_INFINITY, f64::max);
            let mut w: Vec<f64> = logs.iter().map(|l| (s * l - top).exp()).collect();
            let total: f64 = w.iter().sum();
            let mw = total / r;
            let var = w.iter().map(|x| (x - mw) * (x - mw)).sum::<f64>() / (r - 1.0);
            xs.push(1.0 / *n as f64);
            ys.push((top + mw.ln()) / *n as f64);
            ses.push(var.sqrt() / (mw * r.sqrt()) / *n as f64);

            let k = ((0.01 * r).ceil() as usize).max(1);
            w.select_nth_unstable_by(k - 1, |a, b| b.total_cmp(a));
            if w[..k].iter().sum::<f64>() > 0.5 * total {
                heavy = true;
            }
        }
        // intercept of the least-squares line in 1/n
        let m = xs.len() as f64;
        let mx = stats::mean(&xs);
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        let c: Vec<f64> = xs.iter().map(|x| 1.0 / m - mx * (x - mx) / sxx).collect();
        let log_k: f64 = c.iter().zip(&ys).map(|(ci, yi)| ci * yi).sum();
        let (slope, intercept, _) = stats::ols(&xs, &ys);
        let rss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
        let c2: f64 = c.iter().map(|ci| ci * ci).sum();
        let var: f64 = c.iter().zip(&ses).map(|(ci, se)| ci * ci * se * se).sum::<f64>() + c2 * rss / (m - 2.0);
        KEstimate { log_k, stderr: var.sqrt(), heavy_tail_variance: heavy, exact: false }
    }
}

/// Estimates log k(s).
pub fn estimate_k(law: &AffineLaw, s: f64, budget: &SimBudget, rng: &RngStream) -> Result<KEstimate> {
    if !(s >= 0.0) {
        return Err(Error::InvalidInput(format!("s = {s} must be nonnegative")));
    }
    if s == 0.0 {
        return Ok(KEstimate { log_k: 0.0, stderr: 0.0, heavy_tail_variance: false, exact: true });
    }
    if let Some(v) = exact_log_k(law, s) {
        return Ok(KEstimate { log_k: v, stderr: 0.0, heavy_tail_variance: false, exact: true });
    }
    Ok(MomentSampler::new(law, budget, rng)?.eval(s))
}

/// Root of log k(alpha) = 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaSolution {
    pub alpha: f64,
    /// log k at the returned root.
    pub log_k: f64,
    pub log_k_stderr: f64,
    /// Standard error of alpha from the curve slope at the root.
    pub alpha_stderr: f64,
    pub iterations: usize,
    pub exact: bool,
    pub heavy_tail_variance: bool,
}

/// Bisection for k(alpha) = 1 on `bracket`. Exact in d = 1 with finite
/// support; otherwise on the common-random-number curve of a
/// [`MomentSampler`].
pub fn solve_alpha(
    law: &AffineLaw,
    budget: &SimBudget,
    rng: &RngStream,
    bracket: (f64, f64),
    tol: f64,
) -> Result<AlphaSolution> {
    if !(tol > 0.0) {
        return Err(Error::InvalidInput("tol must be positive".into()));
    }
    let (mut lo, mut hi) = bracket;
    if !(lo >= 0.0 && hi > lo) {
        return Err(Error::InvalidInput(format!("bad bracket [{lo}, {hi}]")));
    }
    let sampler = match exact_log_k(law, 1.0) {
        Some(_) => None,
        None => Some(MomentSampler::new(law, budget, rng)?),
    };
    let f = |s: f64| -> KEstimate {
        match &sampler {
            None => {
                KEstimate { log_k: exact_log_k(law, s).unwrap(), stderr: 0.0, heavy_tail_variance: false, exact: true }
            }
            Some(ms) => ms.eval(s),
        }
    };
    let (flo, fhi) = (f(lo), f(hi));
    if !(flo.log_k < 0.0 && fhi.log_k > 0.0) {
        return Err(Error::NoBracket { lo, hi });
    }
    let width = 1e-3 * tol;
    let mut iterations = 0;
    while hi - lo > width && iterations < 200 {
        let mid = 0.5 * (lo + hi);
        if f(mid).log_k < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    let alpha = 0.5 * (lo + hi);
    let at = f(alpha);
    if at.stderr > tol {
        return Err(Error::NoisyCurve { alpha, stderr: at.stderr, tol });
    }
    if at.log_k.abs() > tol + 2.0 * at.stderr {
        return Err(Error::NoisyCurve { alpha, stderr: at.stderr, tol });
    }
    let h = (0.01 * alpha).max(1e-4);
    let slope = (f(alpha + h).log_k - f((alpha - h).max(0.0)).log_k) / (alpha + h - (alpha - h).max(0.0));
    Ok(AlphaSolution {
        alpha,
        log_k: at.log_k,
        log_k_stderr: at.stderr,
        alpha_stderr: at.stderr / slope.abs(),
        iterations,
        exact: at.exact,
        heavy_tail_variance: at.heavy_tail_variance,
    })
}

/// Estimated log k(s) over a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentCurve {
    pub s_grid: Vec<f64>,
    pub log_k: Vec<f64>,
    pub stderr: Vec<f64>,
    pub n_used: usize,
    pub replicas: usize,
    pub heavy_tail_variance: bool,
}

pub fn moment_curve(law: &AffineLaw, s_grid: &[f64], budget: &SimBudget, rng: &RngStream) -> Result<MomentCurve> {
    if s_grid.iter().any(|s| !(*s >= 0.0)) {
        return Err(Error::InvalidInput("s grid must be nonnegative".into()));
    }
    let points: Vec<KEstimate> = if exact_log_k(law, 1.0).is_some() {
        s_grid.iter().map(|&s| estimate_k(law, s, budget, rng)).collect::<Result<_>>()?
    } else {
        let ms = MomentSampler::new(law, budget, rng)?;
        s_grid.iter().map(|&s| ms.eval(s)).collect()
    };
    let exact = points.iter().all(|p| p.exact);
    Ok(MomentCurve {
        s_grid: s_grid.to_vec(),
        log_k: points.iter().map(|p| p.log_k).collect(),
        stderr: points.iter().map(|p| p.stderr).collect(),
        n_used: if exact { 1 } else { 4 * budget.ladder_base.max(1) },
        replicas: if exact { 0 } else { budget.replicas.max(2) },
        heavy_tail_variance: points.iter().any(|p| p.heavy_tail_variance),
    })
}

impl MomentCurve {
    /// CSV with columns s, log_k, stderr, n_used, replicas.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["s", "log_k", "stderr", "n_used", "replicas"])?;
        for i in 0..self.s_grid.len() {
            w.write_record([
                self.s_grid[i].to_string(),
                self.log_k[i].to_string(),
                self.stderr[i].to_string(),
                self.n_used.to_string(),
                self.replicas.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ALaw, AffineLawSpec, AngleLaw, BLaw, RadialLaw};

    fn law(spec: AffineLawSpec) -> AffineLaw {
        AffineLaw::new(spec).unwrap()
    }

    fn lognormal() -> AffineLaw {
        law(AffineLawSpec::scalar(ALaw::ScalarLognormal { mu_log: -0.5, sigma_log: 1.0 }, BLaw::Constant(vec![1.0])))
    }

    #[test]
    fn diagonal_half_products_are_exact() {
        let spec = AffineLawSpec {
            dimension: 2,
            a_law: ALaw::FiniteSupport(vec![(vec![vec![0.5, 0.0], vec![0.0, 0.5]], 1.0)]),
            b_law: BLaw::Constant(vec![0.0, 0.0]),
            seed_domain: 0,
        };
        let p = simulate_products(&law(spec), 2000, &RngStream::new(1, 0)).unwrap();
        for (k, l) in p.log_norms.iter().enumerate() {
            let expect = -((k + 1) as f64) * 2f64.ln();
            assert!((l - expect).abs() <= 1e-12 * expect.abs());
        }
    }

    #[test]
    fn rotations_are_isometries() {
        let spec = AffineLawSpec {
            dimension: 2,
            a_law: ALaw::RotationScale { angle_law: AngleLaw::Uniform, radial_law: RadialLaw::Fixed(1.0) },
            b_law: BLaw::Constant(vec![1.0, 0.0]),
            seed_domain: 0,
        };
        let p = simulate_products(&law(spec), 500, &RngStream::new(1, 0)).unwrap();
        assert!(p.log_norms.iter().all(|l| l.abs() < 1e-12));
    }

    #[test]
    fn two_point_growth_rate() {
        let n = 200_000;
        let p = simulate_products(&law(AffineLawSpec::l2p()), n, &RngStream::new(2, 0)).unwrap();
        let rate = p.log_norms[n - 1] / n as f64;
        // sd of log A is 2 ln2 sqrt(p(1-p))
        let sigma = 2.0 * 2f64.ln() * (2.0f64 / 9.0).sqrt();
        assert!((rate + 2f64.ln() / 3.0).abs() < 3.0 * sigma / (n as f64).sqrt());
    }

    #[test]
    fn checkpoint_restart_matches_single_pass() {
        let spec = AffineLawSpec {
            dimension: 2,
            a_law: ALaw::RotationScale {
                angle_law: AngleLaw::Uniform,
                radial_law: RadialLaw::Lognormal { mu_log: -0.1, sigma_log: 0.5 },
            },
            b_law: BLaw::Constant(vec![1.0, 0.0]),
            seed_domain: 0,
        };
        let l = law(spec);
        let rng = RngStream::new(9, 1);
        let full = simulate_products_with(&l, 4000, &rng, Some(2000), MatrixNorm::Operator).unwrap();
        let first = simulate_products(&l, 2000, &rng).unwrap();
        let cp = first.checkpoints.last().unwrap();
        let second = resume_products(&l, cp, 2000, &rng, MatrixNorm::Operator).unwrap();
        let joined: Vec<f64> = first.log_norms.iter().chain(&second.log_norms).copied().collect();
        for (a, b) in full.log_norms.iter().zip(&joined) {
            assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
        }
    }

    #[test]
    fn lyapunov_closed_forms() {
        let b = SimBudget { path_length: 1000, replicas: 400, ladder_base: 1 };
        let e = estimate_lyapunov(&law(AffineLawSpec::l2p()), &b, &RngStream::new(3, 0)).unwrap();
        assert!((e.value + 2f64.ln() / 3.0).abs() < 4.0 * e.stderr);
        let e = estimate_lyapunov(&lognormal(), &b, &RngStream::new(3, 0)).unwrap();
        assert!((e.value + 0.5).abs() < 4.0 * e.stderr);
        let e = estimate_lyapunov(&law(AffineLawSpec::deterministic(3.0, 1.0)), &b, &RngStream::new(3, 0)).unwrap();
        assert!((e.value - 3f64.ln()).abs() < 1e-12);
        assert!(estimate_lyapunov(&lognormal(), &SimBudget { path_length: 10, ..b }, &RngStream::new(3, 0)).is_err());
    }

    #[test]
    fn exact_curve_values() {
        let l = law(AffineLawSpec::l2p());
        let b = SimBudget::default();
        assert_eq!(estimate_k(&l, 0.0, &b, &RngStream::new(1, 0)).unwrap().log_k, 0.0);
        assert!(estimate_k(&l, 1.0, &b, &RngStream::new(1, 0)).unwrap().log_k.abs() < 1e-15);
    }

    #[test]
    fn lognormal_moment_at_one() {
        let b = SimBudget { path_length: 1000, replicas: 100_000, ladder_base: 1 };
        let k = estimate_k(&lognormal(), 1.0, &b, &RngStream::new(4, 0)).unwrap();
        assert!(k.log_k.abs() < 4.0 * k.stderr, "{k:?}");
        assert!(!k.exact);
        let k0 = estimate_k(&lognormal(), 0.0, &b, &RngStream::new(4, 0)).unwrap();
        assert_eq!(k0.log_k, 0.0);
    }

    #[test]
    fn heavy_tail_flag_far_beyond_alpha() {
        let b = SimBudget { path_length: 1000, replicas: 2_000, ladder_base: 4 };
        let k = estimate_k(&lognormal(), 6.0, &b, &RngStream::new(4, 0)).unwrap();
        assert!(k.heavy_tail_variance);
    }

    #[test]
    fn solve_alpha_exact_two_point() {
        let s = solve_alpha(&law(AffineLawSpec::l2p()), &SimBudget::default(), &RngStream::new(1, 0), (0.5, 3.0), 1e-9)
            .unwrap();
        assert!((s.alpha - 1.0).abs() < 1e-9);
        assert!(s.exact);
    }

    #[test]
    fn solve_alpha_no_bracket() {
        let r = solve_alpha(
            &law(AffineLawSpec::deterministic(0.5, 1.0)),
            &SimBudget::default(),
            &RngStream::new(1, 0),
            (0.1, 10.0),
            1e-6,
        );
        assert!(matches!(r, Err(Error::NoBracket { .. })));
    }

    #[test]
    fn solve_alpha_garch_squared() {
        let l = law(AffineLawSpec::scalar(ALaw::GarchSquared { a: 1.0 }, BLaw::Constant(vec![1.0])));
        let b = SimBudget { path_length: 1000, replicas: 50_000, ladder_base: 1 };
        let s = solve_alpha(&l, &b, &RngStream::new(5, 0), (0.3, 3.0), 0.05).unwrap();
        assert!((s.alpha - 1.0).abs() < 0.05 && (s.alpha - 1.0).abs() < 4.0 * s.alpha_stderr + 0.01, "{s:?}");
    }

    #[test]
    fn exact_curve_is_log_convex() {
        let l = law(AffineLawSpec::two_point(3.0, 0.4, 0.2));
        let s: Vec<f64> = (0..40).map(|i| i as f64 * 0.1).collect();
        let v: Vec<f64> = s.iter().map(|&x| exact_log_k(&l, x).unwrap()).collect();
        for i in 1..s.len() - 1 {
            assert!(v[i] <= 0.5 * (v[i - 1] + v[i + 1]) + 1e-14);
        }
    }

    #[test]
    fn slope_at_zero_is_lyapunov() {
        let l = law(AffineLawSpec::l2p());
        let h = 0.05;
        let f = |s: f64| exact_log_k(&l, s).unwrap();
        let fd = (f(h) - f(0.0)) / h;
        let curvature = (f(2.0 * h) - 2.0 * f(h) + f(0.0)) / (h * h);
        let lyap = estimate_lyapunov(
            &l,
            &SimBudget { path_length: 2000, replicas: 500, ladder_base: 1 },
            &RngStream::new(6, 0),
        )
        .unwrap();
        assert!((fd - lyap.value).abs() <= 3.0 * lyap.stderr + 0.5 * h * curvature.abs() * 1.5);
    }

    #[test]
    fn moment_curve_csv_header() {
        let c =
            moment_curve(&law(AffineLawSpec::l2p()), &[0.0, 0.5, 1.0], &SimBudget::default(), &RngStream::new(1, 0))
                .unwrap();
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("s,log_k,stderr,n_used,replicas\n"));
        assert_eq!(text.lines().count(), 4);
    }
}
