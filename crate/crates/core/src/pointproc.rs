//! Exceedance point processes, limit laws of maxima, compound-Poisson
//! structure of exceedance times, the logarithm law, and the mixing gap.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::AffineLaw;
use crate::recursion::{self, Trajectory};
use crate::rng::{self, RngStream};
use crate::stats::{self, Estimate};
use crate::tail::{self, TailFit};

pub const BAD_FIT_KS: f64 = 0.15;
pub const MIN_CLUSTERS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exceedance {
    /// 1-based time index.
    pub i: usize,
    /// u^{-1} X_i.
    pub mark: Vec<f64>,
}

/// Marked exceedances of a path of length n over the level u * delta.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExceedanceProcess {
    pub n: usize,
    pub level: f64,
    pub delta: f64,
    pub events: Vec<Exceedance>,
}

/// All (i, X_i / u) with |X_i| > u * delta.
pub fn exceedances(traj: &Trajectory, u: f64, delta: f64) -> Result<ExceedanceProcess> {
    if !(u > 0.0) {
        return Err(Error::InvalidInput(format!("level {u} must be positive")));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::InvalidInput(format!("delta = {delta} outside (0, 1]")));
    }
    let radii = traj.radii();
    let events = radii
        .iter()
        .enumerate()
        .filter(|(_, &r)| r > u * delta)
        .map(|(k, _)| Exceedance { i: k + 1, mark: traj.point(k + 1).iter().map(|x| x / u).collect() })
        .collect();
    Ok(ExceedanceProcess { n: traj.len(), level: u, delta, events })
}

impl ExceedanceProcess {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Time projection: the points i / n.
    pub fn times(&self) -> Vec<f64> {
        self.events.iter().map(|e| e.i as f64 / self.n as f64).collect()
    }

    /// Space projection: the mark radii.
    pub fn mark_radii(&self) -> Vec<f64> {
        self.events.iter().map(|e| linalg::euclid(&e.mark)).collect()
    }

    /// Number of points with time in (a, b] and mark radius in (r_lo, r_hi].
    pub fn count(&self, a: f64, b: f64, r_lo: f64, r_hi: f64) -> usize {
        let n = self.n as f64;
        self.events
            .iter()
            .filter(|e| {
                let t = e.i as f64 / n;
                let r = linalg::euclid(&e.mark);
                t > a && t <= b && r > r_lo && r <= r_hi
            })
            .count()
    }

    /// Superposition with a process on the same time axis.
    pub fn superpose(&self, other: &ExceedanceProcess) -> Result<ExceedanceProcess> {
        if self.n != other.n {
            return Err(Error::InvalidInput("superposed processes need equal n".into()));
        }
        let mut events = self.events.clone();
        events.extend(other.events.iter().cloned());
        events.sort_by_key(|e| e.i);
        Ok(ExceedanceProcess { events, ..self.clone() })
    }

    /// NDJSON, one {"i": .., "mark": [..]} per event.
    pub fn write_ndjson<W: Write>(&self, mut out: W) -> Result<()> {
        for e in &self.events {
            writeln!(out, "{}", serde_json::to_string(e)?)?;
        }
        Ok(())
    }
}

/// Maxima M_n of independent stationary paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockMaxima {
    pub n: usize,
    pub maxima: Vec<f64>,
}

pub fn block_maxima(
    law: &AffineLaw,
    n: usize,
    replicas: usize,
    eps_trunc: f64,
    rng: &RngStream,
) -> Result<BlockMaxima> {
    let maxima = rng::replicate(rng, replicas, |i, _| {
        let t = recursion::stationary_path(law, n, eps_trunc, &rng.substream(i as u64))?;
        Ok(t.radii().into_iter().fold(0.0, f64::max))
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;
    Ok(BlockMaxima { n, maxima })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrechetFit {
    pub theta: Estimate,
    pub ks_distance: f64,
    pub bad_fit: bool,
}

/// Maximum-likelihood theta of exp(-theta t^-alpha) for u_n-normalized
/// maxima, alpha fixed by the tail fit.
pub fn frechet_fit(maxima: &BlockMaxima, fit: &TailFit) -> Result<FrechetFit> {
    if maxima.maxima.len() < 200 {
        return Err(Error::InvalidInput(format!("Frechet fit needs 200 maxima, got {}", maxima.maxima.len())));
    }
    let u = tail::u_n(fit, maxima.n as f64);
    let z: Vec<f64> = maxima.maxima.iter().map(|m| m / u).collect();
    if z.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidInput("maxima must be positive".into()));
    }
    let a = fit.alpha;
    let theta = z.len() as f64 / z.iter().map(|v| v.powf(-a)).sum::<f64>();
    let ks = stats::ks_one_sample(&z, |t| (-theta * t.powf(-a)).exp());
    Ok(FrechetFit {
        theta: Estimate::new(theta, theta / (z.len() as f64).sqrt()),
        ks_distance: ks,
        bad_fit: ks > BAD_FIT_KS,
    })
}

/// Runs declustering and goodness of fit of the compound Poisson limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterTest {
    pub clusters: usize,
    /// Empirical cluster-size probabilities, sizes 1, 2, ...
    pub size_dist: Vec<f64>,
    pub cluster_count_poisson_ks: f64,
    pub size_dist_tv: f64,
    pub too_few_clusters: bool,
}

/// A run of exceedances separated by gaps of at most `m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cluster {
    pub start: usize,
    pub end: usize,
    pub size: usize,
}

/// Exceedance times grouped into clusters: a gap larger than `m` starts a
/// new cluster.
pub fn decluster(times: &[usize], m: usize) -> Vec<Cluster> {
    let mut out: Vec<Cluster> = Vec::new();
    for &t in times {
        match out.last_mut() {
            Some(c) if t - c.end <= m => {
                c.end = t;
                c.size += 1;
            }
            _ => out.push(Cluster { start: t, end: t, size: 1 }),
        }
    }
    out
}

/// Declusters `proc` with run length `m` and compares cluster sizes with
/// `nu`. Cluster arrivals are tested through the quiet periods between
/// clusters: under Poisson arrivals the excess of a quiet period over the
/// run length `m` is exponential, so the rescaled excesses are compared
/// with Exp(1).
pub fn interexceedance_test(proc: &ExceedanceProcess, nu: &[f64], m: usize) -> Result<ClusterTest> {
    let times: Vec<usize> = proc.events.iter().map(|e| e.i).collect();
    let clusters = decluster(&times, m);
    if clusters.is_empty() {
        return Err(Error::NoExceedance { level: proc.level });
    }
    let kmax = clusters.iter().map(|c| c.size).max().unwrap().max(nu.len());
    let mut size_dist = vec![0.0; kmax];
    for c in &clusters {
        size_dist[c.size - 1] += 1.0 / clusters.len() as f64;
    }
    let tv = 0.5 * (0..kmax).map(|k| (size_dist[k] - nu.get(k).copied().unwrap_or(0.0)).abs()).sum::<f64>();
    let gaps: Vec<f64> = clusters.windows(2).map(|w| (w[1].start - w[0].end - m) as f64).collect();
    let ks = if gaps.is_empty() {
        1.0
    } else {
        let mean = stats::mean(&gaps);
        let scaled: Vec<f64> = gaps.iter().map(|g| g / mean).collect();
        stats::ks_one_sample(&scaled, |x| 1.0 - (-x).exp())
    };
    Ok(ClusterTest {
        clusters: clusters.len(),
        size_dist,
        cluster_count_poisson_ks: ks,
        size_dist_tv: tv,
        too_few_clusters: clusters.len() < MIN_CLUSTERS,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogLawPoint {
    pub n: usize,
    pub median_ratio: f64,
    pub iqr: f64,
}

/// log M_n / log n across paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogLaw {
    pub points: Vec<LogLawPoint>,
    /// Median at the largest n.
    pub median_ratio: f64,
    pub spread: f64,
}

/// Grid of n at which the log law is evaluated.
pub const LOGLAW_GRID: [usize; 3] = [10_000, 100_000, 1_000_000];

/// Running maxima of `radii` at each n of [`LOGLAW_GRID`] within its length.
pub fn running_maxima(radii: &[f64]) -> Vec<f64> {
    let mut out = Vec::new();
    let mut m = 0.0f64;
    let mut from = 0;
    for n in LOGLAW_GRID.into_iter().filter(|&n| n <= radii.len()) {
        m = radii[from..n].iter().fold(m, |a, &b| a.max(b));
        from = n;
        out.push(m);
    }
    out
}

/// Evaluates log M_n / log n at n in {10^4, 10^5, 10^6} where available.
pub fn loglaw_diag(paths: &[Vec<f64>]) -> Result<LogLaw> {
    let maxima: Vec<Vec<f64>> = paths.iter().map(|p| running_maxima(p)).collect();
    loglaw_from_maxima(&maxima)
}

/// Same as [`loglaw_diag`] from per-path [`running_maxima`].
pub fn loglaw_from_maxima(maxima: &[Vec<f64>]) -> Result<LogLaw> {
    let levels = maxima.iter().map(|m| m.len()).min().unwrap_or(0);
    if levels == 0 {
        return Err(Error::InvalidInput("log-law diagnostic needs paths of length >= 10^4".into()));
    }
    let mut points = Vec::new();
    for (j, &n) in LOGLAW_GRID[..levels].iter().enumerate() {
        let ratios: Vec<f64> = maxima.iter().map(|m| m[j].max(f64::MIN_POSITIVE).ln() / (n as f64).ln()).collect();
        let s = stats::sorted(&ratios);
        points.push(LogLawPoint {
            n,
            median_ratio: stats::quantile_sorted(&s, 0.5),
            iqr: stats::quantile_sorted(&s, 0.75) - stats::quantile_sorted(&s, 0.25),
        });
    }
    let last = points.last().unwrap().clone();
    Ok(LogLaw { median_ratio: last.median_ratio, spread: last.iqr, points })
}

/// Lipschitz ramp f(v) = height * clamp((|v| - delta) / ramp, 0, 1),
/// supported on {|v| > delta}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub delta: f64,
    pub height: f64,
    pub ramp: f64,
}

impl Default for TestFunction {
    fn default() -> Self {
        Self { delta: 0.5, height: 1.0, ramp: 0.5 }
    }
}

impl TestFunction {
    pub fn zero() -> Self {
        Self { height: 0.0, ..Self::default() }
    }

    pub fn lipschitz(&self) -> f64 {
        self.height / self.ramp
    }

    #[inline]
    pub fn eval(&self, r: f64) -> f64 {
        self.height * ((r - self.delta) / self.ramp).clamp(0.0, 1.0)
    }
}

/// `gap` is the signed difference between the path functional and its
/// block-independent surrogate; I_n is its absolute value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixingPoint {
    pub n: usize,
    pub r_n: usize,
    pub gap: Estimate,
    pub variance_too_high: bool,
}

/// I_n over a grid with the fitted log-log slope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingCurve {
    pub points: Vec<MixingPoint>,
    pub slope: f64,
    pub slope_stderr: f64,
}

impl MixingCurve {
    fn from_points(points: Vec<MixingPoint>) -> Self {
        let usable: Vec<&MixingPoint> = points.iter().filter(|p| p.gap.value != 0.0).collect();
        let (slope, slope_stderr) = if usable.len() >= 3 {
            let x: Vec<f64> = usable.iter().map(|p| (p.n as f64).ln()).collect();
            let y: Vec<f64> = usable.iter().map(|p| p.gap.value.abs().ln()).collect();
            let (s, _, se) = stats::ols(&x, &y);
            (s, se)
        } else {
            (f64::NAN, f64::NAN)
        };
        Self { points, slope, slope_stderr }
    }

    /// CSV with columns n, r_n, i_n, stderr.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["n", "r_n", "i_n", "stderr"])?;
        for p in &self.points {
            w.write_record([p.n.to_string(), p.r_n.to_string(), p.gap.value.to_string(), p.gap.stderr.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn gap_point(n: usize, r: usize, diffs: &[f64]) -> MixingPoint {
    let gap = stats::mean_se(diffs);
    MixingPoint { n, r_n: r, gap, variance_too_high: gap.stderr > gap.value.abs() }
}

/// I_n from a batch of mark-radius sequences. The product over blocks is
/// the expectation of a surrogate whose block j is taken from path
/// (p + j) mod P, so distinct blocks come from independent paths. Level:
/// `level(n)`; blocks of length ceil(sqrt n).
pub fn mixing_gap(
    paths: &[&[f64]],
    f: &TestFunction,
    n_grid: &[usize],
    level: impl Fn(usize) -> f64,
) -> Result<MixingCurve> {
    let count = paths.len();
    let mut points = Vec::new();
    for &n in n_grid {
        if paths.iter().any(|p| p.len() < n) {
            return Err(Error::InvalidInput(format!("paths shorter than n = {n}")));
        }
        let r = (n as f64).sqrt().ceil() as usize;
        let k = n.div_ceil(r);
        if k > count {
            return Err(Error::InvalidInput(format!("{count} paths cannot supply {k} independent blocks")));
        }
        let u = level(n);
        let block_sums: Vec<Vec<f64>> =
            paths.iter().map(|p| p[..n].chunks(r).map(|b| b.iter().map(|x| f.eval(x / u)).sum()).collect()).collect();
        let diffs: Vec<f64> = (0..count)
            .map(|p| {
                let own: f64 = block_sums[p].iter().sum();
                let mixed: f64 = (0..k).map(|j| block_sums[(p + j) % count][j]).sum();
                (-own).exp() - (-mixed).exp()
            })
            .collect();
        points.push(gap_point(n, r, &diffs));
    }
    Ok(MixingCurve::from_points(points))
}

/// I_n for a model by coupling: the surrogate restarts every block from an
/// independent stationary draw but reuses the path's own innovations, so
/// its blocks are independent with stationary marginals and it agrees with
/// the path except shortly after block starts.
pub fn mixing_gap_coupled(
    law: &AffineLaw,
    fit: &TailFit,
    f: &TestFunction,
    n_grid: &[usize],
    replicas: usize,
    eps_trunc: f64,
    rng: &RngStream,
) -> Result<MixingCurve> {
    if law.dim() != 1 {
        return Err(Error::NotOneDimensional);
    }
    let mut points = Vec::new();
    for (gi, &n) in n_grid.iter().enumerate() {
        let r = (n as f64).sqrt().ceil() as usize;
        let u = tail::u_n(fit, n as f64);
        let stream = law.stream(&rng.substream(gi as u64));
        let diffs = rng::replicate(&stream, replicas, |_, g| -> Result<f64> {
            let (x0, _) = recursion::backward_draw(law, eps_trunc, g)?;
            let mut x = x0[0];
            let mut y = x;
            let (mut sx, mut sy) = (0.0, 0.0);
            for i in 0..n {
                if i > 0 && i % r == 0 {
                    y = recursion::backward_draw(law, eps_trunc, g)?.0[0];
                }
                let (a, b) = law.draw_scalar(g);
                x = a * x + b;
                y = a * y + b;
                let fx = f.eval(x.abs() / u);
                sx += fx;
                sy += if x == y { fx } else { f.eval(y.abs() / u) };
            }
            Ok((-sx).exp() - (-sy).exp())
        })
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
        points.push(gap_point(n, r, &diffs));
    }
    Ok(MixingCurve::from_points(points))
}
