//! Extremal index by blocks, runs and the linear-walk formula; cluster-size
//! law; anticlustering diagnostic.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::AffineLaw;
use crate::rng::{self, Generator, RngStream};
use crate::stats::{self, Estimate};
use crate::tail::{self, TailFit};

pub const DEFAULT_RUN_LENGTH: usize = 50;
pub const DEFAULT_EPS_STOP: f64 = 1e-3;
pub const DEFAULT_HORIZON_CAP: usize = 100_000;
pub const BOOTSTRAP_RESAMPLES: usize = 200;
/// Fraction of capped walks above which a linear-walk estimate is unreliable.
pub const CAPPED_FRACTION_MAX: f64 = 0.01;

/// Mean exceedances per block targeted by [`BlockScheme::sparse`].
pub const EXCEEDANCES_PER_BLOCK: f64 = 0.1;

/// Partition of 1..=n into k_n blocks of length r_n.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockScheme {
    pub n: usize,
    pub r_n: usize,
    pub k_n: usize,
}

impl BlockScheme {
    pub fn new(n: usize, r_n: usize) -> Result<Self> {
        if n == 0 || r_n == 0 || r_n > n {
            return Err(Error::InvalidInput(format!("block length {r_n} invalid for n = {n}")));
        }
        Ok(Self { n, r_n, k_n: n / r_n })
    }

    /// Blocks that hold [`EXCEEDANCES_PER_BLOCK`] exceedances on average
    /// when the path holds `expected`. The count ratio of [`theta_blocks`]
    /// is biased by a factor (1 - e^-m) / m at per-block mean m, so m must
    /// stay small.
    pub fn sparse(n: usize, expected: f64) -> Result<Self> {
        if !(expected > 0.0) {
            return Err(Error::InvalidInput(format!("expected exceedances {expected} must be positive")));
        }
        let r = ((EXCEEDANCES_PER_BLOCK * n as f64 / expected).floor() as usize).max(1);
        Self::new(n, r)
    }

    /// r_n = ceil(sqrt(n)).
    pub fn default_for(n: usize) -> Self {
        let r = ((n as f64).sqrt().ceil() as usize).clamp(1, n.max(1));
        Self { n, r_n: r, k_n: n / r }
    }
}

/// Level at which a path of length `n` has `expected` exceedances on
/// average under the fitted tail: u_m with m = n / expected.
pub fn level_for(fit: &TailFit, n: usize, expected: f64) -> f64 {
    tail::u_n(fit, n as f64 / expected)
}

/// Blocks estimator: blocks whose maximum exceeds `u` over exceedances,
/// with a block-bootstrap standard error.
pub fn theta_blocks(radii: &[f64], u: f64, scheme: &BlockScheme, rng: &RngStream) -> Result<Estimate> {
    let used = scheme.k_n * scheme.r_n;
    if radii.len() < used {
        return Err(Error::InvalidInput(format!("path of length {} shorter than {used}", radii.len())));
    }
    let blocks: Vec<(u32, u32)> = radii[..used]
        .chunks(scheme.r_n)
        .map(|b| {
            let c = b.iter().filter(|&&r| r > u).count() as u32;
            ((c > 0) as u32, c)
        })
        .collect();
    let hits: u64 = blocks.iter().map(|b| b.0 as u64).sum();
    let count: u64 = blocks.iter().map(|b| b.1 as u64).sum();
    if count == 0 {
        return Err(Error::NoExceedance { level: u });
    }
    let theta = hits as f64 / count as f64;
    let mut g = rng.generator();
    let k = blocks.len();
    let boots: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
        .filter_map(|_| {
            let (mut h, mut c) = (0u64, 0u64);
            for _ in 0..k {
                let b = blocks[g.random_range(0..k)];
                h += b.0 as u64;
                c += b.1 as u64;
            }
            (c > 0).then(|| h as f64 / c as f64)
        })
        .collect();
    let se = stats::mean_se(&boots).stderr * (boots.len() as f64).sqrt();
    Ok(Estimate::new(theta, se))
}

/// Runs estimator: fraction of exceedances followed by `m` values at or
/// below `u`. Exceedances too close to the end of the path are skipped.
pub fn theta_runs(radii: &[f64], u: f64, m: usize) -> Result<Estimate> {
    let n = radii.len();
    let anchors: Vec<usize> = (0..n.saturating_sub(m)).filter(|&i| radii[i] > u).collect();
    if anchors.is_empty() {
        if radii.iter().any(|&r| r > u) && m == 0 {
            return Ok(Estimate::exact(1.0));
        }
        return Err(Error::NoExceedance { level: u });
    }
    if m == 0 {
        return Ok(Estimate::exact(1.0));
    }
    let ends = anchors.iter().filter(|&&i| radii[i + 1..=i + m].iter().all(|&r| r <= u)).count();
    Ok(stats::binomial(ends, anchors.len()))
}

/// Runs estimates over a grid of run lengths.
pub fn runs_stability(radii: &[f64], u: f64, m_grid: &[usize]) -> Result<Vec<(usize, Estimate)>> {
    m_grid.iter().map(|&m| Ok((m, theta_runs(radii, u, m)?))).collect()
}

/// Options of the linear-walk estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkOptions {
    pub count: usize,
    pub horizon_cap: usize,
    pub eps_stop: f64,
}

impl Default for WalkOptions {
    fn default() -> Self {
        Self { count: 100_000, horizon_cap: DEFAULT_HORIZON_CAP, eps_stop: DEFAULT_EPS_STOP }
    }
}

/// Outcome of one linear walk S_i v started from v ~ Lambda_1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct WalkOutcome {
    /// #{i >= 0 : |S_i v| > 1}, counted up to the stopping time.
    visits: usize,
    capped: bool,
}

struct Walker<'a> {
    law: &'a AffineLaw,
    fit: &'a TailFit,
    opts: WalkOptions,
}

impl Walker<'_> {
    /// Runs S_i v until the norm falls below eps_stop or the cap is hit.
    /// With `first_return`, stops at the first i >= 1 outside the unit ball.
    fn run(&self, g: &mut Generator, first_return: bool) -> Result<WalkOutcome> {
        let d = self.law.dim();
        let mut v = vec![0.0; d];
        tail::draw_lambda1(self.fit, g, &mut v)?;
        let mut visits = 1;
        let norm = self.fit.norm;
        if d == 1 {
            let mut x = v[0];
            for _ in 0..self.opts.horizon_cap {
                let (a, _) = self.law.draw_scalar(g);
                x *= a;
                let r = x.abs();
                if r > 1.0 {
                    visits += 1;
                    if first_return {
                        return Ok(WalkOutcome { visits, capped: false });
                    }
                } else if r < self.opts.eps_stop {
                    return Ok(WalkOutcome { visits, capped: false });
                }
            }
            return Ok(WalkOutcome { visits, capped: true });
        }
        let mut a = vec![0.0; d * d];
        let mut b = vec![0.0; d];
        let mut next = vec![0.0; d];
        for _ in 0..self.opts.horizon_cap {
            self.law.draw_into(g, &mut a, &mut b);
            linalg::mat_vec(&a, &v, &mut next);
            std::mem::swap(&mut v, &mut next);
            let r = norm.of(&v);
            if r > 1.0 {
                visits += 1;
                if first_return {
                    return Ok(WalkOutcome { visits, capped: false });
                }
            } else if r < self.opts.eps_stop {
                return Ok(WalkOutcome { visits, capped: false });
            }
        }
        Ok(WalkOutcome { visits, capped: true })
    }

    fn outcomes(&self, rng: &RngStream, first_return: bool) -> Result<Vec<WalkOutcome>> {
        if self.opts.count == 0 {
            return Err(Error::InvalidInput("walk count must be positive".into()));
        }
        rng::replicate(&self.law.stream(rng), self.opts.count, |_, g| self.run(g, first_return)).into_iter().collect()
    }
}

/// theta = P{sup_{i >= 1} |S_i v| <= 1} for v ~ Lambda_1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkTheta {
    pub theta: Estimate,
    pub capped: usize,
    pub unreliable: bool,
}

pub fn theta_theory(law: &AffineLaw, fit: &TailFit, opts: &WalkOptions, rng: &RngStream) -> Result<WalkTheta> {
    let out = Walker { law, fit, opts: *opts }.outcomes(rng, true)?;
    let escapes = out.iter().filter(|o| o.visits == 1 && !o.capped).count();
    let capped = out.iter().filter(|o| o.capped).count();
    Ok(WalkTheta {
        theta: stats::binomial(escapes, out.len()),
        capped,
        unreliable: capped as f64 > CAPPED_FRACTION_MAX * out.len() as f64,
    })
}

/// Cluster-count atoms zeta_k = P{zeta = k} and cluster-size probabilities
/// nu_k = (zeta_k - zeta_{k+1}) / zeta_1, k = 1..K.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterLaw {
    pub zeta: Vec<f64>,
    pub zeta_stderr: Vec<f64>,
    pub nu: Vec<f64>,
    /// Empirical P{zeta > K}.
    pub tail_mass: f64,
    pub draws: usize,
    pub capped: usize,
    pub unreliable: bool,
}

impl ClusterLaw {
    pub fn theta(&self) -> Estimate {
        Estimate::new(self.zeta[0], self.zeta_stderr[0])
    }

    /// Mean cluster size sum_k k nu_k.
    pub fn mean_size(&self) -> f64 {
        self.nu.iter().enumerate().map(|(i, v)| (i + 1) as f64 * v).sum()
    }

    /// CSV with columns k, zeta, zeta_stderr, nu.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k", "zeta", "zeta_stderr", "nu"])?;
        for k in 0..self.zeta.len() {
            w.write_record([
                (k + 1).to_string(),
                self.zeta[k].to_string(),
                self.zeta_stderr[k].to_string(),
                self.nu[k].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Cluster-count law of the linear walk. `max_size` = None uses the largest
/// observed count, so the truncated tail is empty.
pub fn cluster_sizes(
    law: &AffineLaw,
    fit: &TailFit,
    opts: &WalkOptions,
    max_size: Option<usize>,
    rng: &RngStream,
) -> Result<ClusterLaw> {
    let out = Walker { law, fit, opts: *opts }.outcomes(rng, false)?;
    let n = out.len();
    let observed = out.iter().map(|o| o.visits).max().unwrap_or(1);
    let k_max = max_size.unwrap_or(observed).max(1);
    let mut counts = vec![0usize; k_max + 2];
    for o in &out {
        counts[o.visits.min(k_max + 1)] += 1;
    }
    let zeta: Vec<f64> = (1..=k_max).map(|k| counts[k] as f64 / n as f64).collect();
    let zeta_stderr: Vec<f64> = zeta.iter().map(|p| (p * (1.0 - p) / n as f64).sqrt()).collect();
    let tail_mass = counts[k_max + 1] as f64 / n as f64;
    // nu from the nonincreasing least-squares fit of the atoms, with the
    // truncated tail mass as zeta_{K+1}; renormalized to a probability vector
    let mut fitted = zeta.clone();
    fitted.push(tail_mass);
    let fitted = stats::isotonic_nonincreasing(&fitted);
    let mut nu: Vec<f64> = (0..k_max).map(|i| (fitted[i] - fitted[i + 1]) / fitted[0]).collect();
    let total: f64 = nu.iter().sum();
    if total > 0.0 {
        nu.iter_mut().for_each(|v| *v /= total);
    }
    let capped = out.iter().filter(|o| o.capped).count();
    if zeta[0] == 0.0 {
        return Err(Error::Inconclusive("no walk escaped the unit ball after its start".into()));
    }
    Ok(ClusterLaw {
        zeta,
        zeta_stderr,
        nu,
        tail_mass,
        draws: n,
        capped,
        unreliable: capped as f64 > CAPPED_FRACTION_MAX * n as f64,
    })
}

/// R_m = sum over lags m <= i < r_n of the empirical probability of an
/// exceedance at lag i given one at lag 0, pooled over paths.
pub fn anticluster_diag(paths: &[&[f64]], u: f64, scheme: &BlockScheme, m_grid: &[usize]) -> Result<Vec<(usize, f64)>> {
    let r = scheme.r_n;
    let mut joint = vec![0u64; r];
    let mut anchors = vec![0u64; r];
    let mut any = false;
    for radii in paths {
        let ex: Vec<bool> = radii.iter().map(|&x| x > u).collect();
        let n = ex.len();
        for t in (0..n).filter(|&t| ex[t]) {
            any = true;
            for lag in 1..r.min(n - t) {
                anchors[lag] += 1;
                joint[lag] += ex[t + lag] as u64;
            }
        }
    }
    if !any {
        return Err(Error::NoExceedance { level: u });
    }
    let cond: Vec<f64> =
        (0..r).map(|i| if i == 0 || anchors[i] == 0 { 0.0 } else { joint[i] as f64 / anchors[i] as f64 }).collect();
    Ok(m_grid.iter().map(|&m| (m, cond[m.clamp(1, r)..].iter().sum::<f64>())).collect())
}

/// All extremal-index estimates for one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremalReport {
    pub level: f64,
    pub scheme: BlockScheme,
    pub theta_blocks: Estimate,
    pub theta_runs: Estimate,
    pub run_length: usize,
    pub theta_theory: WalkTheta,
    pub clusters: ClusterLaw,
    pub anticluster_curve: Vec<(usize, f64)>,
    pub runs_curve: Vec<(usize, Estimate)>,
}

impl ExtremalReport {
    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }

    /// CSV with columns m, r_m.
    pub fn write_anticluster_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["m", "r_m"])?;
        for (m, r) in &self.anticluster_curve {
            w.write_record([m.to_string(), r.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}
