//! Grid discretization of the transition operator in d = 1, its second
//! eigenvalue, and the Monte Carlo drift envelope.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::AffineLaw;
use crate::rng::{self, RngStream};
use crate::stats::{self, Estimate};

pub const RESIDUAL_MAX: f64 = 1e-4;
const NO_GAP_TOL: f64 = 1e-9;
const STATIONARY_TOL: f64 = 1e-14;

/// Transition operator on N equispaced nodes. Row i holds the linear
/// interpolation weights of the mapped points a x_i + b, clamped to the
/// interval, times the atom probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct GridOperator {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    weights: Vec<f64>,
    /// Maps that leave the interval and were clamped.
    pub warnings: Vec<String>,
}

impl GridOperator {
    pub fn node(&self, i: usize) -> f64 {
        self.lo + (self.hi - self.lo) * i as f64 / (self.n - 1) as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.node(i)).collect()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.weights[r].iter().copied())
    }

    /// (P phi)(x_i).
    pub fn apply(&self, phi: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).map(|(j, w)| w * phi[j]).sum()).collect()
    }

    /// (mu P)_j.
    pub fn apply_adjoint(&self, mu: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (i, m) in mu.iter().enumerate() {
            for (j, w) in self.row(i) {
                out[j] += m * w;
            }
        }
        out
    }

    /// Left fixed vector by power iteration from the uniform weights.
    pub fn stationary_vector(&self, iters: usize) -> Vec<f64> {
        let mut mu = vec![1.0 / self.n as f64; self.n];
        for _ in 0..iters {
            let mut next = self.apply_adjoint(&mu);
            let total: f64 = next.iter().sum();
            next.iter_mut().for_each(|v| *v /= total);
            let change: f64 = next.iter().zip(&mu).map(|(a, b)| (a - b).abs()).sum();
            mu = next;
            if change < STATIONARY_TOL {
                break;
            }
        }
        mu
    }

    /// Kolmogorov distance between the stationary vector, read as a measure
    /// on the nodes, and the uniform law on the interval.
    pub fn uniformity_defect(&self, mu: &[f64]) -> f64 {
        let mut cdf = 0.0;
        let mut worst: f64 = 0.0;
        for (i, m) in mu.iter().enumerate() {
            let u = (self.node(i) - self.lo) / (self.hi - self.lo);
            worst = worst.max((cdf - u).abs());
            cdf += m;
            worst = worst.max((cdf - u).abs());
        }
        worst
    }

    /// CSV with columns x, mu.
    pub fn write_stationary_csv<W: Write>(&self, mu: &[f64], out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "mu"])?;
        for (i, m) in mu.iter().enumerate() {
            w.write_record([self.node(i).to_string(), m.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Discretizes P phi(x) = E phi(A x + B) for a finite-support scalar law.
pub fn build_grid_operator(law: &AffineLaw, n: usize, (lo, hi): (f64, f64)) -> Result<GridOperator> {
    if law.dim() != 1 {
        return Err(Error::NotOneDimensional);
    }
    if n < 2 || !(lo < hi) {
        return Err(Error::InvalidInput(format!("grid needs N >= 2 and lo < hi, got {n} on [{lo}, {hi}]")));
    }
    let (a_atoms, b_atoms) = match (law.a_atoms(), law.b_atoms()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::InvalidInput("grid operator needs finite-support A and B laws".into())),
    };
    let maps: Vec<(f64, f64, f64)> = a_atoms
        .iter()
        .flat_map(|(a, pa)| b_atoms.iter().map(move |(b, pb)| (a[0], b[0], pa * pb)))
        .filter(|m| m.2 > 0.0)
        .collect();
    let mut warnings = Vec::new();
    for &(a, b, _) in &maps {
        let (y0, y1) = (a * lo + b, a * hi + b);
        if y0.min(y1) < lo - 1e-12 || y0.max(y1) > hi + 1e-12 {
            warnings.push(format!("map x -> {a} x + {b} leaves [{lo}, {hi}]; clamped"));
        }
    }
    let h = (hi - lo) / (n - 1) as f64;
    let mut row_ptr = vec![0];
    let mut cols = Vec::with_capacity(2 * maps.len() * n);
    let mut weights = Vec::with_capacity(2 * maps.len() * n);
    for i in 0..n {
        let x = lo + h * i as f64;
        for &(a, b, p) in &maps {
            let t = ((a * x + b).clamp(lo, hi) - lo) / h;
            let j = (t.floor() as usize).min(n - 2);
            let frac = (t - j as f64).clamp(0.0, 1.0);
            cols.extend([j, j + 1]);
            weights.extend([p * (1.0 - frac), p * frac]);
        }
        row_ptr.push(cols.len());
    }
    Ok(GridOperator { lo, hi, n, row_ptr, cols, weights, warnings })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecondEigen {
    pub lambda2: f64,
    pub residual: f64,
    /// lambda2 = 1: no gap on the mean-zero subspace.
    pub no_gap: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Power iteration for U = P - 1 mu on mean-zero vectors, mu the
/// stationary vector; lambda2 is the final Rayleigh quotient.
pub fn second_eigenvalue(op: &GridOperator, iters: usize) -> Result<SecondEigen> {
    if iters < 100 {
        return Err(Error::InvalidInput(format!("need at least 100 iterations, got {iters}")));
    }
    let mu = op.stationary_vector(iters.max(10_000));
    let deflate = |v: &mut Vec<f64>| {
        let m = dot(&mu, v);
        v.iter_mut().for_each(|x| *x -= m);
    };
    // Smooth start with a small irrational-frequency perturbation so no
    // eigendirection is missed by symmetry.
    let mut v: Vec<f64> = (0..op.n)
        .map(|i| {
            let u = i as f64 / (op.n - 1) as f64;
            u + 0.1 * (7.3 * u).sin()
        })
        .collect();
    deflate(&mut v);
    let mut lambda = 0.0;
    let mut residual = f64::INFINITY;
    for _ in 0..iters {
        let norm = dot(&v, &v).sqrt();
        if norm == 0.0 {
            break;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        let mut uv = op.apply(&v);
        deflate(&mut uv);
        lambda = dot(&v, &uv);
        residual = uv.iter().zip(&v).map(|(a, b)| (a - lambda * b).powi(2)).sum::<f64>().sqrt();
        v = uv;
        if residual < 1e-12 {
            break;
        }
    }
    if !(residual <= RESIDUAL_MAX) {
        return Err(Error::NoConvergence { residual });
    }
    Ok(SecondEigen { lambda2: lambda, residual, no_gap: lambda >= 1.0 - NO_GAP_TOL })
}

/// Drift envelope E|X_ell^x|^chi <= beta |x|^chi + b fitted at probe points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub chi: f64,
    pub ell: usize,
    pub beta_hat: f64,
    pub beta_stderr: f64,
    pub b_hat: f64,
    pub b_stderr: f64,
    pub x_grid: Vec<f64>,
    pub moments: Vec<Estimate>,
    pub valid: bool,
}

impl DriftReport {
    /// Margin of beta_hat below 1 in standard errors.
    pub fn margin_sigmas(&self) -> f64 {
        if self.beta_stderr > 0.0 {
            (1.0 - self.beta_hat) / self.beta_stderr
        } else if self.beta_hat < 1.0 {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        }
    }

    /// CSV with columns x, moment, stderr, envelope.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "moment", "stderr", "envelope"])?;
        for (x, m) in self.x_grid.iter().zip(&self.moments) {
            let env = self.beta_hat * x.abs().powf(self.chi) + self.b_hat;
            w.write_record([x.to_string(), m.value.to_string(), m.stderr.to_string(), env.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Monte Carlo drift check. Every probe point x e_1 is driven by the same
/// innovations; b_hat is the moment from the origin and beta_hat the
/// smallest slope that covers every probe given b_hat.
pub fn verify_drift(
    law: &AffineLaw,
    alpha: f64,
    chi: f64,
    ell: usize,
    x_grid: &[f64],
    replicas: usize,
    rng: &RngStream,
) -> Result<DriftReport> {
    if chi >= alpha {
        return Err(Error::ChiTooLarge { chi, alpha });
    }
    if !(chi > 0.0) || ell == 0 || replicas < 2 {
        return Err(Error::InvalidInput(format!(
            "drift needs chi > 0, ell >= 1, replicas >= 2 (chi {chi}, ell {ell})"
        )));
    }
    let d = law.dim();
    let stream = law.stream(rng);
    // Per replica: |X^0|^chi followed by |X^{x_j}|^chi.
    let rows = rng::replicate(&stream, replicas, |_, g| {
        let mut a = vec![0.0; d * d];
        let mut b = vec![0.0; d];
        let mut states: Vec<Vec<f64>> = std::iter::once(0.0)
            .chain(x_grid.iter().copied())
            .map(|x| {
                let mut v = vec![0.0; d];
                v[0] = x;
                v
            })
            .collect();
        let mut next = vec![0.0; d];
        for _ in 0..ell {
            law.draw_into(g, &mut a, &mut b);
            for s in states.iter_mut() {
                crate::linalg::mat_vec(&a, s, &mut next);
                s.iter_mut().zip(&next).zip(&b).for_each(|((s, n), b)| *s = n + b);
            }
        }
        states.iter().map(|s| crate::linalg::euclid(s).powf(chi)).collect::<Vec<f64>>()
    });
    let column = |k: usize| rows.iter().map(|r| r[k]).collect::<Vec<f64>>();
    let origin = stats::mean_se(&column(0));
    let moments: Vec<Estimate> = (1..=x_grid.len()).map(|k| stats::mean_se(&column(k))).collect();
    let mut beta = Estimate::exact(0.0);
    for (k, x) in x_grid.iter().enumerate() {
        let w = x.abs().powf(chi);
        if w == 0.0 {
            continue;
        }
        let slope: Vec<f64> = rows.iter().map(|r| (r[k + 1] - r[0]) / w).collect();
        let e = stats::mean_se(&slope);
        if e.value > beta.value {
            beta = e;
        }
    }
    Ok(DriftReport {
        chi,
        ell,
        beta_hat: beta.value,
        beta_stderr: beta.stderr,
        b_hat: origin.value,
        b_stderr: origin.stderr,
        x_grid: x_grid.to_vec(),
        moments,
        valid: beta.value < 1.0,
    })
}

/// Probe points 0, +-10^k for k = 0..=4.
pub fn default_drift_grid() -> Vec<f64> {
    let mut g = vec![0.0];
    for k in 0..=4 {
        let x = 10f64.powi(k);
        g.extend([x, -x]);
    }
    g
}
