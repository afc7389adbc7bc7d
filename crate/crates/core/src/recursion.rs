//! Forward simulation of X_n = A_n X_{n-1} + B_n and sampling of the
//! stationary law.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, MatrixNorm, VectorNorm};
use crate::model::AffineLaw;
use crate::rng::{self, Generator, RngStream};

/// Radius beyond which a path is declared to have overflowed.
pub const OVERFLOW_RADIUS: f64 = 1e300;
/// Step cap for the backward series.
pub const BACKWARD_CAP: usize = 1_000_000;
pub const DEFAULT_BURN_IN: usize = 1_000;

/// A simulated path X_1, ..., X_n from a fixed start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub dim: usize,
    pub start: Vec<f64>,
    /// X_1, ..., X_n flattened row by row.
    pub points: Vec<f64>,
    pub rng: RngStream,
    /// Set when some |X_k| exceeded [`OVERFLOW_RADIUS`]; the path stops there.
    pub overflow: bool,
}

impl Trajectory {
    /// Wraps an externally generated scalar sequence, e.g. i.i.d. marks.
    pub fn from_scalars(values: Vec<f64>) -> Self {
        Self { dim: 1, start: vec![0.0], points: values, rng: RngStream::new(0, 0), overflow: false }
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// X_k for 1 <= k <= n.
    pub fn point(&self, k: usize) -> &[f64] {
        &self.points[(k - 1) * self.dim..k * self.dim]
    }

    pub fn radii(&self) -> Vec<f64> {
        self.radii_with(VectorNorm::Euclidean)
    }

    pub fn radii_with(&self, norm: VectorNorm) -> Vec<f64> {
        if self.dim == 1 {
            return self.points.iter().map(|x| x.abs()).collect();
        }
        self.points.chunks(self.dim).map(|p| norm.of(p)).collect()
    }

    /// NDJSON, one object {"k": .., "x": [..]} per step.
    pub fn write_ndjson<W: Write>(&self, mut out: W) -> Result<()> {
        for k in 1..=self.len() {
            let line = serde_json::json!({ "k": k, "x": self.point(k) });
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    /// CSV with columns k, x0, x1, ...
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["k".to_string()];
        header.extend((0..self.dim).map(|i| format!("x{i}")));
        w.write_record(&header)?;
        for k in 1..=self.len() {
            let mut rec = vec![k.to_string()];
            rec.extend(self.point(k).iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Iterates the recursion from `x` for `n` steps.
pub fn simulate_path(law: &AffineLaw, x: &[f64], n: usize, rng: &RngStream) -> Result<Trajectory> {
    let mut g = law.stream(rng).generator();
    simulate_path_with(law, x, n, &mut g, *rng)
}

fn simulate_path_with(law: &AffineLaw, x: &[f64], n: usize, g: &mut Generator, tag: RngStream) -> Result<Trajectory> {
    let d = law.dim();
    if n == 0 {
        return Err(Error::InvalidInput("path length must be >= 1".into()));
    }
    if x.len() != d {
        return Err(Error::DimensionMismatch(format!("start has length {}, law has d = {d}", x.len())));
    }
    let mut points = Vec::with_capacity(n * d);
    let mut overflow = false;
    if d == 1 {
        let mut v = x[0];
        for _ in 0..n {
            let (a, b) = law.draw_scalar(g);
            v = a * v + b;
            if !(v.abs() <= OVERFLOW_RADIUS) {
                overflow = true;
                break;
            }
            points.push(v);
        }
    } else {
        let mut cur = x.to_vec();
        let mut next = vec![0.0; d];
        let mut a = vec![0.0; d * d];
        let mut b = vec![0.0; d];
        for _ in 0..n {
            law.draw_into(g, &mut a, &mut b);
            linalg::mat_vec(&a, &cur, &mut next);
            for i in 0..d {
                cur[i] = next[i] + b[i];
            }
            if !(linalg::euclid(&cur) <= OVERFLOW_RADIUS) {
                overflow = true;
                break;
            }
            points.extend_from_slice(&cur);
        }
    }
    Ok(Trajectory { dim: d, start: x.to_vec(), points, rng: tag, overflow })
}

/// A path of length `n` started from an exact backward draw of the
/// stationary law, so every point is marginally stationary.
pub fn stationary_path(law: &AffineLaw, n: usize, eps_trunc: f64, rng: &RngStream) -> Result<Trajectory> {
    let mut g = law.stream(&rng.fork("stationary-start")).generator();
    let (x0, _) = backward_draw(law, eps_trunc, &mut g)?;
    simulate_path(law, &x0, n, rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StationaryMethod {
    Backward,
    BurnIn,
}

/// A batch of approximately stationary draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationarySample {
    pub dim: usize,
    /// Draws flattened row by row.
    pub values: Vec<f64>,
    pub method: StationaryMethod,
    /// Largest realized |A_1...A_K| * envelope(|B|) at truncation (Backward);
    /// zero for burn-in samples.
    pub truncation_error_bound: f64,
}

impl StationarySample {
    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn radii(&self) -> Vec<f64> {
        self.radii_with(VectorNorm::Euclidean)
    }

    pub fn radii_with(&self, norm: VectorNorm) -> Vec<f64> {
        if self.dim == 1 {
            return self.values.iter().map(|x| x.abs()).collect();
        }
        self.values.chunks(self.dim).map(|p| norm.of(p)).collect()
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

/// One draw of sum_k A_1...A_k B_{k+1}, truncated at the first K with
/// |A_1...A_K| * envelope < eps. Returns the draw and the realized bound.
pub(crate) fn backward_draw(law: &AffineLaw, eps: f64, g: &mut Generator) -> Result<(Vec<f64>, f64)> {
    let d = law.dim();
    let env = law.b_envelope();
    if env == 0.0 {
        return Ok((vec![0.0; d], 0.0));
    }
    if d == 1 {
        let mut x = 0.0;
        let mut p = 1.0;
        for _ in 0..BACKWARD_CAP {
            let (a, b) = law.draw_scalar(g);
            x += p * b;
            p *= a;
            let bound = p.abs() * env;
            if bound < eps {
                return Ok((vec![x], bound));
            }
        }
        return Err(Error::TruncationStall { cap: BACKWARD_CAP });
    }
    let mut x = vec![0.0; d];
    let mut p = linalg::identity(d);
    let mut tmp = vec![0.0; d * d];
    let mut pb = vec![0.0; d];
    let mut a = vec![0.0; d * d];
    let mut b = vec![0.0; d];
    for _ in 0..BACKWARD_CAP {
        law.draw_into(g, &mut a, &mut b);
        linalg::mat_vec(&p, &b, &mut pb);
        for i in 0..d {
            x[i] += pb[i];
        }
        linalg::mat_mul(&p, &a, &mut tmp, d);
        std::mem::swap(&mut p, &mut tmp);
        let bound = linalg::matrix_norm(&p, d, MatrixNorm::Operator) * env;
        if bound < eps {
            return Ok((x, bound));
        }
    }
    Err(Error::TruncationStall { cap: BACKWARD_CAP })
}

/// Stationary batch by the truncated backward series.
pub fn sample_stationary(law: &AffineLaw, batch: usize, eps_trunc: f64, rng: &RngStream) -> Result<StationarySample> {
    if !(eps_trunc > 0.0) {
        return Err(Error::InvalidInput("eps_trunc must be positive".into()));
    }
    let draws: Vec<(Vec<f64>, f64)> = rng::replicate(&law.stream(rng), batch, |_, g| backward_draw(law, eps_trunc, g))
        .into_iter()
        .collect::<Result<_>>()?;
    let bound = draws.iter().map(|(_, e)| *e).fold(0.0, f64::max);
    Ok(StationarySample {
        dim: law.dim(),
        values: draws.into_iter().flat_map(|(x, _)| x).collect(),
        method: StationaryMethod::Backward,
        truncation_error_bound: bound,
    })
}

/// Stationary batch by running independent chains from the origin for
/// `burn_in` steps.
pub fn sample_stationary_burn_in(
    law: &AffineLaw,
    batch: usize,
    burn_in: usize,
    rng: &RngStream,
) -> Result<StationarySample> {
    let d = law.dim();
    let origin = vec![0.0; d];
    let ends: Vec<Vec<f64>> = rng::replicate(&law.stream(rng), batch, |i, g| {
        let t = simulate_path_with(law, &origin, burn_in.max(1), g, rng.substream(i as u64))?;
        if t.overflow {
            return Err(Error::InvalidInput("burn-in path overflowed".into()));
        }
        Ok(t.point(t.len()).to_vec())
    })
    .into_iter()
    .collect::<Result<_>>()?;
    Ok(StationarySample {
        dim: d,
        values: ends.concat(),
        method: StationaryMethod::BurnIn,
        truncation_error_bound: 0.0,
    })
}

/// Applies one step of the recursion to every member of a batch.
pub fn step_batch(law: &AffineLaw, sample: &StationarySample, rng: &RngStream) -> StationarySample {
    let d = sample.dim;
    let moved: Vec<Vec<f64>> = rng::replicate(&law.stream(rng), sample.len(), |i, g| {
        let mut a = vec![0.0; d * d];
        let mut b = vec![0.0; d];
        law.draw_into(g, &mut a, &mut b);
        let mut out = vec![0.0; d];
        linalg::mat_vec(&a, sample.get(i), &mut out);
        out.iter_mut().zip(&b).for_each(|(o, bi)| *o += bi);
        out
    });
    StationarySample { values: moved.concat(), ..sample.clone() }
}
