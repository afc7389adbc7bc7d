//! Small dense linear algebra on row-major slices. Dimensions here are tiny
//! (d <= 4 in practice), so the hot paths are plain loops; nalgebra is used
//! only for decompositions in d >= 3.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Matrix norm used for |S_n| and |A|.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum MatrixNorm {
    /// Operator norm induced by the Euclidean vector norm.
    #[default]
    Operator,
    Frobenius,
}

/// Vector norm used for radii |X|.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum VectorNorm {
    #[default]
    Euclidean,
    /// l1 norm; used to exercise the norm dependence of the extremal index.
    Manhattan,
}

impl VectorNorm {
    #[inline]
    pub fn of(self, v: &[f64]) -> f64 {
        match self {
            VectorNorm::Euclidean => euclid(v),
            VectorNorm::Manhattan => v.iter().map(|x| x.abs()).sum(),
        }
    }
}

#[inline]
pub fn euclid(v: &[f64]) -> f64 {
    if v.len() == 1 {
        v[0].abs()
    } else {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// out = a * x
#[inline]
pub fn mat_vec(a: &[f64], x: &[f64], out: &mut [f64]) {
    let d = x.len();
    for i in 0..d {
        let row = &a[i * d..(i + 1) * d];
        out[i] = row.iter().zip(x).map(|(r, v)| r * v).sum();
    }
}

/// out = a * b
pub fn mat_mul(a: &[f64], b: &[f64], out: &mut [f64], d: usize) {
    for i in 0..d {
        for j in 0..d {
            let mut s = 0.0;
            for k in 0..d {
                s += a[i * d + k] * b[k * d + j];
            }
            out[i * d + j] = s;
        }
    }
}

pub fn identity(d: usize) -> Vec<f64> {
    let mut m = vec![0.0; d * d];
    for i in 0..d {
        m[i * d + i] = 1.0;
    }
    m
}

pub fn frobenius(m: &[f64]) -> f64 {
    m.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Largest singular value. Closed form for d <= 2.
pub fn op_norm(m: &[f64], d: usize) -> f64 {
    match d {
        1 => m[0].abs(),
        2 => {
            let (a, b, c, e) = (m[0], m[1], m[2], m[3]);
            // (s1 + s2) / 2 and (s1 - s2) / 2 as hypotenuses; avoids the
            // cancellation of the discriminant form near isometries.
            0.5 * ((a + e).hypot(c - b) + (a - e).hypot(b + c))
        }
        _ => DMatrix::from_row_slice(d, d, m).singular_values().max(),
    }
}

pub fn matrix_norm(m: &[f64], d: usize, kind: MatrixNorm) -> f64 {
    match kind {
        MatrixNorm::Operator => op_norm(m, d),
        MatrixNorm::Frobenius => frobenius(m),
    }
}

pub fn det(m: &[f64], d: usize) -> f64 {
    match d {
        1 => m[0],
        2 => m[0] * m[3] - m[1] * m[2],
        _ => DMatrix::from_row_slice(d, d, m).determinant(),
    }
}

/// Singular values in decreasing order.
pub fn singular_values(m: &[f64], d: usize) -> Vec<f64> {
    let mut s: Vec<f64> = DMatrix::from_row_slice(d, d, m).singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Eigenvalues as (re, im), sorted by decreasing modulus.
pub fn eigenvalues(m: &[f64], d: usize) -> Vec<(f64, f64)> {
    let mut ev: Vec<(f64, f64)> =
        DMatrix::from_row_slice(d, d, m).complex_eigenvalues().iter().map(|z| (z.re, z.im)).collect();
    ev.sort_by(|a, b| b.0.hypot(b.1).total_cmp(&a.0.hypot(a.1)));
    ev
}

/// Rank of a set of vectors by modified Gram-Schmidt with relative tolerance.
/// Returns the orthonormal basis found.
pub fn orthonormal_basis(vectors: &[Vec<f64>], rel_tol: f64) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for v in vectors {
        let scale = euclid(v);
        if scale == 0.0 || !scale.is_finite() {
            continue;
        }
        let mut w: Vec<f64> = v.iter().map(|x| x / scale).collect();
        for _ in 0..2 {
            for b in &basis {
                let p: f64 = w.iter().zip(b).map(|(x, y)| x * y).sum();
                for (x, y) in w.iter_mut().zip(b) {
                    *x -= p * y;
                }
            }
        }
        let r = euclid(&w);
        if r > rel_tol {
            basis.push(w.iter().map(|x| x / r).collect());
        }
    }
    basis
}
