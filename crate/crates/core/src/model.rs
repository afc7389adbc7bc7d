//! The law of the random affine map `x -> A x + B` and checks of the standing
//! hypotheses (negative Lyapunov exponent, a root of k(s) = 1, moment bounds,
//! no common fixed point, irreducibility/proximality, non-arithmeticity).

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::linrw::{self, SimBudget};
use crate::rng::{Generator, RngStream};
use crate::stats::{self, Estimate};

const WEIGHT_TOL: f64 = 1e-12;
const DET_TOL: f64 = 1e-12;

/// Generative description of the i.i.d. pair (A, B).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineLawSpec {
    pub dimension: usize,
    pub a_law: ALaw,
    pub b_law: BLaw,
    #[serde(default)]
    pub seed_domain: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ALaw {
    /// Row-major d x d matrices with weights.
    FiniteSupport(Vec<(Vec<Vec<f64>>, f64)>),
    /// A = exp(N(mu_log, sigma_log^2)), d = 1.
    ScalarLognormal { mu_log: f64, sigma_log: f64 },
    /// A = a1 with probability p, a2 otherwise, d = 1.
    ScalarTwoPoint { a1: f64, a2: f64, p: f64 },
    /// A = a Z^2 with Z standard normal, d = 1.
    GarchSquared { a: f64 },
    /// A = r R(phi) in d = 2.
    RotationScale { angle_law: AngleLaw, radial_law: RadialLaw },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AngleLaw {
    Fixed(f64),
    Uniform,
    FiniteSupport(Vec<(f64, f64)>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RadialLaw {
    Fixed(f64),
    Lognormal { mu_log: f64, sigma_log: f64 },
    TwoPoint { r1: f64, r2: f64, p: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BLaw {
    Constant(Vec<f64>),
    FiniteSupport(Vec<(Vec<f64>, f64)>),
    GaussianIso { mean: Vec<f64>, scale: f64 },
}

impl AffineLawSpec {
    pub fn scalar(a_law: ALaw, b_law: BLaw) -> Self {
        Self { dimension: 1, a_law, b_law, seed_domain: 0 }
    }

    /// The two-point model A in {a1, a2} with P(A = a1) = p and B = 1.
    pub fn two_point(a1: f64, a2: f64, p: f64) -> Self {
        Self::scalar(ALaw::ScalarTwoPoint { a1, a2, p }, BLaw::Constant(vec![1.0]))
    }

    /// A = 2 w.p. 1/3 and 1/2 otherwise, B = 1: tail index exactly 1.
    pub fn l2p() -> Self {
        Self::two_point(2.0, 0.5, 1.0 / 3.0)
    }

    /// Deterministic scalar A = a.
    pub fn deterministic(a: f64, b: f64) -> Self {
        Self::scalar(ALaw::FiniteSupport(vec![(vec![vec![a]], 1.0)]), BLaw::Constant(vec![b]))
    }

    pub fn with_b_scaled(&self, t: f64) -> Self {
        let b_law = match &self.b_law {
            BLaw::Constant(v) => BLaw::Constant(v.iter().map(|x| x * t).collect()),
            BLaw::FiniteSupport(atoms) => {
                BLaw::FiniteSupport(atoms.iter().map(|(v, w)| (v.iter().map(|x| x * t).collect(), *w)).collect())
            }
            BLaw::GaussianIso { mean, scale } => {
                BLaw::GaussianIso { mean: mean.iter().map(|x| x * t).collect(), scale: scale * t.abs() }
            }
        };
        Self { b_law, ..self.clone() }
    }
}

fn check_weights(what: &str, weights: impl Iterator<Item = f64>) -> Result<()> {
    let mut total = 0.0;
    let mut count = 0;
    for w in weights {
        if !(w > 0.0) || !w.is_finite() {
            return Err(Error::InvalidModel(format!("{what}: weight {w} is not positive")));
        }
        total += w;
        count += 1;
    }
    if count == 0 {
        return Err(Error::InvalidModel(format!("{what}: empty support")));
    }
    if (total - 1.0).abs() > WEIGHT_TOL {
        return Err(Error::InvalidModel(format!("{what}: weights sum to {total}, not 1")));
    }
    Ok(())
}

fn cumulative(weights: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut c: Vec<f64> = weights
        .iter()
        .map(|w| {
            acc += w;
            acc
        })
        .collect();
    if let Some(last) = c.last_mut() {
        *last = f64::INFINITY;
    }
    c
}

#[inline]
fn pick(cdf: &[f64], g: &mut Generator) -> usize {
    let u: f64 = g.random();
    cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1)
}

#[derive(Debug, Clone)]
enum ASampler {
    Finite { mats: Vec<Vec<f64>>, cdf: Vec<f64> },
    Lognormal { mu: f64, sigma: f64 },
    TwoPoint { a1: f64, a2: f64, p: f64 },
    Garch { a: f64 },
    Rotation { angle: AngleLaw, angle_cdf: Vec<f64>, radial: RadialLaw },
}

#[derive(Debug, Clone)]
enum BSampler {
    Constant(Vec<f64>),
    Finite { vecs: Vec<Vec<f64>>, cdf: Vec<f64> },
    Gaussian { mean: Vec<f64>, scale: f64 },
}

/// A validated [`AffineLawSpec`] ready for sampling.
#[derive(Debug, Clone)]
pub struct AffineLaw {
    spec: AffineLawSpec,
    a: ASampler,
    b: BSampler,
}

/// One draw of (A, B); `a` is row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinePair {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl AffineLaw {
    pub fn new(spec: AffineLawSpec) -> Result<Self> {
        let d = spec.dimension;
        if d == 0 {
            return Err(Error::InvalidModel("dimension must be at least 1".into()));
        }
        let scalar_only = |name: &str| -> Result<()> {
            if d != 1 {
                Err(Error::DimensionMismatch(format!("{name} requires d = 1, got d = {d}")))
            } else {
                Ok(())
            }
        };
        let a = match &spec.a_law {
            ALaw::FiniteSupport(atoms) => {
                check_weights("a_law", atoms.iter().map(|(_, w)| *w))?;
                let mut mats = Vec::with_capacity(atoms.len());
                for (rows, _) in atoms {
                    if rows.len() != d || rows.iter().any(|r| r.len() != d) {
                        return Err(Error::DimensionMismatch(format!("a_law matrix is not {d}x{d}")));
                    }
                    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
                    if flat.iter().any(|x| !x.is_finite()) {
                        return Err(Error::InvalidModel("a_law matrix has non-finite entries".into()));
                    }
                    let det = linalg::det(&flat, d);
                    if det.abs() <= DET_TOL {
                        return Err(Error::InvalidModel(format!("a_law matrix is singular (det = {det})")));
                    }
                    mats.push(flat);
                }
                let weights: Vec<f64> = atoms.iter().map(|(_, w)| *w).collect();
                ASampler::Finite { mats, cdf: cumulative(&weights) }
            }
            ALaw::ScalarLognormal { mu_log, sigma_log } => {
                scalar_only("ScalarLognormal")?;
                if !(*sigma_log > 0.0) || !mu_log.is_finite() {
                    return Err(Error::InvalidModel("ScalarLognormal needs sigma_log > 0".into()));
                }
                ASampler::Lognormal { mu: *mu_log, sigma: *sigma_log }
            }
            ALaw::ScalarTwoPoint { a1, a2, p } => {
                scalar_only("ScalarTwoPoint")?;
                if !(*p > 0.0 && *p < 1.0) {
                    return Err(Error::InvalidModel(format!("ScalarTwoPoint p = {p} not in (0, 1)")));
                }
                if a1.abs() <= DET_TOL || a2.abs() <= DET_TOL || !a1.is_finite() || !a2.is_finite() {
                    return Err(Error::InvalidModel("ScalarTwoPoint atoms must be nonzero".into()));
                }
                ASampler::TwoPoint { a1: *a1, a2: *a2, p: *p }
            }
            ALaw::GarchSquared { a } => {
                scalar_only("GarchSquared")?;
                if !(*a > 0.0) || !a.is_finite() {
                    return Err(Error::InvalidModel("GarchSquared needs a > 0".into()));
                }
                ASampler::Garch { a: *a }
            }
            ALaw::RotationScale { angle_law, radial_law } => {
                if d != 2 {
                    return Err(Error::DimensionMismatch(format!("RotationScale requires d = 2, got d = {d}")));
                }
                let angle_cdf = match angle_law {
                    AngleLaw::FiniteSupport(atoms) => {
                        check_weights("angle_law", atoms.iter().map(|(_, w)| *w))?;
                        cumulative(&atoms.iter().map(|(_, w)| *w).collect::<Vec<_>>())
                    }
                    _ => Vec::new(),
                };
                match radial_law {
                    RadialLaw::Fixed(r) if !(*r > DET_TOL) => {
                        return Err(Error::InvalidModel("radial law must be positive".into()))
                    }
                    RadialLaw::Lognormal { sigma_log, .. } if !(*sigma_log > 0.0) => {
                        return Err(Error::InvalidModel("radial Lognormal needs sigma_log > 0".into()))
                    }
                    RadialLaw::TwoPoint { r1, r2, p } if !(*r1 > DET_TOL && *r2 > DET_TOL && *p > 0.0 && *p < 1.0) => {
                        return Err(Error::InvalidModel("radial TwoPoint invalid".into()))
                    }
                    _ => {}
                }
                ASampler::Rotation { angle: angle_law.clone(), angle_cdf, radial: radial_law.clone() }
            }
        };
        let b = match &spec.b_law {
            BLaw::Constant(v) => {
                if v.len() != d {
                    return Err(Error::DimensionMismatch(format!("b_law constant has length {}, d = {d}", v.len())));
                }
                BSampler::Constant(v.clone())
            }
            BLaw::FiniteSupport(atoms) => {
                check_weights("b_law", atoms.iter().map(|(_, w)| *w))?;
                if atoms.iter().any(|(v, _)| v.len() != d) {
                    return Err(Error::DimensionMismatch("b_law vector length differs from d".into()));
                }
                BSampler::Finite {
                    vecs: atoms.iter().map(|(v, _)| v.clone()).collect(),
                    cdf: cumulative(&atoms.iter().map(|(_, w)| *w).collect::<Vec<_>>()),
                }
            }
            BLaw::GaussianIso { mean, scale } => {
                if mean.len() != d {
                    return Err(Error::DimensionMismatch("b_law mean length differs from d".into()));
                }
                if !(*scale >= 0.0) {
                    return Err(Error::InvalidModel("GaussianIso scale must be nonnegative".into()));
                }
                BSampler::Gaussian { mean: mean.clone(), scale: *scale }
            }
        };
        Ok(Self { spec, a, b })
    }

    pub fn spec(&self) -> &AffineLawSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.dimension
    }

    /// Stream re-keyed by the spec's seed namespace.
    pub fn stream(&self, rng: &RngStream) -> RngStream {
        rng.in_domain(self.spec.seed_domain)
    }

    /// Draws A into `a` (row-major, d*d) and B into `b` (d). A is drawn first.
    pub fn draw_into(&self, g: &mut Generator, a: &mut [f64], b: &mut [f64]) {
        match &self.a {
            ASampler::Finite { mats, cdf } => a.copy_from_slice(&mats[pick(cdf, g)]),
            ASampler::Lognormal { mu, sigma } => {
                let z: f64 = StandardNormal.sample(g);
                a[0] = (mu + sigma * z).exp();
            }
            ASampler::TwoPoint { a1, a2, p } => {
                a[0] = if g.random::<f64>() < *p { *a1 } else { *a2 };
            }
            ASampler::Garch { a: scale } => {
                let z: f64 = StandardNormal.sample(g);
                a[0] = scale * z * z;
            }
            ASampler::Rotation { angle, angle_cdf, radial } => {
                let phi = match angle {
                    AngleLaw::Fixed(t) => *t,
                    AngleLaw::Uniform => g.random::<f64>() * std::f64::consts::TAU,
                    AngleLaw::FiniteSupport(atoms) => atoms[pick(angle_cdf, g)].0,
                };
                let r = match radial {
                    RadialLaw::Fixed(r) => *r,
                    RadialLaw::Lognormal { mu_log, sigma_log } => {
                        let z: f64 = StandardNormal.sample(g);
                        (mu_log + sigma_log * z).exp()
                    }
                    RadialLaw::TwoPoint { r1, r2, p } => {
                        if g.random::<f64>() < *p {
                            *r1
                        } else {
                            *r2
                        }
                    }
                };
                let (s, c) = phi.sin_cos();
                a.copy_from_slice(&[r * c, -r * s, r * s, r * c]);
            }
        }
        match &self.b {
            BSampler::Constant(v) => b.copy_from_slice(v),
            BSampler::Finite { vecs, cdf } => b.copy_from_slice(&vecs[pick(cdf, g)]),
            BSampler::Gaussian { mean, scale } => {
                for (bi, m) in b.iter_mut().zip(mean) {
                    let z: f64 = StandardNormal.sample(g);
                    *bi = m + scale * z;
                }
            }
        }
    }

    /// Scalar draw for d = 1.
    #[inline]
    pub fn draw_scalar(&self, g: &mut Generator) -> (f64, f64) {
        debug_assert_eq!(self.dim(), 1);
        let mut a = [0.0];
        let mut b = [0.0];
        self.draw_into(g, &mut a, &mut b);
        (a[0], b[0])
    }

    /// Support of the matrix law as (row-major matrix, weight) when it is finite.
    pub fn a_atoms(&self) -> Option<Vec<(Vec<f64>, f64)>> {
        match (&self.a, &self.spec.a_law) {
            (ASampler::Finite { mats, .. }, ALaw::FiniteSupport(atoms)) => {
                Some(mats.iter().cloned().zip(atoms.iter().map(|(_, w)| *w)).collect())
            }
            (ASampler::TwoPoint { a1, a2, p }, _) => Some(vec![(vec![*a1], *p), (vec![*a2], 1.0 - p)]),
            (ASampler::Rotation { angle, radial, .. }, _) => {
                let angles: Vec<(f64, f64)> = match angle {
                    AngleLaw::Fixed(t) => vec![(*t, 1.0)],
                    AngleLaw::FiniteSupport(a) => a.clone(),
                    AngleLaw::Uniform => return None,
                };
                let radii: Vec<(f64, f64)> = match radial {
                    RadialLaw::Fixed(r) => vec![(*r, 1.0)],
                    RadialLaw::TwoPoint { r1, r2, p } => vec![(*r1, *p), (*r2, 1.0 - p)],
                    RadialLaw::Lognormal { .. } => return None,
                };
                let mut out = Vec::new();
                for (t, wt) in &angles {
                    for (r, wr) in &radii {
                        let (s, c) = t.sin_cos();
                        out.push((vec![r * c, -r * s, r * s, r * c], wt * wr));
                    }
                }
                Some(out)
            }
            _ => None,
        }
    }

    pub fn b_atoms(&self) -> Option<Vec<(Vec<f64>, f64)>> {
        match (&self.b, &self.spec.b_law) {
            (BSampler::Constant(v), _) => Some(vec![(v.clone(), 1.0)]),
            (BSampler::Finite { vecs, .. }, BLaw::FiniteSupport(atoms)) => {
                Some(vecs.iter().cloned().zip(atoms.iter().map(|(_, w)| *w)).collect())
            }
            (BSampler::Gaussian { mean, scale }, _) if *scale == 0.0 => Some(vec![(mean.clone(), 1.0)]),
            _ => None,
        }
    }

    /// Upper envelope for |B| used by the backward series stopping rule.
    /// Exact for finite-support laws; mean plus six standard deviations per
    /// coordinate for the Gaussian law.
    pub fn b_envelope(&self) -> f64 {
        match &self.b {
            BSampler::Constant(v) => linalg::euclid(v),
            BSampler::Finite { vecs, .. } => vecs.iter().map(|v| linalg::euclid(v)).fold(0.0, f64::max),
            BSampler::Gaussian { mean, scale } => linalg::euclid(mean) + 6.0 * scale * (mean.len() as f64).sqrt(),
        }
    }
}

/// Draws one (A, B) pair.
pub fn sample_pair(law: &AffineLaw, g: &mut Generator) -> AffinePair {
    let d = law.dim();
    let mut a = vec![0.0; d * d];
    let mut b = vec![0.0; d];
    law.draw_into(g, &mut a, &mut b);
    AffinePair { a, b }
}

/// Outcome of the irreducibility / proximality heuristics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IpVerdict {
    pub proximal_found: bool,
    pub irreducible_heuristic: bool,
    /// Only defined for d = 1.
    pub nonarith_1d: Option<bool>,
}

const PROXIMAL_MARGIN: f64 = 1e-6;
const CF_DEPTH: usize = 20;
const CF_TOL: f64 = 1e-7;

/// Continued-fraction rationality test: true when the expansion of `x`
/// terminates within `CF_DEPTH` partial quotients.
pub fn looks_rational(x: f64) -> bool {
    if !x.is_finite() {
        return false;
    }
    let mut r = x;
    for _ in 0..CF_DEPTH {
        let frac = r - r.floor();
        if frac < CF_TOL || 1.0 - frac < CF_TOL {
            return true;
        }
        r = 1.0 / frac;
    }
    false
}

fn is_proximal(m: &[f64], d: usize) -> bool {
    if d == 1 {
        return m[0] != 0.0 && m[0].is_finite();
    }
    let ev = linalg::eigenvalues(m, d);
    let (re, im) = ev[0];
    let top = re.hypot(im);
    if top == 0.0 || !top.is_finite() || im.abs() > 1e-9 * top {
        return false;
    }
    let second = ev[1].0.hypot(ev[1].1);
    if top < (1.0 + PROXIMAL_MARGIN) * second {
        return false;
    }
    // one-dimensional eigenspace: M - lambda I has exactly one vanishing singular value
    let mut shifted = m.to_vec();
    for i in 0..d {
        shifted[i * d + i] -= re;
    }
    let sv = linalg::singular_values(&shifted, d);
    sv[d - 2] > 1e-8 * top
}

/// Probes the semigroup generated by the support of the matrix law.
pub fn check_ip(law: &AffineLaw, n_probe: usize, rng: &RngStream) -> Result<IpVerdict> {
    let d = law.dim();
    match law.spec().a_law {
        ALaw::ScalarLognormal { .. } | ALaw::ScalarTwoPoint { .. } | ALaw::GarchSquared { .. } if d != 1 => {
            return Err(Error::DimensionMismatch("scalar matrix law with d > 1".into()))
        }
        _ => {}
    }
    let rng = law.stream(rng);
    let mut g = rng.fork("ip-products").generator();
    let mut a = vec![0.0; d * d];
    let mut b = vec![0.0; d];
    let mut tmp = vec![0.0; d * d];

    let mut proximal_found = false;
    for _ in 0..n_probe {
        let len = 1 + (g.random::<u32>() % 8) as usize;
        let mut prod = linalg::identity(d);
        for _ in 0..len {
            law.draw_into(&mut g, &mut a, &mut b);
            linalg::mat_mul(&a, &prod, &mut tmp, d);
            let s = linalg::frobenius(&tmp);
            for (p, t) in prod.iter_mut().zip(&tmp) {
                *p = t / s;
            }
        }
        if !proximal_found && is_proximal(&prod, d) {
            proximal_found = true;
        }
    }

    let generators: Vec<Vec<f64>> = match law.a_atoms() {
        Some(atoms) => atoms.into_iter().map(|(m, _)| m).collect(),
        None => {
            let mut g = rng.fork("ip-generators").generator();
            (0..n_probe.clamp(1, 2 * d * d + 2))
                .map(|_| {
                    law.draw_into(&mut g, &mut a, &mut b);
                    a.clone()
                })
                .collect()
        }
    };
    let irreducible_heuristic = d == 1 || algebra_dimension(&generators, d) == d * d;

    let nonarith_1d = (d == 1).then(|| {
        let logs: Vec<f64> = match law.a_atoms() {
            Some(atoms) => atoms.iter().map(|(m, _)| m[0].abs().ln()).collect(),
            None => {
                let mut g = rng.fork("ip-logs").generator();
                (0..n_probe.max(2))
                    .map(|_| {
                        law.draw_into(&mut g, &mut a, &mut b);
                        a[0].abs().ln()
                    })
                    .collect()
            }
        };
        let logs: Vec<f64> = logs.into_iter().filter(|l| l.abs() > 1e-12 && l.is_finite()).collect();
        logs.iter().enumerate().any(|(i, x)| logs[i + 1..].iter().any(|y| !looks_rational(x / y)))
    });

    Ok(IpVerdict { proximal_found, irreducible_heuristic, nonarith_1d })
}

/// Dimension of the unital algebra generated by `gens` (d x d row-major).
/// Equals d^2 exactly when the generators have no common invariant subspace
/// over the complex numbers.
fn algebra_dimension(gens: &[Vec<f64>], d: usize) -> usize {
    let tol = 1e-9;
    let normalize = |m: &[f64]| -> Vec<f64> {
        let s = linalg::frobenius(m);
        m.iter().map(|x| x / s).collect()
    };
    let mut span: Vec<Vec<f64>> = vec![linalg::identity(d)];
    span.extend(gens.iter().map(|m| normalize(m)));
    let mut basis = linalg::orthonormal_basis(&span, tol);
    let mut tmp = vec![0.0; d * d];
    loop {
        let before = basis.len();
        let mut candidates = basis.clone();
        for b in &basis {
            for gm in gens {
                linalg::mat_mul(gm, b, &mut tmp, d);
                candidates.push(normalize(&tmp));
            }
        }
        basis = linalg::orthonormal_basis(&candidates, tol);
        if basis.len() == before || basis.len() == d * d {
            return basis.len();
        }
    }
}

/// Summary of the contraction-expansion checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CeReport {
    pub lyapunov: Estimate,
    pub lyapunov_negative: bool,
    pub alpha_root: Option<f64>,
    /// Tolerance used by the root solver; |log k(alpha_root)| stays below it.
    pub alpha_tol: f64,
    pub log_k_at_root: Option<f64>,
    pub moments_finite: bool,
    /// Hill index of the moment-probe summands (infinite when bounded).
    pub moment_tail_index: f64,
    pub no_fixed_point: bool,
    /// True when the fixed-point verdict is the generic one for a
    /// non-atomic law rather than an exact computation.
    pub fixed_point_generic: bool,
}

/// Exponent slack in the moment probe E(|A|^a gamma(A)^eps + |B|^(a+eps)).
pub const MOMENT_EPS: f64 = 0.1;
const ALPHA_TOL_EXACT: f64 = 1e-6;
const ALPHA_TOL_MC: f64 = 0.05;

/// Aggregates the contraction-expansion checks.
pub fn check_ce(law: &AffineLaw, budget: &SimBudget, rng: &RngStream) -> Result<CeReport> {
    let lyapunov = linrw::estimate_lyapunov(law, budget, &rng.fork("ce-lyapunov"))?;
    let lyapunov_negative = lyapunov.value < 0.0;

    let curve_rng = rng.fork("ce-alpha");
    let exact = linrw::exact_log_k(law, 1.0).is_some();
    let alpha_tol = if exact { ALPHA_TOL_EXACT } else { ALPHA_TOL_MC };
    let (alpha_root, log_k_at_root) = if lyapunov_negative {
        match find_bracket(law, budget, &curve_rng)? {
            Some((lo, hi)) => {
                let sol = linrw::solve_alpha(law, budget, &curve_rng, (lo, hi), alpha_tol)?;
                (Some(sol.alpha), Some(sol.log_k))
            }
            None if exact => (None, None),
            None => return Err(Error::Inconclusive("no sign change of the estimated moment curve on (0, 64]".into())),
        }
    } else {
        (None, None)
    };

    let (moments_finite, moment_tail_index) = match alpha_root {
        Some(alpha) => moment_probe(law, alpha, budget.replicas.max(20_000), &rng.fork("ce-moments")),
        None => (true, f64::INFINITY),
    };

    let (no_fixed_point, fixed_point_generic) = match (law.a_atoms(), law.b_atoms()) {
        (Some(a), Some(b)) => (!has_common_fixed_point(&a, &b, law.dim()), false),
        _ => (true, true),
    };

    Ok(CeReport {
        lyapunov,
        lyapunov_negative,
        alpha_root,
        alpha_tol,
        log_k_at_root,
        moments_finite,
        moment_tail_index,
        no_fixed_point,
        fixed_point_generic,
    })
}

pub(crate) fn find_bracket(law: &AffineLaw, budget: &SimBudget, rng: &RngStream) -> Result<Option<(f64, f64)>> {
    let f = |s: f64| linrw::estimate_k(law, s, budget, rng).map(|k| k.log_k);
    let mut lo = 0.05;
    let mut tries = 0;
    while f(lo)? >= 0.0 {
        lo /= 4.0;
        tries += 1;
        if tries > 6 {
            return Ok(None);
        }
    }
    let mut hi = 0.5;
    while hi <= 64.0 {
        if hi > lo && f(hi)? > 0.0 {
            return Ok(Some((lo, hi)));
        }
        lo = lo.max(hi);
        hi *= 2.0;
    }
    Ok(None)
}

/// gamma(g) = max(|g|, |g^-1|).
fn gamma(a: &[f64], d: usize) -> f64 {
    if d == 1 {
        let x = a[0].abs();
        return x.max(1.0 / x);
    }
    let sv = linalg::singular_values(a, d);
    sv[0].max(1.0 / sv[d - 1])
}

fn moment_probe(law: &AffineLaw, alpha: f64, n: usize, rng: &RngStream) -> (bool, f64) {
    let d = law.dim();
    let mut g = law.stream(rng).generator();
    let mut a = vec![0.0; d * d];
    let mut b = vec![0.0; d];
    let q: Vec<f64> = (0..n)
        .map(|_| {
            law.draw_into(&mut g, &mut a, &mut b);
            linalg::op_norm(&a, d).powf(alpha) * gamma(&a, d).powf(MOMENT_EPS)
                + linalg::euclid(&b).powf(alpha + MOMENT_EPS)
        })
        .collect();
    if q.iter().any(|x| !x.is_finite()) {
        return (false, 0.0);
    }
    match stats::hill(&q, 0.01) {
        Some(h) => (h > 1.2, h),
        None => (true, f64::INFINITY),
    }
}

fn has_common_fixed_point(a: &[(Vec<f64>, f64)], b: &[(Vec<f64>, f64)], d: usize) -> bool {
    // Stack (A_i - I) x = -B_j over the support and solve in least squares.
    let rows = a.len() * b.len() * d;
    let mut m = nalgebra::DMatrix::<f64>::zeros(rows, d);
    let mut rhs = nalgebra::DVector::<f64>::zeros(rows);
    let mut r = 0;
    for (am, _) in a {
        for (bv, _) in b {
            for i in 0..d {
                for j in 0..d {
                    m[(r + i, j)] = am[i * d + j] - if i == j { 1.0 } else { 0.0 };
                }
                rhs[r + i] = -bv[i];
            }
            r += d;
        }
    }
    let svd = m.clone().svd(true, true);
    match svd.solve(&rhs, 1e-12) {
        Ok(x) => (&m * &x - &rhs).norm() < 1e-9,
        Err(_) => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn law(spec: AffineLawSpec) -> AffineLaw {
        AffineLaw::new(spec).unwrap()
    }

    #[test]
    fn two_point_frequencies() {
        let l = law(AffineLawSpec::l2p());
        let mut g = RngStream::new(1, 0).generator();
        let n = 100_000;
        let mut twos = 0;
        for _ in 0..n {
            let (a, b) = l.draw_scalar(&mut g);
            assert_eq!(b, 1.0);
            if a == 2.0 {
                twos += 1;
            } else {
                assert_eq!(a, 0.5);
            }
        }
        assert!((twos as f64 / n as f64 - 1.0 / 3.0).abs() < 0.01);
    }

    #[test]
    fn constant_b_is_constant() {
        let spec =
            AffineLawSpec::scalar(ALaw::ScalarLognormal { mu_log: -0.5, sigma_log: 1.0 }, BLaw::Constant(vec![3.5]));
        let l = law(spec);
        let mut g = RngStream::new(2, 0).generator();
        for _ in 0..1000 {
            assert_eq!(sample_pair(&l, &mut g).b, vec![3.5]);
        }
    }

    #[test]
    fn sampling_is_reproducible() {
        let l = law(AffineLawSpec::l2p());
        let s = RngStream::new(5, 9);
        let mut g1 = s.generator();
        let mut g2 = s.generator();
        for _ in 0..100 {
            assert_eq!(sample_pair(&l, &mut g1), sample_pair(&l, &mut g2));
        }
    }

    #[test]
    fn rejects_bad_specs() {
        let bad_weights = AffineLawSpec::scalar(
            ALaw::FiniteSupport(vec![(vec![vec![2.0]], 0.5), (vec![vec![0.5]], 0.4)]),
            BLaw::Constant(vec![1.0]),
        );
        assert!(matches!(AffineLaw::new(bad_weights), Err(Error::InvalidModel(_))));
        let singular = AffineLawSpec {
            dimension: 2,
            a_law: ALaw::FiniteSupport(vec![(vec![vec![1.0, 2.0], vec![2.0, 4.0]], 1.0)]),
            b_law: BLaw::Constant(vec![1.0, 0.0]),
            seed_domain: 0,
        };
        assert!(matches!(AffineLaw::new(singular), Err(Error::InvalidModel(_))));
        let scalar_in_2d = AffineLawSpec {
            dimension: 2,
            a_law: ALaw::GarchSquared { a: 1.0 },
            b_law: BLaw::Constant(vec![1.0, 0.0]),
            seed_domain: 0,
        };
        assert!(matches!(AffineLaw::new(scalar_in_2d), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn json_round_trip_uses_field_names() {
        let spec = AffineLawSpec::l2p();
        let text = serde_json::to_string(&spec).unwrap();
        assert!(text.contains("\"a_law\"") && text.contains("\"ScalarTwoPoint\""));
        let back: AffineLawSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, spec);
        let fs: AffineLawSpec = serde_json::from_str(
            r#"{"dimension":2,"a_law":{"FiniteSupport":[[[[2,0],[0,0.5]],1.0]]},"b_law":{"Constant":[1,1]}}"#,
        )
        .unwrap();
        assert_eq!(law(fs).a_atoms().unwrap()[0].0, vec![2.0, 0.0, 0.0, 0.5]);
    }

    #[test]
    fn arithmetic_two_point_is_flagged() {
        let v = check_ip(&law(AffineLawSpec::l2p()), 200, &RngStream::new(3, 0)).unwrap();
        assert_eq!(v.nonarith_1d, Some(false));
        assert!(v.proximal_found && v.irreducible_heuristic);
        let ln =
            AffineLawSpec::scalar(ALaw::ScalarLognormal { mu_log: -0.5, sigma_log: 1.0 }, BLaw::Constant(vec![1.0]));
        let v = check_ip(&law(ln), 200, &RngStream::new(3, 0)).unwrap();
        assert_eq!(v.nonarith_1d, Some(true));
    }

    #[test]
    fn continued_fractions() {
        assert!(looks_rational(-1.0));
        assert!(looks_rational(355.0 / 113.0));
        assert!(looks_rational(1234.0 / 9871.0));
        assert!(!looks_rational(3f64.ln() / 2f64.ln()));
        assert!(!looks_rational(std::f64::consts::PI));
    }

    fn rotation_plus_diag() -> AffineLawSpec {
        let t: f64 = 2f64.sqrt();
        AffineLawSpec {
            dimension: 2,
            a_law: ALaw::FiniteSupport(vec![
                (vec![vec![t.cos(), -t.sin()], vec![t.sin(), t.cos()]], 0.5),
                (vec![vec![2.0, 0.0], vec![0.0, 1.0 / 3.0]], 0.5),
            ]),
            b_law: BLaw::Constant(vec![1.0, 0.0]),
            seed_domain: 0,
        }
    }

    #[test]
    fn irrational_rotation_with_diagonal_is_ip() {
        let v = check_ip(&law(rotation_plus_diag()), 100, &RngStream::new(4, 0)).unwrap();
        assert!(v.proximal_found);
        assert!(v.irreducible_heuristic);
        assert_eq!(v.nonarith_1d, None);
    }

    #[test]
    fn diagonal_semigroup_is_reducible() {
        let spec = AffineLawSpec {
            dimension: 2,
            a_law: ALaw::FiniteSupport(vec![
                (vec![vec![2.0, 0.0], vec![0.0, 0.5]], 0.5),
                (vec![vec![0.25, 0.0], vec![0.0, 3.0]], 0.5),
            ]),
            b_law: BLaw::Constant(vec![1.0, 1.0]),
            seed_domain: 0,
        };
        let v = check_ip(&law(spec), 100, &RngStream::new(4, 0)).unwrap();
        assert!(!v.irreducible_heuristic);
        assert!(v.proximal_found);
    }

    #[test]
    fn proximal_is_monotone_in_probe_count() {
        let l = law(rotation_plus_diag());
        let mut seen = false;
        for n in [1, 2, 4, 8, 16, 32] {
            let v = check_ip(&l, n, &RngStream::new(8, 0)).unwrap();
            assert!(!seen || v.proximal_found);
            seen |= v.proximal_found;
        }
    }

    fn small_budget() -> SimBudget {
        SimBudget { path_length: 1000, replicas: 2000, ladder_base: 1 }
    }

    #[test]
    fn ce_on_two_point() {
        let r = check_ce(&law(AffineLawSpec::l2p()), &small_budget(), &RngStream::new(1, 0)).unwrap();
        assert!(r.lyapunov_negative);
        assert!((r.lyapunov.value + 2f64.ln() / 3.0).abs() < 4.0 * r.lyapunov.stderr + 1e-3);
        let alpha = r.alpha_root.unwrap();
        assert!((alpha - 1.0).abs() < 1e-3);
        assert!(r.log_k_at_root.unwrap().abs() <= r.alpha_tol);
        assert!(r.moments_finite);
        assert!(r.no_fixed_point && !r.fixed_point_generic);
    }

    #[test]
    fn pure_contraction_has_no_root() {
        let r = check_ce(&law(AffineLawSpec::deterministic(0.5, 1.0)), &small_budget(), &RngStream::new(1, 0)).unwrap();
        assert!(r.lyapunov_negative);
        assert_eq!(r.alpha_root, None);
    }

    #[test]
    fn origin_is_fixed_when_b_vanishes() {
        let r = check_ce(&law(AffineLawSpec::deterministic(0.5, 0.0)), &small_budget(), &RngStream::new(1, 0)).unwrap();
        assert!(!r.no_fixed_point);
    }
}
