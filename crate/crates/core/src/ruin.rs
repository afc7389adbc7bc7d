//! Hitting times of dilated target sets, their exponential limit, and the
//! escape probabilities of the linear walk from a target set.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, VectorNorm};
use crate::model::AffineLaw;
use crate::rng::{self, Generator, RngStream};
use crate::stats::{self, Estimate};
use crate::tail::{self, TailFit};

pub const CENSOR_FRACTION_MAX: f64 = 0.05;
pub const MIN_ACCEPTANCE: f64 = 1e-4;

/// Subset of {|v| > 1}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TargetSet {
    /// inner < |v| (<= outer when given).
    Annulus { inner: f64, outer: Option<f64> },
    /// |v| > radius and the angle between v and `direction` at most
    /// `half_angle` radians.
    Cone { direction: Vec<f64>, half_angle: f64, radius: f64 },
}

impl TargetSet {
    /// The full complement of the unit ball.
    pub fn exterior() -> Self {
        Self::Annulus { inner: 1.0, outer: None }
    }

    /// The ray through `direction` beyond radius 1 (a half-line in d = 1).
    pub fn half_line(direction: Vec<f64>) -> Self {
        Self::Cone { direction, half_angle: 0.25 * std::f64::consts::PI, radius: 1.0 }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            Self::Annulus { inner, outer } => {
                if !(*inner >= 1.0) || outer.is_some_and(|o| !(o > *inner)) {
                    return Err(Error::InvalidInput(format!("annulus ({inner}, {outer:?}) must lie in |v| > 1")));
                }
            }
            Self::Cone { direction, half_angle, radius } => {
                if direction.len() != dim || linalg::euclid(direction) == 0.0 {
                    return Err(Error::DimensionMismatch("cone direction".into()));
                }
                if !(*radius >= 1.0) || !(*half_angle > 0.0) {
                    return Err(Error::InvalidInput("cone needs radius >= 1 and a positive angle".into()));
                }
            }
        }
        Ok(())
    }

    /// Indicator of `v` in the set, radius measured with `norm`.
    #[inline]
    pub fn contains(&self, v: &[f64], norm: VectorNorm) -> bool {
        let r = norm.of(v);
        match self {
            Self::Annulus { inner, outer } => r > *inner && outer.is_none_or(|o| r <= o),
            Self::Cone { direction, half_angle, radius } => {
                if r <= *radius {
                    return false;
                }
                let dot: f64 = v.iter().zip(direction).map(|(a, b)| a * b).sum();
                let cos = dot / (linalg::euclid(v) * linalg::euclid(direction));
                cos >= half_angle.cos()
            }
        }
    }

    /// Indicator of `v` in t * set.
    #[inline]
    pub fn contains_scaled(&self, v: &[f64], t: f64, norm: VectorNorm, buf: &mut [f64]) -> bool {
        for (b, x) in buf.iter_mut().zip(v) {
            *b = x / t;
        }
        self.contains(buf, norm)
    }
}

/// First-passage times into t * A.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HittingTimeSample {
    pub t: f64,
    /// tau per replica; censored replicas carry the horizon.
    pub times: Vec<u64>,
    pub censored_flags: Vec<bool>,
    pub censored: usize,
    pub horizon: u64,
}

impl HittingTimeSample {
    /// CSV with columns replica, tau, censored.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["replica", "tau", "censored"])?;
        for (i, (t, c)) in self.times.iter().zip(&self.censored_flags).enumerate() {
            w.write_record([i.to_string(), t.to_string(), (*c as u8).to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Horizon of 20 expected waiting times 1 / (c theta t^-alpha / alpha).
pub fn default_horizon(fit: &TailFit, theta: f64, t: f64) -> u64 {
    let rate = fit.c * theta * t.powf(-fit.alpha) / fit.alpha;
    (20.0 / rate).ceil().min(u64::MAX as f64 / 2.0) as u64
}

/// Simulates X_n^x until it enters t * target.
#[allow(clippy::too_many_arguments)]
pub fn hitting_times(
    law: &AffineLaw,
    x: &[f64],
    target: &TargetSet,
    t: f64,
    batch: usize,
    horizon: u64,
    norm: VectorNorm,
    rng: &RngStream,
) -> Result<HittingTimeSample> {
    let d = law.dim();
    if x.len() != d {
        return Err(Error::DimensionMismatch("start point".into()));
    }
    if !(t >= 1.0) {
        return Err(Error::InvalidInput(format!("level t = {t} must be >= 1")));
    }
    target.validate(d)?;
    let out: Vec<(u64, bool)> =
        rng::replicate(&law.stream(rng), batch, |_, g| first_passage(law, x, target, t, horizon, norm, g));
    let censored = out.iter().filter(|o| o.1).count();
    if censored == batch {
        return Err(Error::AllCensored(batch));
    }
    Ok(HittingTimeSample {
        t,
        times: out.iter().map(|o| o.0).collect(),
        censored_flags: out.iter().map(|o| o.1).collect(),
        censored,
        horizon,
    })
}

fn first_passage(
    law: &AffineLaw,
    x: &[f64],
    target: &TargetSet,
    t: f64,
    horizon: u64,
    norm: VectorNorm,
    g: &mut Generator,
) -> (u64, bool) {
    let d = law.dim();
    let mut cur = x.to_vec();
    let mut next = vec![0.0; d];
    let mut a = vec![0.0; d * d];
    let mut b = vec![0.0; d];
    let mut buf = vec![0.0; d];
    for k in 1..=horizon {
        if d == 1 {
            let (a1, b1) = law.draw_scalar(g);
            cur[0] = a1 * cur[0] + b1;
        } else {
            law.draw_into(g, &mut a, &mut b);
            linalg::mat_vec(&a, &cur, &mut next);
            for i in 0..d {
                cur[i] = next[i] + b[i];
            }
        }
        if target.contains_scaled(&cur, t, norm, &mut buf) {
            return (k, false);
        }
    }
    (horizon, true)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpFit {
    pub rate: Estimate,
    pub ks_distance: f64,
    pub censor_bias: bool,
}

/// Exponential fit of t^-alpha tau: rate = events / exposure.
pub fn exp_fit(sample: &HittingTimeSample, alpha: f64) -> Result<ExpFit> {
    let scale = sample.t.powf(-alpha);
    let s: Vec<f64> = sample.times.iter().map(|&k| k as f64 * scale).collect();
    let events = sample.times.len() - sample.censored;
    if events == 0 {
        return Err(Error::AllCensored(sample.times.len()));
    }
    let exposure: f64 = s.iter().sum();
    let rate = events as f64 / exposure;
    let ks = stats::ks_one_sample(&s, |x| 1.0 - (-rate * x).exp());
    Ok(ExpFit {
        rate: Estimate::new(rate, rate / (events as f64).sqrt()),
        ks_distance: ks,
        censor_bias: sample.censored as f64 > CENSOR_FRACTION_MAX * sample.times.len() as f64,
    })
}

/// Escape characteristics of a target set under the linear walk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SetTheta {
    /// P{S_i y not in A for all i >= 1} for y ~ Lambda_1 conditioned on A.
    pub theta_a: Estimate,
    /// lambda0_a * theta_a, the capacity of A; the hitting rate of tA is
    /// c gamma_a t^-alpha / alpha.
    pub gamma_a: Estimate,
    /// Lambda_0(A) as the acceptance rate of Lambda_1 proposals.
    pub lambda0_a: Estimate,
    pub capped: usize,
}

pub fn theta_of_set(
    law: &AffineLaw,
    fit: &TailFit,
    target: &TargetSet,
    count: usize,
    horizon_cap: usize,
    eps_stop: f64,
    rng: &RngStream,
) -> Result<SetTheta> {
    let d = law.dim();
    target.validate(d)?;
    let max_tries = (1.0 / MIN_ACCEPTANCE) as u64;
    let out: Vec<Result<(u64, bool, bool)>> = rng::replicate(&law.stream(rng), count, |_, g| {
        let mut y = vec![0.0; d];
        let mut tries = 0u64;
        loop {
            tail::draw_lambda1(fit, g, &mut y)?;
            tries += 1;
            if target.contains(&y, fit.norm) {
                break;
            }
            if tries >= max_tries {
                return Err(Error::RejectionStall { rate: 0.0 });
            }
        }
        let mut next = vec![0.0; d];
        let mut a = vec![0.0; d * d];
        let mut b = vec![0.0; d];
        for _ in 0..horizon_cap {
            law.draw_into(g, &mut a, &mut b);
            linalg::mat_vec(&a, &y, &mut next);
            std::mem::swap(&mut y, &mut next);
            if target.contains(&y, fit.norm) {
                return Ok((tries, false, false));
            }
            if fit.norm.of(&y) < eps_stop {
                return Ok((tries, true, false));
            }
        }
        Ok((tries, true, true))
    });
    let out: Vec<(u64, bool, bool)> = out.into_iter().collect::<Result<_>>()?;
    let tries: u64 = out.iter().map(|o| o.0).sum();
    let acceptance = count as f64 / tries as f64;
    if acceptance < MIN_ACCEPTANCE {
        return Err(Error::RejectionStall { rate: acceptance });
    }
    let escapes = out.iter().filter(|o| o.1).count();
    let theta_a = stats::binomial(escapes, count);
    let lambda0 = Estimate::new(acceptance, (acceptance * (1.0 - acceptance) / tries as f64).sqrt());
    let gamma = lambda0.value * theta_a.value;
    let gamma_se = gamma
        * ((theta_a.stderr / theta_a.value.max(1e-300)).powi(2) + (lambda0.stderr / lambda0.value).powi(2)).sqrt();
    Ok(SetTheta {
        theta_a,
        gamma_a: Estimate::new(gamma, gamma_se),
        lambda0_a: lambda0,
        capped: out.iter().filter(|o| o.2).count(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extremal::{self, WalkOptions};
    use crate::model::AffineLawSpec;
    use rand::Rng;

    fn l2p() -> AffineLaw {
        AffineLaw::new(AffineLawSpec::l2p()).unwrap()
    }

    #[test]
    fn target_indicators() {
        let e = TargetSet::exterior();
        assert!(e.contains(&[1.5], VectorNorm::Euclidean));
        assert!(!e.contains(&[0.5], VectorNorm::Euclidean));
        let c = TargetSet::half_line(vec![1.0]);
        assert!(c.contains(&[2.0], VectorNorm::Euclidean));
        assert!(!c.contains(&[-2.0], VectorNorm::Euclidean));
        let cone = TargetSet::Cone { direction: vec![1.0, 0.0], half_angle: 0.1, radius: 1.0 };
        assert!(cone.contains(&[3.0, 0.2], VectorNorm::Euclidean));
        assert!(!cone.contains(&[3.0, 1.0], VectorNorm::Euclidean));
        assert!(TargetSet::Annulus { inner: 0.5, outer: None }.validate(1).is_err());
    }

    #[test]
    fn immediate_hit_below_the_median() {
        let s = hitting_times(
            &l2p(),
            &[0.0],
            &TargetSet::exterior(),
            1.0,
            100,
            1000,
            VectorNorm::Euclidean,
            &RngStream::new(1, 0),
        )
        .unwrap();
        // X_1 = 1 + A X_0 >= 1 and X_2 > 1 always
        assert!(s.times.iter().all(|&k| k <= 2));
        assert_eq!(s.censored, 0);
    }

    #[test]
    fn smaller_targets_are_hit_later() {
        let rng = RngStream::new(2, 0);
        let full =
            hitting_times(&l2p(), &[0.0], &TargetSet::exterior(), 50.0, 200, 1_000_000, VectorNorm::Euclidean, &rng)
                .unwrap();
        let part = TargetSet::Annulus { inner: 2.0, outer: None };
        let sub = hitting_times(&l2p(), &[0.0], &part, 50.0, 200, 1_000_000, VectorNorm::Euclidean, &rng).unwrap();
        assert!(full.times.iter().zip(&sub.times).all(|(a, b)| a <= b));
    }

    #[test]
    fn all_censored() {
        let r = hitting_times(
            &l2p(),
            &[0.0],
            &TargetSet::exterior(),
            1e12,
            5,
            10,
            VectorNorm::Euclidean,
            &RngStream::new(1, 0),
        );
        assert!(matches!(r, Err(Error::AllCensored(5))));
    }

    #[test]
    fn exponential_fit_on_synthetic_times() {
        let mut g = RngStream::new(3, 0).generator();
        // t = 1000, alpha = 1: times of order 1e3 * Exp(2)
        let times: Vec<u64> =
            (0..1000).map(|_| ((-(1.0 - g.random::<f64>()).ln() / 2.0) * 1e6).ceil() as u64).collect();
        let s = HittingTimeSample { t: 1e6, censored_flags: vec![false; 1000], times, censored: 0, horizon: u64::MAX };
        let f = exp_fit(&s, 1.0).unwrap();
        assert!((f.rate.value / 2.0 - 1.0).abs() <= 0.05 + 3.0 * f.rate.stderr / 2.0, "{f:?}");
        assert!(f.ks_distance <= 0.05);
        let flat = HittingTimeSample {
            t: 1.0,
            censored_flags: vec![false; 100],
            times: vec![5; 100],
            censored: 0,
            horizon: 10,
        };
        assert!(exp_fit(&flat, 1.0).unwrap().ks_distance > 0.3);
    }

    #[test]
    fn exterior_reduces_to_the_extremal_index() {
        let law = l2p();
        let fit = TailFit::scalar(1.0, 1.0).with_signs(1.0, 0.0);
        let opts = WalkOptions::default();
        let s = theta_of_set(
            &law,
            &fit,
            &TargetSet::exterior(),
            opts.count,
            opts.horizon_cap,
            opts.eps_stop,
            &RngStream::new(4, 0),
        )
        .unwrap();
        let t = extremal::theta_theory(&law, &fit, &opts, &RngStream::new(5, 0)).unwrap();
        assert!(s.theta_a.agrees_with(&t.theta, 3.0));
        assert_eq!(s.lambda0_a.value, 1.0);
        let cone =
            theta_of_set(&law, &fit, &TargetSet::half_line(vec![1.0]), 50_000, 100_000, 1e-3, &RngStream::new(6, 0))
                .unwrap();
        assert!(cone.gamma_a.value <= t.theta.value + 2.0 * t.theta.stderr.hypot(cone.gamma_a.stderr));
    }

    #[test]
    fn monotone_walk_never_returns() {
        let law = AffineLaw::new(AffineLawSpec::deterministic(0.5, 1.0)).unwrap();
        let fit = TailFit::scalar(1.0, 1.0);
        let s = theta_of_set(
            &law,
            &fit,
            &TargetSet::Annulus { inner: 1.0, outer: None },
            1000,
            1000,
            1e-3,
            &RngStream::new(1, 0),
        );
        // A = 1/2 re-enters |v| > 1 whenever |v| > 2
        let s = s.unwrap();
        assert!((s.theta_a.value - 0.5).abs() < 0.06);
        let far = theta_of_set(
            &law,
            &fit,
            &TargetSet::Annulus { inner: 1.0, outer: Some(2.0) },
            1000,
            1000,
            1e-3,
            &RngStream::new(1, 0),
        )
        .unwrap();
        assert_eq!(far.theta_a.value, 1.0);
    }

    #[test]
    fn capacity_is_monotone() {
        let law = l2p();
        let fit = TailFit::scalar(1.0, 1.0).with_signs(1.0, 0.0);
        let small = theta_of_set(
            &law,
            &fit,
            &TargetSet::Annulus { inner: 1.0, outer: Some(4.0) },
            50_000,
            100_000,
            1e-3,
            &RngStream::new(7, 0),
        )
        .unwrap();
        let big =
            theta_of_set(&law, &fit, &TargetSet::exterior(), 50_000, 100_000, 1e-3, &RngStream::new(8, 0)).unwrap();
        assert!(small.gamma_a.value <= big.gamma_a.value + 2.0 * small.gamma_a.stderr.hypot(big.gamma_a.stderr));
    }
}
