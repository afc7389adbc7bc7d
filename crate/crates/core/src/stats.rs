//! Shared summary statistics and goodness-of-fit distances.

use std::fmt;

use serde::{Deserialize, Serialize};

/// A point estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn new(value: f64, stderr: f64) -> Self {
        Self { value, stderr }
    }

    pub fn exact(value: f64) -> Self {
        Self { value, stderr: 0.0 }
    }

    /// True when `other` lies within `k` combined standard errors.
    pub fn agrees_with(&self, other: &Estimate, k: f64) -> bool {
        (self.value - other.value).abs() <= k * self.stderr.hypot(other.stderr)
    }
}

/// `value +- stderr`, with any precision applied to both.
impl fmt::Display for Estimate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match f.precision() {
            Some(p) => write!(f, "{:.p$} +- {:.p$}", self.value, self.stderr),
            None => write!(f, "{} +- {}", self.value, self.stderr),
        }
    }
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample mean with the standard error of the mean.
pub fn mean_se(x: &[f64]) -> Estimate {
    let n = x.len() as f64;
    let m = mean(x);
    if x.len() < 2 {
        return Estimate::new(m, f64::NAN);
    }
    let var = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
    Estimate::new(m, (var / n).sqrt())
}

pub fn binomial(successes: usize, trials: usize) -> Estimate {
    let p = successes as f64 / trials as f64;
    Estimate::new(p, (p * (1.0 - p) / trials as f64).sqrt())
}

pub fn sorted(x: &[f64]) -> Vec<f64> {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Linear-interpolated quantile of an ascending sample.
pub fn quantile_sorted(s: &[f64], p: f64) -> f64 {
    let n = s.len();
    if n == 1 {
        return s[0];
    }
    let h = p.clamp(0.0, 1.0) * (n - 1) as f64;
    let i = h.floor() as usize;
    if i + 1 >= n {
        return s[n - 1];
    }
    s[i] + (h - i as f64) * (s[i + 1] - s[i])
}

pub fn median(x: &[f64]) -> f64 {
    quantile_sorted(&sorted(x), 0.5)
}

/// Hill estimate on the top ceil(k_frac N) order statistics of positive data.
/// None when fewer than two usable order statistics or the top is flat.
pub fn hill(x: &[f64], k_frac: f64) -> Option<f64> {
    let mut v: Vec<f64> = x.iter().copied().filter(|v| *v > 0.0).collect();
    let k = ((k_frac * v.len() as f64).ceil() as usize).min(v.len().saturating_sub(1));
    if k < 2 {
        return None;
    }
    v.select_nth_unstable_by(k, |a, b| b.total_cmp(a));
    let pivot = v[k];
    let s: f64 = v[..k].iter().map(|x| (x / pivot).ln()).sum();
    if s <= 0.0 || !s.is_finite() {
        return None;
    }
    Some(k as f64 / s)
}

/// Kolmogorov distance between the empirical law of `sample` and `cdf`.
pub fn ks_one_sample(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let s = sorted(sample);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let a = sorted(a);
    let b = sorted(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Ordinary least squares y = intercept + slope x; returns (slope, intercept, slope stderr).
pub fn ols(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = mean(x);
    let my = mean(y);
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let se = if x.len() > 2 { (rss / (n - 2.0) / sxx).sqrt() } else { f64::NAN };
    (slope, intercept, se)
}

/// Least-squares nonincreasing fit (pool adjacent violators, equal
/// weights). Preserves the total.
pub fn isotonic_nonincreasing(y: &[f64]) -> Vec<f64> {
    // blocks of (sum, count)
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(y.len());
    for &v in y {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (s1, c1) = blocks[blocks.len() - 2];
            let (s2, c2) = blocks[blocks.len() - 1];
            if s1 / c1 as f64 >= s2 / c2 as f64 {
                break;
            }
            blocks.pop();
            *blocks.last_mut().unwrap() = (s1 + s2, c1 + c2);
        }
    }
    blocks.into_iter().flat_map(|(s, c)| std::iter::repeat_n(s / c as f64, c)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn estimate_display() {
        assert_eq!(format!("{:.2}", Estimate::new(0.1234, 0.01)), "0.12 +- 0.01");
        assert_eq!(Estimate::exact(2.0).to_string(), "2 +- 0");
    }

    #[test]
    fn ks_two_sample_identical_is_zero() {
        let a = [1.0, 2.0, 3.0];
        assert_eq!(ks_two_sample(&a, &a), 0.0);
        assert_eq!(ks_two_sample(&[1.0, 2.0], &[3.0, 4.0]), 1.0);
    }

    #[test]
    fn ks_uniform_grid() {
        let x: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
        assert!((ks_one_sample(&x, |t| t) - 0.005).abs() < 1e-12);
    }

    #[test]
    fn ols_recovers_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.5 * v).collect();
        let (s, i, _) = ols(&x, &y);
        assert!((s + 0.5).abs() < 1e-12 && (i - 2.0).abs() < 1e-12);
    }

    #[test]
    fn quantiles() {
        let s = [0.0, 1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&s, 0.5), 2.0);
        assert_eq!(quantile_sorted(&s, 0.125), 0.5);
    }

    #[test]
    fn isotonic_pools_violators() {
        assert_eq!(isotonic_nonincreasing(&[3.0, 1.0, 2.0, 0.0]), vec![3.0, 1.5, 1.5, 0.0]);
        assert_eq!(isotonic_nonincreasing(&[1.0, 2.0, 3.0]), vec![2.0, 2.0, 2.0]);
        let y = [0.5, 0.2, 0.25, 0.05, 0.0];
        let f = isotonic_nonincreasing(&y);
        assert!(f.windows(2).all(|w| w[1] <= w[0]));
        assert!((f.iter().sum::<f64>() - y.iter().sum::<f64>()).abs() < 1e-15);
    }
}
