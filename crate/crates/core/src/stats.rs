//! Small statistics toolkit: compensated sums, Wilson intervals and the
//! goodness-of-fit tests used by the property suites.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{NppError, Result};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Neumaier-compensated sum.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

pub fn mean(values: &[f64]) -> f64 {
    compensated_sum(values.iter().copied()) / values.len() as f64
}

/// Streaming mean and variance (Welford).
#[derive(Debug, Clone, Copy, Default)]
pub struct RunningMoments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl RunningMoments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    /// Standard error of the mean.
    pub fn sem(&self) -> f64 {
        (self.variance() / self.n.max(1) as f64).sqrt()
    }
}

/// Mean with a normal-approximation confidence band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanCI {
    pub mean: f64,
    /// Standard error of the mean.
    pub sem: f64,
    pub lo: f64,
    pub hi: f64,
    pub n: u64,
}

impl MeanCI {
    /// Deterministic in the order of `values` (compensated two-pass).
    pub fn from_samples(values: &[f64]) -> Self {
        let n = values.len() as u64;
        let m = mean(values);
        let var = if n < 2 {
            0.0
        } else {
            compensated_sum(values.iter().map(|v| (v - m) * (v - m))) / (n - 1) as f64
        };
        let sem = (var / n.max(1) as f64).sqrt();
        MeanCI {
            mean: m,
            sem,
            lo: m - Z95 * sem,
            hi: m + Z95 * sem,
            n,
        }
    }

    /// `|mean - target| <= k * sem`.
    pub fn within_sigmas(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.sem
    }
}

/// Binomial proportion with a Wilson 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateCI {
    pub successes: u64,
    pub trials: u64,
    pub point: f64,
    pub lo: f64,
    pub hi: f64,
}

impl EstimateCI {
    pub fn wilson(successes: u64, trials: u64) -> Result<Self> {
        if trials == 0 {
            return Err(NppError::param("trials", "empty sample"));
        }
        if successes > trials {
            return Err(NppError::param("successes", "exceeds trials"));
        }
        let n = trials as f64;
        let p = successes as f64 / n;
        let z2 = Z95 * Z95;
        let denom = 1.0 + z2 / n;
        let center = (p + z2 / (2.0 * n)) / denom;
        let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
        // Clamp against round-off so that lo <= point <= hi always holds.
        let lo = (center - half).clamp(0.0, p);
        let hi = (center + half).clamp(p, 1.0);
        Ok(EstimateCI {
            successes,
            trials,
            point: p,
            lo,
            hi,
        })
    }
}

pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of an empty sample");
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Ordinary least squares slope and intercept of `y` on `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let mx = mean(x);
    let my = mean(y);
    let sxy = compensated_sum(x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)));
    let sxx = compensated_sum(x.iter().map(|a| (a - mx) * (a - mx)));
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Asymptotic Kolmogorov distribution tail `P(K > lambda)`.
fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// One-sample Kolmogorov-Smirnov p-value against `N(0, 1)`.
pub fn ks_test_standard_normal(sample: &[f64]) -> f64 {
    let normal = Normal::standard();
    let mut v = sample.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in v.iter().enumerate() {
        let f = normal.cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    let sn = n.sqrt();
    kolmogorov_tail((sn + 0.12 + 0.11 / sn) * d)
}

/// Chi-square goodness-of-fit p-value of observed counts `counts[k]`
/// against `Binomial(n, p)`. Adjacent cells are pooled until each expected
/// count reaches `min_expected`.
pub fn chi_square_binomial_gof(counts: &[u64], n: usize, p: f64, min_expected: f64) -> f64 {
    let total: u64 = counts.iter().sum();
    let pmf = binomial_pmf(n, p);
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut obs, mut exp) = (0.0, 0.0);
    for (k, &pk) in pmf.iter().enumerate() {
        obs += counts.get(k).copied().unwrap_or(0) as f64;
        exp += pk * total as f64;
        if exp >= min_expected {
            cells.push((obs, exp));
            obs = 0.0;
            exp = 0.0;
        }
    }
    if exp > 0.0 || obs > 0.0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += obs;
                last.1 += exp;
            }
            None => cells.push((obs, exp)),
        }
    }
    if cells.len() < 2 {
        return 1.0;
    }
    let stat: f64 = cells.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    let dof = (cells.len() - 1) as f64;
    1.0 - ChiSquared::new(dof).expect("positive dof").cdf(stat)
}

pub fn binomial_pmf(n: usize, p: f64) -> Vec<f64> {
    let mut out = vec![0.0; n + 1];
    let mut log_c = 0.0f64;
    for (k, slot) in out.iter_mut().enumerate() {
        if k > 0 {
            log_c += ((n - k + 1) as f64).ln() - (k as f64).ln();
        }
        let lp = if k == 0 { 0.0 } else { k as f64 * p.ln() };
        let lq = if n - k == 0 { 0.0 } else { (n - k) as f64 * (1.0 - p).ln() };
        *slot = (log_c + lp + lq).exp();
    }
    out
}
