use serde::{Deserialize, Serialize};

use super::chain::{count_hits, SimConfig};
use crate::scalar::Real;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(hits: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let nt = trials as f64;
    let p = hits as f64 / nt;
    let z2 = z * z;
    let denom = 1.0 + z2 / nt;
    let centre = (p + z2 / (2.0 * nt)) / denom;
    let half = z * (p * (1.0 - p) / nt + z2 / (4.0 * nt * nt)).sqrt() / denom;
    let lo = if hits == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if hits == trials { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

/// Monte Carlo estimate of `−(1/n) log P(event)` at one urn count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentEstimate {
    pub n: usize,
    pub trials: u64,
    pub hits: u64,
    pub probability: f64,
    /// Wilson 95% interval for the probability.
    pub probability_interval: (f64, f64),
    /// `None` when no trial hit the event.
    pub exponent: Option<f64>,
    /// Exponent interval mapped from the probability interval; the upper
    /// end is infinite when the lower probability bound is zero.
    pub exponent_interval: (f64, f64),
}

impl ExponentEstimate {
    pub fn from_counts(n: usize, hits: u64, trials: u64) -> Self {
        let (lo, hi) = wilson_interval(hits, trials, Z95);
        let scale = n as f64;
        let p = if trials == 0 { 0.0 } else { hits as f64 / trials as f64 };
        let to_exp = |q: f64| if q > 0.0 { -q.ln() / scale } else { f64::INFINITY };
        Self {
            n,
            trials,
            hits,
            probability: p,
            probability_interval: (lo, hi),
            exponent: (hits > 0).then(|| to_exp(p)),
            exponent_interval: (to_exp(hi), to_exp(lo)),
        }
    }

    pub fn zero_hits(&self) -> bool {
        self.hits == 0
    }

    /// Whether `value` lies inside the exponent interval.
    pub fn covers(&self, value: f64) -> bool {
        self.exponent_interval.0 <= value && value <= self.exponent_interval.1
    }
}

/// Runs `cfg` at every urn count in `n_list` and estimates the exponent of
/// `event`, which sees the urn count and the terminal counts.
pub fn empirical_exponent<T: Real, F>(cfg: &SimConfig<T>, event: F, n_list: &[usize]) -> Vec<ExponentEstimate>
where
    F: Fn(usize, &[u64]) -> bool + Sync,
{
    n_list
        .iter()
        .map(|&n| {
            let c = cfg.with_n(n);
            let hits = count_hits(&c, |v| event(n, v));
            ExponentEstimate::from_counts(n, hits, c.trials as u64)
        })
        .collect()
}
