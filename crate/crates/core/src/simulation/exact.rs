use num_bigint::{BigInt, BigUint, Sign};
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{ln_factorial, log_sum_exp};

/// Largest relative error tolerated from cancellation in the float sum.
pub const CANCELLATION_LIMIT: f64 = 1e-6;

/// How a probability was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PmfMethod {
    Float,
    /// Exact integer arithmetic after the float sum lost too much precision.
    BigInt,
}

/// `ln P(exactly m of n urns empty after r throws)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmptyUrnLogPmf {
    pub ln_p: f64,
    pub method: PmfMethod,
}

/// Result of the float inclusion-exclusion sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FloatLogPmf {
    pub ln_p: f64,
    /// Error bound `Σ δ_j |t_j| / |Σ t_j|`, with `δ_j` the rounding error of term `j`.
    pub relative_error: f64,
    pub precision_loss: bool,
}

fn ln_binomial(n: usize, k: usize) -> f64 {
    ln_factorial::<f64>(n) - ln_factorial::<f64>(k) - ln_factorial::<f64>(n - k)
}

fn check(n: usize, m: usize) -> Result<()> {
    if n == 0 || m > n {
        return Err(Error::Domain(format!("need 0 ≤ m ≤ n and n ≥ 1, got n={n}, m={m}")));
    }
    Ok(())
}

/// Cases decided without summation: `Some(ln p)` when the answer is 0 or 1.
fn trivial(n: usize, r: usize, m: usize) -> Option<f64> {
    let k = n - m;
    if r < k || (k == 0 && r > 0) {
        return Some(f64::NEG_INFINITY);
    }
    if r == 0 {
        return Some(if m == n { 0.0 } else { f64::NEG_INFINITY });
    }
    None
}

/// Float evaluation of `C(n,m) Σ_j (−1)^j C(n−m,j) ((n−m−j)/n)^r`.
///
/// Terms are scaled by the largest one and accumulated with Neumaier
/// compensation, and the cancellation is measured so the caller can tell
/// when the result is unreliable.
pub fn float_empty_urn_log_pmf(n: usize, r: usize, m: usize) -> Result<FloatLogPmf> {
    check(n, m)?;
    if let Some(v) = trivial(n, r, m) {
        return Ok(FloatLogPmf { ln_p: v, relative_error: 0.0, precision_loss: false });
    }
    let k = n - m;
    let ln_n = (n as f64).ln();
    // (k − j)^r vanishes at j = k because r ≥ 1 here.
    let logs: Vec<f64> = (0..k)
        .map(|j| ln_binomial(k, j) + r as f64 * (((k - j) as f64).ln() - ln_n))
        .collect();
    // Each exponent carries an absolute error of a few ulps of its largest
    // summand, which becomes a relative error of the term.
    let term_err: Vec<f64> = (0..k)
        .map(|j| 4.0 * f64::EPSILON * (1.0 + ln_binomial(k, j).abs() + r as f64 * (((k - j) as f64).ln() + ln_n)))
        .collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    let mut abs = 0.0f64;
    for (j, &l) in logs.iter().enumerate() {
        let t = if j % 2 == 0 { (l - top).exp() } else { -(l - top).exp() };
        abs += t.abs() * (f64::EPSILON + term_err[j]);
        let s = sum + t;
        comp += if sum.abs() >= t.abs() { (sum - s) + t } else { (t - s) + sum };
        sum = s;
    }
    let total = sum + comp;
    let relative_error = if total > 0.0 { abs / total } else { f64::INFINITY };
    let ln_p = if total > 0.0 { ln_binomial(n, m) + top + total.ln() } else { f64::NEG_INFINITY };
    Ok(FloatLogPmf {
        ln_p,
        relative_error,
        precision_loss: relative_error > CANCELLATION_LIMIT,
    })
}

/// Natural log of a positive big integer.
fn ln_big(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 1000 {
        return x.to_f64().unwrap().ln();
    }
    let shift = bits - 64;
    (x >> shift).to_f64().unwrap().ln() + shift as f64 * std::f64::consts::LN_2
}

/// Exact evaluation: `C(n,m) Σ_j (−1)^j C(n−m,j)(n−m−j)^r / n^r` in integers.
pub fn bigint_empty_urn_log_pmf(n: usize, r: usize, m: usize) -> Result<f64> {
    check(n, m)?;
    if let Some(v) = trivial(n, r, m) {
        return Ok(v);
    }
    let k = n - m;
    let r32 = u32::try_from(r).map_err(|_| Error::Domain(format!("too many throws: {r}")))?;
    let mut binom = BigUint::from(1u32);
    let mut acc = BigInt::zero();
    for j in 0..k {
        let term = BigInt::from_biguint(Sign::Plus, &binom * BigUint::from(k - j).pow(r32));
        if j % 2 == 0 {
            acc += term;
        } else {
            acc -= term;
        }
        binom = binom * BigUint::from(k - j) / BigUint::from(j + 1);
    }
    let acc = match acc.to_biguint() {
        Some(v) if !v.is_zero() => v,
        _ => return Ok(f64::NEG_INFINITY),
    };
    Ok(ln_binomial(n, m) + ln_big(&acc) - r as f64 * (n as f64).ln())
}

/// `ln P(exactly m of n urns empty after r uniform throws)`, from the float
/// sum when it is precise enough and from exact integers otherwise.
pub fn exact_empty_urn_log_pmf(n: usize, r: usize, m: usize) -> Result<EmptyUrnLogPmf> {
    let f = float_empty_urn_log_pmf(n, r, m)?;
    if !f.precision_loss {
        return Ok(EmptyUrnLogPmf { ln_p: f.ln_p, method: PmfMethod::Float });
    }
    Ok(EmptyUrnLogPmf { ln_p: bigint_empty_urn_log_pmf(n, r, m)?, method: PmfMethod::BigInt })
}

/// `P(exactly m of n urns empty after r uniform throws)`.
pub fn exact_empty_urn_pmf(n: usize, r: usize, m: usize) -> Result<f64> {
    Ok(exact_empty_urn_log_pmf(n, r, m)?.ln_p.exp())
}

/// `ln P(lo ≤ number of empty urns ≤ hi)`.
pub fn exact_empty_urn_log_range(n: usize, r: usize, lo: usize, hi: usize) -> Result<f64> {
    if lo > hi || hi > n {
        return Err(Error::Domain(format!("bad range {lo}..={hi} for n={n}")));
    }
    let logs = (lo..=hi)
        .map(|m| exact_empty_urn_log_pmf(n, r, m).map(|v| v.ln_p))
        .collect::<Result<Vec<f64>>>()?;
    Ok(log_sum_exp(&logs))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Empty-urn counts over all `n^r` placements.
    fn enumerate(n: usize, r: usize) -> Vec<f64> {
        let mut hist = vec![0u64; n + 1];
        let total = n.pow(r as u32);
        for code in 0..total {
            let mut used = vec![false; n];
            let mut c = code;
            for _ in 0..r {
                used[c % n] = true;
                c /= n;
            }
            hist[used.iter().filter(|&&u| !u).count()] += 1;
        }
        hist.iter().map(|&h| h as f64 / total as f64).collect()
    }

    #[test]
    fn small_cases() {
        assert_eq!(exact_empty_urn_pmf(2, 1, 1).unwrap(), 1.0);
        assert!((exact_empty_urn_pmf(3, 2, 1).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(exact_empty_urn_pmf(3, 0, 3).unwrap(), 1.0);
        assert_eq!(exact_empty_urn_pmf(3, 1, 0).unwrap(), 0.0);
        assert_eq!(exact_empty_urn_pmf(3, 4, 3).unwrap(), 0.0);
    }

    #[test]
    fn matches_enumeration() {
        for (n, r) in [(3, 3), (4, 5), (5, 4), (6, 7), (5, 9)] {
            let e = enumerate(n, r);
            for (m, &p) in e.iter().enumerate() {
                let got = exact_empty_urn_pmf(n, r, m).unwrap();
                assert!((got - p).abs() < 1e-13, "n={n} r={r} m={m}: {got} vs {p}");
                let big = bigint_empty_urn_log_pmf(n, r, m).unwrap().exp();
                assert!((big - p).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn normalized() {
        let total: f64 = (0..=50).map(|m| exact_empty_urn_pmf(50, 100, m).unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-10, "{total}");
        let total: f64 = (0..=300).map(|m| exact_empty_urn_pmf(300, 450, m).unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-9, "{total}");
    }

    #[test]
    fn cancellation_falls_back_to_integers() {
        let f = float_empty_urn_log_pmf(400, 1200, 60).unwrap();
        assert!(f.precision_loss);
        let e = exact_empty_urn_log_pmf(400, 1200, 60).unwrap();
        assert_eq!(e.method, PmfMethod::BigInt);
        assert!(e.ln_p.is_finite() && e.ln_p < 0.0);
    }

    #[test]
    fn unflagged_float_sums_are_accurate() {
        let mut unflagged = 0;
        for (n, r) in [(20, 30), (40, 60), (60, 50), (100, 150)] {
            for m in (0..n).step_by(3) {
                let f = float_empty_urn_log_pmf(n, r, m).unwrap();
                let b = bigint_empty_urn_log_pmf(n, r, m).unwrap();
                if f.precision_loss || b == f64::NEG_INFINITY {
                    continue;
                }
                unflagged += 1;
                assert!((f.ln_p - b).abs() <= f.relative_error.max(1e-12), "n={n} r={r} m={m}: {} vs {b}", f.ln_p);
            }
        }
        assert!(unflagged > 20);
    }
}
