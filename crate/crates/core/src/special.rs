//! Poisson probabilities and related special functions, evaluated in log space.

use crate::error::{Error, Result};
use crate::scalar::{count, lit, Real};

const EXACT_FACTORIAL_LIMIT: usize = 30;

/// `ln n!`. Exact product below 30, Stirling series above.
pub fn ln_factorial<T: Real>(n: usize) -> T {
    if n < EXACT_FACTORIAL_LIMIT {
        let mut p = T::one();
        for k in 2..=n {
            p *= count::<T>(k);
        }
        return p.ln();
    }
    let x = count::<T>(n) + T::one();
    let inv = T::one() / x;
    let inv2 = inv * inv;
    // ln Γ(x) with x = n + 1.
    let series = inv
        * (lit::<T>(1.0 / 12.0)
            - inv2
                * (lit::<T>(1.0 / 360.0)
                    - inv2 * (lit::<T>(1.0 / 1260.0) - inv2 * lit::<T>(1.0 / 1680.0))));
    (x - lit(0.5)) * x.ln() - x + lit::<T>(0.5) * (T::TAU()).ln() + series
}

/// Binomial coefficient as a float.
pub fn binomial<T: Real>(n: usize, k: usize) -> T {
    if k > n {
        return T::zero();
    }
    let k = k.min(n - k);
    let mut acc = T::one();
    for j in 0..k {
        acc = acc * count::<T>(n - j) / count::<T>(j + 1);
    }
    acc
}

/// `log P(Y = i)` for `Y ~ Poisson(λ)`.
pub fn poisson_log_pmf<T: Real>(i: usize, lambda: T) -> Result<T> {
    if !(lambda > T::zero()) || !lambda.is_finite() {
        return Err(Error::Domain(format!(
            "Poisson mean must be positive and finite, got {lambda}"
        )));
    }
    Ok(log_pmf_unchecked(i, lambda))
}

fn log_pmf_unchecked<T: Real>(i: usize, lambda: T) -> T {
    -lambda + count::<T>(i) * lambda.ln() - ln_factorial::<T>(i)
}

/// `P(Y = i)` for `Y ~ Poisson(λ)`, with `λ = 0` giving the point mass at 0.
pub fn poisson_pmf<T: Real>(i: usize, lambda: T) -> T {
    if lambda <= T::zero() {
        return if i == 0 { T::one() } else { T::zero() };
    }
    log_pmf_unchecked(i, lambda).exp()
}

/// `log P(Y = i)` allowing `λ = 0` (returns `-∞` off the atom).
pub fn poisson_log_pmf_total<T: Real>(i: usize, lambda: T) -> T {
    if lambda <= T::zero() {
        return if i == 0 { T::zero() } else { T::neg_infinity() };
    }
    log_pmf_unchecked(i, lambda)
}

/// `log P(Y > m)` for `Y ~ Poisson(λ)`. Negative `m` gives 0.
pub fn ln_poisson_sf<T: Real>(m: i64, lambda: T) -> T {
    if m < 0 {
        return T::zero();
    }
    if lambda <= T::zero() {
        return T::neg_infinity();
    }
    let m = m as usize;
    if count::<T>(m + 1) > lambda {
        // P(Y > m) = pmf(m+1) * (1 + λ/(m+2) + λ²/((m+2)(m+3)) + ...)
        let head = log_pmf_unchecked(m + 1, lambda);
        let mut term = T::one();
        let mut sum = T::one();
        let mut k = m + 2;
        loop {
            term = term * lambda / count::<T>(k);
            sum += term;
            if term <= sum * T::epsilon() {
                break;
            }
            k += 1;
        }
        head + sum.ln()
    } else {
        (-poisson_cdf_direct(m, lambda)).ln_1p()
    }
}

/// `P(Y > m)`.
pub fn poisson_sf<T: Real>(m: i64, lambda: T) -> T {
    ln_poisson_sf(m, lambda).exp()
}

/// `P(Y ≤ m)`.
pub fn poisson_cdf<T: Real>(m: i64, lambda: T) -> T {
    if m < 0 {
        return T::zero();
    }
    if lambda <= T::zero() {
        return T::one();
    }
    let mu = m as usize;
    if count::<T>(mu + 1) > lambda {
        -(ln_poisson_sf(m, lambda).exp_m1())
    } else {
        poisson_cdf_direct(mu, lambda)
    }
}

/// `P(Y ≤ m)` by the descending series `pmf(m)(1 + m/λ + m(m-1)/λ² + ...)`,
/// accurate when `m < λ`.
fn poisson_cdf_direct<T: Real>(m: usize, lambda: T) -> T {
    let head = log_pmf_unchecked(m, lambda);
    let mut term = T::one();
    let mut sum = T::one();
    let mut j = m;
    while j > 0 {
        term = term * count::<T>(j) / lambda;
        sum += term;
        if term <= sum * T::epsilon() {
            break;
        }
        j -= 1;
    }
    (head + sum.ln()).exp()
}

/// `log Σ exp(v)`, returning `-∞` for an empty or all `-∞` input.
pub fn log_sum_exp<T: Real>(values: &[T]) -> T {
    let max = values
        .iter()
        .copied()
        .fold(T::neg_infinity(), |a, b| if b > a { b } else { a });
    if max == T::neg_infinity() {
        return max;
    }
    if max == T::infinity() {
        return max;
    }
    let s: T = values.iter().map(|&v| (v - max).exp()).sum();
    max + s.ln()
}

/// `x log(x / y)` with `0 log 0 = 0` and `+∞` when `x > 0 = y`.
pub fn xlogx_over_y<T: Real>(x: T, y: T) -> T {
    if x <= T::zero() {
        T::zero()
    } else if y <= T::zero() {
        T::infinity()
    } else {
        x * (x / y).ln()
    }
}
