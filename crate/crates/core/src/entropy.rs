//! Relative entropy on the simplex and on count distributions with Poisson tails.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{count, lit, Real};
use crate::special::{ln_poisson_sf, poisson_log_pmf_total, poisson_pmf, xlogx_over_y};

/// `D(θ‖γ) = Σ θ_i log(θ_i/γ_i)` with `0 log 0 = 0` and `+∞` on support violations.
///
/// # Panics
/// If the slices differ in length.
pub fn relative_entropy_slice<T: Real>(theta: &[T], gamma: &[T]) -> T {
    assert_eq!(theta.len(), gamma.len(), "relative entropy needs equal lengths");
    theta
        .iter()
        .zip(gamma)
        .map(|(&t, &g)| xlogx_over_y(t, g))
        .sum()
}

/// Relative entropy between two occupancy vectors of the same capacity.
pub fn relative_entropy<T: Real>(
    theta: &crate::SimplexVector<T>,
    gamma: &crate::SimplexVector<T>,
) -> T {
    relative_entropy_slice(theta.entries(), gamma.entries())
}

/// Distribution on `{0, 1, 2, …}` with explicit head entries `π_0..π_{N-1}`
/// and tail `π_i = C·𝒫_i(λ)` for `i ≥ N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountDistribution<T> {
    head: Vec<T>,
    tail_scale: T,
    tail_rate: T,
}

impl<T: Real> CountDistribution<T> {
    /// Validates nonnegativity and total mass.
    pub fn new(head: Vec<T>, tail_scale: T, tail_rate: T) -> Result<Self> {
        if head.iter().any(|&v| !(v >= T::zero()) || !v.is_finite()) {
            return Err(Error::Domain("head entries must be finite and nonnegative".into()));
        }
        if !(tail_scale >= T::zero()) || !(tail_rate > T::zero()) {
            return Err(Error::Domain(format!(
                "tail needs C ≥ 0 and rate > 0, got C={tail_scale}, rate={tail_rate}"
            )));
        }
        let d = Self { head, tail_scale, tail_rate };
        let tol = lit::<T>(1e-10f64.max(T::SIMPLEX_TOL));
        let m = d.mass();
        if (m - T::one()).abs() > tol {
            return Err(Error::Domain(format!("distribution has mass {m}")));
        }
        Ok(d)
    }

    pub(crate) fn new_unchecked(head: Vec<T>, tail_scale: T, tail_rate: T) -> Self {
        Self { head, tail_scale, tail_rate }
    }

    /// `𝒫(β)`, the Poisson distribution with mean β.
    pub fn poisson(beta: T) -> Self {
        Self { head: Vec::new(), tail_scale: T::one(), tail_rate: beta }
    }

    /// Finite distribution with no tail.
    pub fn finite(head: Vec<T>) -> Result<Self> {
        Self::new(head, T::zero(), T::one())
    }

    /// Default head length `⌈λ + 12√λ + 40⌉` for a tail rate λ.
    pub fn default_truncation(rate: T) -> usize {
        let r = rate.max(T::zero());
        (r + lit::<T>(12.0) * r.sqrt() + lit(40.0)).ceil().to_usize().unwrap_or(40)
    }

    pub fn head(&self) -> &[T] {
        &self.head
    }

    pub fn tail_scale(&self) -> T {
        self.tail_scale
    }

    pub fn tail_rate(&self) -> T {
        self.tail_rate
    }

    /// Index where the analytic tail starts.
    pub fn truncation(&self) -> usize {
        self.head.len()
    }

    /// `π_i`.
    pub fn entry(&self, i: usize) -> T {
        if i < self.head.len() {
            self.head[i]
        } else if self.tail_scale == T::zero() {
            T::zero()
        } else {
            self.tail_scale * poisson_pmf(i, self.tail_rate)
        }
    }

    fn tail_moment0(&self) -> T {
        if self.tail_scale == T::zero() {
            return T::zero();
        }
        let n = self.head.len() as i64;
        self.tail_scale * ln_poisson_sf(n - 1, self.tail_rate).exp()
    }

    fn tail_moment1(&self) -> T {
        if self.tail_scale == T::zero() {
            return T::zero();
        }
        let n = self.head.len() as i64;
        self.tail_scale * self.tail_rate * ln_poisson_sf(n - 2, self.tail_rate).exp()
    }

    /// Total mass (head plus analytic tail).
    pub fn mass(&self) -> T {
        self.head.iter().copied().sum::<T>() + self.tail_moment0()
    }

    /// `Σ i π_i` (head plus analytic tail).
    pub fn mean(&self) -> T {
        self.head
            .iter()
            .enumerate()
            .map(|(i, &p)| count::<T>(i) * p)
            .sum::<T>()
            + self.tail_moment1()
    }

    /// `D(self ‖ other)` with exact tail contributions.
    pub fn kl(&self, other: &Self) -> T {
        let h = self.head.len().max(other.head.len());
        let mut total = T::zero();
        for i in 0..h {
            total += xlogx_over_y(self.entry(i), other.entry(i));
        }
        let cp = self.tail_scale;
        if cp == T::zero() {
            return total;
        }
        let cq = other.tail_scale;
        if cq == T::zero() {
            return T::infinity();
        }
        let (lp, lq) = (self.tail_rate, other.tail_rate);
        let h = h as i64;
        let t0 = ln_poisson_sf(h - 1, lp).exp();
        let t1 = lp * ln_poisson_sf(h - 2, lp).exp();
        total + cp * (t0 * ((cp / cq).ln() + lq - lp) + t1 * (lp / lq).ln())
    }

    /// `D(self ‖ 𝒫(β))`.
    pub fn kl_poisson(&self, beta: T) -> T {
        self.kl(&Self::poisson(beta))
    }

    /// Log of `π_i` (for tails, computed without underflow).
    pub fn log_entry(&self, i: usize) -> T {
        if i < self.head.len() {
            self.head[i].ln()
        } else if self.tail_scale == T::zero() {
            T::neg_infinity()
        } else {
            self.tail_scale.ln() + poisson_log_pmf_total(i, self.tail_rate)
        }
    }
}
