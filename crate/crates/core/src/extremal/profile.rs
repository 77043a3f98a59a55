use serde::{Deserialize, Serialize};

use crate::entropy::CountDistribution;
use crate::scalar::{count, Real};
use crate::special::{binomial, poisson_pmf, poisson_sf};

/// Occupancy curve of one class of urns, parametrized by the fraction
/// `f ∈ [0, 1]` of its balls delivered so far.
///
/// The class ends with `n` extra balls with probability `h_n` for `n ≤ m` and
/// `C·𝒫_n(λ)` for `n > m`. Along the extremal each ball arrives at a uniform
/// time, so the state at `f` is the binomial thinning of the head and the
/// Poisson thinning of the tail. All quantities are sums of nonnegative terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassProfile<T> {
    head: Vec<T>,
    scale: T,
    rate: T,
}

fn pow<T: Real>(v: T, n: usize) -> T {
    v.powi(n as i32)
}

impl<T: Real> ClassProfile<T> {
    /// `head` holds `h_0..=h_m`; `scale` is `C` and `rate` is `λ`.
    pub fn new(head: Vec<T>, scale: T, rate: T) -> Self {
        Self { head, scale, rate }
    }

    /// A class that receives no balls.
    pub fn idle() -> Self {
        Self::new(vec![T::one()], T::zero(), T::one())
    }

    /// Cuts `dist` after `cut` extra balls; negative `cut` keeps only the tail.
    /// Finite distributions keep their whole support.
    pub fn from_distribution(dist: &CountDistribution<T>, cut: i64) -> Self {
        if dist.tail_scale() > T::zero() {
            let head = (0..=cut).map(|j| dist.entry(j as usize)).collect();
            Self::new(head, dist.tail_scale(), dist.tail_rate())
        } else {
            let mut head = dist.head().to_vec();
            while head.len() > 1 && head.last() == Some(&T::zero()) {
                head.pop();
            }
            Self::new(head, T::zero(), T::one())
        }
    }

    pub fn head(&self) -> &[T] {
        &self.head
    }

    pub fn scale(&self) -> T {
        self.scale
    }

    pub fn rate(&self) -> T {
        self.rate
    }

    /// Last head index `m`; `-1` for a pure tail.
    pub fn top(&self) -> i64 {
        self.head.len() as i64 - 1
    }

    fn has_tail(&self) -> bool {
        self.scale > T::zero()
    }

    /// Expected number of extra balls.
    pub fn mean(&self) -> T {
        let head: T = self.head.iter().enumerate().map(|(n, &h)| count::<T>(n) * h).sum();
        if self.has_tail() {
            head + self.scale * self.rate * poisson_sf(self.top() - 1, self.rate)
        } else {
            head
        }
    }

    /// Terminal probability of `n` extra balls.
    pub fn terminal(&self, n: usize) -> T {
        if (n as i64) <= self.top() {
            self.head[n]
        } else if self.has_tail() {
            self.scale * poisson_pmf(n, self.rate)
        } else {
            T::zero()
        }
    }

    /// Fraction of the class holding `j` extra balls at `f`.
    pub fn gamma(&self, j: usize, f: T) -> T {
        let u = T::one() - f;
        let m = self.top();
        let mut v = T::zero();
        for n in j..self.head.len() {
            if self.head[n] > T::zero() {
                v += self.head[n] * binomial::<T>(n, j) * pow(f, j) * pow(u, n - j);
            }
        }
        if self.has_tail() {
            v += self.scale * poisson_pmf(j, self.rate * f) * poisson_sf(m - j as i64, self.rate * u);
        }
        v
    }

    /// Rate per unit `f` at which urns move from `j` to `j + 1` extra balls.
    pub fn flux(&self, j: usize, f: T) -> T {
        let u = T::one() - f;
        let m = self.top();
        let mut v = T::zero();
        for n in j + 1..self.head.len() {
            if self.head[n] > T::zero() {
                v += self.head[n] * count::<T>(n) * binomial::<T>(n - 1, j) * pow(f, j) * pow(u, n - 1 - j);
            }
        }
        if self.has_tail() {
            v += self.rate
                * self.scale
                * poisson_pmf(j, self.rate * f)
                * poisson_sf(m - j as i64 - 1, self.rate * u);
        }
        v
    }

    /// Fraction of the class holding more than `r` extra balls.
    pub fn gamma_beyond(&self, r: i64, f: T) -> T {
        let m = self.top();
        let first = (r + 1).max(0);
        let mut v = T::zero();
        let mut head_only = self.clone();
        head_only.scale = T::zero();
        for j in first..=m {
            v += head_only.gamma(j as usize, f);
        }
        if self.has_tail() {
            let (lf, lu) = (self.rate * f, self.rate * (T::one() - f));
            let mut t = poisson_sf(r.max(m), lf);
            for j in first..=m {
                t += poisson_pmf(j as usize, lf) * poisson_sf(m - j, lu);
            }
            v += self.scale * t;
        }
        v
    }

    /// Rate per unit `f` at which balls land in urns already holding more
    /// than `r` extra balls.
    pub fn flux_beyond(&self, r: i64, f: T) -> T {
        let m = self.top();
        let first = (r + 1).max(0);
        let mut v = T::zero();
        let mut head_only = self.clone();
        head_only.scale = T::zero();
        for j in first..m {
            v += head_only.flux(j as usize, f);
        }
        if self.has_tail() {
            let (lf, lu) = (self.rate * f, self.rate * (T::one() - f));
            let mut t = poisson_sf(r.max(m - 1), lf);
            for j in first..m {
                t += poisson_pmf(j as usize, lf) * poisson_sf(m - j - 1, lu);
            }
            v += self.rate * self.scale * t;
        }
        v
    }

    /// `(−b)^i ψ^{(i)}(fb)` for the class curve `ψ` on a horizon `b`; it does
    /// not depend on `b`.
    pub fn scaled_derivative(&self, i: usize, f: T) -> T {
        let u = T::one() - f;
        let mut v = T::zero();
        for n in i..self.head.len() {
            if self.head[n] > T::zero() {
                // n!/(n−i)!
                let falling: T = (n - i + 1..=n).map(count::<T>).fold(T::one(), |a, b| a * b);
                v += self.head[n] * falling * pow(u, n - i);
            }
        }
        if self.has_tail() {
            v += self.scale
                * pow(self.rate, i)
                * (-self.rate * f).exp()
                * poisson_sf(self.top() - i as i64, self.rate * u);
        }
        v
    }

    /// `Σ_i γ_i(b) log|ψ^{(i)}(b)|` over all `i`, for the class curve on horizon `b`.
    pub(crate) fn terminal_boundary_sum(&self, b: T) -> T {
        let mut s = T::zero();
        for (i, &h) in self.head.iter().enumerate() {
            if h > T::zero() {
                s += h * self.scaled_derivative(i, T::one()).ln();
                if i > 0 {
                    s -= h * count::<T>(i) * b.ln();
                }
            }
        }
        if self.has_tail() {
            // For i > m: |ψ^{(i)}(b)| = C ρ^i e^{−ρb} with ρ = λ/b.
            let m = self.top();
            let c = self.scale;
            let mass = c * poisson_sf(m, self.rate);
            let balls = c * self.rate * poisson_sf(m - 1, self.rate);
            s += mass * (c.ln() - self.rate) + balls * (self.rate / b).ln();
        }
        s
    }
}
