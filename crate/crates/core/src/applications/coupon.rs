use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::entropy::CountDistribution;
use crate::error::{Error, Result};
use crate::scalar::{count, lit, to_f64, Real};
use crate::simplex::{EndpointConstraint, SimplexVector};
use crate::special::{poisson_cdf, poisson_pmf};
use crate::tilt::{solve_tilt, NewtonOptions, TiltClass, TiltProblem};

/// Minimizer of the partial coupon collection problem:
/// `π_{k,j} = C_k 𝒫_j(ρβ) W` for `k + j ≤ I` and `C_k 𝒫_j(ρβ)` above.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouponSolution<T> {
    /// Initial fractions `α_0..α_K`.
    pub alpha: Vec<T>,
    pub capacity: usize,
    pub beta: T,
    pub xi: T,
    pub rho: T,
    /// `C_k` keyed by initial level.
    pub class_scales: BTreeMap<usize, T>,
    #[serde(rename = "W")]
    pub w: T,
    #[serde(rename = "J_C")]
    pub j_c: T,
    /// Largest violation of normalization, ball count and the low-occupancy target.
    pub residual: T,
    /// Whether the constraint binds; otherwise the zero-cost solution is returned.
    pub binding: bool,
    pub minimizer: BTreeMap<usize, CountDistribution<T>>,
}

fn check_alpha<T: Real>(alpha: &[T]) -> Result<()> {
    let s: T = alpha.iter().copied().sum();
    if alpha.is_empty() || alpha.iter().any(|&a| !(a >= T::zero())) || (s - T::one()).abs() > lit(T::SIMPLEX_TOL) {
        return Err(Error::InvalidSimplex(format!("initial fractions must be a probability vector, sum {s}")));
    }
    Ok(())
}

/// Expected fraction of urns holding at most `I` balls without conditioning.
pub fn zero_cost_low_occupancy<T: Real>(alpha: &[T], capacity: usize, beta: T) -> T {
    alpha
        .iter()
        .enumerate()
        .filter(|&(k, _)| k <= capacity)
        .map(|(k, &a)| a * poisson_cdf((capacity - k) as i64, beta))
        .sum()
}

/// Smallest attainable low-occupancy fraction: the budget `β` completes the
/// classes needing the fewest extra balls (`I + 1 − k` for class `k`) first.
pub fn min_low_occupancy<T: Real>(alpha: &[T], capacity: usize, beta: T) -> T {
    let mut budget = beta;
    let mut low = T::zero();
    for k in (0..alpha.len().min(capacity + 1)).rev() {
        let cost = count::<T>(capacity + 1 - k);
        let filled = alpha[k].min(budget / cost);
        budget -= filled * cost;
        low += alpha[k] - filled;
    }
    low
}

fn assemble<T: Real>(alpha: &[T], capacity: usize, beta: T, xi: T, rho: T, w: T, scales: BTreeMap<usize, T>, binding: bool) -> CouponSolution<T> {
    let lam = rho * beta;
    let mut minimizer = BTreeMap::new();
    let mut low = T::zero();
    let mut mean = T::zero();
    let mut worst = T::zero();
    for (&k, &c) in &scales {
        let n = CountDistribution::<T>::default_truncation(lam).max(capacity + 2);
        let head: Vec<T> = (0..n)
            .map(|j| {
                let p = c * poisson_pmf(j, lam);
                if k + j <= capacity {
                    p * w
                } else {
                    p
                }
            })
            .collect();
        let d = CountDistribution::new_unchecked(head, c, lam);
        worst = worst.max((d.mass() - T::one()).abs());
        if k <= capacity {
            low += alpha[k] * (0..=capacity - k).map(|j| d.entry(j)).sum::<T>();
        }
        mean += alpha[k] * d.mean();
        minimizer.insert(k, d);
    }
    worst = worst.max((low - xi).abs()).max((mean - beta).abs() / beta.max(T::one()));
    let log_c: T = scales.iter().map(|(&k, &c)| alpha[k] * c.ln()).sum();
    let j_c = (beta * (T::one() - rho + rho.ln()) + xi * w.ln() + log_c).max(T::zero());
    CouponSolution {
        alpha: alpha.to_vec(),
        capacity,
        beta,
        xi,
        rho,
        class_scales: scales,
        w,
        j_c,
        residual: worst,
        binding,
        minimizer,
    }
}

/// Rate of fewer than `ξ` urns per urn holding at most `I` balls after `β`
/// more balls per urn, starting from the initial fractions `alpha`.
pub fn coupon_rate<T: Real>(alpha: &[T], capacity: usize, beta: T, xi: T) -> Result<CouponSolution<T>> {
    check_alpha(alpha)?;
    if !(beta > T::zero()) {
        return Err(Error::Domain(format!("β must be positive, got {beta}")));
    }
    let levels: Vec<usize> = (0..alpha.len()).filter(|&k| alpha[k] > T::zero()).collect();
    let xi_star = zero_cost_low_occupancy(alpha, capacity, beta);
    if !(xi > T::zero()) {
        return Err(Error::Domain(format!("ξ must be positive, got {xi}")));
    }
    let xi_min = min_low_occupancy(alpha, capacity, beta);
    if xi < xi_min {
        return Err(Error::InfiniteRate(format!(
            "at most a fraction {} of urns can exceed capacity with β = {beta}",
            T::one() - xi_min
        )));
    }
    let unit = |_| T::one();
    if (xi - xi_star).abs() <= lit::<T>(T::FEASIBILITY_TOL) * xi_star.max(T::one()) || xi > xi_star {
        let scales = levels.iter().map(|&k| (k, unit(k))).collect();
        return Ok(assemble(alpha, capacity, beta, xi, T::one(), T::one(), scales, false));
    }
    let classes = levels
        .iter()
        .map(|&k| {
            let len = (capacity + 1).saturating_sub(k);
            TiltClass { weight: alpha[k], head: vec![Some(vec![(0, T::one())]); len], tail: true }
        })
        .collect();
    let problem = TiltProblem { beta, classes, targets: vec![xi], mean_target: Some(beta) };
    let base = NewtonOptions::for_scale(beta);
    let mut last = None;
    for ridge in [T::zero(), lit(1e-8), lit(1e-4)] {
        match solve_tilt(&problem, &[T::zero(), T::zero()], NewtonOptions { ridge, ..base }) {
            Ok(sol) => {
                let rho = sol.y.exp();
                let w = sol.lambdas[0].exp();
                let scales = levels
                    .iter()
                    .zip(&sol.log_z)
                    .map(|(&k, &lz)| (k, ((rho - T::one()) * beta - lz).exp()))
                    .collect();
                let s = assemble(alpha, capacity, beta, xi, rho, w, scales, true);
                if s.residual > lit(1e-9) {
                    return Err(Error::SolverFailure { what: "coupon constraints".into(), residual: to_f64(s.residual) });
                }
                return Ok(s);
            }
            Err(e) => last = Some(e),
        }
    }
    Err(last.unwrap())
}

impl<T: Real> CouponSolution<T> {
    /// Terminal occupancy on levels `0..=I` plus overflow.
    pub fn terminal_occupancy(&self) -> SimplexVector<T> {
        let cap = self.capacity;
        let mut v = vec![T::zero(); cap + 2];
        for (&k, d) in &self.minimizer {
            let a = self.alpha[k];
            let mut below = T::zero();
            for i in k..=cap {
                let p = d.entry(i - k);
                v[i] += a * p;
                below += p;
            }
            v[cap + 1] += a * (d.mass() - below).max(T::zero());
        }
        SimplexVector::from_computed(v)
    }

    /// Initial occupancy on levels `0..=I` plus overflow.
    pub fn initial_occupancy(&self) -> SimplexVector<T> {
        let cap = self.capacity;
        let mut v = vec![T::zero(); cap + 2];
        for (k, &a) in self.alpha.iter().enumerate() {
            v[k.min(cap + 1)] += a;
        }
        SimplexVector::from_computed(v)
    }

    /// The endpoint constraint whose terminal occupancy is the minimizer's.
    pub fn constraint(&self) -> Result<EndpointConstraint<T>> {
        EndpointConstraint::new(self.initial_occupancy(), self.terminal_occupancy(), self.beta)
    }

    /// `Σ_k α_k D(π_k ‖ 𝒫(β))`.
    pub fn entropy_rate(&self) -> T {
        self.minimizer.iter().map(|(&k, d)| self.alpha[k] * d.kl_poisson(self.beta)).sum()
    }

    /// `log_10` of `e^{−n J_C}`.
    pub fn log10_probability(&self, n: usize) -> T {
        -count::<T>(n) * self.j_c / lit::<T>(10.0).ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extremal::build_general_extremal;
    use crate::path::{zero_cost_path, OccupancyPath};
    use crate::twist::terminal_rate_general;

    const ALPHA: [f64; 3] = [0.5, 0.3, 0.2];

    #[test]
    fn worked_instance() {
        let s = coupon_rate(&ALPHA, 3, 2.0, 0.55).unwrap();
        assert!(s.binding);
        assert!((s.j_c - 0.184_32).abs() < 5e-5, "{}", s.j_c);
        assert!((s.rho - 0.569_25).abs() < 5e-5);
        assert!((s.w - 0.095_992).abs() < 5e-6);
        assert!(s.residual < 1e-9);
        assert!((s.entropy_rate() - s.j_c).abs() < 1e-10);
        assert!((s.log10_probability(100) + 8.005).abs() < 5e-3);
        let c = s.constraint().unwrap();
        assert!((terminal_rate_general(&c).unwrap() - s.j_c).abs() < 1e-8);
        let e = build_general_extremal(&c).unwrap();
        assert!((e.psi(2.0)[3] - 0.55).abs() < 1e-9);
    }

    #[test]
    fn zero_cost_reference() {
        let alpha = SimplexVector::new(vec![0.5, 0.3, 0.2, 0.0, 0.0]).unwrap();
        let psi3: f64 = zero_cost_path(&alpha, 2.0).psi(2.0)[3];
        assert!((psi3 - 0.7127).abs() < 1e-4);
        let xi = zero_cost_low_occupancy(&ALPHA, 3, 2.0);
        assert!((xi - psi3).abs() < 1e-14);
        let s = coupon_rate(&ALPHA, 3, 2.0, xi).unwrap();
        assert_eq!((s.rho, s.w, s.j_c), (1.0, 1.0, 0.0));
    }

    #[test]
    fn rate_decreases_with_threshold() {
        let top = zero_cost_low_occupancy(&ALPHA, 3, 2.0);
        let bottom = min_low_occupancy(&ALPHA, 3, 2.0);
        assert!((bottom - 0.325).abs() < 1e-15);
        let mut prev = f64::INFINITY;
        for k in 1..20 {
            let xi = bottom + (top - bottom) * k as f64 / 20.0;
            let j = coupon_rate(&ALPHA, 3, 2.0, xi).unwrap().j_c;
            assert!(j < prev, "ξ={xi}");
            prev = j;
        }
    }

    #[test]
    fn unattainable_threshold_has_infinite_rate() {
        assert!(matches!(coupon_rate(&ALPHA, 3, 2.0, 0.3), Err(Error::InfiniteRate(_))));
        assert!(coupon_rate(&ALPHA, 3, 2.0, 0.3251).is_ok());
    }

    #[test]
    fn lipschitz_probe() {
        let a = coupon_rate(&ALPHA, 3, 2.0, 0.55).unwrap().j_c;
        let b = coupon_rate(&ALPHA, 3, 2.0, 0.55 + 1e-6).unwrap().j_c;
        assert!((a - b).abs() < 1e-5);
    }

    #[test]
    fn complete_urns_are_pure_tail() {
        let s = coupon_rate(&[0.4f64, 0.3, 0.2, 0.1], 1, 1.0, 0.2).unwrap();
        assert!((s.class_scales[&2] - 1.0).abs() < 1e-12);
        assert!(s.residual < 1e-9);
        assert!((s.entropy_rate() - s.j_c).abs() < 1e-10);
    }
}
