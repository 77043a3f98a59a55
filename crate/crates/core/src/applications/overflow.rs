use serde::{Deserialize, Serialize};

use crate::entropy::CountDistribution;
use crate::error::{Error, Result};
use crate::scalar::{count, lit, to_f64, Real};
use crate::simplex::SimplexVector;
use crate::special::{poisson_cdf, poisson_pmf, poisson_sf};
use crate::tilt::{solve_tilt, NewtonOptions, TiltClass, TiltProblem};

/// Minimizer of the overflow problem: `π_i = C𝒫_i(ρβ)ν^{(I−i)⁺}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverflowSolution<T> {
    pub capacity: usize,
    pub beta: T,
    /// Average overflow per urn.
    pub eta: T,
    /// Average spare capacity per urn, `η + I − β`.
    pub zeta: T,
    #[serde(rename = "C")]
    pub c: T,
    pub rho: T,
    pub nu: T,
    #[serde(rename = "J_O")]
    pub j_o: T,
    /// `Q_I(ρ)`.
    pub q: T,
    /// `R_I(ρ, ν)`.
    pub r: T,
    /// Residuals of normalization, mean and spare-capacity equations.
    pub residuals: [T; 3],
    /// Residuals of the two reduced equations in `(ρ, ν)`.
    pub reduced_residuals: [T; 2],
    /// Whether the constraint binds; otherwise the zero-cost solution is returned.
    pub binding: bool,
    pub minimizer: CountDistribution<T>,
}

/// `Q_I(ρ) = P(Po(ρβ) ≥ I)`.
pub fn overflow_q<T: Real>(capacity: usize, beta: T, rho: T) -> T {
    poisson_sf(capacity as i64 - 1, rho * beta)
}

/// `R_I(ρ, ν) = ν^I e^{−ρβ(1−1/ν)} P(Po(ρβ/ν) ≤ I − 1)`.
pub fn overflow_r<T: Real>(capacity: usize, beta: T, rho: T, nu: T) -> T {
    let lam = rho * beta;
    let log = count::<T>(capacity) * nu.ln() - lam * (T::one() - T::one() / nu);
    log.exp() * poisson_cdf(capacity as i64 - 1, lam / nu)
}

/// The two reduced equations after eliminating `C`.
pub fn overflow_reduced_equations<T: Real>(capacity: usize, beta: T, zeta: T, rho: T, nu: T) -> [T; 2] {
    let q = overflow_q(capacity, beta, rho);
    let r = overflow_r(capacity, beta, rho, nu);
    let cap = count::<T>(capacity);
    [
        (rho / nu - T::one()) * r + (rho - T::one()) * q,
        (cap - rho * beta / nu - zeta) * r - zeta * q + cap * poisson_pmf(capacity, rho * beta),
    ]
}

/// Mean spare capacity `Σ_{i≤I} (I − i)𝒫_i(β)` without conditioning.
pub fn zero_cost_spare_capacity<T: Real>(capacity: usize, beta: T) -> T {
    (0..=capacity).map(|i| count::<T>(capacity - i) * poisson_pmf(i, beta)).sum()
}

/// Mean overflow per urn without conditioning.
pub fn zero_cost_overflow<T: Real>(capacity: usize, beta: T) -> T {
    beta - count::<T>(capacity) + zero_cost_spare_capacity(capacity, beta)
}

fn check_domain<T: Real>(capacity: usize, beta: T, eta: T) -> Result<T> {
    if capacity == 0 {
        return Err(Error::Domain("overflow needs capacity I ≥ 1".into()));
    }
    if !(beta > T::zero()) {
        return Err(Error::Domain(format!("β must be positive, got {beta}")));
    }
    let lo = (beta - count::<T>(capacity)).max(T::zero());
    if !(eta > lo && eta < beta) {
        return Err(Error::Domain(format!("η must lie in ({lo}, {beta}), got {eta}")));
    }
    Ok(eta + count::<T>(capacity) - beta)
}

fn assemble<T: Real>(capacity: usize, beta: T, eta: T, zeta: T, c: T, rho: T, nu: T, binding: bool) -> OverflowSolution<T> {
    let lam = rho * beta;
    let n = CountDistribution::<T>::default_truncation(lam).max(capacity + 1);
    let head: Vec<T> = (0..n)
        .map(|i| c * poisson_pmf(i, lam) * nu.powi((capacity.saturating_sub(i)) as i32))
        .collect();
    let minimizer = CountDistribution::new_unchecked(head, c, lam);
    let spare: T = (0..=capacity).map(|i| count::<T>(capacity - i) * minimizer.entry(i)).sum();
    let residuals = [minimizer.mass() - T::one(), minimizer.mean() - beta, spare - zeta];
    let q = overflow_q(capacity, beta, rho);
    let r = overflow_r(capacity, beta, rho, nu);
    let j_o = (c.ln() + beta * (T::one() - rho) + beta * rho.ln() + zeta * nu.ln()).max(T::zero());
    OverflowSolution {
        capacity,
        beta,
        eta,
        zeta,
        c,
        rho,
        nu,
        j_o,
        q,
        r,
        residuals,
        reduced_residuals: overflow_reduced_equations(capacity, beta, zeta, rho, nu),
        binding,
        minimizer,
    }
}

/// Rate of more than `η` balls per urn overflowing capacity `I` after `β`
/// balls per urn are thrown into empty urns.
///
/// When `η` does not exceed the zero-cost overflow the event is typical and
/// the rate is zero; set `allow_small` to instead condition on the overflow
/// being exactly `η`, which gives `ν < ρ < 1`.
pub fn overflow_rate<T: Real>(capacity: usize, beta: T, eta: T, allow_small: bool) -> Result<OverflowSolution<T>> {
    let zeta = check_domain(capacity, beta, eta)?;
    let zeta_star = zero_cost_spare_capacity(capacity, beta);
    let at_zero = (zeta - zeta_star).abs() <= lit::<T>(T::FEASIBILITY_TOL) * zeta_star.max(T::one());
    if at_zero || (zeta < zeta_star && !allow_small) {
        return Ok(assemble(capacity, beta, eta, zeta, T::one(), T::one(), T::one(), false));
    }
    let head = (0..capacity).map(|j| Some(vec![(0, count::<T>(capacity - j))])).collect();
    let problem = TiltProblem {
        beta,
        classes: vec![TiltClass { weight: T::one(), head, tail: true }],
        targets: vec![zeta],
        mean_target: Some(beta),
    };
    let base = NewtonOptions::for_scale(beta.max(count(capacity)));
    let mut last = None;
    for ridge in [T::zero(), lit(1e-8), lit(1e-4)] {
        match solve_tilt(&problem, &[T::zero(), T::zero()], NewtonOptions { ridge, ..base }) {
            Ok(sol) => {
                let rho = sol.y.exp();
                let nu = sol.lambdas[0].exp();
                let c = ((rho - T::one()) * beta - sol.log_z[0]).exp();
                let s = assemble(capacity, beta, eta, zeta, c, rho, nu, true);
                let worst = s.residuals.iter().fold(T::zero(), |m, v| m.max(v.abs()));
                if worst > lit(1e-9) {
                    return Err(Error::SolverFailure { what: "overflow constraints".into(), residual: to_f64(worst) });
                }
                return Ok(s);
            }
            Err(e) => last = Some(e),
        }
    }
    Err(last.unwrap())
}

fn bisect<T: Real>(mut lo: T, mut hi: T, f: impl Fn(T) -> T) -> T {
    let flo = f(lo);
    for _ in 0..300 {
        let mid = (lo + hi) * lit(0.5);
        if mid <= lo || mid >= hi {
            break;
        }
        if (f(mid) > T::zero()) == (flo > T::zero()) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo + hi) * lit(0.5)
}

/// Solves the reduced `(ρ, ν)` system by nested bisection: `ν(ρ) > ρ` from
/// the first equation, then `ρ > 1` from the second. Covers overflows above
/// the zero-cost value.
pub fn overflow_rate_nested<T: Real>(capacity: usize, beta: T, eta: T) -> Result<OverflowSolution<T>> {
    let zeta = check_domain(capacity, beta, eta)?;
    if zeta <= zero_cost_spare_capacity(capacity, beta) {
        return Err(Error::Domain("nested solver covers overflows above the zero-cost value only".into()));
    }
    let nu_of = |rho: T| -> Result<T> {
        let e1 = |nu: T| overflow_reduced_equations(capacity, beta, zeta, rho, nu)[0];
        let mut hi = rho * lit(2.0);
        let mut steps = 0;
        while e1(hi) > T::zero() {
            hi *= lit(2.0);
            steps += 1;
            if steps > 200 || !hi.is_finite() {
                return Err(Error::BracketFailure(format!("no ν bracket at ρ = {rho}")));
            }
        }
        Ok(bisect(rho, hi, e1))
    };
    let g = |rho: T| -> Result<T> { Ok(overflow_reduced_equations(capacity, beta, zeta, rho, nu_of(rho)?)[1]) };
    let lo = T::one() + lit(1e-12);
    let mut hi = lit::<T>(2.0);
    let mut steps = 0;
    while g(hi)? < T::zero() {
        hi *= lit(2.0);
        steps += 1;
        if steps > 200 {
            return Err(Error::BracketFailure("no ρ bracket".into()));
        }
    }
    let rho = bisect(lo, hi, |r| g(r).unwrap_or(T::nan()));
    let nu = nu_of(rho)?;
    let c = T::one() / (overflow_r(capacity, beta, rho, nu) + overflow_q(capacity, beta, rho));
    Ok(assemble(capacity, beta, eta, zeta, c, rho, nu, true))
}

impl<T: Real> OverflowSolution<T> {
    /// Terminal occupancy `(π_0, …, π_I, P(count > I))`.
    pub fn terminal_occupancy(&self) -> SimplexVector<T> {
        let mut v: Vec<T> = (0..=self.capacity).map(|i| self.minimizer.entry(i)).collect();
        let s: T = v.iter().copied().sum();
        v.push((T::one() - s).max(T::zero()));
        SimplexVector::from_computed(v)
    }
}
