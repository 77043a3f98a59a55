use serde::{Deserialize, Serialize};

use super::TwistCase;
use crate::entropy::CountDistribution;
use crate::error::{Error, Result};
use crate::feasibility::{feasibility_check, Feasibility};
use crate::scalar::{count, lit, to_f64, Real};
use crate::simplex::{EndpointConstraint, SimplexVector};
use crate::special::{ln_poisson_sf, poisson_log_pmf_total, poisson_pmf};

/// Twist parameters `(ρ, C)` for a constraint with every urn initially empty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmptyTwist<T> {
    pub rho: T,
    #[serde(rename = "C")]
    pub c: T,
    pub case: TwistCase,
}

/// `E[Y | Y > I]` for `Y ~ Poisson(λ)`, equal to `λ P(Y > I−1)/P(Y > I)`.
pub fn poisson_conditional_mean<T: Real>(capacity: usize, lambda: T) -> T {
    let i = capacity as i64;
    lambda * (ln_poisson_sf(i - 1, lambda) - ln_poisson_sf(i, lambda)).exp()
}

/// Derivative of [`poisson_conditional_mean`] in `λ`: `Var(Y | Y > I)/λ`.
fn conditional_mean_slope<T: Real>(capacity: usize, lambda: T) -> T {
    let i = capacity as i64;
    let s = ln_poisson_sf(i, lambda);
    let m = lambda * (ln_poisson_sf(i - 1, lambda) - s).exp();
    let f2 = lambda * lambda * (ln_poisson_sf(i - 2, lambda) - s).exp();
    (f2 + m - m * m).max(T::zero()) / lambda
}

/// Average ball count of the urns that end above capacity:
/// `(β − Σ_{i≤I} i ω_i)/(1 − Σ_{i≤I} ω_i)`.
pub fn overflow_mean_target<T: Real>(omega: &SimplexVector<T>, beta: T) -> T {
    let cap = omega.capacity();
    let used: T = (0..=cap).map(|i| count::<T>(i) * omega.level(i)).sum();
    (beta - used) / omega.overflow()
}

fn classify_empty<T: Real>(omega: &SimplexVector<T>, beta: T) -> Result<Feasibility> {
    let c = EndpointConstraint::empty(omega.clone(), beta)?;
    Ok(feasibility_check(&c))
}

/// Solves `E[Y | Y > I] = (β − Σ iω_i)/(1 − Σ ω_i)` for `Y ~ Poisson(ρβ)`.
///
/// The left side increases strictly from `I + 1` to `∞`, so the root is
/// bracketed by doubling from `[1e-8, 1]`, refined by bisection and polished
/// with Newton steps.
pub fn solve_rho_empty<T: Real>(omega: &SimplexVector<T>, beta: T) -> Result<T> {
    match classify_empty(omega, beta)? {
        Feasibility::Exponential => {}
        other => {
            return Err(Error::Domain(format!(
                "rho is defined for exponential-case constraints only (got {other:?})"
            )))
        }
    }
    let cap = omega.capacity();
    let target = overflow_mean_target(omega, beta);
    let g = |rho: T| poisson_conditional_mean(cap, rho * beta) - target;
    let mut lo = lit::<T>(1e-8);
    let mut hi = T::one();
    let mut tries = 0;
    while g(lo) > T::zero() {
        lo *= lit(1e-3);
        tries += 1;
        if tries > 30 || lo == T::zero() {
            return Err(Error::BracketFailure(format!("no lower bracket for target {target}")));
        }
    }
    while g(hi) < T::zero() {
        hi *= lit(2.0);
        if !hi.is_finite() || hi > lit(1e300) {
            return Err(Error::BracketFailure(format!("no upper bracket for target {target}")));
        }
    }
    for _ in 0..400 {
        let mid = (lo + hi) * lit(0.5);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) < T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= hi * T::epsilon() * lit(4.0) {
            break;
        }
    }
    let mut rho = (lo + hi) * lit(0.5);
    for _ in 0..4 {
        let r = g(rho);
        let slope = conditional_mean_slope(cap, rho * beta) * beta;
        if !(slope > T::zero()) {
            break;
        }
        let next = rho - r / slope;
        if next > T::zero() && g(next).abs() < r.abs() {
            rho = next;
        } else {
            break;
        }
    }
    let tol = lit::<T>(T::SOLVER_TOL) * target.max(T::one());
    let res = g(rho).abs();
    if res > tol * lit(10.0) {
        return Err(Error::SolverFailure { what: "rho root".into(), residual: to_f64(res) });
    }
    Ok(rho)
}

/// `C = (1 − Σ_{i≤I} ω_i)/P(Po(ρβ) > I)`. Zero for polynomial-case inputs.
pub fn compute_c_empty<T: Real>(omega: &SimplexVector<T>, beta: T, rho: T) -> T {
    if omega.overflow() <= T::zero() {
        return T::zero();
    }
    omega.overflow() / ln_poisson_sf(omega.capacity() as i64, rho * beta).exp()
}

/// Relative gap between the two expressions for `C`:
/// `(1 − Σ ω_i)/P(Y > I)` and `(β − Σ iω_i)/(ρβ P(Y > I−1))`.
pub fn c_consistency_gap<T: Real>(omega: &SimplexVector<T>, beta: T, rho: T) -> T {
    let cap = omega.capacity();
    let used: T = (0..=cap).map(|i| count::<T>(i) * omega.level(i)).sum();
    let c1 = compute_c_empty(omega, beta, rho);
    let c2 = (beta - used) / (rho * beta * ln_poisson_sf(cap as i64 - 1, rho * beta).exp());
    ((c1 - c2) / c1).abs()
}

/// Twist parameters for `(1, ω, β)`.
pub fn solve_empty<T: Real>(omega: &SimplexVector<T>, beta: T) -> Result<EmptyTwist<T>> {
    match classify_empty(omega, beta)? {
        Feasibility::Exponential => {
            let rho = solve_rho_empty(omega, beta)?;
            let c = compute_c_empty(omega, beta, rho);
            debug_assert!(c_consistency_gap(omega, beta, rho) < lit(1e-6));
            Ok(EmptyTwist { rho, c, case: TwistCase::Exponential })
        }
        Feasibility::Polynomial => Ok(EmptyTwist { rho: T::one(), c: T::zero(), case: TwistCase::Polynomial }),
        Feasibility::InfiniteRate => Err(Error::InfiniteRate(
            "surplus balls cannot be absorbed: no urns end above capacity".into(),
        )),
        Feasibility::Infeasible(v) => Err(Error::Infeasible(v)),
    }
}

fn entropy_term<T: Real>(w: T, i: usize, beta: T) -> T {
    if w <= T::zero() {
        T::zero()
    } else {
        w * (w.ln() - poisson_log_pmf_total(i, beta))
    }
}

/// Terminal rate for `(1, ω, β)`; `+∞` when infeasible or unattainable.
///
/// # Panics
/// If the root bracket for ρ cannot be found, which would indicate a bug:
/// every exponential-case input has a root.
pub fn terminal_rate_empty<T: Real>(omega: &SimplexVector<T>, beta: T) -> T {
    let feas = match classify_empty(omega, beta) {
        Ok(f) => f,
        Err(_) => return T::infinity(),
    };
    let cap = omega.capacity();
    let head: T = (0..=cap).map(|i| entropy_term(omega.level(i), i, beta)).sum();
    match feas {
        Feasibility::Polynomial => head + entropy_term(omega.overflow(), cap + 1, beta),
        Feasibility::Exponential => {
            let rho = solve_rho_empty(omega, beta).expect("exponential case always has a root");
            let c = compute_c_empty(omega, beta, rho);
            let used: T = (0..=cap).map(|i| count::<T>(i) * omega.level(i)).sum();
            head + omega.overflow() * (c.ln() + (T::one() - rho) * beta) + (beta - used) * rho.ln()
        }
        _ => T::infinity(),
    }
}

/// Minimizing distribution: `π_i = ω_i` for `i ≤ I` and `C𝒫_i(ρβ)` above.
pub fn minimizer_empty<T: Real>(omega: &SimplexVector<T>, beta: T) -> Result<CountDistribution<T>> {
    let tw = solve_empty(omega, beta)?;
    let cap = omega.capacity();
    let mut head: Vec<T> = omega.entries()[..=cap].to_vec();
    match tw.case {
        TwistCase::Polynomial => {
            head.push(omega.overflow());
            CountDistribution::finite(head)
        }
        TwistCase::Exponential => {
            let rate = tw.rho * beta;
            let n = CountDistribution::<T>::default_truncation(rate).max(cap + 1);
            for i in cap + 1..n {
                head.push(tw.c * poisson_pmf(i, rate));
            }
            CountDistribution::new(head, tw.c, rate)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path::zero_cost_endpoint;

    fn sv(v: &[f64]) -> SimplexVector<f64> {
        SimplexVector::new(v.to_vec()).unwrap()
    }

    fn classical_rho(w0: f64, beta: f64) -> f64 {
        // Independent bisection on ρ(1 − ω0) = 1 − e^{−βρ}.
        let f = |r: f64| r * (1.0 - w0) - 1.0 + (-beta * r).exp();
        let (mut lo, mut hi) = (1e-6, 50.0);
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            if f(m) < 0.0 {
                lo = m
            } else {
                hi = m
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn zero_cost_endpoint_gives_unit_twist() {
        for cap in 0..4 {
            let w = zero_cost_endpoint(&SimplexVector::empty_start(cap), 1.7f64);
            let rho = solve_rho_empty(&w, 1.7).unwrap();
            assert!((rho - 1.0).abs() < 1e-12);
            assert!((compute_c_empty(&w, 1.7, rho) - 1.0).abs() < 1e-12);
            assert!(terminal_rate_empty(&w, 1.7).abs() < 1e-14);
        }
    }

    #[test]
    fn classical_instance() {
        let w = sv(&[0.15, 0.85]);
        let rho = solve_rho_empty(&w, 3.0).unwrap();
        let oracle = classical_rho(0.15, 3.0);
        assert!((rho - oracle).abs() < 1e-12, "{rho} vs {oracle}");
        assert!((rho - 1.137_721_391_157_624).abs() < 1e-12);
        let c = compute_c_empty(&w, 3.0, rho);
        assert!((c - 1.0 / rho).abs() < 1e-12);
        assert!(c_consistency_gap(&w, 3.0, rho) < 1e-12);
        let j = terminal_rate_empty(&w, 3.0);
        assert!((j - 0.091_651_542_177_721_92).abs() < 1e-12, "{j}");
    }

    #[test]
    fn conditional_mean_is_increasing() {
        for cap in 0..5 {
            let mut prev = cap as f64 + 1.0;
            for k in 1..200 {
                let lam = 0.05 * k as f64;
                let m = poisson_conditional_mean(cap, lam);
                assert!(m > prev, "cap={cap} λ={lam}");
                prev = m;
            }
        }
    }

    #[test]
    fn slope_matches_finite_difference() {
        for cap in 0..4 {
            for &lam in &[0.01f64, 0.7, 3.0, 12.0] {
                let h = 1e-6 * lam;
                let fd = (poisson_conditional_mean(cap, lam + h) - poisson_conditional_mean(cap, lam - h)) / (2.0 * h);
                let an = conditional_mean_slope(cap, lam);
                assert!((fd - an).abs() < 1e-6 * (1.0 + an), "cap={cap} λ={lam}: {fd} vs {an}");
            }
        }
    }

    #[test]
    fn polynomial_case_uses_first_sum_only() {
        // I = 2, β = 1.2 with Σ iω_i = 1.2 exactly.
        let w = sv(&[0.2, 0.4, 0.4, 0.0]);
        let tw = solve_empty(&w, 1.2).unwrap();
        assert_eq!(tw.case, TwistCase::Polynomial);
        assert_eq!(tw.c, 0.0);
        assert_eq!(tw.rho, 1.0);
        let p = |i: i32| (-1.2f64).exp() * 1.2f64.powi(i) / [1.0, 1.0, 2.0][i as usize];
        let expected = 0.2 * (0.2 / p(0)).ln() + 0.4 * (0.4 / p(1)).ln() + 0.4 * (0.4 / p(2)).ln();
        assert!((terminal_rate_empty(&w, 1.2) - expected).abs() < 1e-14);
    }

    #[test]
    fn infeasible_and_unattainable_are_infinite() {
        assert_eq!(terminal_rate_empty(&sv(&[0.0, 0.0, 1.0]), 1.0), f64::INFINITY);
        assert_eq!(terminal_rate_empty(&sv(&[1.0, 0.0, 0.0]), 1.0), f64::INFINITY);
        assert!(matches!(solve_empty(&sv(&[1.0, 0.0, 0.0]), 1.0), Err(Error::InfiniteRate(_))));
    }

    #[test]
    fn minimizer_has_unit_mass_and_mean_and_matches_rate() {
        let w = sv(&[0.1, 0.2, 0.25, 0.45]);
        let beta = 2.5;
        let pi = minimizer_empty(&w, beta).unwrap();
        assert!((pi.mass() - 1.0).abs() < 1e-12);
        assert!((pi.mean() - beta).abs() < 1e-9);
        let j = terminal_rate_empty(&w, beta);
        assert!((pi.kl_poisson(beta) - j).abs() < 1e-10);
        for i in 0..=2 {
            assert_eq!(pi.entry(i), w.level(i));
        }
    }

    #[test]
    fn classical_minimizer_tail_pattern() {
        let w = sv(&[0.15, 0.85]);
        let pi = minimizer_empty(&w, 3.0).unwrap();
        let rho = solve_rho_empty(&w, 3.0).unwrap();
        for i in 1..10 {
            let expected = poisson_pmf(i, rho * 3.0) / rho;
            assert!((pi.entry(i) - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn near_polynomial_target_is_solvable() {
        // Overflow mass tiny compared with the surplus: conditional mean barely above I + 1.
        let w = sv(&[0.3, 0.3, 0.3999, 0.0001]);
        let beta = 1.1001 + 1e-7;
        let rho = solve_rho_empty(&w, beta).unwrap();
        assert!(rho > 0.0 && rho < 0.1);
        assert!(c_consistency_gap(&w, beta, rho) < 1e-9);
    }

    #[test]
    fn f32_classical_agrees() {
        let w = SimplexVector::new(vec![0.15f32, 0.85]).unwrap();
        let j = terminal_rate_empty(&w, 3.0f32);
        assert!((j as f64 - 0.091_651_542_177_721_92).abs() < 1e-4);
    }
}
