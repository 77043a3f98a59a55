use serde::{Deserialize, Serialize};

use super::{check_time, cost_agree, mixture_gamma, mixture_theta, ClassProfile, ElForm};
use crate::entropy::CountDistribution;
use crate::error::Result;
use crate::path::OccupancyPath;
use crate::scalar::{count, lit, Real};
use crate::simplex::SimplexVector;
use crate::special::poisson_pmf;
use crate::twist::{minimizer_empty, solve_empty, EmptyTwist, TwistCase};

/// Coefficient table of `ψ₀(x) = C e^{−ρx} + Σ_k a_k (1 − x/β)^k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiCoefficients<T> {
    #[serde(rename = "C")]
    pub c: T,
    pub rho: T,
    pub beta: T,
    /// `a_k = π_k − C𝒫_k(ρβ)`.
    pub poly: Vec<T>,
}

impl<T: Real> PsiCoefficients<T> {
    /// Table for a terminal distribution whose first entries are `head` and
    /// whose remainder is `C𝒫(ρβ)`.
    pub fn from_endpoint(head: &[T], c: T, rho: T, beta: T) -> Self {
        let poly = head
            .iter()
            .enumerate()
            .map(|(k, &w)| w - c * poisson_pmf(k, rho * beta))
            .collect();
        Self { c, rho, beta, poly }
    }

    fn terms(&self, i: usize, x: T) -> (T, T) {
        let u = T::one() - x / self.beta;
        let sign = if i.is_multiple_of(2) { T::one() } else { -T::one() };
        let mut value = self.c * sign * self.rho.powi(i as i32) * (-self.rho * x).exp();
        let mut magnitude = value.abs();
        let scale = sign / self.beta.powi(i as i32);
        for (k, &a) in self.poly.iter().enumerate().skip(i) {
            let falling: T = (k - i + 1..=k).map(count::<T>).fold(T::one(), |p, q| p * q);
            let t = a * falling * scale * u.powi((k - i) as i32);
            value += t;
            magnitude += t.abs();
        }
        (value, magnitude)
    }

    /// `ψ₀^{(i)}(x)`.
    pub fn derivative(&self, i: usize, x: T) -> T {
        self.terms(i, x).0
    }

    /// Checks `(−1)^i ψ₀^{(i)}(x) > 0` for `i ≤ max_order` at every grid point.
    /// Values within rounding of zero relative to the size of the summed
    /// terms are accepted.
    pub fn is_completely_monotone(&self, grid: &[T], max_order: usize) -> bool {
        let eps = T::epsilon() * lit(64.0);
        grid.iter().all(|&x| {
            (0..=max_order).all(|i| {
                let (v, mag) = self.terms(i, x);
                let signed = if i % 2 == 0 { v } else { -v };
                signed > -eps * mag
            })
        })
    }
}

/// Extremal path for a constraint with every urn initially empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmptyExtremal<T> {
    pub omega: SimplexVector<T>,
    pub beta: T,
    pub twist: EmptyTwist<T>,
    pub coefficients: PsiCoefficients<T>,
    profile: ClassProfile<T>,
    distribution: CountDistribution<T>,
}

/// Builds the extremal reaching `ω` at time `β` from empty urns.
pub fn build_empty_extremal<T: Real>(omega: &SimplexVector<T>, beta: T) -> Result<EmptyExtremal<T>> {
    let twist = solve_empty(omega, beta)?;
    let distribution = minimizer_empty(omega, beta)?;
    let cap = omega.capacity();
    let (profile, coefficients) = match twist.case {
        TwistCase::Exponential => (
            ClassProfile::from_distribution(&distribution, cap as i64),
            PsiCoefficients::from_endpoint(&omega.entries()[..=cap], twist.c, twist.rho, beta),
        ),
        TwistCase::Polynomial => {
            let p = ClassProfile::from_distribution(&distribution, cap as i64 + 1);
            let coeffs = PsiCoefficients::from_endpoint(p.head(), T::zero(), T::one(), beta);
            (p, coeffs)
        }
    };
    Ok(EmptyExtremal { omega: omega.clone(), beta, twist, coefficients, profile, distribution })
}

impl<T: Real> EmptyExtremal<T> {
    pub fn capacity(&self) -> usize {
        self.omega.capacity()
    }

    pub fn profile(&self) -> &ClassProfile<T> {
        &self.profile
    }

    /// Terminal distribution of the ball count per urn.
    pub fn distribution(&self) -> &CountDistribution<T> {
        &self.distribution
    }

    /// Highest level reached: the degree of `ψ₀` in the polynomial case.
    pub fn top_level(&self) -> usize {
        self.profile.top().max(0) as usize
    }

    pub fn el_form(&self) -> ElForm {
        match self.twist.case {
            TwistCase::Exponential => ElForm::Exponential,
            TwistCase::Polynomial => ElForm::Polynomial { top: self.top_level() },
        }
    }

    pub fn eval_gamma(&self, x: T) -> Result<SimplexVector<T>> {
        let f = check_time(x, self.beta)?;
        Ok(SimplexVector::from_computed(mixture_gamma(self.capacity(), &[(0, T::one(), &self.profile)], f)))
    }

    pub fn eval_theta(&self, x: T) -> Result<Vec<T>> {
        let f = check_time(x, self.beta)?;
        Ok(mixture_theta(self.capacity(), &[(0, T::one(), &self.profile)], f, self.beta))
    }

    /// `ψ₀^{(i)}(x)` from the coefficient table.
    pub fn psi_derivative(&self, i: usize, x: T) -> T {
        self.coefficients.derivative(i, x)
    }

    /// `|ψ₀^{(i)}(x)|` as a sum of nonnegative terms.
    pub fn psi_derivative_magnitude(&self, i: usize, x: T) -> T {
        self.profile.scaled_derivative(i, x / self.beta) / self.beta.powi(i as i32)
    }

    /// Complete monotonicity of `ψ₀` on the grid: orders up to the capacity,
    /// two more in the exponential case.
    pub fn complete_monotone_check(&self, grid: &[T]) -> bool {
        let orders = match self.twist.case {
            TwistCase::Exponential => self.capacity() + 2,
            TwistCase::Polynomial => self.top_level(),
        };
        self.coefficients.is_completely_monotone(grid, orders)
    }

    /// Cost from the boundary terms `β + Σ_i [γ_i log|ψ₀^{(i)}|]_0^β`.
    pub fn boundary_cost(&self) -> T {
        self.beta + self.profile.terminal_boundary_sum(self.beta) - self.profile.scaled_derivative(0, T::zero()).ln()
    }

    /// `D(π ‖ 𝒫(β))` of the terminal distribution.
    pub fn entropy_cost(&self) -> T {
        self.distribution.kl_poisson(self.beta)
    }

    /// Boundary-term cost, checked against the entropy route.
    pub fn closed_form_cost(&self) -> Result<T> {
        cost_agree(self.boundary_cost(), self.entropy_cost())
    }
}

impl<T: Real> OccupancyPath<T> for EmptyExtremal<T> {
    fn capacity(&self) -> usize {
        self.omega.capacity()
    }
    fn horizon(&self) -> T {
        self.beta
    }
    fn gamma(&self, x: T) -> Vec<T> {
        let f = (x / self.beta).max(T::zero()).min(T::one());
        mixture_gamma(self.omega.capacity(), &[(0, T::one(), &self.profile)], f)
    }
    fn theta(&self, x: T) -> Vec<T> {
        let f = (x / self.beta).max(T::zero()).min(T::one());
        mixture_theta(self.omega.capacity(), &[(0, T::one(), &self.profile)], f, self.beta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path::{path_cost_closed, validity_check, zero_cost_endpoint};
    use crate::twist::terminal_rate_empty;

    fn sv(v: &[f64]) -> SimplexVector<f64> {
        SimplexVector::new(v.to_vec()).unwrap()
    }

    fn grid(beta: f64, n: usize) -> Vec<f64> {
        (0..n).map(|k| beta * k as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn zero_cost_is_exponential_decay() {
        let w = zero_cost_endpoint(&SimplexVector::empty_start(2), 1.5);
        let e = build_empty_extremal(&w, 1.5).unwrap();
        for x in grid(1.5, 11) {
            assert!((e.psi_derivative(0, x) - (-x).exp()).abs() < 1e-12);
            let g = e.eval_gamma(x).unwrap();
            let t = e.eval_theta(x).unwrap();
            assert!(g.entries().iter().zip(&t).all(|(a, b)| (a - b).abs() < 1e-12));
        }
        assert!(e.closed_form_cost().unwrap().abs() < 1e-12);
    }

    #[test]
    fn classical_curve() {
        let e = build_empty_extremal(&sv(&[0.15, 0.85]), 3.0).unwrap();
        let rho = e.twist.rho;
        for x in grid(3.0, 21) {
            let expected = (-rho * x).exp() / rho + 1.0 - 1.0 / rho;
            assert!((e.eval_gamma(x).unwrap().level(0) - expected).abs() < 1e-12);
            assert!((e.psi_derivative(0, x) - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn endpoints_and_rate_identities() {
        for (w, beta) in [(sv(&[0.1, 0.2, 0.25, 0.45]), 2.5), (sv(&[0.2, 0.4, 0.4, 0.0]), 1.2), (sv(&[0.1, 0.4, 0.4, 0.1]), 1.5)] {
            let e = build_empty_extremal(&w, beta).unwrap();
            let g0 = e.eval_gamma(0.0).unwrap();
            assert!((g0.level(0) - 1.0).abs() < 1e-14);
            assert!(e.eval_gamma(beta).unwrap().max_abs_diff(&w) < 1e-12);
            assert!((e.psi_derivative(0, 0.0) - 1.0).abs() < 1e-10);
            assert!((e.psi_derivative(1, 0.0) + 1.0).abs() < 1e-10);
            for x in grid(beta, 50) {
                let t = e.eval_theta(x).unwrap();
                assert!((t.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                if e.twist.case == TwistCase::Exponential && x > 0.0 && x < beta {
                    let psi_i: f64 = e.eval_gamma(x).unwrap().entries()[..=w.capacity()].iter().sum();
                    let ratio = t[w.capacity() + 1] / (1.0 - psi_i);
                    assert!((ratio - e.twist.rho).abs() < 1e-9, "x={x}: {ratio}");
                }
            }
            let j = e.closed_form_cost().unwrap();
            assert!((j - terminal_rate_empty(&w, beta)).abs() < 1e-10);
            assert!((path_cost_closed(&e) - j).abs() < 1e-6, "quadrature {} vs {j}", path_cost_closed(&e));
            assert!(validity_check(&e.sample(2001)).is_valid());
        }
    }

    #[test]
    fn analytic_derivatives_match_finite_differences() {
        let e = build_empty_extremal(&sv(&[0.1, 0.2, 0.25, 0.45]), 2.5).unwrap();
        for k in 1..=20 {
            let x = 2.5 * k as f64 / 21.0;
            for i in 0..4 {
                let h = 1e-5;
                let fd = (e.psi_derivative(i, x + h) - e.psi_derivative(i, x - h)) / (2.0 * h);
                let an = e.psi_derivative(i + 1, x);
                assert!((fd - an).abs() < 1e-6 * an.abs().max(1e-3), "i={i} x={x}");
                let mag = e.psi_derivative_magnitude(i, x);
                assert!((mag - e.psi_derivative(i, x).abs()).abs() < 1e-12 * mag.max(1.0));
            }
        }
    }

    #[test]
    fn gamma_is_taylor_coefficient() {
        let e = build_empty_extremal(&sv(&[0.1, 0.2, 0.25, 0.45]), 2.5).unwrap();
        for &x in &[0.3, 1.1, 2.0] {
            let g = e.eval_gamma(x).unwrap();
            for i in 0..=2 {
                let fact: f64 = (1..=i).map(|v| v as f64).product();
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                let expected = x.powi(i as i32) / fact * sign * e.psi_derivative(i, x);
                assert!((g.level(i) - expected).abs() < 1e-12);
            }
            // The full sequence, tail included, sums to one.
            let all: f64 = (0..300).map(|j| e.profile().gamma(j, x / 2.5)).sum();
            assert!((all - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn complete_monotonicity_and_its_violation() {
        let w = sv(&[0.1, 0.2, 0.25, 0.45]);
        let e = build_empty_extremal(&w, 2.5).unwrap();
        let g: Vec<f64> = grid(2.5 * (1.0 - 1e-4), 200);
        assert!(e.complete_monotone_check(&g));
        let mut head = w.entries()[..3].to_vec();
        head[2] = -head[2];
        let bad = PsiCoefficients::from_endpoint(&head, e.twist.c, e.twist.rho, 2.5);
        assert!(!bad.is_completely_monotone(&g, 2));

        let p = build_empty_extremal(&sv(&[0.2, 0.4, 0.4, 0.0]), 1.2).unwrap();
        assert!(p.complete_monotone_check(&grid(1.2 * (1.0 - 1e-4), 200)));
        let top = p.psi_derivative(2, 0.7);
        assert!((top - 0.4 * 2.0 / 1.44).abs() < 1e-12);
    }

    #[test]
    fn outside_horizon_is_rejected() {
        let e = build_empty_extremal(&sv(&[0.15, 0.85]), 3.0).unwrap();
        assert!(e.eval_gamma(-0.1).is_err());
        assert!(e.eval_theta(3.5).is_err());
    }
}
