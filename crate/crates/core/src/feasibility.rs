//! Feasibility classification of endpoint constraints.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::scalar::{count, lit, to_f64, Real};
use crate::simplex::EndpointConstraint;

/// The failed feasibility condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Violation {
    /// `Σ_{j≤i} α_j < Σ_{j≤i} ω_j`: more urns must end at or below level `i` than start there.
    Monotonicity { level: usize, alpha_cumulative: f64, omega_cumulative: f64 },
    /// The terminal state holds more balls than are available.
    Conservation { terminal_balls: f64, available_balls: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Monotonicity { level, alpha_cumulative, omega_cumulative } => write!(
                f,
                "monotonicity fails at level {level}: cumulative alpha {alpha_cumulative} < cumulative omega {omega_cumulative}"
            ),
            Violation::Conservation { terminal_balls, available_balls } => write!(
                f,
                "conservation fails: terminal state needs {terminal_balls} balls per urn but only {available_balls} are available"
            ),
        }
    }
}

/// Outcome of [`feasibility_check`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Feasibility {
    /// Strict conservation inequality with mass left in the overflow slot.
    Exponential,
    /// Conservation holds with equality: every ball is accounted for at levels `≤ I+1`.
    Polynomial,
    /// Strict conservation inequality but no overflow mass to absorb the surplus balls.
    InfiniteRate,
    Infeasible(Violation),
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        !matches!(self, Feasibility::Infeasible(_))
    }

    pub fn has_finite_rate(&self) -> bool {
        matches!(self, Feasibility::Exponential | Feasibility::Polynomial)
    }
}

/// Both sides of the conservation condition: balls held by the terminal
/// state (counting overflow urns at `I + 1`) and balls available.
pub fn conservation_terms<T: Real>(c: &EndpointConstraint<T>) -> (T, T) {
    let i_cap = c.capacity();
    let w = c.omega.entries();
    let a = c.alpha.entries();
    let lhs: T = (0..=i_cap + 1).map(|i| count::<T>(i) * w[i]).sum();
    let rhs: T = (0..=i_cap + 1).map(|k| count::<T>(k) * a[k]).sum::<T>() + c.beta;
    (lhs, rhs)
}

/// Classifies with the default tolerance for `T`.
pub fn feasibility_check<T: Real>(c: &EndpointConstraint<T>) -> Feasibility {
    feasibility_check_with(c, lit(T::FEASIBILITY_TOL))
}

/// Classifies with an explicit relative tolerance for conservation equality.
pub fn feasibility_check_with<T: Real>(c: &EndpointConstraint<T>, rel_tol: T) -> Feasibility {
    let mono_tol = lit::<T>(T::SIMPLEX_TOL);
    let ca = c.alpha.cumulative();
    let cw = c.omega.cumulative();
    for i in 0..=c.capacity() {
        if ca[i] + mono_tol < cw[i] {
            return Feasibility::Infeasible(Violation::Monotonicity {
                level: i,
                alpha_cumulative: to_f64(ca[i]),
                omega_cumulative: to_f64(cw[i]),
            });
        }
    }
    let (lhs, rhs) = conservation_terms(c);
    let tol = rel_tol * rhs.abs().max(T::one());
    if lhs > rhs + tol {
        return Feasibility::Infeasible(Violation::Conservation {
            terminal_balls: to_f64(lhs),
            available_balls: to_f64(rhs),
        });
    }
    if (rhs - lhs).abs() <= tol {
        return Feasibility::Polynomial;
    }
    if c.omega.overflow() <= mono_tol {
        return Feasibility::InfiniteRate;
    }
    Feasibility::Exponential
}

/// Levels `i < I` where the cumulative monotonicity condition is tight.
pub fn tight_levels<T: Real>(c: &EndpointConstraint<T>) -> Vec<usize> {
    let tol = lit::<T>(T::SIMPLEX_TOL);
    let ca = c.alpha.cumulative();
    let cw = c.omega.cumulative();
    (0..c.capacity()).filter(|&i| (ca[i] - cw[i]).abs() <= tol).collect()
}

/// True when no monotonicity condition below `I` is tight.
pub fn is_irreducible<T: Real>(c: &EndpointConstraint<T>) -> bool {
    tight_levels(c).is_empty()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::SimplexVector;

    fn sv(v: &[f64]) -> SimplexVector<f64> {
        SimplexVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn zero_cost_endpoint_is_exponential() {
        for &beta in &[0.3f64, 1.0, 2.5] {
            let e = (-beta).exp();
            let w = sv(&[e, beta * e, 1.0 - e - beta * e]);
            let c = EndpointConstraint::empty(w, beta).unwrap();
            assert_eq!(feasibility_check(&c), Feasibility::Exponential);
        }
    }

    #[test]
    fn exact_ball_count_is_polynomial() {
        // I = 2, β = 1.2: 1·0.4 + 2·0.4 + 3·0 = 1.2
        let c = EndpointConstraint::empty(sv(&[0.2, 0.4, 0.4, 0.0]), 1.2).unwrap();
        assert_eq!(feasibility_check(&c), Feasibility::Polynomial);
        // Overflow urns count as I+1 balls.
        let c = EndpointConstraint::empty(sv(&[0.5, 0.3, 0.2]), 0.7).unwrap();
        assert_eq!(feasibility_check(&c), Feasibility::Polynomial);
    }

    #[test]
    fn unabsorbed_balls_give_infinite_rate() {
        let c = EndpointConstraint::empty(sv(&[1.0, 0.0, 0.0]), 1.0).unwrap();
        assert_eq!(feasibility_check(&c), Feasibility::InfiniteRate);
    }

    #[test]
    fn violations_are_named() {
        let c = EndpointConstraint::new(sv(&[0.0, 1.0, 0.0]), sv(&[0.5, 0.5, 0.0]), 1.0).unwrap();
        match feasibility_check(&c) {
            Feasibility::Infeasible(v @ Violation::Monotonicity { level: 0, .. }) => {
                assert!(v.to_string().contains("monotonicity"))
            }
            other => panic!("{other:?}"),
        }
        let c = EndpointConstraint::empty(sv(&[0.0, 0.0, 1.0]), 1.0).unwrap();
        match feasibility_check(&c) {
            Feasibility::Infeasible(v @ Violation::Conservation { .. }) => {
                assert!(v.to_string().contains("conservation"))
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn tight_levels_found() {
        let c = EndpointConstraint::new(sv(&[0.5, 0.5, 0.0]), sv(&[0.5, 0.0, 0.5]), 1.0).unwrap();
        assert_eq!(tight_levels(&c), vec![0]);
        assert!(!is_irreducible(&c));
    }
}
