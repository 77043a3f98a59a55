use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extremal::{build_empty_extremal, EmptyExtremal};
use crate::scalar::Real;
use crate::simplex::SimplexVector;
use crate::special::poisson_pmf;
use crate::twist::{solve_empty, terminal_rate_empty, TwistCase};

/// Twist parameters and rate for the number of empty urns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalSolution<T> {
    pub omega0: T,
    pub beta: T,
    pub rho: T,
    #[serde(rename = "C")]
    pub c: T,
    #[serde(rename = "J")]
    pub j: T,
}

/// Rate of ending with a fraction `omega0` of empty urns after `β` balls per urn.
///
/// `ρ` is the positive root of `ρ(1 − ω_0) = 1 − e^{−βρ}` and `C = 1/ρ`. At
/// `ω_0 = 1 − β` every occupied urn holds exactly one ball and the rate is
/// the plain relative entropy.
pub fn classical_rate<T: Real>(omega0: T, beta: T) -> Result<ClassicalSolution<T>> {
    if !(omega0 > T::zero() && omega0 < T::one()) || !(beta > T::zero()) {
        return Err(Error::Domain(format!("need 0 < ω0 < 1 and β > 0, got ω0={omega0}, β={beta}")));
    }
    let omega = SimplexVector::new(vec![omega0, T::one() - omega0])?;
    let tw = solve_empty(&omega, beta).map_err(|e| Error::Domain(format!("ω0={omega0} with β={beta}: {e}")))?;
    Ok(ClassicalSolution { omega0, beta, rho: tw.rho, c: tw.c, j: terminal_rate_empty(&omega, beta) })
}

impl<T: Real> ClassicalSolution<T> {
    fn exponential(&self) -> bool {
        self.c > T::zero()
    }

    /// Fraction of empty urns along the conditioned path.
    pub fn gamma0(&self, x: T) -> T {
        if self.exponential() {
            (-self.rho * x).exp() / self.rho + T::one() - T::one() / self.rho
        } else {
            T::one() - x
        }
    }

    /// Fraction of urns with `i ≥ 1` balls along the conditioned path.
    pub fn gamma(&self, i: usize, x: T) -> T {
        match i {
            0 => self.gamma0(x),
            _ if self.exponential() => poisson_pmf(i, self.rho * x) / self.rho,
            1 => x,
            _ => T::zero(),
        }
    }

    /// The conditioned path as a capacity-0 extremal.
    pub fn extremal(&self) -> Result<EmptyExtremal<T>> {
        let e = build_empty_extremal(&SimplexVector::new(vec![self.omega0, T::one() - self.omega0])?, self.beta)?;
        debug_assert!(self.exponential() == (e.twist.case == TwistCase::Exponential));
        Ok(e)
    }
}
