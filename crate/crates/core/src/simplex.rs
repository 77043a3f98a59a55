//! Occupancy vectors on the simplex `S_I` and endpoint constraints.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, Real};

/// Probability vector on `I + 2` points: levels `0..=I` and the overflow slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexVector<T> {
    entries: Vec<T>,
}

impl<T: Real> SimplexVector<T> {
    /// Validates nonnegativity and unit sum with the default tolerance of `T`.
    pub fn new(entries: Vec<T>) -> Result<Self> {
        Self::with_tolerance(entries, lit(T::SIMPLEX_TOL))
    }

    /// Validates with an explicit sum tolerance.
    pub fn with_tolerance(entries: Vec<T>, tol: T) -> Result<Self> {
        if entries.len() < 2 {
            return Err(Error::InvalidSimplex(format!(
                "need at least 2 entries (one level plus overflow), got {}",
                entries.len()
            )));
        }
        for (i, &v) in entries.iter().enumerate() {
            if !v.is_finite() || v < T::zero() {
                return Err(Error::InvalidSimplex(format!("entry {i} is {v}")));
            }
        }
        let s: T = entries.iter().copied().sum();
        if (s - T::one()).abs() > tol {
            return Err(Error::InvalidSimplex(format!(
                "entries sum to {s}, off by {:e}",
                to_f64(s - T::one())
            )));
        }
        Ok(Self { entries })
    }

    /// Builds a vector from computed values, clamping rounding-level negative
    /// entries to zero. Panics if a negative entry exceeds the clamp tolerance.
    pub(crate) fn from_computed(mut entries: Vec<T>) -> Self {
        let tol = lit::<T>(T::CLAMP_TOL).max(T::epsilon() * lit(64.0));
        for v in entries.iter_mut() {
            if *v < T::zero() {
                assert!(
                    *v >= -tol,
                    "computed occupancy entry {v} below clamp tolerance"
                );
                *v = T::zero();
            }
        }
        Self { entries }
    }

    /// `(1, 0, …, 0)`: every urn starts empty.
    pub fn empty_start(capacity: usize) -> Self {
        let mut entries = vec![T::zero(); capacity + 2];
        entries[0] = T::one();
        Self { entries }
    }

    /// Capacity index `I`.
    pub fn capacity(&self) -> usize {
        self.entries.len() - 2
    }

    pub fn entries(&self) -> &[T] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<T> {
        self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Entry for level `i ≤ I`.
    pub fn level(&self, i: usize) -> T {
        self.entries[i]
    }

    /// The overflow slot (`γ_{I+}`, or `α_{I+1}` for initial conditions).
    pub fn overflow(&self) -> T {
        self.entries[self.entries.len() - 1]
    }

    /// Cumulative sums `ψ_0..=ψ_I`.
    pub fn cumulative(&self) -> Vec<T> {
        let mut acc = T::zero();
        self.entries[..self.entries.len() - 1]
            .iter()
            .map(|&v| {
                acc += v;
                acc
            })
            .collect()
    }

    /// Re-expresses the vector at another capacity: levels above the new
    /// capacity fold into overflow, and a larger capacity pads with zeros
    /// (placing the old overflow mass in the new overflow slot).
    pub fn recap(&self, capacity: usize) -> Self {
        let old = self.capacity();
        let mut entries = vec![T::zero(); capacity + 2];
        if capacity >= old {
            entries[..=old].copy_from_slice(&self.entries[..=old]);
            entries[capacity + 1] = self.overflow();
        } else {
            entries[..=capacity].copy_from_slice(&self.entries[..=capacity]);
            entries[capacity + 1] = self.entries[capacity + 1..].iter().copied().sum();
        }
        Self { entries }
    }

    /// Largest entrywise difference.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), T::max)
    }
}

/// The triple `(α, ω, β)`: initial occupancy, terminal occupancy and balls per urn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointConstraint<T> {
    pub alpha: SimplexVector<T>,
    pub omega: SimplexVector<T>,
    pub beta: T,
}

impl<T: Real> EndpointConstraint<T> {
    pub fn new(alpha: SimplexVector<T>, omega: SimplexVector<T>, beta: T) -> Result<Self> {
        if alpha.capacity() != omega.capacity() {
            return Err(Error::CapacityMismatch {
                alpha: alpha.capacity(),
                omega: omega.capacity(),
            });
        }
        if !(beta > T::zero()) || !beta.is_finite() {
            return Err(Error::Domain(format!("beta must be positive, got {beta}")));
        }
        Ok(Self { alpha, omega, beta })
    }

    /// Constraint with every urn initially empty.
    pub fn empty(omega: SimplexVector<T>, beta: T) -> Result<Self> {
        let alpha = SimplexVector::empty_start(omega.capacity());
        Self::new(alpha, omega, beta)
    }

    pub fn capacity(&self) -> usize {
        self.alpha.capacity()
    }

    /// True when all urns start empty.
    pub fn is_empty_start(&self) -> bool {
        self.alpha.level(0) == T::one()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_sums_and_negatives() {
        assert!(SimplexVector::new(vec![0.5f64, 0.4]).is_err());
        assert!(SimplexVector::new(vec![1.2f64, -0.2]).is_err());
        assert!(SimplexVector::new(vec![1.0f64]).is_err());
        assert!(SimplexVector::new(vec![0.25f64, 0.75]).is_ok());
    }

    #[test]
    fn cumulative_and_overflow() {
        let v = SimplexVector::new(vec![0.2f64, 0.3, 0.1, 0.4]).unwrap();
        assert_eq!(v.capacity(), 2);
        assert_eq!(v.overflow(), 0.4);
        let c = v.cumulative();
        assert_eq!(c.len(), 3);
        assert!((c[2] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn recap_folds_and_pads() {
        let v = SimplexVector::new(vec![0.2f64, 0.3, 0.1, 0.4]).unwrap();
        let down = v.recap(0);
        assert_eq!(down.entries(), &[0.2, 0.8]);
        let up = v.recap(4);
        assert_eq!(up.entries(), &[0.2, 0.3, 0.1, 0.0, 0.0, 0.4]);
    }

    #[test]
    fn constraint_checks_capacity_and_beta() {
        let a = SimplexVector::<f64>::empty_start(1);
        let b = SimplexVector::<f64>::empty_start(2);
        assert!(matches!(
            EndpointConstraint::new(a.clone(), b, 1.0),
            Err(Error::CapacityMismatch { .. })
        ));
        assert!(EndpointConstraint::new(a.clone(), a.clone(), 0.0).is_err());
        assert!(EndpointConstraint::new(a.clone(), a, 1.0).is_ok());
    }
}
