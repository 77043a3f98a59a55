//! Splitting reducible constraints into independent irreducible pieces.
//!
//! When `Σ_{j≤i} α_j = Σ_{j≤i} ω_j` for some `i < I`, no urn may cross from
//! level `i` to `i + 1`, so the urns below and above evolve independently.
//! Each piece is re-expressed in standard form: levels shifted down to start
//! at zero and masses renormalized.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feasibility::{feasibility_check, tight_levels, Feasibility};
use crate::scalar::{count, lit, Real};
use crate::simplex::{EndpointConstraint, SimplexVector};
use crate::special::xlogx_over_y;

/// One piece of a decomposed constraint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subproblem<T> {
    /// Fraction of urns in this piece.
    pub mass: T,
    /// Original level that becomes level 0.
    pub offset: usize,
    /// Standardized initial occupancy.
    pub alpha: SimplexVector<T>,
    /// Standardized terminal occupancy.
    pub omega: SimplexVector<T>,
    /// Balls per urn of this piece. Zero for pieces that receive no balls.
    pub beta: T,
    /// Whether the piece contains the original overflow slot.
    pub is_last: bool,
}

impl<T: Real> Subproblem<T> {
    /// The piece as a constraint, or `None` when it receives no balls.
    pub fn constraint(&self) -> Option<EndpointConstraint<T>> {
        if self.beta > T::zero() {
            EndpointConstraint::new(self.alpha.clone(), self.omega.clone(), self.beta).ok()
        } else {
            None
        }
    }

    pub fn capacity(&self) -> usize {
        self.alpha.capacity()
    }
}

fn standardize<T: Real>(v: &[T], mass: T) -> SimplexVector<T> {
    let mut e: Vec<T> = v.iter().map(|&x| x / mass).collect();
    let s: T = e.iter().copied().sum();
    // Absorb rounding so the vector sums to one exactly up to the last slot.
    let last = e.len() - 1;
    e[last] = (e[last] + T::one() - s).max(T::zero());
    SimplexVector::from_computed(e)
}

/// Splits a feasible constraint at every tight monotonicity level.
///
/// Pieces without urns are dropped when they need no balls. A piece without
/// urns that would have to absorb balls cannot exist and yields
/// [`Error::DegenerateSplit`].
pub fn irreducible_decompose<T: Real>(c: &EndpointConstraint<T>) -> Result<Vec<Subproblem<T>>> {
    if let Feasibility::Infeasible(v) = feasibility_check(c) {
        return Err(Error::Infeasible(v));
    }
    let cap = c.capacity();
    let a = c.alpha.entries();
    let w = c.omega.entries();
    let zero_tol = lit::<T>(T::SIMPLEX_TOL);
    let mut cuts = tight_levels(c);
    cuts.push(cap + 1);
    let mut pieces = Vec::new();
    let mut start = 0usize;
    let mut used_balls = T::zero();
    for (idx, &end) in cuts.iter().enumerate() {
        let is_last = idx == cuts.len() - 1;
        // Levels start..=end; the last piece also covers the overflow slot.
        let hi = if is_last { cap + 1 } else { end };
        let mass: T = a[start..=hi].iter().copied().sum();
        let piece_cap = if is_last { cap - start } else { end - start };
        let mut av = a[start..=hi].to_vec();
        let mut wv = w[start..=hi].to_vec();
        if !is_last {
            av.push(T::zero());
            wv.push(T::zero());
        }
        let balls = if is_last {
            c.beta - used_balls
        } else {
            (start..=hi)
                .map(|j| count::<T>(j - start) * (w[j] - a[j]))
                .sum::<T>()
                .max(T::zero())
        };
        if mass <= zero_tol {
            if balls > lit::<T>(T::FEASIBILITY_TOL) * c.beta.max(T::one()) {
                return Err(Error::DegenerateSplit { level: start });
            }
            start = end + 1;
            continue;
        }
        used_balls += balls;
        let beta = (balls / mass).max(T::zero());
        debug_assert_eq!(av.len(), piece_cap + 2);
        pieces.push(Subproblem {
            mass,
            offset: start,
            alpha: standardize(&av, mass),
            omega: standardize(&wv, mass),
            beta: if beta <= zero_tol * c.beta.max(T::one()) { T::zero() } else { beta },
            is_last,
        });
        start = end + 1;
    }
    Ok(pieces)
}

/// Recombines piece rates into the rate of the original constraint.
///
/// Each piece's rate is measured against `𝒫(β_p)`; re-measuring against
/// `𝒫(β)` adds `β_p log(β_p/β)` per unit mass (the linear terms cancel
/// because the piece budgets average to `β`).
pub fn combine_rates<T: Real>(pieces: &[Subproblem<T>], rates: &[T], beta: T) -> T {
    pieces
        .iter()
        .zip(rates)
        .map(|(p, &r)| p.mass * (r + xlogx_over_y(p.beta, beta)))
        .sum()
}
