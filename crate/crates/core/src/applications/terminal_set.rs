use serde::{Deserialize, Serialize};

use super::{coupon_rate, overflow_rate};
use crate::error::{Error, Result};
use crate::path::zero_cost_endpoint;
use crate::scalar::Real;
use crate::simplex::SimplexVector;

/// A terminal set given by one linear inequality on the occupancy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum TerminalSet<T> {
    /// Overflow above `η` per urn: `Σ_{i≤I} (I − i)ω_i ≥ η + I − β`.
    Overflow { eta: T },
    /// Fewer than `ξ` urns per urn at or below capacity: `Σ_{i≤I} ω_i ≤ ξ`.
    LowOccupancy { xi: T },
    /// Any other functional `Σ_i weights_i ω_i ≥ bound` (or `≤` when `at_most`).
    Linear { weights: Vec<T>, bound: T, at_most: bool },
}

/// Rate and attaining terminal occupancy for a terminal set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerminalSetRate<T> {
    pub rate: T,
    pub omega: SimplexVector<T>,
}

/// Minimal terminal rate over the set, starting from `alpha` with `β` balls
/// per urn; the capacity is that of `alpha`.
pub fn terminal_set_rate<T: Real>(alpha: &SimplexVector<T>, beta: T, set: &TerminalSet<T>) -> Result<TerminalSetRate<T>> {
    let cap = alpha.capacity();
    match set {
        TerminalSet::Overflow { eta } => {
            if alpha.level(0) != T::one() {
                return Err(Error::UnsupportedConstraintFamily("overflow needs every urn initially empty".into()));
            }
            let s = overflow_rate(cap, beta, *eta, false)?;
            let omega = if s.binding { s.terminal_occupancy() } else { zero_cost_endpoint(alpha, beta) };
            Ok(TerminalSetRate { rate: s.j_o, omega })
        }
        TerminalSet::LowOccupancy { xi } => {
            let s = coupon_rate(alpha.entries(), cap, beta, *xi)?;
            let omega = if s.binding { s.terminal_occupancy() } else { zero_cost_endpoint(alpha, beta) };
            Ok(TerminalSetRate { rate: s.j_c, omega })
        }
        TerminalSet::Linear { .. } => Err(Error::UnsupportedConstraintFamily(
            "only the overflow and low-occupancy families are implemented".into(),
        )),
    }
}
