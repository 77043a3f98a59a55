//! Twist parameters, terminal rates and minimizing distributions.

mod empty;
mod general;

pub use empty::*;
pub use general::*;

use serde::{Deserialize, Serialize};

/// Solution family of a finite-rate constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TwistCase {
    /// Strict conservation inequality: the minimizer has a scaled Poisson tail.
    Exponential,
    /// Conservation equality: the minimizer has finite support.
    Polynomial,
}
