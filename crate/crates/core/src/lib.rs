//! Large-deviation rates and minimizing paths for occupancy problems.
//!
//! `n` urns receive `⌊βn⌋` balls thrown uniformly at random. The state is the
//! occupancy vector: the fractions of urns holding `0, 1, …, I` balls plus an
//! overflow slot for more than `I`. This crate computes the exponential rate
//! of rare terminal states, the tilted Poisson distributions that realize
//! them, and the closed-form paths the process most likely follows, together
//! with independent checks (simulation, exact combinatorics, brute-force
//! minimization).
//!
//! All numerics are generic over [`Real`] (`f32` or `f64`). The aliases
//! below fix the scalar to `f64`.

// Negated comparisons are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::too_many_arguments)]

pub mod applications;
pub mod decompose;
pub mod entropy;
pub mod error;
pub mod extremal;
pub mod feasibility;
mod linalg;
pub mod path;
pub mod quadrature;
pub mod scalar;
pub mod simplex;
pub mod simulation;
pub mod special;
mod tilt;
pub mod twist;
pub mod verify;

pub use error::{Error, Result};
pub use scalar::Real;
pub use simplex::{EndpointConstraint, SimplexVector};

pub type Simplex = SimplexVector<f64>;
pub type Constraint = EndpointConstraint<f64>;
pub type Distribution = entropy::CountDistribution<f64>;
pub type EmptyTwist = twist::EmptyTwist<f64>;
pub type GeneralTwist = twist::GeneralTwist<f64>;
pub type EmptyExtremal = extremal::EmptyExtremal<f64>;
pub type GeneralExtremal = extremal::GeneralExtremal<f64>;
pub type ClassicalSolution = applications::ClassicalSolution<f64>;
pub type OverflowSolution = applications::OverflowSolution<f64>;
pub type CouponSolution = applications::CouponSolution<f64>;
pub type SimConfig = simulation::SimConfig<f64>;
pub type TruncatedProgram = simulation::TruncatedProgram<f64>;
pub type OracleSolution = simulation::OracleSolution<f64>;
