//! Floating-point abstraction shared by every solver.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Scalar type accepted by the library. Implemented for `f32` and `f64`.
///
/// The associated constants are the default tolerances for the type; `f32`
/// gets proportionally looser values.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + LowerExp
    + Default
    + Send
    + Sync
    + 'static
{
    /// Allowed deviation of a probability vector's sum from one.
    const SIMPLEX_TOL: f64;
    /// Relative tolerance separating equality from strict inequality in the
    /// conservation condition.
    const FEASIBILITY_TOL: f64;
    /// Target residual for nonlinear solves.
    const SOLVER_TOL: f64;
    /// Clamp threshold for tiny negative entries caused by rounding.
    const CLAMP_TOL: f64;
}

impl Real for f64 {
    const SIMPLEX_TOL: f64 = 1e-12;
    const FEASIBILITY_TOL: f64 = 1e-9;
    const SOLVER_TOL: f64 = 1e-12;
    const CLAMP_TOL: f64 = 1e-12;
}

impl Real for f32 {
    const SIMPLEX_TOL: f64 = 1e-5;
    const FEASIBILITY_TOL: f64 = 1e-5;
    const SOLVER_TOL: f64 = 1e-5;
    const CLAMP_TOL: f64 = 1e-5;
}

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(v: f64) -> T {
    T::from_f64(v).expect("f64 literal representable")
}

/// Converts a count into `T`.
#[inline]
pub fn count<T: Real>(n: usize) -> T {
    T::from_usize(n).expect("count representable")
}

/// Lossy conversion to `f64`, used for error reporting.
#[inline]
pub fn to_f64<T: Real>(v: T) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}
