//! Closed-form minimizing occupancy paths, their costs and Euler–Lagrange checks.

mod empty;
mod euler;
mod general;
mod profile;

pub use empty::*;
pub use euler::*;
pub use general::*;
pub use profile::ClassProfile;

use crate::scalar::Real;

/// Occupancy vector of a mixture of classes at fraction `f` of the horizon.
/// Each entry of `classes` is `(initial level, weight, profile)`.
pub(crate) fn mixture_gamma<T: Real>(capacity: usize, classes: &[(usize, T, &ClassProfile<T>)], f: T) -> Vec<T> {
    let mut g = vec![T::zero(); capacity + 2];
    for &(k, a, p) in classes {
        if a == T::zero() {
            continue;
        }
        for (i, slot) in g.iter_mut().enumerate().take(capacity + 1).skip(k) {
            *slot += a * p.gamma(i - k, f);
        }
        g[capacity + 1] += a * p.gamma_beyond(capacity as i64 - k as i64, f);
    }
    g
}

/// Rate vector per unit time of a mixture of classes at fraction `f` of the
/// horizon `beta`.
pub(crate) fn mixture_theta<T: Real>(
    capacity: usize,
    classes: &[(usize, T, &ClassProfile<T>)],
    f: T,
    beta: T,
) -> Vec<T> {
    let mut t = vec![T::zero(); capacity + 2];
    for &(k, a, p) in classes {
        if a == T::zero() {
            continue;
        }
        for (i, slot) in t.iter_mut().enumerate().take(capacity + 1).skip(k) {
            *slot += a * p.flux(i - k, f);
        }
        t[capacity + 1] += a * p.flux_beyond(capacity as i64 - k as i64, f);
    }
    for v in &mut t {
        *v /= beta;
    }
    t
}

/// Rejects times outside `[0, beta]`.
pub(crate) fn check_time<T: Real>(x: T, beta: T) -> crate::Result<T> {
    if !(x >= T::zero() && x <= beta) {
        return Err(crate::Error::Domain(format!("time {x} outside [0, {beta}]")));
    }
    Ok(x / beta)
}

/// Relative tolerance for the agreement of the two cost routes.
pub const COST_IDENTITY_TOL: f64 = 1e-8;

pub(crate) fn cost_agree<T: Real>(boundary: T, entropy: T) -> crate::Result<T> {
    let scale = entropy.abs().max(T::one());
    if (boundary - entropy).abs() > crate::scalar::lit::<T>(COST_IDENTITY_TOL) * scale {
        return Err(crate::Error::SolverFailure {
            what: format!("boundary cost {boundary} disagrees with entropy cost {entropy}"),
            residual: crate::scalar::to_f64((boundary - entropy).abs()),
        });
    }
    Ok(boundary)
}
