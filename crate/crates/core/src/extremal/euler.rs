use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::path::OccupancyPath;
use crate::scalar::{count, lit, to_f64, Real};

/// Which Euler–Lagrange system a path is checked against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ElForm {
    /// Equations `0..=I`, with the overflow slot acting as level `I + 1`.
    Exponential,
    /// Equations `0..top`; the overflow slot is level `I + 1`.
    Polynomial { top: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElOptions<T> {
    /// Central-difference step, capped at half the distance to `{0, β}`.
    pub step: T,
    /// Interior margin as a fraction of `β`.
    pub margin: T,
}

impl<T: Real> Default for ElOptions<T> {
    fn default() -> Self {
        Self { step: lit(1e-5), margin: lit(1e-4) }
    }
}

/// `n` equally spaced times covering `[δ, β − δ]` with `δ = margin·β`.
pub fn interior_grid<T: Real>(beta: T, n: usize, margin: T) -> Vec<T> {
    let d = margin * beta;
    let n = n.max(2);
    (0..n)
        .map(|k| d + (beta - d - d) * count::<T>(k) / count::<T>(n - 1))
        .collect()
}

fn ratios<T: Real, P: OccupancyPath<T> + ?Sized>(path: &P, x: T) -> Vec<T> {
    let g = path.gamma(x);
    let t = path.theta(x);
    g.iter().zip(&t).map(|(&gi, &ti)| ti / gi).collect()
}

/// Residuals of the Euler–Lagrange equations along `path` at the grid times.
///
/// With `r_i = θ_i/γ_i` (index `I + 1` is the overflow slot), equation `i`
/// reads `−r_i + r_{i+1} = d/dx[−log r_i + log r_{I+1}]` in the exponential
/// form and `−r_i + r_{i+1} = d/dx[−log r_i]` in the polynomial form. The
/// derivative is a central difference. Each returned entry is the largest
/// residual of one equation over the grid, divided by
/// `max(1, |r_i| + |r_{i+1}|)`.
pub fn el_residual<T: Real, P: OccupancyPath<T> + ?Sized>(
    path: &P,
    grid: &[T],
    form: ElForm,
    opts: ElOptions<T>,
) -> Result<Vec<T>> {
    let beta = path.horizon();
    let cap = path.capacity();
    let equations = match form {
        ElForm::Exponential => cap + 1,
        ElForm::Polynomial { top } => top.min(cap + 1),
    };
    let mut worst = vec![T::zero(); equations];
    for &x in grid {
        if !(x > T::zero() && x < beta) {
            return Err(Error::BoundaryEvaluation { x: to_f64(x), beta: to_f64(beta) });
        }
        let h = opts.step.min(lit::<T>(0.5) * x.min(beta - x));
        let r = ratios(path, x);
        let rp = ratios(path, x + h);
        let rm = ratios(path, x - h);
        let potential = |r: &[T], i: usize| {
            let base = -r[i].ln();
            match form {
                ElForm::Exponential => base + r[cap + 1].ln(),
                ElForm::Polynomial { .. } => base,
            }
        };
        for (i, w) in worst.iter_mut().enumerate() {
            let lhs = -r[i] + r[i + 1];
            let rhs = (potential(&rp, i) - potential(&rm, i)) / (h + h);
            let scale = T::one().max(r[i].abs() + r[i + 1].abs());
            let res = (lhs - rhs).abs() / scale;
            *w = if res.is_nan() { T::infinity() } else { w.max(res) };
        }
    }
    Ok(worst)
}

/// Largest entry of [`el_residual`].
pub fn max_el_residual<T: Real, P: OccupancyPath<T> + ?Sized>(
    path: &P,
    grid: &[T],
    form: ElForm,
    opts: ElOptions<T>,
) -> Result<T> {
    Ok(el_residual(path, grid, form, opts)?
        .into_iter()
        .fold(T::zero(), |m, v| m.max(v)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extremal::build_empty_extremal;
    use crate::path::{zero_cost_path, LinearPath};
    use crate::simplex::{EndpointConstraint, SimplexVector};

    fn sv(v: &[f64]) -> SimplexVector<f64> {
        SimplexVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn extremals_satisfy_equations() {
        for (w, beta) in [(sv(&[0.1, 0.2, 0.25, 0.45]), 2.5), (sv(&[0.2, 0.4, 0.4, 0.0]), 1.2), (sv(&[0.15, 0.85]), 3.0)] {
            let e = build_empty_extremal(&w, beta).unwrap();
            let g = interior_grid(beta, 60, 1e-4);
            let r = max_el_residual(&e, &g, e.el_form(), ElOptions::default()).unwrap();
            assert!(r < 1e-6, "{w:?}: {r}");
        }
    }

    #[test]
    fn zero_cost_path_satisfies_equations() {
        let p = zero_cost_path(&sv(&[0.5, 0.3, 0.2, 0.0]), 1.7);
        let g = interior_grid(1.7, 40, 1e-4);
        assert!(max_el_residual(&p, &g, ElForm::Exponential, ElOptions::default()).unwrap() < 1e-6);
    }

    #[test]
    fn linear_path_is_rejected() {
        let w = sv(&[0.1, 0.2, 0.25, 0.45]);
        let c = EndpointConstraint::empty(w, 2.5).unwrap();
        let p = LinearPath::new(c);
        let g = interior_grid(2.5, 40, 1e-4);
        assert!(max_el_residual(&p, &g, ElForm::Exponential, ElOptions::default()).unwrap() > 1e-2);
    }

    #[test]
    fn boundary_points_are_errors() {
        let p = zero_cost_path(&sv(&[1.0, 0.0]), 1.0);
        assert!(matches!(
            el_residual(&p, &[0.0, 0.5], ElForm::Exponential, ElOptions::default()),
            Err(Error::BoundaryEvaluation { .. })
        ));
    }
}
