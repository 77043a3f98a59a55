use serde::{Deserialize, Serialize};

use super::{build_empty_extremal, check_time, cost_agree, mixture_gamma, mixture_theta, ClassProfile, ElForm, EmptyExtremal};
use crate::entropy::CountDistribution;
use crate::error::{Error, Result};
use crate::path::OccupancyPath;
use crate::scalar::Real;
use crate::simplex::{EndpointConstraint, SimplexVector};
use crate::special::xlogx_over_y;
use crate::twist::{solve_pieces, TwistCase};

/// Urns sharing one initial level, followed along their own extremal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassExtremal<T> {
    /// Initial level `k`.
    pub level: usize,
    /// Fraction `α_k` of all urns.
    pub weight: T,
    /// Extra balls per urn of this class at the horizon, `β_k`.
    pub beta: T,
    pub profile: ClassProfile<T>,
    pub distribution: CountDistribution<T>,
}

impl<T: Real> ClassExtremal<T> {
    /// The class seen as an empty-start problem `(1, ω_(k), β_k)` with
    /// capacity `I − k`. `None` for idle classes and classes starting above
    /// capacity.
    pub fn subconstraint(&self, capacity: usize) -> Option<(SimplexVector<T>, T)> {
        if self.level > capacity || self.beta <= T::zero() {
            return None;
        }
        let sub_cap = capacity - self.level;
        let mut w: Vec<T> = (0..=sub_cap).map(|j| self.distribution.entry(j)).collect();
        let s: T = w.iter().copied().sum();
        w.push((T::one() - s).max(T::zero()));
        Some((SimplexVector::from_computed(w), self.beta))
    }

    /// Solves the class subconstraint from scratch.
    pub fn empty_extremal(&self, capacity: usize) -> Option<Result<EmptyExtremal<T>>> {
        self.subconstraint(capacity).map(|(w, b)| build_empty_extremal(&w, b))
    }
}

/// Extremal path for a general initial occupancy.
///
/// Class `k` follows the empty-start extremal of its own subconstraint with
/// time rescaled by `β_k/β`; the overall occupancy is the `α`-weighted sum
/// shifted by the initial levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralExtremal<T> {
    pub alpha: SimplexVector<T>,
    pub omega: SimplexVector<T>,
    pub beta: T,
    pub classes: Vec<ClassExtremal<T>>,
    /// Euler–Lagrange form; `None` for reducible constraints, whose pieces
    /// satisfy separate systems.
    pub el_form: Option<ElForm>,
    /// Tilt `ρ` of an irreducible exponential-case constraint.
    pub rho: Option<T>,
}

/// Builds the extremal for `c`. Reducible constraints are split into
/// independent pieces first.
pub fn build_general_extremal<T: Real>(c: &EndpointConstraint<T>) -> Result<GeneralExtremal<T>> {
    let pieces = solve_pieces(c)?;
    let cap = c.capacity();
    let mut classes = Vec::new();
    let single = pieces.len() == 1;
    let mut el_form = None;
    let mut rho = None;
    for (piece, twist) in pieces {
        match twist {
            Some(tw) => {
                if single {
                    el_form = Some(match tw.case {
                        TwistCase::Exponential => ElForm::Exponential,
                        TwistCase::Polynomial => ElForm::Polynomial { top: tw.top_level },
                    });
                    if tw.case == TwistCase::Exponential {
                        rho = Some(tw.rho);
                    }
                }
                for (k, dist) in tw.minimizer {
                    let level = piece.offset + k;
                    let profile = ClassProfile::from_distribution(&dist, cap as i64 - level as i64);
                    classes.push(ClassExtremal {
                        level,
                        weight: c.alpha.level(level),
                        beta: profile.mean(),
                        profile,
                        distribution: dist,
                    });
                }
            }
            None => {
                for (k, &a) in piece.alpha.entries().iter().enumerate() {
                    if a > T::zero() {
                        let level = piece.offset + k;
                        classes.push(ClassExtremal {
                            level,
                            weight: c.alpha.level(level),
                            beta: T::zero(),
                            profile: ClassProfile::idle(),
                            distribution: CountDistribution::finite(vec![T::one()])?,
                        });
                    }
                }
            }
        }
    }
    classes.sort_by_key(|cl| cl.level);
    let e = GeneralExtremal { alpha: c.alpha.clone(), omega: c.omega.clone(), beta: c.beta, classes, el_form, rho };
    let end = SimplexVector::from_computed(e.raw_gamma(T::one()));
    let gap = end.max_abs_diff(&c.omega);
    if gap > crate::scalar::lit(1e-9) {
        return Err(Error::SolverFailure { what: "extremal misses the terminal occupancy".into(), residual: crate::scalar::to_f64(gap) });
    }
    Ok(e)
}

impl<T: Real> GeneralExtremal<T> {
    pub fn capacity(&self) -> usize {
        self.alpha.capacity()
    }

    fn parts(&self) -> Vec<(usize, T, &ClassProfile<T>)> {
        self.classes.iter().map(|c| (c.level, c.weight, &c.profile)).collect()
    }

    fn raw_gamma(&self, f: T) -> Vec<T> {
        mixture_gamma(self.capacity(), &self.parts(), f)
    }

    pub fn eval_gamma(&self, x: T) -> Result<SimplexVector<T>> {
        let f = check_time(x, self.beta)?;
        Ok(SimplexVector::from_computed(self.raw_gamma(f)))
    }

    pub fn eval_theta(&self, x: T) -> Result<Vec<T>> {
        let f = check_time(x, self.beta)?;
        Ok(mixture_theta(self.capacity(), &self.parts(), f, self.beta))
    }

    /// `Σ_k α_k β_k`, which equals `β`.
    pub fn allocated_balls(&self) -> T {
        self.classes.iter().map(|c| c.weight * c.beta).sum()
    }

    /// Class-wise boundary-term cost: class `k` contributes
    /// `β + Σ_j γ_{k,j}(β_k) log|ψ_{k}^{(j)}(β_k)| + β_k log(β_k/β)`.
    pub fn boundary_cost(&self) -> T {
        self.classes
            .iter()
            .map(|c| {
                let start = c.profile.scaled_derivative(0, T::zero()).ln();
                let terminal = if c.beta > T::zero() { c.profile.terminal_boundary_sum(c.beta) } else { T::zero() };
                c.weight * (self.beta + terminal - start + xlogx_over_y(c.beta, self.beta))
            })
            .sum()
    }

    /// `Σ_k α_k D(π_k ‖ 𝒫(β))`.
    pub fn entropy_cost(&self) -> T {
        self.classes.iter().map(|c| c.weight * c.distribution.kl_poisson(self.beta)).sum()
    }

    /// Boundary-term cost, checked against the entropy route.
    pub fn closed_form_cost(&self) -> Result<T> {
        cost_agree(self.boundary_cost(), self.entropy_cost())
    }
}

impl<T: Real> OccupancyPath<T> for GeneralExtremal<T> {
    fn capacity(&self) -> usize {
        self.alpha.capacity()
    }
    fn horizon(&self) -> T {
        self.beta
    }
    fn gamma(&self, x: T) -> Vec<T> {
        self.raw_gamma((x / self.beta).max(T::zero()).min(T::one()))
    }
    fn theta(&self, x: T) -> Vec<T> {
        let f = (x / self.beta).max(T::zero()).min(T::one());
        mixture_theta(self.capacity(), &self.parts(), f, self.beta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extremal::{interior_grid, max_el_residual, ElOptions};
    use crate::path::{path_cost_closed, validity_check, zero_cost_endpoint};
    use crate::twist::terminal_rate_general;

    fn sv(v: &[f64]) -> SimplexVector<f64> {
        SimplexVector::new(v.to_vec()).unwrap()
    }

    fn ec(a: &[f64], w: &[f64], beta: f64) -> EndpointConstraint<f64> {
        EndpointConstraint::new(sv(a), sv(w), beta).unwrap()
    }

    fn instances() -> Vec<EndpointConstraint<f64>> {
        vec![
            ec(&[0.5, 0.3, 0.2, 0.0], &[0.2, 0.3, 0.2, 0.3], 1.5),
            ec(&[0.5, 0.5, 0.0, 0.0], &[0.1, 0.4, 0.4, 0.1], 1.0),
            ec(&[0.4, 0.4, 0.2, 0.0], &[0.1, 0.3, 0.3, 0.3], 1.2),
            ec(&[0.6, 0.2, 0.1, 0.1], &[0.3, 0.25, 0.15, 0.3], 0.8),
        ]
    }

    #[test]
    fn endpoints_costs_and_equations() {
        for c in instances() {
            let e = build_general_extremal(&c).unwrap();
            assert!(e.eval_gamma(0.0).unwrap().max_abs_diff(&c.alpha) < 1e-12);
            assert!(e.eval_gamma(c.beta).unwrap().max_abs_diff(&c.omega) < 1e-9);
            assert!((e.allocated_balls() - c.beta).abs() < 1e-9);
            let j = e.closed_form_cost().unwrap();
            assert!((j - terminal_rate_general(&c).unwrap()).abs() < 1e-10);
            let q = path_cost_closed(&e);
            assert!((q - j).abs() < 1e-6, "quadrature {q} vs {j}");
            assert!(validity_check(&e.sample(2001)).is_valid());
            let g = interior_grid(c.beta, 50, 1e-4);
            let r = max_el_residual(&e, &g, e.el_form.unwrap(), ElOptions::default()).unwrap();
            assert!(r < 1e-6, "{r}");
            for x in interior_grid(c.beta, 20, 0.0) {
                let t = e.eval_theta(x).unwrap();
                assert!((t.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn classes_are_empty_start_extremals() {
        let c = instances().remove(0);
        let e = build_general_extremal(&c).unwrap();
        let rho = e.rho.unwrap();
        for cl in &e.classes {
            if let Some(sub) = cl.empty_extremal(c.capacity()) {
                let sub = sub.unwrap();
                assert!((sub.twist.rho - rho * c.beta / cl.beta).abs() < 1e-8);
                assert!(validity_check(&sub.sample(501)).is_valid());
                for k in 0..=10 {
                    let f = k as f64 / 10.0;
                    let a = sub.eval_gamma(f * cl.beta).unwrap();
                    for j in 0..=c.capacity() - cl.level {
                        assert!((a.level(j) - cl.profile.gamma(j, f)).abs() < 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn empty_start_agrees_with_empty_builder() {
        let w = sv(&[0.1, 0.2, 0.25, 0.45]);
        let c = EndpointConstraint::empty(w.clone(), 2.5).unwrap();
        let g = build_general_extremal(&c).unwrap();
        let e = build_empty_extremal(&w, 2.5).unwrap();
        for k in 0..=10 {
            let x = 0.25 * k as f64;
            assert!(g.eval_gamma(x).unwrap().max_abs_diff(&e.eval_gamma(x).unwrap()) < 1e-10);
        }
    }

    #[test]
    fn zero_cost_and_reducible() {
        let alpha = sv(&[0.3, 0.2, 0.4, 0.1]);
        let w = zero_cost_endpoint(&alpha, 0.9);
        let e = build_general_extremal(&EndpointConstraint::new(alpha, w, 0.9).unwrap()).unwrap();
        assert!(e.closed_form_cost().unwrap().abs() < 1e-11);

        let c = ec(&[0.3, 0.7, 0.0, 0.0], &[0.3, 0.2, 0.3, 0.2], 1.0);
        let e = build_general_extremal(&c).unwrap();
        assert!(e.el_form.is_none());
        assert!(e.eval_gamma(1.0).unwrap().max_abs_diff(&c.omega) < 1e-9);
        let j = e.closed_form_cost().unwrap();
        assert!((j - terminal_rate_general(&c).unwrap()).abs() < 1e-10);
        assert!((path_cost_closed(&e) - j).abs() < 1e-6);
    }
}
