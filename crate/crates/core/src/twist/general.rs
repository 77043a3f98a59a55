use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{solve_empty, TwistCase};
use crate::decompose::{combine_rates, irreducible_decompose, Subproblem};
use crate::entropy::CountDistribution;
use crate::error::{Error, Result};
use crate::feasibility::{feasibility_check, tight_levels, Feasibility};
use crate::scalar::{count, lit, Real};
use crate::simplex::{EndpointConstraint, SimplexVector};
use crate::special::{poisson_log_pmf_total, poisson_pmf};
use crate::tilt::{solve_tilt, NewtonOptions, TiltClass, TiltProblem, TiltSolution};

/// Twist parameters and minimizer of an irreducible constraint.
///
/// A class-`k` urn (initially holding `k` balls) ends with `k + j` balls with
/// probability `π_k(j)`. In the exponential case
/// `π_k(j) = C_k W_{k+j} 𝒫_j(ρβ)` with `W_i = 1` above capacity; in the
/// polynomial case `π_k(j) = D_k W_{k+j} 𝒫_j(β)` on `k + j ≤ top_level`.
/// Levels outside the terminal support carry weight zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralTwist<T> {
    pub case: TwistCase,
    /// Tilt of the ball count. Always 1 in the polynomial case.
    pub rho: T,
    pub beta: T,
    /// `C_k` (exponential) or `D_k` (polynomial), keyed by initial level.
    pub class_scales: BTreeMap<usize, T>,
    /// `W_i` for every terminal level in the support.
    pub endpoint_weights: BTreeMap<usize, T>,
    /// Highest terminal level carrying a head weight. In the polynomial case
    /// this is `I + 1` when balls end in the overflow slot.
    pub top_level: usize,
    pub rate: T,
    /// Largest absolute violation of the constraints by the minimizer.
    pub residual: T,
    pub iterations: usize,
    /// `π_k` keyed by initial level.
    pub minimizer: BTreeMap<usize, CountDistribution<T>>,
}

/// Starting point for [`solve_general_with_start`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralStart<T> {
    pub log_rho: T,
    /// `log W_i`; missing levels start at zero.
    pub log_weights: BTreeMap<usize, T>,
}

struct Layout<T> {
    case: TwistCase,
    problem: TiltProblem<T>,
    /// Terminal level of each feature.
    feature_levels: Vec<usize>,
    /// Initial level of each class.
    class_levels: Vec<usize>,
    top: usize,
}

fn layout<T: Real>(c: &EndpointConstraint<T>, case: TwistCase) -> Layout<T> {
    let cap = c.capacity();
    let a = c.alpha.entries();
    let w = c.omega.entries();
    let class_levels: Vec<usize> = (0..=cap + 1).filter(|&k| a[k] > T::zero()).collect();
    // Terminal levels with a free weight, and the level acting as gauge.
    let (support, top): (Vec<usize>, usize) = match case {
        TwistCase::Exponential => ((0..=cap).filter(|&i| w[i] > T::zero()).collect(), cap),
        TwistCase::Polynomial => {
            let top = (0..=cap + 1).rev().find(|&i| w[i] > T::zero()).unwrap_or(0);
            ((0..top).filter(|&i| w[i] > T::zero()).collect(), top)
        }
    };
    let mut index = BTreeMap::new();
    for (f, &lvl) in support.iter().enumerate() {
        index.insert(lvl, f);
    }
    let classes = class_levels
        .iter()
        .map(|&k| {
            let len = (top + 1).saturating_sub(k);
            let head = (0..len)
                .map(|j| {
                    let lvl = k + j;
                    match index.get(&lvl) {
                        Some(&f) => Some(vec![(f, T::one())]),
                        None if case == TwistCase::Polynomial && lvl == top => Some(Vec::new()),
                        None => None,
                    }
                })
                .collect();
            TiltClass { weight: a[k], head, tail: case == TwistCase::Exponential }
        })
        .collect();
    let targets = support.iter().map(|&i| w[i]).collect();
    let mean_target = match case {
        TwistCase::Exponential => Some(c.beta),
        TwistCase::Polynomial => None,
    };
    Layout {
        case,
        problem: TiltProblem { beta: c.beta, classes, targets, mean_target },
        feature_levels: support,
        class_levels,
        top,
    }
}

fn case_of<T: Real>(c: &EndpointConstraint<T>) -> Result<TwistCase> {
    match feasibility_check(c) {
        Feasibility::Exponential => Ok(TwistCase::Exponential),
        Feasibility::Polynomial => Ok(TwistCase::Polynomial),
        Feasibility::InfiniteRate => Err(Error::InfiniteRate(
            "surplus balls cannot be absorbed: no urns end above capacity".into(),
        )),
        Feasibility::Infeasible(v) => Err(Error::Infeasible(v)),
    }
}

/// Starting point from the constraint with all initial balls pooled into
/// empty urns: the aggregate `(1, ω, β + Σ kα_k)` has closed-form twists.
fn aggregate_start<T: Real>(c: &EndpointConstraint<T>, lay: &Layout<T>) -> Option<Vec<T>> {
    let extra: T = c.alpha.entries().iter().enumerate().map(|(k, &v)| count::<T>(k) * v).sum();
    let beta2 = c.beta + extra;
    let tw = solve_empty(&c.omega, beta2).ok()?;
    let mut x = Vec::new();
    if lay.case == TwistCase::Exponential {
        x.push(tw.rho.ln());
    }
    for &lvl in &lay.feature_levels {
        let base = match tw.case {
            TwistCase::Exponential => tw.c.ln() + poisson_log_pmf_total(lvl, tw.rho * beta2),
            TwistCase::Polynomial => poisson_log_pmf_total(lvl, beta2),
        };
        let v = c.omega.level(lvl).ln() - base;
        x.push(if v.is_finite() { v } else { T::zero() });
    }
    Some(x)
}

fn build_solution<T: Real>(c: &EndpointConstraint<T>, lay: &Layout<T>, sol: TiltSolution<T>) -> GeneralTwist<T> {
    let beta = c.beta;
    let rho = sol.y.exp();
    let mut endpoint_weights = BTreeMap::new();
    for (f, &lvl) in lay.feature_levels.iter().enumerate() {
        endpoint_weights.insert(lvl, sol.lambdas[f].exp());
    }
    if lay.case == TwistCase::Polynomial {
        endpoint_weights.insert(lay.top, T::one());
    }
    let mut class_scales = BTreeMap::new();
    let mut minimizer = BTreeMap::new();
    for (ci, &k) in lay.class_levels.iter().enumerate() {
        let log_z = sol.log_z[ci];
        let cls = &lay.problem.classes[ci];
        let mut head: Vec<T> = cls
            .head
            .iter()
            .enumerate()
            .map(|(j, f)| match f {
                None => T::zero(),
                Some(feats) => {
                    let mut v = poisson_log_pmf_total(j, beta) + sol.y * count::<T>(j) - log_z;
                    for &(a, s) in feats {
                        v += sol.lambdas[a] * s;
                    }
                    v.exp()
                }
            })
            .collect();
        let dist = match lay.case {
            TwistCase::Exponential => {
                let scale = ((rho - T::one()) * beta - log_z).exp();
                class_scales.insert(k, scale);
                let rate = rho * beta;
                let n = CountDistribution::<T>::default_truncation(rate).max(head.len());
                for j in head.len()..n {
                    head.push(scale * poisson_pmf(j, rate));
                }
                CountDistribution::new_unchecked(head, scale, rate)
            }
            TwistCase::Polynomial => {
                class_scales.insert(k, (-log_z).exp());
                CountDistribution::new_unchecked(head, T::zero(), T::one())
            }
        };
        minimizer.insert(k, dist);
    }
    let residual = sol.residual.max(primal_residual(c, &minimizer));
    let rate = (-sol.dual).max(T::zero());
    GeneralTwist {
        case: lay.case,
        rho,
        beta,
        class_scales,
        endpoint_weights,
        top_level: lay.top,
        rate,
        residual,
        iterations: sol.iterations,
        minimizer,
    }
}

/// Largest violation of normalization, terminal occupancy and ball count.
pub fn primal_residual<T: Real>(c: &EndpointConstraint<T>, minimizer: &BTreeMap<usize, CountDistribution<T>>) -> T {
    let cap = c.capacity();
    let mut terminal = vec![T::zero(); cap + 2];
    let mut mean = T::zero();
    let mut worst = T::zero();
    for (&k, pi) in minimizer {
        let a = c.alpha.level(k);
        worst = worst.max((pi.mass() - T::one()).abs());
        let mut below = T::zero();
        for (i, slot) in terminal.iter_mut().enumerate().take(cap + 1).skip(k) {
            let p = pi.entry(i - k);
            *slot += a * p;
            below += p;
        }
        terminal[cap + 1] += a * (pi.mass() - below);
        mean += a * (count::<T>(k) + pi.mean());
    }
    for (t, &w) in terminal.iter().zip(c.omega.entries()) {
        worst = worst.max((*t - w).abs());
    }
    let target: T = c.alpha.entries().iter().enumerate().map(|(k, &v)| count::<T>(k) * v).sum::<T>() + c.beta;
    worst.max((mean - target).abs() / c.beta.max(T::one()))
}

fn attempt<T: Real>(c: &EndpointConstraint<T>, lay: &Layout<T>, starts: &[Vec<T>]) -> Result<GeneralTwist<T>> {
    let base = NewtonOptions::for_scale(c.beta);
    let mut last = None;
    for ridge in [T::zero(), lit(1e-8), lit(1e-4)] {
        for x0 in starts {
            let opts = NewtonOptions { ridge, ..base };
            match solve_tilt(&lay.problem, x0, opts) {
                Ok(sol) => return Ok(build_solution(c, lay, sol)),
                Err(e) => last = Some(e),
            }
        }
    }
    Err(last.unwrap_or(Error::NewtonDivergence { iterations: 0, residual: f64::INFINITY }))
}

fn check_irreducible<T: Real>(c: &EndpointConstraint<T>) -> Result<TwistCase> {
    let case = case_of(c)?;
    if let Some(&level) = tight_levels(c).first() {
        return Err(Error::Reducible { level });
    }
    Ok(case)
}

/// Solves the twist parameters of an irreducible constraint.
///
/// Reducible constraints are rejected with [`Error::Reducible`]; use
/// [`solve_pieces`] or [`terminal_rate_general`] for those.
pub fn solve_general<T: Real>(c: &EndpointConstraint<T>) -> Result<GeneralTwist<T>> {
    let case = check_irreducible(c)?;
    let lay = layout(c, case);
    let mut starts = vec![vec![T::zero(); lay.problem.targets.len() + usize::from(case == TwistCase::Exponential)]];
    if let Some(x) = aggregate_start(c, &lay) {
        starts.push(x);
    }
    attempt(c, &lay, &starts)
}

/// As [`solve_general`], starting Newton from the given parameters.
pub fn solve_general_with_start<T: Real>(c: &EndpointConstraint<T>, start: &GeneralStart<T>) -> Result<GeneralTwist<T>> {
    let case = check_irreducible(c)?;
    let lay = layout(c, case);
    let mut x0 = Vec::new();
    if case == TwistCase::Exponential {
        x0.push(start.log_rho);
    }
    for lvl in &lay.feature_levels {
        x0.push(start.log_weights.get(lvl).copied().unwrap_or(T::zero()));
    }
    attempt(c, &lay, &[x0])
}

/// A piece of a decomposed constraint with its twist, `None` when it receives no balls.
pub type SolvedPiece<T> = (Subproblem<T>, Option<GeneralTwist<T>>);

/// Decomposes a constraint and solves each piece that receives balls.
pub fn solve_pieces<T: Real>(c: &EndpointConstraint<T>) -> Result<Vec<SolvedPiece<T>>> {
    case_of(c)?;
    irreducible_decompose(c)?
        .into_iter()
        .map(|p| {
            let tw = match p.constraint() {
                Some(pc) => Some(solve_general(&pc)?),
                None => None,
            };
            Ok((p, tw))
        })
        .collect()
}

/// Terminal rate of any constraint; `+∞` when infeasible or unattainable.
pub fn terminal_rate_general<T: Real>(c: &EndpointConstraint<T>) -> Result<T> {
    let pieces = match solve_pieces(c) {
        Ok(p) => p,
        Err(Error::Infeasible(_) | Error::InfiniteRate(_) | Error::DegenerateSplit { .. }) => {
            return Ok(T::infinity())
        }
        Err(e) => return Err(e),
    };
    let rates: Vec<T> = pieces.iter().map(|(_, t)| t.as_ref().map_or(T::zero(), |t| t.rate)).collect();
    let subs: Vec<Subproblem<T>> = pieces.into_iter().map(|(p, _)| p).collect();
    Ok(combine_rates(&subs, &rates, c.beta))
}

/// Per-class minimizing distributions of the full constraint, keyed by
/// original initial level. Classes in pieces without balls stay put.
pub fn minimizer_general<T: Real>(c: &EndpointConstraint<T>) -> Result<BTreeMap<usize, CountDistribution<T>>> {
    let mut out = BTreeMap::new();
    for (p, tw) in solve_pieces(c)? {
        match tw {
            Some(tw) => {
                for (k, d) in tw.minimizer {
                    out.insert(p.offset + k, d);
                }
            }
            None => {
                for (k, &a) in p.alpha.entries().iter().enumerate() {
                    if a > T::zero() {
                        out.insert(p.offset + k, CountDistribution::finite(vec![T::one()])?);
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Zero-cost terminal occupancy check helper: `Σ_k α_k π_k` as a simplex vector.
pub fn terminal_occupancy<T: Real>(
    capacity: usize,
    alpha: &SimplexVector<T>,
    minimizer: &BTreeMap<usize, CountDistribution<T>>,
) -> SimplexVector<T> {
    let mut terminal = vec![T::zero(); capacity + 2];
    for (&k, pi) in minimizer {
        let a = alpha.level(k);
        let mut below = T::zero();
        for (i, slot) in terminal.iter_mut().enumerate().take(capacity + 1).skip(k) {
            let p = pi.entry(i - k);
            *slot += a * p;
            below += p;
        }
        terminal[capacity + 1] += a * (pi.mass() - below).max(T::zero());
    }
    SimplexVector::from_computed(terminal)
}
