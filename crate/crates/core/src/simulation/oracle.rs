use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feasibility::conservation_terms;
use crate::linalg::solve_dense;
use crate::scalar::{count, lit, to_f64, Real};
use crate::simplex::EndpointConstraint;
use crate::special::{poisson_pmf, poisson_sf, xlogx_over_y};

/// Largest `𝒫(β)` mass allowed beyond the truncation point.
pub const MAX_TAIL_MASS: f64 = 1e-12;

/// Target for the largest constraint residual.
pub const ORACLE_TOL: f64 = 1e-10;

/// `Σ c · P(k, i) = rhs` over the joint masses `P(k, i) = α_k π_k(i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearConstraint<T> {
    pub label: String,
    /// `(class, count, coefficient)`.
    pub terms: Vec<(usize, usize, T)>,
    pub rhs: T,
}

/// Relative-entropy minimization over distributions on `{0..=N}`, one per
/// class, against the Poisson weights `𝒫_i(β)`. Each class carries its
/// mass constraint implicitly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncatedProgram<T> {
    beta: T,
    weights: Vec<T>,
    support: usize,
    constraints: Vec<LinearConstraint<T>>,
}

impl<T: Real> TruncatedProgram<T> {
    /// Program with class weights `α_k`, counts `0..=support` and only the
    /// mass constraints.
    pub fn new(beta: T, weights: Vec<T>, support: usize) -> Result<Self> {
        if !(beta > T::zero()) || !beta.is_finite() {
            return Err(Error::Domain(format!("beta must be positive, got {beta}")));
        }
        if weights.is_empty() || weights.iter().any(|&w| !(w >= T::zero())) {
            return Err(Error::Domain("class weights must be nonnegative".into()));
        }
        let s: T = weights.iter().copied().sum();
        if (s - T::one()).abs() > lit(T::SIMPLEX_TOL.max(1e-12)) {
            return Err(Error::Domain(format!("class weights sum to {s}")));
        }
        let tail = to_f64(poisson_sf(support as i64, beta));
        if tail >= MAX_TAIL_MASS {
            return Err(Error::Domain(format!(
                "truncation at {support} leaves Poisson({beta}) tail mass {tail:e}"
            )));
        }
        Ok(Self { beta, weights, support, constraints: Vec::new() })
    }

    /// One class with the mean fixed at `β`.
    pub fn mass_mean(beta: T, support: usize) -> Result<Self> {
        let mut p = Self::new(beta, vec![T::one()], support)?;
        p.add_mean(beta);
        Ok(p)
    }

    /// The endpoint problem: class `k` holds the urns starting at level `k`,
    /// counts are balls received, the terminal occupancy fixes the levels
    /// `0..=I` and the balls per urn fix the mean.
    pub fn from_constraint(c: &EndpointConstraint<T>, support: usize) -> Result<Self> {
        let cap = c.capacity();
        let mut p = Self::new(c.beta, c.alpha.entries().to_vec(), support)?;
        for j in 0..=cap {
            let terms = (0..=j).map(|k| (k, j - k, T::one())).collect();
            p.add_constraint(format!("level {j}"), terms, c.omega.level(j))?;
        }
        // Given the level rows, fixing the mean is the same as fixing the
        // balls that land beyond level I + 1. That form has nonnegative
        // coefficients, so a zero surplus becomes a structural zero.
        let (held, available) = conservation_terms(c);
        let mut surplus = available - held;
        if surplus.abs() <= lit::<T>(T::FEASIBILITY_TOL) * c.beta.max(T::one()) {
            surplus = T::zero();
        }
        let top = cap + 1;
        let terms = (0..=top)
            .flat_map(|k| (top + 1 - k..=support).map(move |i| (k, i, count::<T>(k + i - top))))
            .collect();
        p.add_constraint("balls", terms, surplus)?;
        Ok(p)
    }

    pub fn add_constraint(&mut self, label: impl Into<String>, terms: Vec<(usize, usize, T)>, rhs: T) -> Result<()> {
        if let Some(&(k, i, _)) = terms.iter().find(|&&(k, i, _)| k >= self.weights.len() || i > self.support) {
            return Err(Error::Domain(format!("term ({k}, {i}) outside the program")));
        }
        self.constraints.push(LinearConstraint { label: label.into(), terms, rhs });
        Ok(())
    }

    /// `Σ_k α_k Σ_i i π_k(i) = mean`.
    pub fn add_mean(&mut self, mean: T) {
        let terms = (0..self.weights.len())
            .flat_map(|k| (1..=self.support).map(move |i| (k, i, count::<T>(i))))
            .collect();
        self.constraints.push(LinearConstraint { label: "mean".into(), terms, rhs: mean });
    }

    pub fn beta(&self) -> T {
        self.beta
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn support(&self) -> usize {
        self.support
    }

    pub fn constraints(&self) -> &[LinearConstraint<T>] {
        &self.constraints
    }
}

/// Minimizer found by [`entropy_min_oracle`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSolution<T> {
    /// `Σ_k α_k D(π_k ‖ 𝒫(β))`.
    pub value: T,
    /// `π_k` on `0..=N`; empty for classes of weight zero.
    pub argmin: Vec<Vec<T>>,
    /// Largest constraint residual. Stationarity holds by construction.
    pub kkt_residual: T,
    pub sweeps: usize,
    pub newton_steps: usize,
}

struct Row<T> {
    label: String,
    terms: Vec<(usize, T)>,
    rhs: T,
}

const MAX_SWEEPS: usize = 5000;
const MAX_NEWTON: usize = 100;

fn residual<T: Real>(rows: &[Row<T>], p: &[T]) -> T {
    rows.iter()
        .map(|r| (r.terms.iter().map(|&(i, a)| a * p[i]).sum::<T>() - r.rhs).abs())
        .fold(T::zero(), T::max)
}

/// Relative-entropy projection onto one hyperplane: finds `t` with
/// `Σ a_i p_i e^{t a_i} = b` (increasing in `t`) by safeguarded Newton.
fn project_row<T: Real>(row: &Row<T>, p: &[T]) -> Option<T> {
    let live: Vec<(T, T)> = row
        .terms
        .iter()
        .filter(|&&(i, a)| p[i] > T::zero() && a != T::zero())
        .map(|&(i, a)| (a, p[i]))
        .collect();
    if live.is_empty() {
        return None;
    }
    let a0 = live[0].0;
    if live.iter().all(|&(a, _)| a == a0) {
        let s: T = live.iter().map(|&(_, q)| q).sum();
        let ratio = row.rhs / (a0 * s);
        return (ratio > T::zero()).then(|| ratio.ln() / a0);
    }
    let amax = live.iter().fold(T::zero(), |m, &(a, _)| m.max(a.abs()));
    let eval = |t: T| {
        let mut f = T::zero();
        let mut df = T::zero();
        for &(a, q) in &live {
            let w = q * (t * a).exp();
            f += a * w;
            df += a * a * w;
        }
        (f - row.rhs, df)
    };
    let tol = lit::<T>(4.0) * T::epsilon() * row.rhs.abs().max(T::min_positive_value());
    let (mut lo, mut hi) = (T::neg_infinity(), T::infinity());
    let mut t = T::zero();
    for _ in 0..400 {
        let (g, dg) = eval(t);
        if g.abs() <= tol {
            return Some(t);
        }
        if g < T::zero() {
            lo = t;
        } else {
            hi = t;
        }
        let mut next = t - g / dg;
        if !next.is_finite() || next <= lo || next >= hi {
            next = match (lo.is_finite(), hi.is_finite()) {
                (true, true) => (lo + hi) * lit(0.5),
                (true, false) => lo + (lo.abs() + T::one()) / amax,
                _ => hi - (hi.abs() + T::one()) / amax,
            };
        }
        if next == t {
            return Some(t);
        }
        t = next;
    }
    Some(t)
}

/// Minimizes `Σ_k α_k D(π_k ‖ 𝒫(β))` over the truncated support by cyclic
/// relative-entropy projections onto the constraints, finished with Newton
/// steps on the dual once the iterates are close.
pub fn entropy_min_oracle<T: Real>(program: &TruncatedProgram<T>) -> Result<OracleSolution<T>> {
    let width = program.support + 1;
    let classes = program.weights.len();
    let mut q = vec![T::zero(); classes * width];
    for (k, &w) in program.weights.iter().enumerate() {
        for i in 0..width {
            q[k * width + i] = w * poisson_pmf(i, program.beta);
        }
    }
    let mut rows: Vec<Row<T>> = program
        .weights
        .iter()
        .enumerate()
        .filter(|(_, &w)| w > T::zero())
        .map(|(k, &w)| Row { label: format!("mass of class {k}"), terms: (0..width).map(|i| (k * width + i, T::one())).collect(), rhs: w })
        .collect();
    for c in &program.constraints {
        rows.push(Row {
            label: c.label.clone(),
            terms: c.terms.iter().map(|&(k, i, a)| (k * width + i, a)).collect(),
            rhs: c.rhs,
        });
    }

    // Rows with a zero target and one-signed coefficients force their
    // entries to vanish.
    loop {
        let mut changed = false;
        for r in &rows {
            let live: Vec<(usize, T)> =
                r.terms.iter().copied().filter(|&(i, a)| q[i] > T::zero() && a != T::zero()).collect();
            let pos = live.iter().any(|&(_, a)| a > T::zero());
            let neg = live.iter().any(|&(_, a)| a < T::zero());
            let infeasible = (r.rhs > T::zero() && !pos) || (r.rhs < T::zero() && !neg);
            if infeasible {
                return Err(Error::InfeasibleTruncation(format!("{} cannot reach {}", r.label, r.rhs)));
            }
            if r.rhs == T::zero() && !(pos && neg) && !live.is_empty() {
                for (i, _) in live {
                    q[i] = T::zero();
                }
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    rows.retain(|r| r.terms.iter().any(|&(i, a)| q[i] > T::zero() && a != T::zero()));

    let tol = lit::<T>(ORACLE_TOL).max(T::epsilon() * lit(1e3));
    let target = tol * lit(1e-2);
    let mut p = q.clone();
    let mut lambda = vec![T::zero(); rows.len()];
    let mut sweeps = 0;
    let mut res = residual(&rows, &p);
    while sweeps < MAX_SWEEPS && res > target {
        for (r, row) in rows.iter().enumerate() {
            let t = project_row(row, &p).ok_or_else(|| {
                Error::InfeasibleTruncation(format!("{} cannot reach {}", row.label, row.rhs))
            })?;
            lambda[r] += t;
            for &(i, a) in &row.terms {
                p[i] *= (t * a).exp();
            }
        }
        sweeps += 1;
        res = residual(&rows, &p);
        if sweeps >= 20 && res < lit(1e-6) {
            break;
        }
    }

    // Newton on the dual `φ(λ) = Σ q e^{Aᵀλ} − λ·b`, whose gradient is the residual.
    let primal = |lambda: &[T]| -> Vec<T> {
        let mut expo = vec![T::zero(); q.len()];
        for (row, &l) in rows.iter().zip(lambda) {
            for &(i, a) in &row.terms {
                expo[i] += l * a;
            }
        }
        q.iter().zip(expo).map(|(&qi, e)| if qi > T::zero() { qi * e.exp() } else { T::zero() }).collect()
    };
    let dual = |p: &[T], lambda: &[T]| -> T {
        p.iter().copied().sum::<T>() - rows.iter().zip(lambda).map(|(r, &l)| l * r.rhs).sum::<T>()
    };
    let mut newton_steps = 0;
    if res > target {
        p = primal(&lambda);
        res = residual(&rows, &p);
    }
    while res > target && newton_steps < MAX_NEWTON {
        let m = rows.len();
        let grad: Vec<T> =
            rows.iter().map(|r| r.terms.iter().map(|&(i, a)| a * p[i]).sum::<T>() - r.rhs).collect();
        let mut dense = vec![vec![T::zero(); q.len()]; m];
        for (r, row) in rows.iter().enumerate() {
            for &(i, a) in &row.terms {
                dense[r][i] += a;
            }
        }
        let mut h = vec![vec![T::zero(); m]; m];
        for a in 0..m {
            for b in a..m {
                let v: T = (0..q.len()).map(|i| dense[a][i] * dense[b][i] * p[i]).sum();
                h[a][b] = v;
                h[b][a] = v;
            }
        }
        let scale = (0..m).fold(T::zero(), |s, a| s.max(h[a][a]));
        let step = [T::zero(), lit(1e-12), lit(1e-8)].iter().find_map(|&ridge| {
            let mut hr = h.clone();
            for (a, row) in hr.iter_mut().enumerate() {
                row[a] += ridge * scale;
            }
            solve_dense(hr, grad.iter().map(|&g| -g).collect())
        });
        let Some(step) = step else { break };
        let slope: T = step.iter().zip(&grad).map(|(&d, &g)| d * g).sum();
        let f0 = dual(&p, &lambda);
        let mut s = T::one();
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<T> = lambda.iter().zip(&step).map(|(&l, &d)| l + s * d).collect();
            let pt = primal(&trial);
            let ft = dual(&pt, &trial);
            if ft <= f0 + lit::<T>(1e-4) * s * slope || residual(&rows, &pt) < res {
                lambda = trial;
                p = pt;
                accepted = true;
                break;
            }
            s *= lit(0.5);
        }
        newton_steps += 1;
        let next = residual(&rows, &p);
        if !accepted || !(next < res) {
            res = next;
            break;
        }
        res = next;
    }

    if !(res <= tol) {
        return Err(Error::SolverFailure { what: "entropy minimization oracle".into(), residual: to_f64(res) });
    }
    let value: T = p.iter().zip(&q).map(|(&pi, &qi)| xlogx_over_y(pi, qi)).sum();
    let argmin = program
        .weights
        .iter()
        .enumerate()
        .map(|(k, &w)| if w > T::zero() { p[k * width..(k + 1) * width].iter().map(|&v| v / w).collect() } else { Vec::new() })
        .collect();
    Ok(OracleSolution { value, argmin, kkt_residual: res, sweeps, newton_steps })
}
