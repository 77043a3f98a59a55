//! Occupancy paths: closed-form evaluables, sampled grids, validity and cost.
//!
//! A path is described by the occupancy vector `γ(x)` and the rate vector
//! `θ(x)` on `[0, β]`, related by `γ̇ = Mθ` where `M` moves mass from level
//! `i` to level `i + 1` and the overflow slot absorbs.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::entropy::relative_entropy_slice;
use crate::error::{Error, Result};
use crate::quadrature::{simpson, tanh_sinh};
use crate::scalar::{count, lit, to_f64, Real};
use crate::simplex::{EndpointConstraint, SimplexVector};
use crate::special::{ln_poisson_sf, poisson_pmf};

/// Default number of nodes for Simpson quadrature of path costs.
pub const DEFAULT_QUADRATURE_POINTS: usize = 2001;

/// A path evaluable at any time in `[0, horizon]`.
pub trait OccupancyPath<T: Real> {
    /// Capacity index `I`; vectors have `I + 2` entries.
    fn capacity(&self) -> usize;
    /// Final time `β`.
    fn horizon(&self) -> T;
    /// Occupancy vector `γ(x)`.
    fn gamma(&self, x: T) -> Vec<T>;
    /// Rate vector `θ(x)`.
    fn theta(&self, x: T) -> Vec<T>;

    /// Interior times where the path is not smooth.
    fn breakpoints(&self) -> Vec<T> {
        Vec::new()
    }

    /// Cumulative occupancy `ψ_0..=ψ_I`.
    fn psi(&self, x: T) -> Vec<T> {
        let g = self.gamma(x);
        let mut acc = T::zero();
        g[..g.len() - 1]
            .iter()
            .map(|&v| {
                acc += v;
                acc
            })
            .collect()
    }

    /// Integrand `D(θ(x) ‖ γ(x))`.
    fn lagrangian(&self, x: T) -> T {
        relative_entropy_slice(&self.theta(x), &self.gamma(x))
    }

    /// Samples states and rates at `points` uniformly spaced times.
    fn sample(&self, points: usize) -> OccupancyPathGrid<T> {
        let beta = self.horizon();
        let n = points.max(2);
        let times: Vec<T> = (0..n)
            .map(|k| if k == n - 1 { beta } else { beta * count::<T>(k) / count::<T>(n - 1) })
            .collect();
        let states = times
            .iter()
            .map(|&x| SimplexVector::from_computed(self.gamma(x)))
            .collect();
        let rates = times
            .iter()
            .map(|&x| SimplexVector::from_computed(self.theta(x)))
            .collect();
        OccupancyPathGrid { times, states, rates: GridRates::Nodes(rates) }
    }
}

impl<T: Real, P: OccupancyPath<T> + ?Sized> OccupancyPath<T> for &P {
    fn capacity(&self) -> usize {
        (**self).capacity()
    }
    fn horizon(&self) -> T {
        (**self).horizon()
    }
    fn gamma(&self, x: T) -> Vec<T> {
        (**self).gamma(x)
    }
    fn theta(&self, x: T) -> Vec<T> {
        (**self).theta(x)
    }
    fn breakpoints(&self) -> Vec<T> {
        (**self).breakpoints()
    }
}

/// Rates attached to a sampled path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GridRates<T> {
    /// Recover rates from differences of the cumulative occupancies.
    None,
    /// One rate vector per time node.
    Nodes(Vec<SimplexVector<T>>),
    /// One rate vector per interval between consecutive nodes.
    Intervals(Vec<SimplexVector<T>>),
}

/// A path sampled on increasing times in `[0, β]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyPathGrid<T> {
    pub times: Vec<T>,
    pub states: Vec<SimplexVector<T>>,
    pub rates: GridRates<T>,
}

impl<T: Real> OccupancyPathGrid<T> {
    pub fn new(times: Vec<T>, states: Vec<SimplexVector<T>>, rates: GridRates<T>) -> Result<Self> {
        if times.len() < 2 || times.len() != states.len() {
            return Err(Error::Domain(format!(
                "need at least two times and one state per time (got {} times, {} states)",
                times.len(),
                states.len()
            )));
        }
        if times[0] < T::zero() || times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Domain("times must be increasing and nonnegative".into()));
        }
        let cap = states[0].capacity();
        if states.iter().any(|s| s.capacity() != cap) {
            return Err(Error::Domain("states have different capacities".into()));
        }
        let expected = match &rates {
            GridRates::None => None,
            GridRates::Nodes(r) => Some((r, times.len())),
            GridRates::Intervals(r) => Some((r, times.len() - 1)),
        };
        if let Some((r, len)) = expected {
            if r.len() != len || r.iter().any(|v| v.capacity() != cap) {
                return Err(Error::Domain("rate vectors do not match the grid".into()));
            }
        }
        Ok(Self { times, states, rates })
    }

    pub fn capacity(&self) -> usize {
        self.states[0].capacity()
    }

    /// Cumulative occupancies at every node.
    pub fn psi(&self) -> Vec<Vec<T>> {
        self.states.iter().map(|s| s.cumulative()).collect()
    }

    /// Rates on each interval from differences of ψ.
    pub fn interval_rates_from_psi(&self) -> Vec<Vec<T>> {
        let psi = self.psi();
        let cap = self.capacity();
        (0..self.times.len() - 1)
            .map(|k| {
                let dt = self.times[k + 1] - self.times[k];
                let mut th: Vec<T> = (0..=cap).map(|i| (psi[k][i] - psi[k + 1][i]) / dt).collect();
                let s: T = th.iter().copied().sum();
                th.push(T::one() - s);
                th
            })
            .collect()
    }
}

/// Which condition of the validity lemma failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LemmaCondition {
    /// (a) `ψ_i ≥ ψ_{i−1}` and `ψ_I ≤ 1`: every occupancy entry is nonnegative.
    Ordering,
    /// (b) `ψ_i` is nonincreasing in time.
    Monotone,
    /// (c) balls arrive at rate at most one: `Σ_{k≤I}(ψ_k(x) − ψ_k(y)) ≤ y − x`.
    Speed,
}

/// First violation found by [`validity_check`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathViolation {
    pub condition: LemmaCondition,
    /// Node index (for `Monotone` and `Speed`, the left end of the interval).
    pub index: usize,
    pub level: Option<usize>,
    pub excess: f64,
}

impl fmt::Display for PathViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self.condition {
            LemmaCondition::Ordering => "(a) ordering",
            LemmaCondition::Monotone => "(b) monotonicity in time",
            LemmaCondition::Speed => "(c) unit arrival rate",
        };
        write!(f, "condition {name} fails at node {}", self.index)?;
        if let Some(l) = self.level {
            write!(f, ", level {l}")?;
        }
        write!(f, " (excess {:e})", self.excess)
    }
}

/// Result of [`validity_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct Validity {
    pub violation: Option<PathViolation>,
}

impl Validity {
    pub fn is_valid(&self) -> bool {
        self.violation.is_none()
    }
}

/// Checks the three validity conditions on a sampled path with the default tolerance.
///
/// Only adjacent pairs of nodes are compared. That suffices: monotonicity in
/// time is transitive, and for (c) the decrease of `Σ_k ψ_k` between any two
/// nodes is the sum of the decreases over the intervals in between, each
/// bounded by its length, so the bounds add up to `y − x`.
pub fn validity_check<T: Real>(grid: &OccupancyPathGrid<T>) -> Validity {
    validity_check_with(grid, lit::<T>(T::CLAMP_TOL) * lit(10.0))
}

/// [`validity_check`] with an explicit absolute tolerance.
pub fn validity_check_with<T: Real>(grid: &OccupancyPathGrid<T>, tol: T) -> Validity {
    let cap = grid.capacity();
    for (k, s) in grid.states.iter().enumerate() {
        for (i, &v) in s.entries().iter().enumerate() {
            if v < -tol {
                return Validity {
                    violation: Some(PathViolation {
                        condition: LemmaCondition::Ordering,
                        index: k,
                        level: Some(i),
                        excess: to_f64(-v),
                    }),
                };
            }
        }
    }
    let psi = grid.psi();
    for k in 0..grid.times.len() - 1 {
        let dt = grid.times[k + 1] - grid.times[k];
        let mut total = T::zero();
        for i in 0..=cap {
            let d = psi[k][i] - psi[k + 1][i];
            if d < -tol {
                return Validity {
                    violation: Some(PathViolation {
                        condition: LemmaCondition::Monotone,
                        index: k,
                        level: Some(i),
                        excess: to_f64(-d),
                    }),
                };
            }
            total += d;
        }
        if total > dt + tol {
            return Validity {
                violation: Some(PathViolation {
                    condition: LemmaCondition::Speed,
                    index: k,
                    level: None,
                    excess: to_f64(total - dt),
                }),
            };
        }
    }
    Validity { violation: None }
}

/// Mean of `ln` over the segment from `g0` to `g1` (linear interpolation).
fn mean_log<T: Real>(g0: T, g1: T) -> T {
    let m = (g0 + g1) * lit(0.5);
    let d = (g1 - g0) * lit(0.5);
    if m <= T::zero() {
        return T::neg_infinity();
    }
    let r = d / m;
    if r.abs() < lit(1e-3) {
        // ln m − Σ r^{2k} / (2k(2k+1))
        let r2 = r * r;
        return m.ln() - r2 * (lit::<T>(1.0 / 6.0) + r2 * (lit::<T>(1.0 / 20.0) + r2 * lit(1.0 / 42.0)));
    }
    let xlx = |v: T| if v <= T::zero() { T::zero() } else { v * v.ln() };
    (xlx(g1) - xlx(g0)) / (g1 - g0) - T::one()
}

/// Exact integral of `D(θ‖γ)` over an interval with constant `θ` and
/// linearly interpolated `γ`.
fn interval_cost<T: Real>(h: T, theta: &[T], g0: &[T], g1: &[T]) -> T {
    let mut total = T::zero();
    for i in 0..theta.len() {
        let t = theta[i];
        if t <= T::zero() {
            continue;
        }
        let ml = mean_log(g0[i].max(T::zero()), g1[i].max(T::zero()));
        if ml == T::neg_infinity() {
            return T::infinity();
        }
        total += h * t * (t.ln() - ml);
    }
    total
}

fn is_uniform<T: Real>(times: &[T]) -> bool {
    let h0 = times[1] - times[0];
    times
        .windows(2)
        .all(|w| ((w[1] - w[0]) - h0).abs() <= h0 * lit(1e-9))
}

/// Cost `∫ D(θ‖γ) dx` of a sampled path.
///
/// With node rates on a uniform grid and finite integrand the composite
/// Simpson rule is used. Otherwise each interval is integrated exactly for
/// the piecewise-linear interpolant of `γ` with constant rates (given per
/// interval or recovered from differences of ψ).
pub fn path_cost<T: Real>(grid: &OccupancyPathGrid<T>) -> Result<T> {
    if let Some(v) = validity_check(grid).violation {
        return Err(Error::InvalidPath(v));
    }
    if let GridRates::Nodes(rates) = &grid.rates {
        let values: Vec<T> = rates
            .iter()
            .zip(&grid.states)
            .map(|(r, s)| relative_entropy_slice(r.entries(), s.entries()))
            .collect();
        if values.iter().all(|v| v.is_finite()) && is_uniform(&grid.times) {
            return Ok(simpson(&values, grid.times[1] - grid.times[0]));
        }
    }
    let rates: Vec<Vec<T>> = match &grid.rates {
        GridRates::Intervals(r) => r.iter().map(|v| v.entries().to_vec()).collect(),
        _ => grid.interval_rates_from_psi(),
    };
    let mut total = T::zero();
    for k in 0..grid.times.len() - 1 {
        let h = grid.times[k + 1] - grid.times[k];
        let th: Vec<T> = rates[k].iter().map(|&v| v.max(T::zero())).collect();
        total += interval_cost(h, &th, grid.states[k].entries(), grid.states[k + 1].entries());
        if total.is_infinite() {
            return Ok(total);
        }
    }
    Ok(total)
}

/// True when `θ_i/γ_i` blows up at an endpoint where `γ_i` vanishes, which
/// spoils Simpson's error bound even if the integrand itself stays finite.
fn endpoint_ratio_singular<T: Real, P: OccupancyPath<T> + ?Sized>(path: &P, at: T, inward: T) -> bool {
    let g = path.gamma(at);
    let g1 = path.gamma(at + inward);
    let g2 = path.gamma(at + inward * lit(2.0));
    let t1 = path.theta(at + inward);
    let t2 = path.theta(at + inward * lit(2.0));
    (0..g.len()).any(|i| {
        g[i] <= T::zero()
            && t1[i] > T::zero()
            && g1[i] > T::zero()
            && g2[i] > T::zero()
            && t1[i] / g1[i] > lit::<T>(1.5) * (t2[i] / g2[i])
    })
}

/// Cost of a closed-form path with the default number of Simpson nodes.
pub fn path_cost_closed<T: Real, P: OccupancyPath<T> + ?Sized>(path: &P) -> T {
    path_cost_closed_with(path, DEFAULT_QUADRATURE_POINTS)
}

/// Cost of a closed-form path.
///
/// Smooth paths with a finite integrand at both ends use composite Simpson on
/// `points` nodes. Paths with breakpoints, infinite endpoint values or
/// singular endpoint ratios use tanh–sinh on each smooth piece, which never
/// evaluates the endpoints.
pub fn path_cost_closed_with<T: Real, P: OccupancyPath<T> + ?Sized>(path: &P, points: usize) -> T {
    let beta = path.horizon();
    let mut knots = vec![T::zero()];
    let mut inner: Vec<T> = path
        .breakpoints()
        .into_iter()
        .filter(|&b| b > T::zero() && b < beta)
        .collect();
    inner.sort_by(|a, b| a.partial_cmp(b).unwrap());
    inner.dedup();
    knots.extend(inner);
    knots.push(beta);
    let n = points.max(3) | 1;
    if knots.len() == 2 {
        let h = beta / count::<T>(n - 1);
        let values: Vec<T> = (0..n)
            .map(|k| path.lagrangian(if k == n - 1 { beta } else { h * count::<T>(k) }))
            .collect();
        if values.iter().all(|v| v.is_finite())
            && !endpoint_ratio_singular(path, T::zero(), h)
            && !endpoint_ratio_singular(path, beta, -h)
        {
            return simpson(&values, h);
        }
    }
    let tol = lit::<T>(T::SOLVER_TOL).max(T::epsilon() * lit(16.0));
    let mut total = T::zero();
    for w in knots.windows(2) {
        total += tanh_sinh(|x| path.lagrangian(x), w[0], w[1], tol);
        if total.is_infinite() {
            break;
        }
    }
    total
}

/// The zero-cost trajectory `z_j(x) = e^{−x} Σ_{k≤j} α_k x^{j−k}/(j−k)!`.
#[derive(Debug, Clone, PartialEq)]
pub struct ZeroCostPath<T> {
    alpha: SimplexVector<T>,
    beta: T,
}

impl<T: Real> ZeroCostPath<T> {
    pub fn new(alpha: SimplexVector<T>, beta: T) -> Self {
        Self { alpha, beta }
    }

    pub fn alpha(&self) -> &SimplexVector<T> {
        &self.alpha
    }
}

/// Terminal occupancy reached by the zero-cost path at time `beta`.
pub fn zero_cost_endpoint<T: Real>(alpha: &SimplexVector<T>, beta: T) -> SimplexVector<T> {
    SimplexVector::from_computed(zero_cost_state(alpha, beta))
}

/// Builds the zero-cost path from `alpha` over `[0, beta]`.
pub fn zero_cost_path<T: Real>(alpha: &SimplexVector<T>, beta: T) -> ZeroCostPath<T> {
    ZeroCostPath::new(alpha.clone(), beta)
}

fn zero_cost_state<T: Real>(alpha: &SimplexVector<T>, x: T) -> Vec<T> {
    let cap = alpha.capacity();
    let a = alpha.entries();
    let mut out = vec![T::zero(); cap + 2];
    for j in 0..=cap {
        out[j] = (0..=j).map(|k| a[k] * poisson_pmf(j - k, x)).sum();
    }
    out[cap + 1] = a[cap + 1]
        + (0..=cap)
            .map(|k| a[k] * ln_poisson_sf((cap - k) as i64, x).exp())
            .sum::<T>();
    out
}

impl<T: Real> OccupancyPath<T> for ZeroCostPath<T> {
    fn capacity(&self) -> usize {
        self.alpha.capacity()
    }
    fn horizon(&self) -> T {
        self.beta
    }
    fn gamma(&self, x: T) -> Vec<T> {
        zero_cost_state(&self.alpha, x)
    }
    fn theta(&self, x: T) -> Vec<T> {
        zero_cost_state(&self.alpha, x)
    }
}

/// The straight-line path `γ(x) = α + (ω − α)x/β` used to show feasibility.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPath<T> {
    constraint: EndpointConstraint<T>,
    rates: Vec<T>,
}

impl<T: Real> LinearPath<T> {
    pub fn new(constraint: EndpointConstraint<T>) -> Self {
        let cap = constraint.capacity();
        let pa = constraint.alpha.cumulative();
        let pw = constraint.omega.cumulative();
        let mut rates: Vec<T> = (0..=cap).map(|i| (pa[i] - pw[i]) / constraint.beta).collect();
        let s: T = rates.iter().copied().sum();
        rates.push(T::one() - s);
        Self { constraint, rates }
    }
}

impl<T: Real> OccupancyPath<T> for LinearPath<T> {
    fn capacity(&self) -> usize {
        self.constraint.capacity()
    }
    fn horizon(&self) -> T {
        self.constraint.beta
    }
    fn gamma(&self, x: T) -> Vec<T> {
        let f = x / self.constraint.beta;
        self.constraint
            .alpha
            .entries()
            .iter()
            .zip(self.constraint.omega.entries())
            .map(|(&a, &w)| a + (w - a) * f)
            .collect()
    }
    fn theta(&self, _x: T) -> Vec<T> {
        self.rates.clone()
    }
}

/// Piecewise-linear interpolation of states at knots, with constant rates per piece.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinearPath<T> {
    times: Vec<T>,
    states: Vec<Vec<T>>,
    rates: Vec<Vec<T>>,
}

impl<T: Real> PiecewiseLinearPath<T> {
    /// Knots must start at 0 and be increasing; the last knot is the horizon.
    pub fn new(times: Vec<T>, states: Vec<SimplexVector<T>>) -> Result<Self> {
        let grid = OccupancyPathGrid::new(times, states, GridRates::None)?;
        if grid.times[0] != T::zero() {
            return Err(Error::Domain("first knot must be at time 0".into()));
        }
        let rates = grid.interval_rates_from_psi();
        Ok(Self {
            states: grid.states.iter().map(|s| s.entries().to_vec()).collect(),
            times: grid.times,
            rates,
        })
    }

    /// Interpolates `path` at the given knots.
    pub fn interpolate<P: OccupancyPath<T> + ?Sized>(path: &P, times: &[T]) -> Result<Self> {
        let states = times
            .iter()
            .map(|&x| SimplexVector::from_computed(path.gamma(x)))
            .collect();
        Self::new(times.to_vec(), states)
    }

    fn piece(&self, x: T) -> usize {
        let n = self.times.len();
        match self.times.iter().position(|&t| t > x) {
            Some(0) => 0,
            Some(p) => (p - 1).min(n - 2),
            None => n - 2,
        }
    }
}

impl<T: Real> OccupancyPath<T> for PiecewiseLinearPath<T> {
    fn capacity(&self) -> usize {
        self.states[0].len() - 2
    }
    fn horizon(&self) -> T {
        *self.times.last().unwrap()
    }
    fn gamma(&self, x: T) -> Vec<T> {
        let k = self.piece(x);
        let f = (x - self.times[k]) / (self.times[k + 1] - self.times[k]);
        self.states[k]
            .iter()
            .zip(&self.states[k + 1])
            .map(|(&a, &b)| a + (b - a) * f)
            .collect()
    }
    fn theta(&self, x: T) -> Vec<T> {
        self.rates[self.piece(x)].clone()
    }
    fn breakpoints(&self) -> Vec<T> {
        self.times[1..self.times.len() - 1].to_vec()
    }
}

/// Convex combination of paths sharing capacity and horizon.
pub struct MixturePath<'a, T> {
    parts: Vec<(T, &'a dyn OccupancyPath<T>)>,
}

impl<'a, T: Real> MixturePath<'a, T> {
    /// Weights must be nonnegative and sum to one.
    pub fn new(parts: Vec<(T, &'a dyn OccupancyPath<T>)>) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::Domain("mixture needs at least one path".into()));
        }
        let s: T = parts.iter().map(|p| p.0).sum();
        if parts.iter().any(|p| p.0 < T::zero()) || (s - T::one()).abs() > lit(1e-12) {
            return Err(Error::Domain("mixture weights must be a probability vector".into()));
        }
        let (cap, hor) = (parts[0].1.capacity(), parts[0].1.horizon());
        if parts.iter().any(|p| p.1.capacity() != cap || p.1.horizon() != hor) {
            return Err(Error::Domain("mixture parts differ in capacity or horizon".into()));
        }
        Ok(Self { parts })
    }

    fn combine(&self, f: impl Fn(&dyn OccupancyPath<T>) -> Vec<T>) -> Vec<T> {
        let mut out = vec![T::zero(); self.capacity() + 2];
        for (w, p) in &self.parts {
            if *w == T::zero() {
                continue;
            }
            for (o, v) in out.iter_mut().zip(f(*p)) {
                *o += *w * v;
            }
        }
        out
    }
}

impl<T: Real> OccupancyPath<T> for MixturePath<'_, T> {
    fn capacity(&self) -> usize {
        self.parts[0].1.capacity()
    }
    fn horizon(&self) -> T {
        self.parts[0].1.horizon()
    }
    fn gamma(&self, x: T) -> Vec<T> {
        self.combine(|p| p.gamma(x))
    }
    fn theta(&self, x: T) -> Vec<T> {
        self.combine(|p| p.theta(x))
    }
    fn breakpoints(&self) -> Vec<T> {
        self.parts
            .iter()
            .filter(|p| p.0 > T::zero())
            .flat_map(|p| p.1.breakpoints())
            .collect()
    }
}
