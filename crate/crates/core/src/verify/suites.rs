use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::instances::{instance_suite, random_instance, InstanceBounds, InstanceKind, RandomInstance};
use crate::applications::{overflow_rate, zero_cost_spare_capacity};
use crate::decompose::{combine_rates, irreducible_decompose};
use crate::entropy::relative_entropy_slice;
use crate::error::{Error, Result};
use crate::extremal::{
    build_empty_extremal, build_general_extremal, interior_grid, max_el_residual, ElForm, ElOptions,
    EmptyExtremal, GeneralExtremal,
};
use crate::path::{path_cost_closed, validity_check, LinearPath, MixturePath, OccupancyPath, PiecewiseLinearPath};
use crate::simplex::{EndpointConstraint, SimplexVector};
use crate::simulation::{audit_trial, entropy_min_oracle, SimConfig, TruncatedProgram};
use crate::twist::terminal_rate_general;

/// Outcome of one property suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub name: String,
    pub checked: usize,
    pub failures: usize,
    /// Largest observed discrepancy, in the units of `tolerance`.
    pub worst: f64,
    pub tolerance: f64,
    pub seconds: f64,
    pub note: String,
}

impl PropertyReport {
    pub fn passed(&self) -> bool {
        self.failures == 0 && self.checked > 0
    }

    /// One line: `PASS name (checked, worst, note)`.
    pub fn line(&self) -> String {
        format!(
            "{} {}: {} checked, {} failed, worst {:.3e} (tolerance {:.1e}, {:.2}s){}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.checked,
            self.failures,
            self.worst,
            self.tolerance,
            self.seconds,
            if self.note.is_empty() { String::new() } else { format!("; {}", self.note) }
        )
    }
}

struct Tally {
    name: &'static str,
    tolerance: f64,
    checked: usize,
    failures: usize,
    worst: f64,
    start: Instant,
    note: String,
}

impl Tally {
    fn new(name: &'static str, tolerance: f64) -> Self {
        Self { name, tolerance, checked: 0, failures: 0, worst: 0.0, start: Instant::now(), note: String::new() }
    }

    /// Records a discrepancy that must not exceed the tolerance.
    fn error(&mut self, e: f64) {
        self.checked += 1;
        if !(e <= self.tolerance) {
            self.failures += 1;
        }
        if !(e <= self.worst) {
            self.worst = e;
        }
    }

    fn pass(&mut self, ok: bool) {
        self.error(if ok { 0.0 } else { f64::INFINITY });
    }

    fn finish(self) -> PropertyReport {
        PropertyReport {
            name: self.name.into(),
            checked: self.checked,
            failures: self.failures,
            worst: self.worst,
            tolerance: self.tolerance,
            seconds: self.start.elapsed().as_secs_f64(),
            note: self.note,
        }
    }
}

fn random_simplex<R: Rng>(rng: &mut R, len: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..len).map(|_| -rng.gen::<f64>().max(1e-300).ln()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// Nonnegativity, identity and joint convexity of relative entropy.
pub fn entropy_suite(seed: u64, draws: usize) -> PropertyReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tally::new("entropy nonnegativity and convexity", 1e-12);
    for _ in 0..draws {
        let len = rng.gen_range(2..8);
        let (a, b, c, d) = (
            random_simplex(&mut rng, len),
            random_simplex(&mut rng, len),
            random_simplex(&mut rng, len),
            random_simplex(&mut rng, len),
        );
        t.error((-relative_entropy_slice(&a, &b)).max(0.0));
        t.error(relative_entropy_slice(&a, &a).abs());
        let l: f64 = rng.gen();
        let mix = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(&u, &v)| l * u + (1.0 - l) * v).collect::<Vec<_>>();
        let lhs = relative_entropy_slice(&mix(&a, &c), &mix(&b, &d));
        let rhs = l * relative_entropy_slice(&a, &b) + (1.0 - l) * relative_entropy_slice(&c, &d);
        t.error((lhs - rhs).max(0.0));
    }
    t.finish()
}

const ALL_KINDS: [InstanceKind; 5] = [
    InstanceKind::EmptyExponential,
    InstanceKind::GeneralExponential,
    InstanceKind::EmptyPolynomial,
    InstanceKind::GeneralPolynomial,
    InstanceKind::Reducible,
];

/// The straight-line path between the endpoints of any feasible
/// constraint is valid.
pub fn linear_path_suite(seed: u64, count: usize) -> PropertyReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tally::new("validity of straight-line paths", 0.0);
    for i in 0..count {
        let inst = random_instance(&mut rng, ALL_KINDS[i % ALL_KINDS.len()], InstanceBounds::default());
        let p = LinearPath::new(inst.constraint.clone());
        t.pass(validity_check(&p.sample(201)).is_valid());
    }
    t.finish()
}

/// Replays simulated trials checking conservation and monotonicity of the
/// cumulative counts after every throw.
pub fn simulation_conservation_suite(seed: u64, configs: usize, trials: usize) -> PropertyReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tally::new("simulation conservation (exact)", 0.0);
    let mut throws = 0;
    for _ in 0..configs {
        let cap = rng.gen_range(0..=5);
        let alpha = SimplexVector::new(random_simplex(&mut rng, cap + 2)).unwrap();
        let cfg = SimConfig::new(rng.gen_range(1..300), rng.gen_range(0.0..4.0), alpha, rng.gen(), trials).unwrap();
        for trial in 0..trials {
            match audit_trial(&cfg, trial) {
                Ok(k) => {
                    throws += k;
                    t.pass(true);
                }
                Err(_) => t.pass(false),
            }
        }
    }
    t.note = format!("{throws} throws audited");
    t.finish()
}

fn oracle_value(c: &EndpointConstraint<f64>, support: usize) -> Result<f64> {
    Ok(entropy_min_oracle(&TruncatedProgram::from_constraint(c, support)?)?.value)
}

/// Rates of reducible constraints: urn-weighted piece rates, the direct
/// rate and the brute-force minimum agree.
pub fn decomposition_suite(seed: u64, count: usize) -> PropertyReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tally::new("decomposition additivity", 1e-6);
    for _ in 0..count {
        let inst = random_instance(&mut rng, InstanceKind::Reducible, InstanceBounds::default());
        let c = &inst.constraint;
        let outcome = (|| -> Result<(f64, f64, f64)> {
            let pieces = irreducible_decompose(c)?;
            let rates = pieces
                .iter()
                .map(|p| p.constraint().map_or(Ok(0.0), |s| terminal_rate_general(&s)))
                .collect::<Result<Vec<f64>>>()?;
            Ok((combine_rates(&pieces, &rates, c.beta), terminal_rate_general(c)?, oracle_value(c, 80)?))
        })();
        match outcome {
            Ok((sum, direct, oracle)) => t.error((sum - direct).abs().max((sum - oracle).abs())),
            Err(_) => t.pass(false),
        }
    }
    t.finish()
}

/// `ν > ρ > 1` exactly when the spare capacity exceeds its zero-cost value,
/// and `ν < ρ < 1` below it.
pub fn overflow_sign_suite(seed: u64, count: usize) -> PropertyReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tally::new("overflow sign law", 0.0);
    while t.checked < count {
        let cap = rng.gen_range(1..=4usize);
        let beta: f64 = rng.gen_range(0.5..4.0);
        let zeta0 = zero_cost_spare_capacity(cap, beta);
        let lo = (cap as f64 - beta).max(0.0);
        let hi = cap as f64;
        let above = rng.gen_bool(0.5);
        let frac: f64 = rng.gen_range(0.05..0.6);
        let zeta = if above { zeta0 + frac * (hi - zeta0) } else { zeta0 - frac * (zeta0 - lo) };
        let eta = zeta - cap as f64 + beta;
        let Ok(s) = overflow_rate(cap, beta, eta, true) else {
            t.pass(false);
            continue;
        };
        let ok = if above { s.nu > s.rho && s.rho > 1.0 } else { s.nu < s.rho && s.rho < 1.0 };
        t.pass(ok && s.binding);
    }
    t.finish()
}

enum AnyExtremal {
    Empty(EmptyExtremal<f64>),
    General(GeneralExtremal<f64>),
}

impl AnyExtremal {
    fn build(inst: &RandomInstance) -> Result<Self> {
        let c = &inst.constraint;
        if inst.kind.is_empty_start() {
            Ok(Self::Empty(build_empty_extremal(&c.omega, c.beta)?))
        } else {
            Ok(Self::General(build_general_extremal(c)?))
        }
    }

    fn path(&self) -> &dyn OccupancyPath<f64> {
        match self {
            Self::Empty(e) => e,
            Self::General(e) => e,
        }
    }

    fn closed_form_cost(&self) -> Result<f64> {
        match self {
            Self::Empty(e) => e.closed_form_cost(),
            Self::General(e) => e.closed_form_cost(),
        }
    }

    fn entropy_cost(&self) -> f64 {
        match self {
            Self::Empty(e) => e.entropy_cost(),
            Self::General(e) => e.entropy_cost(),
        }
    }

    fn el_form(&self) -> Option<ElForm> {
        match self {
            Self::Empty(e) => Some(e.el_form()),
            Self::General(e) => e.el_form,
        }
    }
}

fn suite_instances(seed: u64, count: usize, polynomial: usize) -> Vec<RandomInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    instance_suite(&mut rng, count, polynomial, InstanceBounds::default())
}

/// Boundary-term cost, entropy-route cost and quadrature of the path
/// Lagrangian agree pairwise.
pub fn cost_identity_suite(seed: u64, count: usize, polynomial: usize) -> PropertyReport {
    let mut t = Tally::new("cost identity", 1e-6);
    let errs: Vec<f64> = suite_instances(seed, count, polynomial)
        .par_iter()
        .map(|inst| {
            let Ok(e) = AnyExtremal::build(inst) else { return f64::INFINITY };
            let Ok(closed) = e.closed_form_cost() else { return f64::INFINITY };
            let entropy = e.entropy_cost();
            let quad = path_cost_closed(e.path());
            (closed - entropy).abs().max((closed - quad).abs()).max((entropy - quad).abs())
        })
        .collect();
    for e in errs {
        t.error(e);
    }
    t.note = format!("{count} instances, {polynomial} polynomial");
    t.finish()
}

/// The instance on which the straight-line path must visibly fail the
/// Euler–Lagrange equations.
pub fn discrimination_instance() -> EndpointConstraint<f64> {
    let omega = SimplexVector::new(vec![0.1, 0.2, 0.25, 0.45]).unwrap();
    EndpointConstraint::empty(omega, 2.5).unwrap()
}

/// Largest Euler–Lagrange residual of the straight-line path on
/// [`discrimination_instance`].
pub fn linear_path_el_residual() -> Result<f64> {
    let c = discrimination_instance();
    let grid = interior_grid(c.beta, 50, 1e-4);
    max_el_residual(&LinearPath::new(c), &grid, ElForm::Exponential, ElOptions::default())
}

/// Constructed extremals satisfy the Euler–Lagrange equations, and the
/// straight-line path on a fixed instance does not.
pub fn euler_lagrange_suite(seed: u64, count: usize, polynomial: usize) -> PropertyReport {
    let mut t = Tally::new("Euler-Lagrange residuals", 1e-6);
    let opts = ElOptions::default();
    let errs: Vec<f64> = suite_instances(seed, count, polynomial)
        .par_iter()
        .map(|inst| {
            let Ok(e) = AnyExtremal::build(inst) else { return f64::INFINITY };
            let Some(form) = e.el_form() else { return f64::INFINITY };
            let grid = interior_grid(inst.constraint.beta, 50, opts.margin);
            max_el_residual(e.path(), &grid, form, opts).unwrap_or(f64::INFINITY)
        })
        .collect();
    for e in errs {
        t.error(e);
    }
    let lin = linear_path_el_residual().unwrap_or(0.0);
    t.checked += 1;
    if !(lin > 1e-2) {
        t.failures += 1;
    }
    t.note = format!("straight-line path residual {lin:.3e} (must exceed 1e-2)");
    t.finish()
}

/// Twist-parameter rates against the brute-force minimizer.
pub fn oracle_equivalence_suite(seed: u64, count: usize, support: usize) -> PropertyReport {
    let mut t = Tally::new("oracle equivalence", 1e-5);
    let errs: Vec<f64> = suite_instances(seed, count, count / 5)
        .par_iter()
        .map(|inst| {
            let c = &inst.constraint;
            match (terminal_rate_general(c), oracle_value(c, support)) {
                (Ok(a), Ok(b)) => (a - b).abs(),
                _ => f64::INFINITY,
            }
        })
        .collect();
    for e in errs {
        t.error(e);
    }
    t.note = format!("truncation N = {support}");
    t.finish()
}

/// Piecewise-linear path from `α` to `ω` along the straight segment with a
/// random monotone time change whose speed respects the unit arrival rate.
fn random_valid_path<R: Rng>(rng: &mut R, c: &EndpointConstraint<f64>) -> Result<PiecewiseLinearPath<f64>> {
    let pa = c.alpha.cumulative();
    let pw = c.omega.cumulative();
    let s: f64 = pa.iter().zip(&pw).map(|(a, w)| a - w).sum();
    let pieces = rng.gen_range(2..7);
    let mut cuts: Vec<f64> = (0..pieces - 1).map(|_| rng.gen_range(0.0..c.beta)).collect();
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut times = vec![0.0];
    times.extend(cuts);
    times.push(c.beta);
    times.dedup();
    let lens: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    // Progress along the segment per unit time, capped at 1/s.
    let mut u: Vec<f64> = lens.iter().map(|_| rng.gen::<f64>()).collect();
    let covered: f64 = u.iter().zip(&lens).map(|(a, l)| a * l).sum();
    if s <= 0.0 {
        u = vec![1.0 / c.beta; lens.len()];
    } else if covered >= s {
        u.iter_mut().for_each(|v| *v *= s / covered / s);
    } else {
        // Blend towards full speed until the segment is covered.
        let full: f64 = lens.iter().sum();
        let w = (s - covered) / (full - covered);
        u.iter_mut().for_each(|v| *v = (w + (1.0 - w) * *v) / s);
    }
    let mut g = 0.0;
    let mut states = vec![c.alpha.clone()];
    for (k, l) in lens.iter().enumerate() {
        g += u[k] * l;
        let f = if k == lens.len() - 1 { 1.0 } else { g.min(1.0) };
        let e: Vec<f64> = c
            .alpha
            .entries()
            .iter()
            .zip(c.omega.entries())
            .map(|(&a, &w)| a + (w - a) * f)
            .collect();
        states.push(SimplexVector::with_tolerance(e, 1e-12)?);
    }
    PiecewiseLinearPath::new(times, states)
}

/// Perturbed valid paths (mixtures of the extremal with the straight-line
/// path or with random valid paths) never cost less than the extremal.
pub fn strong_minimum_suite(seed: u64, constraints: usize, per_constraint: usize) -> PropertyReport {
    let mut t = Tally::new("strong minimum under perturbation", 1e-7);
    let insts = suite_instances(seed, constraints, constraints / 4);
    let results: Vec<Vec<f64>> = insts
        .par_iter()
        .enumerate()
        .map(|(idx, inst)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(idx as u64 + 1)));
            let c = &inst.constraint;
            let Ok(e) = AnyExtremal::build(inst) else { return vec![f64::INFINITY] };
            let Ok(best) = e.closed_form_cost() else { return vec![f64::INFINITY] };
            let linear = LinearPath::new(c.clone());
            (0..per_constraint)
                .map(|k| {
                    let other: Box<dyn OccupancyPath<f64>> = if k % 2 == 0 {
                        Box::new(linear.clone())
                    } else {
                        match random_valid_path(&mut rng, c) {
                            Ok(p) => Box::new(p),
                            Err(_) => return f64::INFINITY,
                        }
                    };
                    let l: f64 = rng.gen_range(0.05..0.95);
                    let Ok(mix) = MixturePath::new(vec![(l, e.path()), (1.0 - l, other.as_ref())]) else {
                        return f64::INFINITY;
                    };
                    if !validity_check(&mix.sample(201)).is_valid() {
                        return f64::INFINITY;
                    }
                    (best - path_cost_closed(&mix)).max(0.0)
                })
                .collect()
        })
        .collect();
    for e in results.into_iter().flatten() {
        t.error(e);
    }
    t.note = format!("{constraints} constraints x {per_constraint} paths");
    t.finish()
}

/// Runs every suite with default sizes.
pub fn run_all(seed: u64) -> Vec<PropertyReport> {
    vec![
        entropy_suite(seed, 1000),
        linear_path_suite(seed, 50),
        simulation_conservation_suite(seed, 20, 5),
        decomposition_suite(seed, 10),
        overflow_sign_suite(seed, 50),
        strong_minimum_suite(seed, 20, 50),
        cost_identity_suite(seed, 20, 5),
        euler_lagrange_suite(seed, 20, 5),
        oracle_equivalence_suite(seed, 50, 80),
    ]
}

/// Error for a failed report, for callers that want `?`.
pub fn require(report: &PropertyReport) -> Result<()> {
    if report.passed() {
        Ok(())
    } else {
        Err(Error::SolverFailure { what: report.name.clone(), residual: report.worst })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_runs_pass() {
        for r in [
            entropy_suite(1, 100),
            linear_path_suite(1, 10),
            simulation_conservation_suite(1, 3, 2),
            overflow_sign_suite(1, 10),
        ] {
            assert!(r.passed(), "{}", r.line());
        }
    }

    #[test]
    fn random_paths_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for kind in ALL_KINDS {
            for _ in 0..10 {
                let inst = random_instance(&mut rng, kind, InstanceBounds::default());
                let p = random_valid_path(&mut rng, &inst.constraint).unwrap();
                assert!(validity_check(&p.sample(301)).is_valid());
                let end = p.gamma(inst.constraint.beta);
                let gap = end.iter().zip(inst.constraint.omega.entries()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                assert!(gap < 1e-12);
            }
        }
    }

    #[test]
    fn report_line_format() {
        let r = PropertyReport {
            name: "x".into(),
            checked: 2,
            failures: 0,
            worst: 0.0,
            tolerance: 1e-6,
            seconds: 0.0,
            note: String::new(),
        };
        assert!(r.line().starts_with("PASS x: 2 checked"));
    }
}
