//! One function per problem kind. Each returns a JSON document plus, where a
//! solver was involved, the residual norm that decides the exit status.

use std::collections::BTreeMap;

use occupancy_core::decompose::combine_rates;
use occupancy_core::applications::{classical_rate, coupon_rate, overflow_rate};
use occupancy_core::extremal::{build_empty_extremal, build_general_extremal};
use occupancy_core::feasibility::{feasibility_check, Feasibility};
use occupancy_core::path::{zero_cost_endpoint, zero_cost_path, OccupancyPath};
use occupancy_core::simulation::{empirical_exponent, entropy_min_oracle, mean_terminal, SimConfig, TruncatedProgram};
use occupancy_core::twist::{primal_residual, solve_pieces, TwistCase};
use occupancy_core::verify::{run_all, PropertyReport};
use occupancy_core::{EndpointConstraint, SimplexVector};
use serde_json::{json, Value};

use crate::error::CliError;
use crate::spec::{Kind, ProblemSpec};

/// Residual norms above this never exit 0.
pub const RESIDUAL_LIMIT: f64 = 1e-8;

/// Result of one command before formatting.
pub enum Outcome {
    Document { doc: Value, residual: Option<f64> },
    Table { header: Vec<String>, rows: Vec<Vec<f64>>, doc: Value },
    Reports(Vec<PropertyReport>),
}

fn keyed(m: &BTreeMap<usize, f64>) -> Value {
    Value::Object(m.iter().map(|(k, v)| (k.to_string(), json!(v))).collect())
}

fn simplex(v: &[f64]) -> Result<SimplexVector<f64>, CliError> {
    Ok(SimplexVector::with_tolerance(v.to_vec(), crate::spec::SIMPLEX_SUM_TOL)?)
}

fn constraint(spec: &ProblemSpec) -> Result<EndpointConstraint<f64>, CliError> {
    let p = &spec.params;
    let alpha = simplex(p.alpha.as_deref().unwrap_or_default())?;
    let omega = simplex(p.omega.as_deref().unwrap_or_default())?;
    Ok(EndpointConstraint::new(alpha, omega, p.beta.unwrap_or_default())?)
}

/// Rejects infeasible constraints; `Ok(false)` for a feasible constraint with infinite rate.
fn require_feasible(c: &EndpointConstraint<f64>) -> Result<bool, CliError> {
    match feasibility_check(c) {
        Feasibility::Infeasible(v) => Err(CliError::Infeasible(v.to_string())),
        Feasibility::InfiniteRate => Ok(false),
        _ => Ok(true),
    }
}

fn case_name(c: TwistCase) -> &'static str {
    match c {
        TwistCase::Exponential => "exponential",
        TwistCase::Polynomial => "polynomial",
    }
}

pub fn run(spec: &ProblemSpec) -> Result<Outcome, CliError> {
    match spec.kind {
        Kind::Rate => rate(spec),
        Kind::Path => path(spec),
        Kind::Classical => classical(spec),
        Kind::Overflow => overflow(spec),
        Kind::Coupon => coupon(spec),
        Kind::Simulate => simulate(spec),
        Kind::Oracle => oracle(spec),
        Kind::Verify => Ok(Outcome::Reports(run_all(spec.params.seed.unwrap_or_default()))),
    }
}

fn rate(spec: &ProblemSpec) -> Result<Outcome, CliError> {
    let c = constraint(spec)?;
    if !require_feasible(&c)? {
        let doc = json!({ "problem": spec, "case": "infinite", "J": null, "residuals": { "constraint": 0.0, "primal": 0.0 } });
        return Ok(Outcome::Document { doc, residual: Some(0.0) });
    }
    let pieces = solve_pieces(&c)?;
    let mut rates = Vec::new();
    let mut worst = (0.0f64, 0.0f64);
    let mut out = Vec::new();
    for (piece, tw) in &pieces {
        let mut entry = json!({
            "offset": piece.offset,
            "mass": piece.mass,
            "beta": piece.beta,
        });
        let rate = match tw {
            Some(tw) => {
                let pc = piece.constraint().expect("solved pieces receive balls");
                let primal = primal_residual(&pc, &tw.minimizer);
                worst = (worst.0.max(tw.residual.abs()), worst.1.max(primal.abs()));
                entry["case"] = json!(case_name(tw.case));
                entry["rho"] = json!(tw.rho);
                entry["C"] = keyed(&tw.class_scales);
                entry["W"] = keyed(&tw.endpoint_weights);
                entry["J"] = json!(tw.rate);
                entry["iterations"] = json!(tw.iterations);
                entry["residual"] = json!(tw.residual);
                entry["primal_residual"] = json!(primal);
                tw.rate
            }
            None => {
                entry["case"] = json!("idle");
                entry["J"] = json!(0.0);
                0.0
            }
        };
        rates.push(rate);
        out.push(entry);
    }
    let subs: Vec<_> = pieces.iter().map(|(p, _)| p.clone()).collect();
    let mut doc = json!({
        "problem": spec,
        "case": match feasibility_check(&c) { Feasibility::Polynomial => "polynomial", _ => "exponential" },
        "J": combine_rates(&subs, &rates, c.beta),
    });
    if let [(_, Some(tw))] = pieces.as_slice() {
        doc["rho"] = json!(tw.rho);
        doc["C"] = keyed(&tw.class_scales);
        doc["W"] = keyed(&tw.endpoint_weights);
    }
    doc["pieces"] = Value::Array(out);
    doc["residuals"] = json!({ "constraint": worst.0, "primal": worst.1 });
    Ok(Outcome::Document { doc, residual: Some(worst.0.max(worst.1)) })
}

fn path(spec: &ProblemSpec) -> Result<Outcome, CliError> {
    let p = &spec.params;
    let beta = p.beta.unwrap_or_default();
    let grid = p.grid.unwrap_or(101);
    let boxed: Box<dyn OccupancyPath<f64>> = match &p.omega {
        Some(_) => {
            let c = constraint(spec)?;
            if !require_feasible(&c)? {
                return Err(CliError::Infeasible("the rate is infinite, so no extremal path exists".into()));
            }
            if c.is_empty_start() {
                Box::new(build_empty_extremal(&c.omega, beta)?)
            } else {
                Box::new(build_general_extremal(&c)?)
            }
        }
        None => Box::new(zero_cost_path(&simplex(p.alpha.as_deref().unwrap_or_default())?, beta)),
    };
    let cap = boxed.capacity();
    let sample = boxed.sample(grid);
    let mut header = vec!["x".to_string()];
    header.extend((0..=cap).map(|i| format!("gamma_{i}")));
    header.push("gamma_over".into());
    header.extend((0..=cap).map(|i| format!("theta_{i}")));
    header.push("theta_over".into());
    header.extend((0..=cap).map(|i| format!("psi_{i}")));
    let mut rows = Vec::with_capacity(grid);
    let (mut gammas, mut thetas, mut psis) = (Vec::new(), Vec::new(), Vec::new());
    for &x in &sample.times {
        let g = boxed.gamma(x);
        let t = boxed.theta(x);
        let psi = boxed.psi(x);
        let mut row = vec![x];
        row.extend(&g);
        row.extend(&t);
        row.extend(&psi);
        rows.push(row);
        gammas.push(g);
        thetas.push(t);
        psis.push(psi);
    }
    let doc = json!({ "problem": spec, "x": sample.times, "gamma": gammas, "theta": thetas, "psi": psis });
    Ok(Outcome::Table { header, rows, doc })
}

fn classical(spec: &ProblemSpec) -> Result<Outcome, CliError> {
    let p = &spec.params;
    let (w, beta) = (p.omega0.unwrap_or_default(), p.beta.unwrap_or_default());
    if w < 1.0 - beta {
        return Err(CliError::Infeasible(format!(
            "conservation fails: ending with {w} empty urns needs more than the {beta} balls per urn available"
        )));
    }
    let s = classical_rate(w, beta)?;
    let residual = if s.c > 0.0 { (s.rho * (1.0 - w) - (-(-beta * s.rho).exp_m1())).abs() } else { 0.0 };
    let doc = json!({
        "problem": spec,
        "omega0": s.omega0,
        "beta": s.beta,
        "rho": s.rho,
        "C": s.c,
        "J": s.j,
        "residual": residual,
    });
    Ok(Outcome::Document { doc, residual: Some(residual) })
}

fn overflow(spec: &ProblemSpec) -> Result<Outcome, CliError> {
    let p = &spec.params;
    let s = overflow_rate(
        p.capacity.unwrap_or_default(),
        p.beta.unwrap_or_default(),
        p.eta.unwrap_or_default(),
        p.allow_small.unwrap_or(false),
    )?;
    let residual = s.residuals.iter().chain(&s.reduced_residuals).fold(0.0f64, |m, r| m.max(r.abs()));
    let doc = json!({
        "problem": spec,
        "capacity": s.capacity,
        "beta": s.beta,
        "eta": s.eta,
        "zeta": s.zeta,
        "rho": s.rho,
        "nu": s.nu,
        "C": s.c,
        "J": s.j_o,
        "q": s.q,
        "r": s.r,
        "binding": s.binding,
        "residuals": { "equations": s.residuals, "reduced": s.reduced_residuals },
    });
    Ok(Outcome::Document { doc, residual: Some(residual) })
}

fn coupon(spec: &ProblemSpec) -> Result<Outcome, CliError> {
    let p = &spec.params;
    let s = coupon_rate(
        p.alpha.as_deref().unwrap_or_default(),
        p.capacity.unwrap_or_default(),
        p.beta.unwrap_or_default(),
        p.xi.unwrap_or_default(),
    )?;
    let doc = json!({
        "problem": spec,
        "capacity": s.capacity,
        "beta": s.beta,
        "xi": s.xi,
        "rho": s.rho,
        "C": keyed(&s.class_scales),
        "W": s.w,
        "J": s.j_c,
        "binding": s.binding,
        "residual": s.residual,
    });
    Ok(Outcome::Document { doc, residual: Some(s.residual.abs()) })
}

fn simulate(spec: &ProblemSpec) -> Result<Outcome, CliError> {
    let p = &spec.params;
    let alpha = simplex(p.alpha.as_deref().unwrap_or_default())?;
    let beta = p.beta.unwrap_or_default();
    let ns = p.n.clone().unwrap_or_default();
    let cfg = SimConfig::new(ns[0], beta, alpha.clone(), p.seed.unwrap_or_default(), p.trials.unwrap_or(1))?;
    let threshold = |n: usize, w: f64| (w * n as f64 - 1e-9).ceil() as u64;
    let estimates = p.omega0.map(|w| empirical_exponent(&cfg, |n, v| v[0] >= threshold(n, w), &ns));
    let mut runs = Vec::new();
    for (i, &n) in ns.iter().enumerate() {
        let c = cfg.with_n(n);
        let mut run = json!({
            "n": n,
            "throws": c.throws(),
            "mean_occupancy": mean_terminal(&c).entries(),
        });
        if let Some(est) = &estimates {
            let e = &est[i];
            run["hits"] = json!(e.hits);
            run["probability"] = json!(e.probability);
            run["probability_interval"] = json!([e.probability_interval.0, e.probability_interval.1]);
            run["exponent"] = json!(e.exponent);
            run["exponent_interval"] = json!([e.exponent_interval.0, e.exponent_interval.1]);
        }
        runs.push(run);
    }
    let mut doc = json!({
        "problem": spec,
        "zero_cost_occupancy": zero_cost_endpoint(&alpha, beta).entries(),
        "runs": runs,
    });
    if let Some(w) = p.omega0 {
        if alpha.level(0) == 1.0 && w > (-beta).exp() && w < 1.0 && beta > 0.0 {
            if let Ok(s) = classical_rate(w, beta) {
                doc["J"] = json!(s.j);
            }
        }
    }
    Ok(Outcome::Document { doc, residual: None })
}

fn oracle(spec: &ProblemSpec) -> Result<Outcome, CliError> {
    let c = constraint(spec)?;
    if !require_feasible(&c)? {
        return Err(CliError::Infeasible("the rate is infinite; the truncated program has no solution".into()));
    }
    let support = spec.params.support.unwrap_or(80);
    let sol = entropy_min_oracle(&TruncatedProgram::from_constraint(&c, support)?)?;
    let doc = json!({
        "problem": spec,
        "J": sol.value,
        "support": support,
        "kkt_residual": sol.kkt_residual,
        "sweeps": sol.sweeps,
        "newton_steps": sol.newton_steps,
    });
    Ok(Outcome::Document { doc, residual: Some(sol.kkt_residual.abs()) })
}
