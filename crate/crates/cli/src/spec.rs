//! Problem specifications: flag and config-file parsing, validation and defaults.

use std::fmt;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;

/// Largest deviation from unit sum accepted for an input simplex vector.
pub const SIMPLEX_SUM_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Rate,
    Path,
    Classical,
    Overflow,
    Coupon,
    Simulate,
    Oracle,
    Verify,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.to_possible_value().expect("no skipped variants").get_name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

/// Every parameter any kind accepts. Unset fields are omitted from JSON.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Params {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub capacity: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub support: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub allow_small: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
}

/// A validated problem with defaults filled in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub kind: Kind,
    #[serde(flatten)]
    pub params: Params,
}

fn parse_f64(s: &str) -> Result<f64, String> {
    let t = s.trim();
    match t.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(format!("`{t}` is not a finite number")),
    }
}

fn parse_int<T: std::str::FromStr>(s: &str) -> Result<T, String> {
    let t = s.trim();
    t.parse::<T>().map_err(|_| format!("`{t}` is not a nonnegative integer"))
}

fn parse_list<T>(s: &str, item: impl Fn(&str) -> Result<T, String>) -> Result<Vec<T>, String> {
    let t = s.trim().trim_start_matches('[').trim_end_matches(']');
    if t.trim().is_empty() {
        return Err("empty list".into());
    }
    t.split(',').map(item).collect()
}

fn parse_bool(s: &str) -> Result<bool, String> {
    match s.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        t => Err(format!("`{t}` is not a boolean")),
    }
}

impl Params {
    /// Sets one parameter from its text form. Keys accept `-` or `_`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key.trim().replace('-', "_").as_str() {
            "alpha" => self.alpha = Some(parse_list(value, parse_f64)?),
            "omega" => self.omega = Some(parse_list(value, parse_f64)?),
            "omega0" => self.omega0 = Some(parse_f64(value)?),
            "beta" => self.beta = Some(parse_f64(value)?),
            "capacity" => self.capacity = Some(parse_int(value)?),
            "eta" => self.eta = Some(parse_f64(value)?),
            "xi" => self.xi = Some(parse_f64(value)?),
            "n" => self.n = Some(parse_list(value, parse_int)?),
            "seed" => self.seed = Some(parse_int(value)?),
            "trials" => self.trials = Some(parse_int(value)?),
            "grid" => self.grid = Some(parse_int(value)?),
            "support" => self.support = Some(parse_int(value)?),
            "allow_small" => self.allow_small = Some(parse_bool(value)?),
            "format" => {
                self.format = Some(Format::from_str(value.trim(), true).map_err(|_| format!("unknown format `{}`", value.trim()))?)
            }
            k => return Err(format!("unknown parameter `{k}`")),
        }
        Ok(())
    }

    /// Names of the parameters that are set.
    pub fn present(&self) -> Vec<String> {
        match serde_json::to_value(self) {
            Ok(Value::Object(m)) => m.keys().cloned().collect(),
            _ => Vec::new(),
        }
    }
}

/// Parameters read from a config file, with the kind if the file names one.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    pub kind: Option<Kind>,
    pub params: Params,
}

fn json_scalar_text(v: &Value) -> Option<String> {
    match v {
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        Value::String(s) => Some(s.clone()),
        _ => None,
    }
}

/// Parses a config file: a JSON object (optionally wrapping the problem in a
/// `problem` field, as emitted by the tool) or `key = value` lines with `#`
/// comments.
pub fn parse_config(text: &str) -> Result<Config, CliError> {
    if text.trim_start().starts_with('{') {
        parse_json_config(text)
    } else {
        parse_kv_config(text)
    }
}

fn parse_json_config(text: &str) -> Result<Config, CliError> {
    let doc: Value = serde_json::from_str(text)
        .map_err(|e| CliError::Parse(format!("config line {}, column {}: {e}", e.line(), e.column())))?;
    let obj = match doc.get("problem").unwrap_or(&doc) {
        Value::Object(m) => m.clone(),
        _ => return Err(CliError::Parse("config: expected a JSON object".into())),
    };
    let mut cfg = Config::default();
    for (key, value) in &obj {
        let text = match value {
            Value::Array(items) => items
                .iter()
                .map(|i| json_scalar_text(i).ok_or_else(|| format!("nested value in `{key}`")))
                .collect::<Result<Vec<_>, _>>()
                .map(|v| v.join(",")),
            v => json_scalar_text(v).ok_or_else(|| format!("unsupported value for `{key}`")),
        }
        .map_err(|m| CliError::Parse(format!("config field `{key}`: {m}")))?;
        apply_config_entry(&mut cfg, key, &text).map_err(|m| CliError::Parse(format!("config field `{key}`: {m}")))?;
    }
    Ok(cfg)
}

fn parse_kv_config(text: &str) -> Result<Config, CliError> {
    let mut cfg = Config::default();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Parse(format!("config line {}: expected `key = value`, got `{line}`", no + 1)))?;
        apply_config_entry(&mut cfg, key.trim(), value.trim())
            .map_err(|m| CliError::Parse(format!("config line {} (`{}`): {m}", no + 1, key.trim())))?;
    }
    Ok(cfg)
}

fn apply_config_entry(cfg: &mut Config, key: &str, value: &str) -> Result<(), String> {
    if key == "kind" {
        cfg.kind = Some(Kind::from_str(value, true).map_err(|_| format!("unknown kind `{value}`"))?);
        Ok(())
    } else {
        cfg.params.set(key, value)
    }
}

/// Parameters each kind accepts.
pub fn allowed(kind: Kind) -> &'static [&'static str] {
    match kind {
        Kind::Rate => &["alpha", "omega", "beta", "format"],
        Kind::Path => &["alpha", "omega", "beta", "capacity", "grid", "format"],
        Kind::Classical => &["omega0", "beta", "format"],
        Kind::Overflow => &["capacity", "beta", "eta", "allow_small", "format"],
        Kind::Coupon => &["alpha", "capacity", "beta", "xi", "format"],
        Kind::Simulate => &["alpha", "capacity", "beta", "n", "seed", "trials", "omega0", "format"],
        Kind::Oracle => &["alpha", "omega", "beta", "support", "format"],
        Kind::Verify => &["seed", "format"],
    }
}

/// Parameters each kind cannot run without.
pub fn required(kind: Kind) -> &'static [&'static str] {
    match kind {
        Kind::Rate | Kind::Oracle => &["omega", "beta"],
        Kind::Path => &["beta"],
        Kind::Classical => &["omega0", "beta"],
        Kind::Overflow => &["capacity", "beta", "eta"],
        Kind::Coupon => &["alpha", "capacity", "beta", "xi"],
        Kind::Simulate => &["n", "beta"],
        Kind::Verify => &[],
    }
}

fn perr<T>(msg: String) -> Result<T, CliError> {
    Err(CliError::Parse(msg))
}

fn check_simplex(name: &str, v: &[f64]) -> Result<(), CliError> {
    if let Some((i, x)) = v.iter().enumerate().find(|(_, &x)| x < 0.0) {
        return perr(format!("`{name}` entry {i} is negative ({x})"));
    }
    let s: f64 = v.iter().sum();
    if (s - 1.0).abs() > SIMPLEX_SUM_TOL {
        let shown = format!("{s:.12}");
        let shown = shown.trim_end_matches('0').trim_end_matches('.');
        return perr(format!(
            "`{name}` sums to {shown}, more than {SIMPLEX_SUM_TOL:e} away from 1 (vectors are not renormalized)"
        ));
    }
    Ok(())
}

fn empty_start(len: usize) -> Vec<f64> {
    let mut v = vec![0.0; len];
    v[0] = 1.0;
    v
}

/// Checks `params` against `kind` and fills defaults.
pub fn validate(kind: Kind, mut p: Params) -> Result<ProblemSpec, CliError> {
    let ok = allowed(kind);
    for key in p.present() {
        if !ok.contains(&key.as_str()) {
            return perr(format!("parameter `{key}` does not apply to `{kind}`"));
        }
    }
    let present = p.present();
    for key in required(kind) {
        if !present.iter().any(|k| k == key) {
            return perr(format!("`{kind}` needs `{key}` (flag --{} or a config entry)", key.replace('_', "-")));
        }
    }
    if let Some(b) = p.beta {
        let min_ok = if kind == Kind::Simulate { b >= 0.0 } else { b > 0.0 };
        if !min_ok {
            return perr(format!("`beta` must be positive, got {b}"));
        }
    }
    for (name, v) in [("omega", &p.omega), ("alpha", &p.alpha)] {
        if let Some(v) = v {
            check_simplex(name, v)?;
        }
    }
    match kind {
        Kind::Rate | Kind::Oracle | Kind::Path | Kind::Simulate => {
            if let Some(w) = &p.omega {
                if w.len() < 2 {
                    return perr("`omega` needs at least two entries (levels 0..=I and the overflow slot)".into());
                }
            }
            let len = match (&p.alpha, &p.omega, p.capacity) {
                (_, Some(w), _) => w.len(),
                (Some(a), None, _) => a.len(),
                (None, None, Some(c)) => c + 2,
                (None, None, None) if kind == Kind::Simulate => 2,
                (None, None, None) => return perr(format!("`{kind}` needs `alpha`, `omega` or `capacity`")),
            };
            let alpha = p.alpha.get_or_insert_with(|| empty_start(len));
            if alpha.len() != len {
                return perr(format!("`alpha` has {} entries but `omega` has {len}", alpha.len()));
            }
            if len < 2 {
                return perr("`alpha` needs at least two entries (levels 0..=I and the overflow slot)".into());
            }
            if let Some(c) = p.capacity {
                if c + 2 != len {
                    return perr(format!("`capacity` {c} does not match vectors of length {len}"));
                }
            }
        }
        _ => {}
    }
    match kind {
        Kind::Path => {
            let g = *p.grid.get_or_insert(101);
            if g < 2 {
                return perr(format!("`grid` must be at least 2, got {g}"));
            }
        }
        Kind::Simulate => {
            p.seed.get_or_insert(0);
            let t = *p.trials.get_or_insert(10_000);
            if t == 0 {
                return perr("`trials` must be positive".into());
            }
            if p.n.as_ref().is_some_and(|n| n.contains(&0)) {
                return perr("every `n` must be positive".into());
            }
            if let Some(w) = p.omega0 {
                if !(0.0..=1.0).contains(&w) {
                    return perr(format!("`omega0` must lie in [0, 1], got {w}"));
                }
            }
        }
        Kind::Oracle => {
            p.support.get_or_insert(80);
        }
        Kind::Overflow => {
            p.allow_small.get_or_insert(false);
        }
        Kind::Verify => {
            p.seed.get_or_insert(0x0cc0_9a2c);
        }
        Kind::Coupon => {
            let xi = p.xi.unwrap_or_default();
            if !(0.0..=1.0).contains(&xi) {
                return perr(format!("`xi` must lie in [0, 1], got {xi}"));
            }
        }
        Kind::Classical => {
            let w = p.omega0.unwrap_or_default();
            if !(w > 0.0 && w < 1.0) {
                return perr(format!("`omega0` must lie in (0, 1), got {w}"));
            }
        }
        Kind::Rate => {}
    }
    if kind != Kind::Verify {
        p.format.get_or_insert(if kind == Kind::Path { Format::Csv } else { Format::Json });
    }
    Ok(ProblemSpec { kind, params: p })
}

/// Merges config values with flag values (flags win) and validates.
pub fn build_spec(kind: Kind, config: Option<Config>, flags: &[(&str, String)]) -> Result<ProblemSpec, CliError> {
    let mut params = config.map(|c| c.params).unwrap_or_default();
    for (key, value) in flags {
        params.set(key, value).map_err(|m| CliError::Parse(format!("--{}: {m}", key.replace('_', "-"))))?;
    }
    validate(kind, params)
}
