//! Command-line front end for `occupancy-core`.
//!
//! Exit codes: 0 success, 1 malformed input, 2 infeasible constraint,
//! 3 solver failure or residual above [`commands::RESIDUAL_LIMIT`].

pub mod commands;
pub mod error;
pub mod output;
pub mod spec;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::commands::{Outcome, RESIDUAL_LIMIT};
use crate::error::{CliError, EXIT_OK, EXIT_PARSE};
use crate::spec::{build_spec, parse_config, Format, Kind, ProblemSpec};

#[derive(Parser, Debug)]
#[command(name = "occupancy", version, about = "Large-deviation rates and paths for balls-in-urns occupancy")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Terminal rate of an endpoint constraint (alpha, omega, beta).
    Rate(Flags),
    /// Extremal path (or the zero-cost path when omega is absent) on a grid.
    Path(Flags),
    /// Rate for a fraction omega0 of empty urns.
    Classical(Flags),
    /// Rate for average overflow eta above capacity I.
    Overflow(Flags),
    /// Rate for a fraction xi of urns at or below capacity I.
    Coupon(Flags),
    /// Monte Carlo terminal occupancy and empty-urn exponents.
    Simulate(Flags),
    /// Brute-force entropy minimization over a truncated support.
    Oracle(Flags),
    /// Runs the property suites and prints one line per suite.
    Verify(Flags),
}

/// Parameters shared by all subcommands; each kind accepts a subset.
#[derive(Args, Debug, Default)]
struct Flags {
    /// Config file with `key = value` lines or a JSON object; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Initial occupancy, comma separated (coupon: class fractions alpha_0..alpha_K).
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<String>,
    /// Terminal occupancy omega_0..omega_I and the overflow slot, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    omega: Option<String>,
    /// Terminal fraction of empty urns.
    #[arg(long, allow_hyphen_values = true)]
    omega0: Option<String>,
    /// Balls per urn.
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<String>,
    /// Urn capacity I.
    #[arg(long, allow_hyphen_values = true)]
    capacity: Option<String>,
    /// Average overflow per urn.
    #[arg(long, allow_hyphen_values = true)]
    eta: Option<String>,
    /// Fraction of urns holding at most I balls.
    #[arg(long, allow_hyphen_values = true)]
    xi: Option<String>,
    /// Urn counts, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    n: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    seed: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    trials: Option<String>,
    /// Number of path rows.
    #[arg(long, allow_hyphen_values = true)]
    grid: Option<String>,
    /// Truncation level of the oracle.
    #[arg(long, allow_hyphen_values = true)]
    support: Option<String>,
    /// Overflow: accept targets below the zero-cost overflow.
    #[arg(long)]
    allow_small: bool,
    /// Output format: json or csv.
    #[arg(long)]
    format: Option<String>,
}

impl Flags {
    fn pairs(&self) -> Vec<(&'static str, String)> {
        let fields = [
            ("alpha", &self.alpha),
            ("omega", &self.omega),
            ("omega0", &self.omega0),
            ("beta", &self.beta),
            ("capacity", &self.capacity),
            ("eta", &self.eta),
            ("xi", &self.xi),
            ("n", &self.n),
            ("seed", &self.seed),
            ("trials", &self.trials),
            ("grid", &self.grid),
            ("support", &self.support),
            ("format", &self.format),
        ];
        let mut out: Vec<_> = fields.into_iter().filter_map(|(k, v)| v.clone().map(|v| (k, v))).collect();
        if self.allow_small {
            out.push(("allow_small", "true".into()));
        }
        out
    }
}

impl Command {
    fn split(self) -> (Kind, Flags) {
        match self {
            Command::Rate(f) => (Kind::Rate, f),
            Command::Path(f) => (Kind::Path, f),
            Command::Classical(f) => (Kind::Classical, f),
            Command::Overflow(f) => (Kind::Overflow, f),
            Command::Coupon(f) => (Kind::Coupon, f),
            Command::Simulate(f) => (Kind::Simulate, f),
            Command::Oracle(f) => (Kind::Oracle, f),
            Command::Verify(f) => (Kind::Verify, f),
        }
    }
}

/// Parses arguments (the first is the program name) into a validated spec.
pub fn parse_problem<I, T>(args: I) -> Result<ProblemSpec, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| CliError::Parse(e.to_string()))?;
    let (kind, flags) = cli.command.split();
    let config = match &flags.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Parse(format!("cannot read config {}: {e}", path.display())))?;
            Some(parse_config(&text)?)
        }
        None => None,
    };
    build_spec(kind, config, &flags.pairs())
}

/// Runs a validated spec, writing results to `out`.
pub fn execute(spec: &ProblemSpec, out: &mut dyn Write) -> Result<(), CliError> {
    let format = spec.params.format;
    match commands::run(spec)? {
        Outcome::Document { doc, residual } => {
            match format {
                Some(Format::Csv) => output::write_flat_csv(out, &doc)?,
                _ => output::write_json(out, &doc)?,
            }
            if let Some(r) = residual {
                check_residual(r)?;
            }
        }
        Outcome::Table { header, rows, doc } => match format {
            Some(Format::Json) => output::write_json(out, &doc)?,
            _ => output::write_table(out, &header, &rows)?,
        },
        Outcome::Reports(reports) => {
            match format {
                Some(Format::Json) => output::write_json(out, &serde_json::json!({ "problem": spec, "reports": reports }))?,
                Some(Format::Csv) => {
                    let doc = serde_json::to_value(&reports).map_err(|e| CliError::Io(std::io::Error::other(e)))?;
                    output::write_flat_csv(out, &serde_json::json!({ "reports": doc }))?
                }
                None => {
                    for r in &reports {
                        writeln!(out, "{}", r.line())?;
                    }
                }
            }
            let failed = reports.iter().filter(|r| !r.passed()).count();
            if failed > 0 {
                return Err(CliError::Solver(format!("{failed} of {} property suites failed", reports.len())));
            }
        }
    }
    Ok(())
}

/// Fails when a residual norm exceeds [`RESIDUAL_LIMIT`] or is not a number.
pub fn check_residual(r: f64) -> Result<(), CliError> {
    if r <= RESIDUAL_LIMIT {
        Ok(())
    } else {
        Err(CliError::Solver(format!("residual norm {r:e} exceeds {RESIDUAL_LIMIT:e}")))
    }
}

/// Full command-line entry point; returns the exit code.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    // Help and version requests are not errors.
    if let Err(e) = Cli::try_parse_from(&args) {
        if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) {
            let _ = write!(out, "{e}");
            return EXIT_OK;
        }
        let _ = write!(err, "{e}");
        return EXIT_PARSE;
    }
    let result = parse_problem(&args).and_then(|spec| execute(&spec, out));
    let _ = out.flush();
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn residual_above_limit_is_a_solver_failure() {
        assert!(check_residual(1e-12).is_ok());
        assert_eq!(check_residual(2e-8).unwrap_err().exit_code(), error::EXIT_SOLVER);
        assert_eq!(check_residual(f64::NAN).unwrap_err().exit_code(), error::EXIT_SOLVER);
    }

    #[test]
    fn help_exits_zero_and_bad_flags_exit_one() {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        assert_eq!(main_with(["occupancy", "--help"], &mut out, &mut err), EXIT_OK);
        assert!(String::from_utf8_lossy(&out).contains("coupon"));
        assert_eq!(main_with(["occupancy", "rate", "--bogus", "1"], &mut out, &mut err), EXIT_PARSE);
        assert_eq!(main_with(["occupancy"], &mut out, &mut err), EXIT_PARSE);
    }
}
