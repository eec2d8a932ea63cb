//! Command-line front end: scenario files in, solution and sweep artifacts
//! out. Exit codes are part of the contract: 0 success, 1 numerical failure
//! (a solve ran but did not converge, or blew up), 2 input failure (bad
//! flags, unreadable or invalid scenario, bad environment) — never anything
//! else.

mod config;

use std::fmt::Display;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use config::{ConfigError, ScenarioFile};
use thinlimit::{
    build_limit_G, oracle_suite, run_sweep, solve_limit, solve_thin, Field, GeometryError,
    GridError, HarnessError, IterParams, LimitScenario, Mutation, OracleOptions, SolveError,
    SolveReport, SweepResult, SweepTemplate, ThinScenario,
};

const EXIT_OK: i32 = 0;
const EXIT_NUMERICAL: i32 = 1;
const EXIT_INPUT: i32 = 2;

/// Thin-strip and dimension-reduced solvers for fully nonlinear,
/// possibly degenerate elliptic problems with Neumann conditions.
#[derive(Debug, Parser)]
#[command(name = "thinlimit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one thin-strip problem; writes an x,y,u CSV and a JSON report.
    SolveThin {
        /// Scenario file (JSON) with a scalar "epsilon".
        #[arg(long, value_name = "PATH")]
        config: PathBuf,
        /// Output CSV path; the report lands next to it as *.report.json.
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
    },
    /// Solve the 1D limit problem; writes an x,w CSV and a JSON report.
    SolveLimit {
        /// Scenario file (JSON); "epsilon" is ignored if present.
        #[arg(long, value_name = "PATH")]
        config: PathBuf,
        /// Output CSV path; the report lands next to it as *.report.json.
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
    },
    /// Run an ε-sweep against the shared limit solution and write the
    /// per-ε convergence table.
    Sweep {
        /// Scenario file (JSON) with an "epsilons" list.
        #[arg(long, value_name = "PATH")]
        config: PathBuf,
        /// Output CSV path.
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
        /// Worker threads for the per-ε solves; output is identical for
        /// any value.
        #[arg(long, value_name = "N", default_value_t = 1)]
        jobs: usize,
    },
    /// Run the built-in oracle suite and print the per-check table.
    Validate {
        /// Deliberately break one check ("chain-rule") to prove the suite
        /// can fail.
        #[arg(long, value_name = "CHECK")]
        mutate: Option<String>,
        /// Solver tolerance for the solve-based checks (default 1e-9).
        #[arg(long, value_name = "TOL")]
        tol: Option<f64>,
    },
}

/// Failure funnel carrying the exit code distinction.
enum Failure {
    Input(String),
    Numerical(String),
}

impl Failure {
    fn exit_code(&self) -> i32 {
        match self {
            Failure::Input(_) => EXIT_INPUT,
            Failure::Numerical(_) => EXIT_NUMERICAL,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Input(m) | Failure::Numerical(m) => m,
        }
    }

    fn input(e: impl Display) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::input(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Input(format!("cannot write output: {e}"))
    }
}

impl From<GridError> for Failure {
    fn from(e: GridError) -> Self {
        Failure::input(e)
    }
}

impl From<GeometryError> for Failure {
    fn from(e: GeometryError) -> Self {
        Failure::input(e)
    }
}

impl From<SolveError> for Failure {
    fn from(e: SolveError) -> Self {
        match e {
            SolveError::NonFinite { .. } => Failure::Numerical(e.to_string()),
            SolveError::BadParams { .. } => Failure::input(e),
        }
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Solve(s) => s.into(),
            other => Failure::input(other),
        }
    }
}

fn main() {
    if let Err(message) = init_logging() {
        eprintln!("error: {message}");
        std::process::exit(EXIT_INPUT);
    }
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::SolveThin { config, out } => cmd_solve_thin(config, out),
        Command::SolveLimit { config, out } => cmd_solve_limit(config, out),
        Command::Sweep { config, out, jobs } => cmd_sweep(config, out, *jobs),
        Command::Validate { mutate, tol } => cmd_validate(mutate.as_deref(), *tol),
    };
    let code = outcome.unwrap_or_else(|failure| {
        eprintln!("error: {}", failure.message());
        failure.exit_code()
    });
    std::process::exit(code);
}

/// Strictly parses THINLIMIT_LOG ∈ {quiet, info, debug}; unset means quiet.
fn init_logging() -> Result<(), String> {
    let level = match std::env::var("THINLIMIT_LOG") {
        Err(std::env::VarError::NotPresent) => log::LevelFilter::Off,
        Err(e) => return Err(format!("THINLIMIT_LOG: {e}")),
        Ok(value) => match value.as_str() {
            "quiet" => log::LevelFilter::Off,
            "info" => log::LevelFilter::Info,
            "debug" => log::LevelFilter::Debug,
            other => {
                return Err(format!(
                    "THINLIMIT_LOG must be one of \"quiet\", \"info\", \"debug\", got {other:?}"
                ))
            }
        },
    };
    env_logger::Builder::new().filter_level(level).init();
    Ok(())
}

fn cmd_solve_thin(config: &Path, out: &Path) -> Result<i32, Failure> {
    let file = ScenarioFile::load(config)?;
    let thin = file.thin()?;
    let functional = file.functional()?;
    let scn = ThinScenario::with_default_grid(thin, functional, file.nx()?)?;
    let params = file.params_over(scn.default_params())?;
    let (u, report) = solve_thin(&scn, &params)?;
    write_thin_csv(out, &scn, &u)?;
    write_report(&report_path(out), &report)?;
    log::info!(
        "solve-thin: converged = {}, iterations = {}, residual = {:.3e}",
        report.converged,
        report.iterations,
        report.residual_inf
    );
    Ok(if report.converged { EXIT_OK } else { EXIT_NUMERICAL })
}

fn cmd_solve_limit(config: &Path, out: &Path) -> Result<i32, Failure> {
    let file = ScenarioFile::load(config)?;
    let profile = file.profile()?;
    let functional = file.functional()?;
    let scn = LimitScenario::new(build_limit_G(&functional, &profile), file.nx()?)?;
    let params = file.params_over(scn.default_params())?;
    let (w, report) = solve_limit(&scn, &params)?;
    write_limit_csv(out, &scn, &w)?;
    write_report(&report_path(out), &report)?;
    log::info!(
        "solve-limit: converged = {}, iterations = {}, residual = {:.3e}",
        report.converged,
        report.iterations,
        report.residual_inf
    );
    Ok(if report.converged { EXIT_OK } else { EXIT_NUMERICAL })
}

fn cmd_sweep(config: &Path, out: &Path, jobs: usize) -> Result<i32, Failure> {
    let file = ScenarioFile::load(config)?;
    let profile = file.profile()?;
    let functional = file.functional()?;
    let epsilons = file.epsilon_list()?;
    let mut template = SweepTemplate::new(profile, functional);
    if file.has_solver_overrides() {
        template = template.with_params(file.params_over(IterParams::default())?);
    }
    let result = run_sweep(&template, &epsilons, file.nx()?, jobs)?;
    write_sweep_csv(out, &result)?;
    Ok(if result.all_converged() { EXIT_OK } else { EXIT_NUMERICAL })
}

fn cmd_validate(mutate: Option<&str>, tol: Option<f64>) -> Result<i32, Failure> {
    let mutation = match mutate {
        None => None,
        Some("chain-rule") => Some(Mutation::ChainRule),
        Some(other) => {
            return Err(Failure::Input(format!(
                "--mutate: unknown check {other:?}, expected \"chain-rule\""
            )))
        }
    };
    let tol = tol.unwrap_or(1e-9);
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Failure::Input(format!(
            "--tol must be a positive finite real, got {tol}"
        )));
    }
    let report = oracle_suite(&OracleOptions { tol, mutation });
    for check in report.checks() {
        println!(
            "{:<26} {}  measured {:>13.6e}  threshold {:>13.6e}  {}",
            check.name,
            if check.passed { "PASS" } else { "FAIL" },
            check.measured,
            check.threshold,
            check.note
        );
    }
    Ok(if report.all_passed() { EXIT_OK } else { EXIT_NUMERICAL })
}

/// The JSON report path sitting next to the CSV artifact.
fn report_path(out: &Path) -> PathBuf {
    out.with_extension("report.json")
}

/// 17 significant digits: full f64 round-trip precision, locale-independent.
fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_thin_csv(out: &Path, scn: &ThinScenario, u: &Field) -> Result<(), Failure> {
    let mut w = BufWriter::new(File::create(out)?);
    writeln!(w, "x,y,u")?;
    let grid = scn.grid();
    for j in 0..grid.ns() {
        for i in 0..grid.nx() {
            let x = grid.x(i);
            let y = scn.thin().height(x)? * grid.s(j);
            writeln!(w, "{},{},{}", fmt(x), fmt(y), fmt(u.at(i, j)))?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_limit_csv(out: &Path, scn: &LimitScenario, w: &[f64]) -> Result<(), Failure> {
    let mut wtr = BufWriter::new(File::create(out)?);
    writeln!(wtr, "x,w")?;
    for (i, wi) in w.iter().enumerate() {
        writeln!(wtr, "{},{}", fmt(scn.x(i)), fmt(*wi))?;
    }
    wtr.flush()?;
    Ok(())
}

fn write_sweep_csv(out: &Path, result: &SweepResult) -> Result<(), Failure> {
    let mut w = BufWriter::new(File::create(out)?);
    writeln!(w, "epsilon,nx,ns,sup_error,thin_iters,limit_iters,converged")?;
    for rec in result.records() {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            fmt(rec.epsilon),
            rec.nx,
            rec.ns,
            fmt(rec.sup_error),
            rec.thin_report.iterations,
            rec.limit_report.iterations,
            rec.converged()
        )?;
    }
    w.flush()?;
    Ok(())
}

fn write_report(path: &Path, report: &SolveReport) -> Result<(), Failure> {
    let value = serde_json::json!({
        "iterations": report.iterations,
        "residual_inf": report.residual_inf,
        "sup_norm": report.sup_norm,
        "converged": report.converged,
    });
    let text = serde_json::to_string_pretty(&value)
        .map_err(|e| Failure::Input(format!("cannot serialize report: {e}")))?;
    std::fs::write(path, format!("{text}\n"))?;
    Ok(())
}
