//! `paramsym`: batch front end for symbol expansions, calculus, parametrices
//! and trace asymptotics.
//!
//! Exit status is 0 on success, 2 when a verification fails and 1 on any
//! other error, which is also printed to stdout as JSON.

mod commands;
mod io;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use paramsym::symbol::eval::CANCELLATION;
use serde_json::json;

use commands::{Context, Outcome, TraceInput};
use io::{parse_grid, CliError, CliResult, Output};

const DEFAULT_GRID: &str = "10,1000,10";
const THREADS_VAR: &str = "PARAMSYM_THREADS";

#[derive(Parser)]
#[command(name = "paramsym", version, about = "Parameter-dependent symbol calculus and trace expansions")]
struct Cli {
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Tolerance overriding the command default.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Sample grid in mu as `lo,hi,points_per_decade`.
    #[arg(long, global = true)]
    grid: Option<String>,
    /// Manifest path, `OUT/manifest.json` by default.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Expansion at infinity of a polyhomogeneous symbol.
    Expand {
        symbol: PathBuf,
        #[arg(long, default_value_t = 3)]
        terms: usize,
        /// Certify each remainder in its class.
        #[arg(long)]
        verify: bool,
        #[arg(long, default_value_t = 1)]
        depth: u32,
    },
    /// Truncated Leibniz product of two symbols.
    Leibniz {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = 2)]
        terms: usize,
    },
    /// Neumann parametrix and its defect.
    Parametrix {
        symbol: PathBuf,
        #[arg(long, default_value_t = 3)]
        terms: usize,
        #[arg(long, default_value = "grubb")]
        notion: String,
    },
    /// Kernel-diagonal or resolvent trace expansion with an oracle column.
    Trace(TraceArgs),
    /// Symbol-class and optional ellipticity check.
    Verify {
        symbol: PathBuf,
        #[arg(long, default_value = "WeakTilde_10")]
        family: String,
        #[arg(long, default_value_t = 1)]
        depth: u32,
        /// Also check ellipticity in this sense.
        #[arg(long)]
        elliptic: Option<String>,
    },
    /// Reference data independent of the expansion machinery.
    #[command(subcommand)]
    Oracle(OracleCommand),
    /// Residuals of an expansion artifact against oracle data.
    Compare { expansion: PathBuf, oracle: PathBuf },
}

#[derive(Args)]
struct TraceArgs {
    /// Symbol whose kernel diagonal is expanded in mu.
    #[arg(required_unless_present = "operator", conflicts_with = "operator")]
    symbol: Option<PathBuf>,
    /// Point `x1,..,xn`.
    #[arg(long, requires = "symbol")]
    point: Option<String>,
    /// Differential operator symbol for the resolvent trace.
    #[arg(long)]
    operator: Option<PathBuf>,
    /// Multiplier in front of the resolvent power.
    #[arg(long, requires = "operator")]
    weight: Option<PathBuf>,
    #[arg(long, default_value_t = 1, requires = "operator")]
    power: u32,
    #[arg(long, default_value_t = 3)]
    terms: usize,
}

#[derive(Subcommand)]
enum OracleCommand {
    /// Kernel diagonal by adaptive quadrature.
    Quad {
        symbol: PathBuf,
        #[arg(long)]
        point: Option<String>,
    },
    /// Resolvent trace by lattice summation on the torus.
    Eigensum {
        operator: PathBuf,
        #[arg(long)]
        weight: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        power: u32,
    },
    /// Least-squares fit of a data column against powers and logarithms.
    Fit {
        data: PathBuf,
        /// Exponents such as `-1,-2,log-2`.
        #[arg(long, allow_hyphen_values = true)]
        basis: String,
        #[arg(long, default_value = "oracle_re")]
        column: String,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Expand { .. } => "expand",
            Command::Leibniz { .. } => "leibniz",
            Command::Parametrix { .. } => "parametrix",
            Command::Trace(_) => "trace",
            Command::Verify { .. } => "verify",
            Command::Oracle(_) => "oracle",
            Command::Compare { .. } => "compare",
        }
    }
}

fn configure_threads() -> CliResult<()> {
    if let Ok(v) = std::env::var(THREADS_VAR) {
        let n: usize = v.parse().map_err(|_| CliError::Usage(format!("{THREADS_VAR}={v:?} is not a thread count")))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Usage(e.to_string()))?;
    }
    Ok(())
}

/// Fails before any work if an input file is missing.
fn check_inputs(cmd: &Command) -> CliResult<()> {
    let mut paths: Vec<&Path> = Vec::new();
    match cmd {
        Command::Expand { symbol, .. } | Command::Parametrix { symbol, .. } | Command::Verify { symbol, .. } => paths.push(symbol),
        Command::Leibniz { a, b, .. } => paths.extend([a.as_path(), b.as_path()]),
        Command::Trace(t) => paths.extend(t.symbol.iter().chain(&t.operator).chain(&t.weight).map(PathBuf::as_path)),
        Command::Oracle(OracleCommand::Quad { symbol, .. }) => paths.push(symbol),
        Command::Oracle(OracleCommand::Eigensum { operator, weight, .. }) => {
            paths.push(operator);
            paths.extend(weight.iter().map(PathBuf::as_path));
        }
        Command::Oracle(OracleCommand::Fit { data, .. }) => paths.push(data),
        Command::Compare { expansion, oracle } => paths.extend([expansion.as_path(), oracle.as_path()]),
    }
    for p in paths {
        if !p.is_file() {
            let source = std::io::Error::new(std::io::ErrorKind::NotFound, "input file not found");
            return Err(CliError::Io { path: p.to_path_buf(), source });
        }
    }
    Ok(())
}

fn dispatch(out: &mut Output, ctx: &Context, cmd: Command) -> CliResult<Outcome> {
    match cmd {
        Command::Expand { symbol, terms, verify, depth } => commands::expand(out, ctx, &symbol, terms, verify, depth),
        Command::Leibniz { a, b, terms } => commands::leibniz(out, &a, &b, terms),
        Command::Parametrix { symbol, terms, notion } => commands::parametrix_cmd(out, &symbol, terms, &notion),
        Command::Trace(t) => {
            let input = match (t.symbol, t.operator) {
                (Some(path), _) => TraceInput::Symbol { path, point: t.point },
                (None, Some(p)) => TraceInput::Operator { p, q: t.weight, power: t.power },
                (None, None) => return Err(CliError::Usage("trace needs a symbol or --operator".into())),
            };
            commands::trace(out, ctx, input, t.terms)
        }
        Command::Verify { symbol, family, depth, elliptic } => commands::verify(out, ctx, &symbol, &family, depth, elliptic.as_deref()),
        Command::Oracle(OracleCommand::Quad { symbol, point }) => commands::oracle_quad(out, ctx, &symbol, point.as_deref()),
        Command::Oracle(OracleCommand::Eigensum { operator, weight, power }) => {
            commands::oracle_eigensum(out, ctx, &operator, weight.as_deref(), power)
        }
        Command::Oracle(OracleCommand::Fit { data, basis, column }) => commands::oracle_fit(out, &data, &basis, &column),
        Command::Compare { expansion, oracle } => commands::compare(out, ctx, &expansion, &oracle),
    }
}

fn run(cli: Cli) -> CliResult<bool> {
    configure_threads()?;
    check_inputs(&cli.command)?;
    let grid_given = cli.grid.is_some();
    let grid = parse_grid(cli.grid.as_deref().unwrap_or(DEFAULT_GRID))?;
    if let Some(t) = cli.tol {
        if !(t > 0.0 && t.is_finite()) {
            return Err(CliError::Usage(format!("tolerance {t} must be positive")));
        }
    }
    let ctx = Context { grid, grid_given, tol: cli.tol };
    let name = cli.command.name();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut out = Output::new(&cli.out)?;
    let outcome = dispatch(&mut out, &ctx, cli.command)?;
    let constants = json!({
        "grid": { "lo": grid.0, "hi": grid.1, "points_per_decade": grid.2 },
        "cancellation": CANCELLATION,
        "excision_radius": 1.0,
        "command": outcome.constants,
    });
    let verdict = if outcome.passed { "pass" } else { "fail" };
    out.finish(cli.manifest.as_deref(), name, args, constants, verdict)?;
    Ok(outcome.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            println!("{}", e.to_json());
            ExitCode::from(if e.is_verification() { 2 } else { 1 })
        }
    }
}
