use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mre_cli::commands::{self, CommandOutput};
use mre_cli::config;
use mre_cli::{CliError, EXIT_ERROR, EXIT_PASS, EXIT_VERDICT_FAIL};

/// Asymptotic expansions of matrix renewal equations: locate the
/// characteristic roots, extract expansion coefficients, and validate
/// against exact, grid, and Monte Carlo oracles.
#[derive(Parser)]
#[command(name = "mre", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Assumptions, Malthusian parameter, root table, coefficients, and
    /// condition checks; writes a JSON report.
    Analyze(CommonArgs),
    /// Evaluate the expansion at given times; writes CSV.
    Expand(CommonArgs),
    /// Compare the expansion against the exact or grid oracle; writes CSV
    /// and a pass/fail verdict.
    Validate(CommonArgs),
    /// Monte Carlo means of the branching process; writes CSV.
    Simulate(CommonArgs),
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Path to the JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Comma-separated evaluation times (expand, simulate).
    #[arg(long, value_delimiter = ',')]
    t: Option<Vec<f64>>,
    /// Output path override (CSV for expand/validate/simulate, JSON
    /// report for analyze).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed override for simulate.
    #[arg(long)]
    seed: Option<u64>,
}

fn read_config(path: &PathBuf) -> Result<config::RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    config::parse_config(&text)
}

fn write_out(path: &PathBuf, body: &str) -> Result<(), CliError> {
    std::fs::write(path, body).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn deliver(
    args: &CommonArgs,
    cfg: &config::RunConfig,
    output: CommandOutput,
) -> Result<i32, CliError> {
    let report_json =
        serde_json::to_string_pretty(&output.report).expect("report serialization is infallible");
    match &output.csv {
        Some(csv) => {
            let csv_target = args
                .out
                .clone()
                .or_else(|| cfg.csv_path.clone().map(PathBuf::from));
            match csv_target {
                Some(p) => write_out(&p, csv)?,
                None => print!("{csv}"),
            }
            if let Some(report_path) = &cfg.report_path {
                write_out(&PathBuf::from(report_path), &report_json)?;
            }
        }
        None => {
            let report_target = args
                .out
                .clone()
                .or_else(|| cfg.report_path.clone().map(PathBuf::from));
            match report_target {
                Some(p) => write_out(&p, &report_json)?,
                None => println!("{report_json}"),
            }
        }
    }
    Ok(if output.verdict_pass() {
        EXIT_PASS
    } else {
        EXIT_VERDICT_FAIL
    })
}

fn run() -> Result<i32, CliError> {
    mre_core::configure_threads_from_env();
    let cli = Cli::parse();
    match &cli.command {
        Command::Analyze(args) => {
            let cfg = read_config(&args.config)?;
            let out = commands::cmd_analyze(&cfg)?;
            deliver(args, &cfg, out)
        }
        Command::Expand(args) => {
            let cfg = read_config(&args.config)?;
            let ts = args.t.clone().unwrap_or_default();
            let out = commands::cmd_expand(&cfg, &ts)?;
            deliver(args, &cfg, out)
        }
        Command::Validate(args) => {
            let cfg = read_config(&args.config)?;
            let out = commands::cmd_validate(&cfg)?;
            deliver(args, &cfg, out)
        }
        Command::Simulate(args) => {
            let cfg = read_config(&args.config)?;
            let out = commands::cmd_simulate(&cfg, args.t.as_deref(), args.seed)?;
            deliver(args, &cfg, out)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
