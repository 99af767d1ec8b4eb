use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use steklov::config::{RunConfig, Scenario};
use steklov::plot::{emit_plot_data, PlotKind};
use steklov::run::run;

/// Batch driver for the resonant Steklov laboratory.
///
/// Exit status: 0 on success, 2 when a finder did not converge or failed
/// re-verification, 1 on errors. `STEKLOV_NODE_CAP` overrides the mesh node cap.
#[derive(Parser)]
#[command(name = "steklov", version)]
struct Cli {
    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Random seed for the geometry probes (overrides `seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Only print errors.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario named in the config.
    Run { config: PathBuf },
    /// Hypothesis audit only (forces `scenario=audit_only`).
    Audit { config: PathBuf },
    /// Emit plot-ready CSV from a report.
    Plot {
        report: PathBuf,
        #[arg(long, value_parser = parse_kind)]
        kind: PlotKind,
    },
}

fn parse_kind(s: &str) -> Result<PlotKind, String> {
    PlotKind::from_name(s).ok_or_else(|| {
        let names: Vec<&str> = PlotKind::ALL.iter().map(|k| k.name()).collect();
        format!("unknown kind `{s}` (one of {})", names.join(", "))
    })
}

fn load(cli: &Cli, path: &PathBuf) -> steklov::Result<RunConfig> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn execute(cli: &Cli) -> steklov::Result<i32> {
    match &cli.command {
        Command::Run { config } | Command::Audit { config } => {
            let mut cfg = load(cli, config)?;
            if matches!(cli.command, Command::Audit { .. }) {
                cfg.scenario = Scenario::AuditOnly;
            }
            let outcome = run(&cfg)?;
            if !cli.quiet {
                println!("{} ({})", outcome.report_path.display(), outcome.status.name());
            }
            Ok(outcome.status.exit_code())
        }
        Command::Plot { report, kind } => {
            let path = emit_plot_data(report, *kind, cli.out.as_deref())?;
            if !cli.quiet {
                println!("{}", path.display());
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "error" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
