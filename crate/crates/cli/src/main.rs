//! `spinchain` command-line runner.
//!
//! Verbs: `run`, `sweep`, `validate`. On failure a single JSON diagnostic
//! goes to stderr and the exit status names the category.

mod config;
mod error;
mod output;
mod run;
mod sweep;

use clap::{Parser, Subcommand};
use config::{from_value, read_value, Backend, Overrides};
use error::CliError;
use serde_json::json;
use std::io::Write as _;
use std::path::{Path, PathBuf};

#[derive(Parser, Debug)]
#[command(name = "spinchain", version, about = "Single-excitation dynamics of XX spin chains with non-Markovian edge reservoirs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Solver backend, overriding the config.
    #[arg(long, global = true, value_enum)]
    backend: Option<Backend>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory, overriding the config.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Inversion target tolerance, overriding the config.
    #[arg(long, global = true)]
    tol: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one configuration and write its trajectory.
    Run { config: PathBuf },
    /// Solve one configuration per value of a numeric field.
    Sweep {
        config: PathBuf,
        /// Dotted path, e.g. `reservoirs.both.g` or `chain.n_sites`.
        #[arg(long)]
        axis: String,
        /// Comma-separated values; `start:stop:step` expands inclusively.
        #[arg(long, allow_hyphen_values = true)]
        values: String,
    },
    /// Parse and validate a configuration without solving.
    Validate { config: PathBuf },
}

fn base_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn execute(cli: &Cli) -> Result<serde_json::Value, CliError> {
    let overrides = Overrides { backend: cli.backend, out_dir: cli.out_dir.clone(), tol: cli.tol };
    match &cli.command {
        Command::Validate { config } => {
            let resolved = from_value(read_value(config)?)?.resolve(&base_dir(config), &overrides)?;
            Ok(json!({
                "status": "ok",
                "backend": resolved.backend.as_str(),
                "warnings": resolved.config.warnings.iter().map(|w| w.to_string()).collect::<Vec<_>>(),
                "config": resolved.canonical,
            }))
        }
        Command::Run { config } => {
            let resolved = from_value(read_value(config)?)?.resolve(&base_dir(config), &overrides)?;
            for w in &resolved.config.warnings {
                log::warn!("{w}");
            }
            let (summary, artifacts) = run::run(&resolved)?;
            Ok(json!({
                "status": "ok",
                "backend": resolved.backend.as_str(),
                "csv": artifacts.csv,
                "sidecar": artifacts.sidecar,
                "p_total_final": summary.p_total_final,
                "max_fidelity": summary.max_fidelity,
                "argmax_t": summary.argmax_t,
            }))
        }
        Command::Sweep { config, axis, values } => {
            let axis = sweep::Axis::parse(axis)?;
            let values = sweep::parse_values(values)?;
            let base = read_value(config)?;
            // Schema problems in the base config fail the whole sweep up front.
            let parsed = from_value(base.clone())?;
            let rows = sweep::sweep(&base, &base_dir(config), &overrides, &axis, &values)?;
            let out_dir = overrides
                .out_dir
                .clone()
                .or_else(|| parsed.output.as_ref().and_then(|o| o.dir.clone()))
                .unwrap_or_else(|| PathBuf::from("."));
            let stem = parsed.output.as_ref().and_then(|o| o.stem.clone()).unwrap_or_else(|| "trajectory".into());
            let table = sweep::write_summary(&out_dir, &stem, &axis, &rows)?;
            let mut summary = sweep::summary_json(&axis, &rows);
            summary["summary_csv"] = json!(table);
            if let Some(err) = sweep::failure(&rows) {
                emit(&summary);
                return Err(err);
            }
            summary["status"] = json!("ok");
            Ok(summary)
        }
    }
}

/// Print to stdout; a closed pipe is not an error.
fn emit(value: &serde_json::Value) {
    let _ = writeln!(std::io::stdout(), "{}", serde_json::to_string_pretty(value).unwrap());
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SPINCHAIN_LOG", "warn")).init();
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build_global() {
            log::warn!("could not size the worker pool: {e}");
        }
    }
    match execute(&cli) {
        Ok(report) => emit(&report),
        Err(e) => {
            eprintln!("{}", e.to_json());
            std::process::exit(e.category.exit_code());
        }
    }
}
