//! `nanowire`: solve, compare and inspect nanowire mean-field models.

mod config;
mod error;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::{error, warn};

use config::{ConfigFile, GridSpec, Model, Preset};
use error::CliError;

/// Environment variable holding the worker thread count.
const THREADS_VAR: &str = "NANOWIRE_THREADS";

#[derive(Parser)]
#[command(name = "nanowire", version, about = "Thomas-Fermi and reduced Hartree-Fock solvers for nanowires")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one solve and write rho.csv, potential.csv, history.csv and summary.json.
    Solve {
        /// Flat TOML config file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Named starting configuration, overridden by the file and flags.
        #[arg(long, value_enum)]
        preset: Option<Preset>,
        #[arg(long, value_enum)]
        model: Option<Model>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compare a regularized run with a log-model run.
    Compare {
        reg_dir: PathBuf,
        log_dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample a charge preset on a grid and write it as CSV.
    EmitMu {
        /// `square-nanowire`, `square-nanowire-closed` or `gaussian(cx,cy,w,q)`.
        #[arg(long)]
        preset: String,
        /// `a,b,Na,Nb`
        #[arg(long)]
        grid: GridSpec,
        #[arg(long)]
        out: PathBuf,
    },
}

fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = raw
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("{THREADS_VAR} must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(e.to_string()))
}

fn solve(
    config: Option<PathBuf>,
    preset: Option<Preset>,
    model: Option<Model>,
    out: Option<PathBuf>,
    seed: Option<u64>,
) -> Result<bool, CliError> {
    if config.is_none() && preset.is_none() {
        return Err(CliError::Config("give --config, --preset or both".into()));
    }
    let mut layers = preset.map(Preset::config).unwrap_or_default();
    if let Some(path) = &config {
        layers = layers.overlay(ConfigFile::load(path)?);
    }
    let flags = ConfigFile { model, out, seed, ..ConfigFile::default() };
    let cfg = layers.overlay(flags).resolve()?;
    let (mu, coulomb) = run::prepare(&cfg)?;
    let output = run::execute(&cfg, &mu, &coulomb)?;
    run::write_outputs(&cfg.out, &output)?;
    println!(
        "{}: E = {:.10} (kinetic {:.10}, hartree {:.10}), lambda = {:.10}, {} iterations",
        cfg.out.display(),
        output.summary.energy.total,
        output.summary.energy.kinetic,
        output.summary.energy.hartree,
        output.summary.lambda,
        output.summary.iterations
    );
    Ok(output.summary.converged)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = init_threads().and_then(|()| match cli.command {
        Command::Solve { config, preset, model, out, seed } => solve(config, preset, model, out, seed),
        Command::Compare { reg_dir, log_dir, out } => {
            let cmp = run::compare_dirs(&reg_dir, &log_dir)?;
            run::write_comparison(&out, &cmp)?;
            let r = &cmp.report;
            println!(
                "energy gap {:.4}, potential error {:.4}, density error {:.4}",
                r.energy_gap_rel, r.potential_err_rel, r.density_err_rel
            );
            Ok(true)
        }
        Command::EmitMu { preset, grid, out } => {
            let (mu, analytic) = run::emit_mu(&preset, grid)?;
            run::write_field_file(&out, &mu)?;
            println!("charge on grid {:.12}, analytic {:.12}", nanowire_core::integrate(&mu), analytic);
            Ok(true)
        }
    });
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            warn!("solver stopped before reaching the energy tolerance");
            ExitCode::from(2)
        }
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
