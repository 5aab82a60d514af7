//! Solving, writing artifacts and comparing finished runs.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use log::info;
use nanowire_core::io::{read_field, write_eigen_table, write_field, write_history};
use nanowire_core::rhf::rhf_scf;
use nanowire_core::tf::{compare, direct_minimize_log, scf_solve};
use nanowire_core::{
    ChargeDistribution, ChargeSpec, ComparisonReport, Coulomb2d, EnergyBreakdown, HistoryEntry, Interaction,
    ScalarField, TfResult,
};
use serde::{Deserialize, Serialize};

use crate::config::{GridSpec, LogSolver, Model, MuSource, RunConfig};
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Energy {
    pub kinetic: f64,
    pub hartree: f64,
    pub total: f64,
}

impl From<EnergyBreakdown> for Energy {
    fn from(e: EnergyBreakdown) -> Self {
        Self { kinetic: e.kinetic, hartree: e.hartree, total: e.total }
    }
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub model: Model,
    pub energy: Energy,
    pub lambda: f64,
    pub iterations: usize,
    pub converged: bool,
    pub wall_time_s: f64,
    /// Integral of the sampled background charge.
    pub charge: f64,
    pub grid: GridSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_point_residual: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank: Option<usize>,
    pub config: serde_json::Value,
}

pub struct RunOutput {
    pub summary: Summary,
    pub mu: ScalarField,
    pub rho: ScalarField,
    pub potential: ScalarField,
    pub history: Vec<HistoryEntry>,
    /// Levels and occupations of the final Hamiltonian (rHF only).
    pub eigen: Option<(Vec<f64>, Vec<f64>)>,
}

fn load_mu(cfg: &RunConfig) -> Result<ChargeDistribution, CliError> {
    let grid = cfg.grid.build()?;
    match &cfg.mu {
        MuSource::Preset(spec) => Ok(spec.sample(grid)?),
        MuSource::File(path) => {
            let file = File::open(path).map_err(|e| CliError::io(path, e))?;
            let field = read_field(BufReader::new(file))?;
            if !field.grid().same_as(&grid) {
                return Err(CliError::Config(format!("{} is not sampled on the configured grid", path.display())));
            }
            Ok(ChargeDistribution::new(ScalarField::new(grid, field.into_values())?)?)
        }
    }
}

/// Everything that can fail before any solver work: the charge and the
/// interaction kernel.
pub fn prepare(cfg: &RunConfig) -> Result<(ChargeDistribution, Coulomb2d), CliError> {
    let mu = load_mu(cfg)?;
    let coulomb = Coulomb2d::new(*mu.grid(), cfg.self_interaction)?;
    Ok((mu, coulomb))
}

pub fn execute(cfg: &RunConfig, mu: &ChargeDistribution, coulomb: &Coulomb2d) -> Result<RunOutput, CliError> {
    let start = Instant::now();
    info!("solving {:?} on {}x{} nodes, Z = {}", cfg.model, cfg.grid.na, cfg.grid.nb, mu.charge());
    let config = serde_json::to_value(cfg).map_err(|e| CliError::Json { path: "config".into(), source: e })?;
    let summary = |energy: EnergyBreakdown, lambda, iterations, converged| Summary {
        model: cfg.model,
        energy: energy.into(),
        lambda,
        iterations,
        converged,
        wall_time_s: 0.0,
        charge: mu.charge(),
        grid: cfg.grid,
        fixed_point_residual: None,
        rank: None,
        config: config.clone(),
    };
    let mut out = match cfg.model {
        Model::TfRegularized | Model::TfLog => {
            let r = match (cfg.model, cfg.log_solver) {
                (Model::TfRegularized, _) => scf_solve(coulomb, mu, &cfg.tf, Interaction::Regularized)?,
                (_, LogSolver::Direct) => direct_minimize_log(coulomb, mu, &cfg.tf)?,
                (_, LogSolver::Scf) => scf_solve(coulomb, mu, &cfg.tf, Interaction::Log)?,
            };
            RunOutput {
                summary: summary(r.energy, r.lambda, r.iterations, r.converged),
                mu: mu.field().clone(),
                rho: r.rho,
                potential: r.potential,
                history: r.history,
                eigen: None,
            }
        }
        Model::Rhf => {
            let r = rhf_scf(coulomb, mu, &cfg.rhf)?;
            let mut s = summary(r.energy, r.lambda, r.iterations, r.converged);
            s.fixed_point_residual = Some(r.fixed_point_residual);
            s.rank = Some(r.state.rank());
            RunOutput {
                summary: s,
                mu: mu.field().clone(),
                rho: r.rho,
                potential: r.potential,
                history: r.history,
                eigen: Some((r.levels, r.occupations)),
            }
        }
    };
    out.summary.wall_time_s = start.elapsed().as_secs_f64();
    info!(
        "E = {:.6} after {} iterations (converged: {})",
        out.summary.energy.total, out.summary.iterations, out.summary.converged
    );
    Ok(out)
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(path).map_err(|e| CliError::io(path, e))?))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<(), CliError> {
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::Json { path: path.display().to_string(), source: e })?;
    writeln!(w).map_err(|e| CliError::io(path, e))?;
    finish(w, path)
}

pub fn write_field_file(path: &Path, field: &ScalarField) -> Result<(), CliError> {
    let mut w = create(path)?;
    write_field(&mut w, field)?;
    finish(w, path)
}

fn read_field_file(path: &Path) -> Result<ScalarField, CliError> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    Ok(read_field(BufReader::new(file))?)
}

pub fn write_outputs(dir: &Path, out: &RunOutput) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    write_field_file(&dir.join("mu.csv"), &out.mu)?;
    write_field_file(&dir.join("rho.csv"), &out.rho)?;
    write_field_file(&dir.join("potential.csv"), &out.potential)?;
    let path = dir.join("history.csv");
    let mut w = create(&path)?;
    write_history(&mut w, &out.history)?;
    finish(w, &path)?;
    if let Some((levels, occupations)) = &out.eigen {
        let path = dir.join("eigenvalues.csv");
        let mut w = create(&path)?;
        write_eigen_table(&mut w, levels, occupations)?;
        finish(w, &path)?;
    }
    write_json(&dir.join("summary.json"), &out.summary)
}

/// A finished run read back from its directory.
pub struct StoredRun {
    pub summary: Summary,
    pub result: TfResult,
    pub mu: ScalarField,
}

pub fn load_run(dir: &Path) -> Result<StoredRun, CliError> {
    let path = dir.join("summary.json");
    let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let summary: Summary =
        serde_json::from_str(&text).map_err(|e| CliError::Json { path: path.display().to_string(), source: e })?;
    let rho = read_field_file(&dir.join("rho.csv"))?;
    let potential = read_field_file(&dir.join("potential.csv"))?;
    let mu = read_field_file(&dir.join("mu.csv"))?;
    let model = match summary.model {
        Model::TfLog => Interaction::Log,
        Model::TfRegularized | Model::Rhf => Interaction::Regularized,
    };
    let e = summary.energy;
    let result = TfResult {
        model,
        rho,
        potential,
        lambda: summary.lambda,
        energy: EnergyBreakdown { kinetic: e.kinetic, hartree: e.hartree, total: e.total },
        history: Vec::new(),
        converged: summary.converged,
        iterations: summary.iterations,
    };
    Ok(StoredRun { summary, result, mu })
}

#[derive(Debug, Serialize)]
pub struct ComparisonFile {
    #[serde(flatten)]
    pub report: ComparisonReport,
    pub wall_time_reg_s: f64,
    pub wall_time_log_s: f64,
}

pub fn compare_dirs(reg_dir: &Path, log_dir: &Path) -> Result<ComparisonFile, CliError> {
    let reg = load_run(reg_dir)?;
    let log = load_run(log_dir)?;
    if reg.summary.grid != log.summary.grid || !reg.mu.grid().same_as(log.mu.grid()) {
        return Err(CliError::Config(format!(
            "{} and {} were computed on different grids",
            reg_dir.display(),
            log_dir.display()
        )));
    }
    let report = compare(&reg.result, &log.result, &reg.mu)?;
    Ok(ComparisonFile { report, wall_time_reg_s: reg.summary.wall_time_s, wall_time_log_s: log.summary.wall_time_s })
}

pub fn write_comparison(dir: &Path, cmp: &ComparisonFile) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    write_json(&dir.join("comparison.json"), cmp)?;
    write_field_file(&dir.join("dV.csv"), &cmp.report.potential_diff)?;
    write_field_file(&dir.join("drho.csv"), &cmp.report.density_diff)
}

/// Samples a charge preset; returns the field and its analytic charge.
pub fn emit_mu(preset: &str, grid: GridSpec) -> Result<(ScalarField, f64), CliError> {
    let spec: ChargeSpec = preset.parse()?;
    Ok((spec.sample_field(grid.build()?)?, spec.analytic_charge()))
}
