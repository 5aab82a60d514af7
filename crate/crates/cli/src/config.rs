//! Run configuration.
//!
//! A run is described by a flat TOML table. Every key is optional in the
//! file; missing keys fall back to a named preset (if one is given) and then
//! to the defaults listed in [`ConfigFile`].

use std::fmt;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use nanowire_core::{ChargeSpec, Grid, RhfConfig, SelfInteraction, TfConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    TfRegularized,
    TfLog,
    Rhf,
}

/// How the log-interaction Thomas-Fermi problem is minimized.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum LogSolver {
    /// Projected gradient on the constraint set.
    #[default]
    Direct,
    /// The same self-consistent iteration as the regularized model.
    Scf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    PaperMu1Regularized,
    PaperMu1Log,
    PaperMu1Rhf,
    GaussianRhf,
}

/// Keys accepted in a config file.
///
/// | key | meaning | default |
/// |-----|---------|---------|
/// | `model` | `tf-regularized`, `tf-log` or `rhf` | required |
/// | `a`, `b` | half widths of the box | 8 |
/// | `na`, `nb` | nodes per axis | 41 |
/// | `mu` | charge preset or path to a field CSV | `square-nanowire` |
/// | `self_interaction` | `cell-average` or `omit` | `cell-average` |
/// | `c_tf` | Thomas-Fermi constant | 2π²/3 |
/// | `epsilon` | energy stopping tolerance | 1e-5 (TF), 1e-9 (rHF) |
/// | `max_iter` | iteration cap | 100 |
/// | `mixing_samples` | probes of the mixing parameter | 11 |
/// | `lambda_bracket_growth` | Fermi bracket growth factor | 2 |
/// | `dichotomy_rel_tol` | Fermi bisection charge tolerance | 1e-9 |
/// | `log_solver` | `direct` or `scf` | `direct` |
/// | `out` | output directory | required unless `--out` is given |
/// | `seed` | seed recorded with the run | 0 |
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub model: Option<Model>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub na: Option<usize>,
    pub nb: Option<usize>,
    pub mu: Option<String>,
    pub self_interaction: Option<String>,
    pub c_tf: Option<f64>,
    pub epsilon: Option<f64>,
    pub max_iter: Option<usize>,
    pub mixing_samples: Option<usize>,
    pub lambda_bracket_growth: Option<f64>,
    pub dichotomy_rel_tol: Option<f64>,
    pub log_solver: Option<LogSolver>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

macro_rules! overlay_fields {
    ($base:ident, $top:ident; $($f:ident),*) => {
        ConfigFile { $($f: $top.$f.or($base.$f)),* }
    };
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Keys set in `top` win over keys set in `self`.
    pub fn overlay(self, top: ConfigFile) -> ConfigFile {
        let base = self;
        overlay_fields!(base, top; model, a, b, na, nb, mu, self_interaction, c_tf, epsilon, max_iter,
            mixing_samples, lambda_bracket_growth, dichotomy_rel_tol, log_solver, out, seed)
    }

    pub fn resolve(self) -> Result<RunConfig, CliError> {
        let model = self.model.ok_or_else(|| CliError::Config("`model` is not set".into()))?;
        let grid = GridSpec {
            a: self.a.unwrap_or(8.0),
            b: self.b.unwrap_or(8.0),
            na: self.na.unwrap_or(41),
            nb: self.nb.unwrap_or(41),
        };
        grid.build()?;
        let mu = MuSource::parse(self.mu.as_deref().unwrap_or("square-nanowire"))?;
        let self_interaction: SelfInteraction =
            self.self_interaction.as_deref().unwrap_or("cell-average").parse()?;

        let base = TfConfig::default();
        let tf = TfConfig {
            c_tf: self.c_tf.unwrap_or(base.c_tf),
            epsilon: self.epsilon.unwrap_or(base.epsilon),
            max_iter: self.max_iter.unwrap_or(base.max_iter),
            mixing_samples: self.mixing_samples.unwrap_or(base.mixing_samples),
            lambda_bracket_growth: self.lambda_bracket_growth.unwrap_or(base.lambda_bracket_growth),
            dichotomy_rel_tol: self.dichotomy_rel_tol.unwrap_or(base.dichotomy_rel_tol),
        };
        let rhf_base = RhfConfig::default();
        let rhf = RhfConfig {
            epsilon: self.epsilon.unwrap_or(rhf_base.epsilon),
            max_iter: self.max_iter.unwrap_or(rhf_base.max_iter),
            mixing_samples: self.mixing_samples.unwrap_or(rhf_base.mixing_samples),
        };
        match model {
            Model::Rhf => rhf.validate()?,
            _ => tf.validate()?,
        }
        let out = self
            .out
            .ok_or_else(|| CliError::Config("no output directory (set `out` or pass --out)".into()))?;
        Ok(RunConfig {
            model,
            grid,
            mu,
            self_interaction,
            log_solver: self.log_solver.unwrap_or_default(),
            tf,
            rhf,
            seed: self.seed.unwrap_or(0),
            out,
        })
    }
}

impl Preset {
    pub fn config(self) -> ConfigFile {
        let wire = |model| ConfigFile {
            model: Some(model),
            a: Some(8.0),
            b: Some(8.0),
            na: Some(41),
            nb: Some(41),
            mu: Some("square-nanowire-closed".into()),
            self_interaction: Some("omit".into()),
            ..ConfigFile::default()
        };
        match self {
            Self::PaperMu1Regularized => ConfigFile { epsilon: Some(1e-5), ..wire(Model::TfRegularized) },
            Self::PaperMu1Log => {
                ConfigFile { epsilon: Some(1e-5), log_solver: Some(LogSolver::Direct), ..wire(Model::TfLog) }
            }
            Self::PaperMu1Rhf => wire(Model::Rhf),
            Self::GaussianRhf => ConfigFile {
                mu: Some("gaussian(0,0,0.5,1)".into()),
                self_interaction: Some("cell-average".into()),
                epsilon: Some(1e-10),
                ..wire(Model::Rhf)
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub a: f64,
    pub b: f64,
    pub na: usize,
    pub nb: usize,
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid, CliError> {
        Ok(Grid::new(self.a, self.b, self.na, self.nb)?)
    }
}

/// Parses `a,b,Na,Nb`.
impl std::str::FromStr for GridSpec {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        let bad = || CliError::Config(format!("grid must be `a,b,Na,Nb`, got `{s}`"));
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let [a, b, na, nb] = parts[..] else {
            return Err(bad());
        };
        let spec = GridSpec {
            a: a.parse().map_err(|_| bad())?,
            b: b.parse().map_err(|_| bad())?,
            na: na.parse().map_err(|_| bad())?,
            nb: nb.parse().map_err(|_| bad())?,
        };
        spec.build()?;
        Ok(spec)
    }
}

/// Background charge: a named preset or a field stored as CSV.
#[derive(Debug, Clone, PartialEq)]
pub enum MuSource {
    Preset(ChargeSpec),
    File(PathBuf),
}

impl MuSource {
    fn parse(s: &str) -> Result<Self, CliError> {
        if s.ends_with(".csv") {
            let path = PathBuf::from(s);
            if !path.is_file() {
                return Err(CliError::Config(format!("charge file {s} does not exist")));
            }
            return Ok(Self::File(path));
        }
        Ok(Self::Preset(s.parse()?))
    }
}

impl fmt::Display for MuSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Preset(spec) => spec.fmt(f),
            Self::File(path) => write!(f, "{}", path.display()),
        }
    }
}

impl Serialize for MuSource {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// A validated run description. Everything but `out` is echoed into
/// `summary.json`.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub model: Model,
    pub grid: GridSpec,
    pub mu: MuSource,
    pub self_interaction: SelfInteraction,
    pub log_solver: LogSolver,
    pub tf: TfConfig,
    pub rhf: RhfConfig,
    pub seed: u64,
    #[serde(skip)]
    pub out: PathBuf,
}
