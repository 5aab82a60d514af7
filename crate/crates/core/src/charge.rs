//! Background charge presets.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{ChargeDistribution, Grid, ScalarField};

/// Which nodes on the edge of an indicator's support count as inside.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sampling {
    /// Strict inequality: edge nodes are outside.
    #[default]
    Open,
    /// Edge nodes are inside.
    Closed,
}

impl FromStr for Sampling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "open" => Ok(Self::Open),
            "closed" => Ok(Self::Closed),
            other => Err(Error::InvalidConfig(format!("unknown sampling `{other}` (expected open|closed)"))),
        }
    }
}

/// A named background charge that can be sampled on any grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ChargeSpec {
    /// Unit density on the square `[-h, h]²`.
    SquareNanowire { half_width: f64, sampling: Sampling },
    /// Isotropic Gaussian of total mass `charge`.
    Gaussian { cx: f64, cy: f64, width: f64, charge: f64 },
}

impl ChargeSpec {
    /// The unit-density wire of side 4 centred at the origin.
    pub fn square_nanowire(sampling: Sampling) -> Self {
        Self::SquareNanowire { half_width: 2.0, sampling }
    }

    pub fn gaussian(cx: f64, cy: f64, width: f64, charge: f64) -> Self {
        Self::Gaussian { cx, cy, width, charge }
    }

    /// Total charge of the continuum profile on the whole plane.
    pub fn analytic_charge(&self) -> f64 {
        match *self {
            Self::SquareNanowire { half_width, .. } => 4.0 * half_width * half_width,
            Self::Gaussian { charge, .. } => charge,
        }
    }

    /// Node values of the profile.
    pub fn sample_field(&self, grid: Grid) -> Result<ScalarField> {
        match *self {
            Self::SquareNanowire { half_width, sampling } => {
                if !(half_width > 0.0) {
                    return Err(Error::InvalidCharge("half width must be positive".into()));
                }
                let slack = 1e-12 * grid.a().max(grid.b());
                let inside = move |s: f64| match sampling {
                    Sampling::Open => s.abs() < half_width - slack,
                    Sampling::Closed => s.abs() <= half_width + slack,
                };
                Ok(ScalarField::from_fn(grid, |x, y| if inside(x) && inside(y) { 1.0 } else { 0.0 }))
            }
            Self::Gaussian { cx, cy, width, charge } => {
                if !(width > 0.0) || !(charge > 0.0) {
                    return Err(Error::InvalidCharge("gaussian width and charge must be positive".into()));
                }
                let norm = charge / (2.0 * PI * width * width);
                Ok(ScalarField::from_fn(grid, |x, y| {
                    let r2 = (x - cx).powi(2) + (y - cy).powi(2);
                    norm * (-r2 / (2.0 * width * width)).exp()
                }))
            }
        }
    }

    /// Samples the profile and validates it as a charge distribution.
    pub fn sample(&self, grid: Grid) -> Result<ChargeDistribution> {
        ChargeDistribution::new(self.sample_field(grid)?)
    }
}

impl fmt::Display for ChargeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Self::SquareNanowire { sampling: Sampling::Open, .. } => write!(f, "square-nanowire"),
            Self::SquareNanowire { sampling: Sampling::Closed, .. } => write!(f, "square-nanowire-closed"),
            Self::Gaussian { cx, cy, width, charge } => write!(f, "gaussian({cx},{cy},{width},{charge})"),
        }
    }
}

/// Accepts `square-nanowire`, `square-nanowire-closed` and
/// `gaussian(cx,cy,width,charge)`.
impl FromStr for ChargeSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "square-nanowire" => return Ok(Self::square_nanowire(Sampling::Open)),
            "square-nanowire-closed" => return Ok(Self::square_nanowire(Sampling::Closed)),
            _ => {}
        }
        let args = s
            .strip_prefix("gaussian(")
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(|| Error::InvalidCharge(format!("unknown charge preset `{s}`")))?;
        let nums: Vec<f64> = args
            .split(',')
            .map(|a| a.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::InvalidCharge(format!("bad gaussian arguments in `{s}`")))?;
        match nums[..] {
            [cx, cy, width, charge] => Ok(Self::gaussian(cx, cy, width, charge)),
            _ => Err(Error::InvalidCharge("gaussian takes (cx, cy, width, charge)".into())),
        }
    }
}
