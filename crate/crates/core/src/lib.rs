//! Mean-field models of homogeneous nanowires reduced to the transverse plane.
//!
//! The crate evaluates the regularized 2D Hartree interaction through
//! (modified) Riesz potentials, solves the Thomas-Fermi model with both the
//! regularized and the logarithmic interaction, and solves the reduced
//! Hartree-Fock model by spectral fixed-point iteration.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod charge;
pub mod coulomb;
pub mod error;
pub mod field;
pub mod io;
pub mod line_search;
pub mod rhf;
pub mod tf;

pub use coulomb::{
    cell_kernel_integral, hartree_energy_fourier, Coulomb2d, Interaction, KernelCellRule,
    KernelKind, NeutralField, SelfInteraction,
};
pub use error::{Error, Result};
pub use field::{
    gradient, integrate, interior_l2, laplacian, lp_norm, ChargeDistribution, Grid, ScalarField,
};

pub use charge::{ChargeSpec, Sampling};
pub use io::HistoryEntry;
pub use tf::{ComparisonReport, EnergyBreakdown, TfConfig, TfResult};
pub use rhf::{DiscreteHamiltonian, ReducedState, RhfConfig, RhfResult, Spectrum};
