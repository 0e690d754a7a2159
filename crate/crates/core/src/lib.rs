//! Pseudospectral simulation and certification tools for the convective
//! Cahn-Hilliard family of one-dimensional periodic equations.
//!
//! The crate is organised bottom-up:
//!
//! * [`spectral`] - periodic Fourier grids, fields, the inverse Laplacian and
//!   dealiased nonlinear evaluation;
//! * [`models`] - right-hand sides of the supported equations;
//! * [`integrate`] - exponential (ETDRK4) time stepping with blow-up detection;
//! * [`diagnostics`] - concavity functional, energies and absorbing-ball
//!   estimates computed along trajectories;
//! * [`oracles`] - standalone checkers for the concavity (blow-up) lemma and the
//!   Gronwall lemma with parameter;
//! * [`goodman`] - the auxiliary spectral-gap profile and the shift machinery;
//! * [`checkpoint`] - the on-disk state format.

pub mod checkpoint;
pub mod diagnostics;
pub mod goodman;
pub mod integrate;
pub mod models;
pub mod oracles;
pub mod spectral;

pub use checkpoint::{Checkpoint, CheckpointError, PhiMetadata};
pub use diagnostics::{BlowupCertificate, DiagnosticsError, GaugeParams, PsiSeries, RadiusNorm};
pub use goodman::{GoodmanError, GoodmanFunction, GoodmanOptions, ShiftDiagnostics};
pub use integrate::{IntegrateError, RunStatus, SampleNorms, SolverConfig, Trajectory};
pub use models::{Family, ModelError, ModelSpec, Stability};
pub use oracles::{GronwallExponents, GronwallParams, GronwallReport, LevineReport, OracleError};
pub use spectral::{PeriodicGrid, SpectralError, SpectralField};
pub use num_rational::BigRational;
