//! Shared fixtures for the criterion benchmarks.

use cch_core::{Family, ModelSpec, PeriodicGrid, SpectralField};

/// A smooth, zero-mean field with a few active modes.
pub fn smooth_field(grid: &PeriodicGrid, amplitude: f64) -> SpectralField {
    let mut u = SpectralField::sine_mode(grid, 1, amplitude, 0.0);
    u.axpy(1.0, &SpectralField::sine_mode(grid, 2, 0.5 * amplitude, 0.7));
    u.axpy(1.0, &SpectralField::sine_mode(grid, 3, 0.25 * amplitude, 1.9));
    u
}

pub fn cch(p: f64) -> ModelSpec {
    ModelSpec::new(Family::Cch { p }, 1.0).expect("valid model")
}
