//! Versioned JSON checkpoints of a single field.
//!
//! Coefficients are stored as interleaved `re, im` pairs for modes
//! `0..=n/2`. Floats are written in shortest round-trip form and parsed with
//! exact rounding, so a save/load cycle is bit-exact.

use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::integrate::RunStatus;
use crate::models::ModelSpec;
use crate::spectral::{PeriodicGrid, SpectralError, SpectralField};

pub const CHECKPOINT_FORMAT: &str = "cch-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed checkpoint: {0}")]
    Json(#[from] serde_json::Error),
    #[error("not a checkpoint file (format tag {0:?})")]
    Format(String),
    #[error("unsupported checkpoint version {found}, expected {CHECKPOINT_VERSION}")]
    Version { found: u32 },
    #[error("checkpoint holds {found} numbers, expected {expected} for n = {n}")]
    Length { found: usize, expected: usize, n: usize },
    #[error("checkpoint contains non-finite values")]
    NonFinite,
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

pub type Result<T> = std::result::Result<T, CheckpointError>;

/// Extra data stored with an auxiliary profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhiMetadata {
    pub target_gap: f64,
    pub certified_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub half_length: f64,
    pub n: usize,
    pub time: f64,
    #[serde(default)]
    pub status: Option<RunStatus>,
    #[serde(default)]
    pub model: Option<ModelSpec>,
    #[serde(default)]
    pub phi: Option<PhiMetadata>,
    pub coefficients: Vec<f64>,
}

impl Checkpoint {
    pub fn from_field(u: &SpectralField, time: f64, status: Option<RunStatus>) -> Self {
        let coefficients = u.coeffs().iter().flat_map(|c| [c.re, c.im]).collect();
        Self {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            half_length: u.grid().half_length(),
            n: u.grid().n(),
            time,
            status,
            model: None,
            phi: None,
            coefficients,
        }
    }

    pub fn with_model(mut self, model: ModelSpec) -> Self {
        self.model = Some(model);
        self
    }

    pub fn with_phi(mut self, meta: PhiMetadata) -> Self {
        self.phi = Some(meta);
        self
    }

    fn validate(&self) -> Result<()> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(CheckpointError::Format(self.format.clone()));
        }
        if self.version != CHECKPOINT_VERSION {
            return Err(CheckpointError::Version {
                found: self.version,
            });
        }
        let expected = 2 * (self.n / 2 + 1);
        if self.coefficients.len() != expected {
            return Err(CheckpointError::Length {
                found: self.coefficients.len(),
                expected,
                n: self.n,
            });
        }
        if !self.time.is_finite() || self.coefficients.iter().any(|v| !v.is_finite()) {
            return Err(CheckpointError::NonFinite);
        }
        Ok(())
    }

    /// Rebuilds the stored field on a fresh grid.
    pub fn field(&self) -> Result<SpectralField> {
        self.validate()?;
        let grid = PeriodicGrid::new(self.half_length, self.n)?;
        let coeffs = self
            .coefficients
            .chunks_exact(2)
            .map(|p| Complex64::new(p[0], p[1]))
            .collect();
        Ok(SpectralField::from_coeffs(&grid, coeffs)?)
    }

    pub fn to_json(&self) -> Result<String> {
        self.validate()?;
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    /// Writes through a temporary file and renames it into place.
    pub fn write(&self, path: &Path) -> Result<()> {
        let text = self.to_json()?;
        let io = |source| CheckpointError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut tmp = path.as_os_str().to_owned();
        tmp.push(".partial");
        fs::write(&tmp, text).map_err(io)?;
        fs::rename(&tmp, path).map_err(io)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| CheckpointError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Family;
    use proptest::prelude::*;

    fn field_from_bits(bits: &[u64], n: usize) -> SpectralField {
        let grid = PeriodicGrid::new(1.5, n).unwrap();
        let coeffs = bits
            .chunks_exact(2)
            .map(|p| Complex64::new(f64::from_bits(p[0]), f64::from_bits(p[1])))
            .collect();
        SpectralField::from_coeffs(&grid, coeffs).unwrap()
    }

    fn finite_bits() -> impl Strategy<Value = u64> {
        any::<u64>().prop_filter("finite", |b| f64::from_bits(*b).is_finite())
    }

    proptest! {
        #[test]
        fn json_round_trip_is_bit_exact(bits in proptest::collection::vec(finite_bits(), 18), t in -1e6f64..1e6) {
            let u = field_from_bits(&bits, 16);
            let c = Checkpoint::from_field(&u, t, Some(RunStatus::Completed));
            let back = Checkpoint::from_json(&c.to_json().unwrap()).unwrap();
            prop_assert_eq!(back.time.to_bits(), t.to_bits());
            let v = back.field().unwrap();
            for (a, b) in u.coeffs().iter().zip(v.coeffs()) {
                prop_assert_eq!(a.re.to_bits(), b.re.to_bits());
                prop_assert_eq!(a.im.to_bits(), b.im.to_bits());
            }
        }
    }

    #[test]
    fn file_round_trip_with_metadata() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("state.json");
        let grid = PeriodicGrid::new(1.0, 32).unwrap();
        let u = SpectralField::sine_mode(&grid, 3, 0.1 + 0.2, 0.7);
        let model = ModelSpec::new(Family::CubicCch, 1.0).unwrap();
        let c = Checkpoint::from_field(&u, 0.25, Some(RunStatus::BlowupDetected { t_blow: 0.25 }))
            .with_model(model)
            .with_phi(PhiMetadata {
                target_gap: 100.0,
                certified_gap: 135.4,
            });
        c.write(&path).unwrap();
        let back = Checkpoint::read(&path).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.field().unwrap(), u);
        assert!(!dir.path().join("state.json.partial").exists());
    }

    #[test]
    fn rejects_bad_files() {
        let grid = PeriodicGrid::new(1.0, 16).unwrap();
        let c = Checkpoint::from_field(&SpectralField::zeros(&grid), 0.0, None);
        let mut wrong = c.clone();
        wrong.version = 99;
        let text = serde_json::to_string(&wrong).unwrap();
        assert!(matches!(Checkpoint::from_json(&text), Err(CheckpointError::Version { found: 99 })));
        let mut short = c.clone();
        short.coefficients.pop();
        let text = serde_json::to_string(&short).unwrap();
        assert!(matches!(Checkpoint::from_json(&text), Err(CheckpointError::Length { .. })));
        let text = serde_json::to_string(&c).unwrap().replacen('{', "{\"extra\": 1,", 1);
        assert!(matches!(Checkpoint::from_json(&text), Err(CheckpointError::Json(_))));
        let mut nan = c;
        nan.coefficients[2] = f64::NAN;
        assert!(matches!(nan.to_json(), Err(CheckpointError::NonFinite)));
    }
}
