//! Configuration-driven experiment runner for `cch-core`: single runs,
//! parameter sweeps and the verification suites, with CSV/JSON artifacts and
//! checkpoints.
//!
//! Exit codes: 0 success, 1 artifact I/O failure, 2 invalid configuration,
//! 3 numerical failure (unexpected blow-up or step underflow), 4 certification
//! failure.

pub mod config;
pub mod experiment;
pub mod output;

use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

pub use config::{ConfigError, ExperimentConfig, Kind};
pub use experiment::{run_experiment, ExperimentError, Headline, Report, Verdict};

/// Environment variable that replaces the directory relative output paths are
/// resolved against.
pub const OUTPUT_ROOT_ENV: &str = "CCH_OUTPUT_ROOT";
/// Largest relative move of a headline number under resolution doubling.
pub const RESOLUTION_TOLERANCE: f64 = 1e-3;

pub const EXIT_IO: u8 = 1;
pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Run,
    Sweep,
    Verify,
}

impl Command {
    pub fn accepts(self, kind: Kind) -> bool {
        match self {
            Command::Run => kind == Kind::Run,
            Command::Sweep => kind.is_sweep(),
            Command::Verify => kind.is_verify(),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Command::Run => "run",
            Command::Sweep => "sweep",
            Command::Verify => "verify",
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{config}: `{command}` cannot run experiment kind {kind}")]
    KindMismatch {
        config: String,
        command: &'static str,
        kind: Kind,
    },
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::KindMismatch { .. } => EXIT_VALIDATION,
            CliError::Experiment(ExperimentError::Output(_)) => EXIT_IO,
            CliError::Experiment(ExperimentError::Compute(_)) => EXIT_NUMERICAL,
        }
    }
}

/// Comparison of an experiment's headline numbers at `n` and `2n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolutionCheck {
    pub n: usize,
    pub doubled_n: usize,
    pub label: String,
    pub base: Vec<f64>,
    pub doubled: Vec<f64>,
    pub relative_change: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl ResolutionCheck {
    fn compare(n: usize, base: &Headline, doubled: &Headline) -> Self {
        let relative_change = if base.values.len() != doubled.values.len() {
            f64::INFINITY
        } else {
            base.values
                .iter()
                .zip(&doubled.values)
                .map(|(a, b)| {
                    let scale = a.abs().max(b.abs());
                    if scale == 0.0 {
                        0.0
                    } else {
                        (a - b).abs() / scale
                    }
                })
                .fold(0.0, f64::max)
        };
        Self {
            n,
            doubled_n: 2 * n,
            label: base.label.clone(),
            base: base.values.clone(),
            doubled: doubled.values.clone(),
            relative_change,
            tolerance: RESOLUTION_TOLERANCE,
            pass: relative_change < RESOLUTION_TOLERANCE,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Execution {
    pub report: Report,
    pub doubled: Option<Report>,
    pub resolution: Option<ResolutionCheck>,
    pub verdict: Verdict,
}

impl Execution {
    pub fn exit_code(&self) -> u8 {
        self.verdict.exit_code()
    }
}

/// Where the artifacts of `cfg` go: absolute directories are kept, relative
/// ones are resolved against `root` when given, else against the config's
/// own directory.
pub fn output_dir(cfg: &ExperimentConfig, root: Option<&Path>) -> PathBuf {
    if cfg.directory.is_absolute() {
        return cfg.directory.clone();
    }
    root.unwrap_or(&cfg.base_dir).join(&cfg.directory)
}

/// Loads `config`, checks it matches `command` and runs it, optionally again
/// at twice the resolution. Doubled artifacts go to the `n<2n>` subdirectory.
pub fn execute(
    command: Command,
    config: &Path,
    resolution_double: bool,
    root: Option<&Path>,
) -> Result<Execution, CliError> {
    let cfg = ExperimentConfig::load(config)?;
    if !command.accepts(cfg.kind) {
        return Err(CliError::KindMismatch {
            config: config.display().to_string(),
            command: command.name(),
            kind: cfg.kind,
        });
    }
    let dir = output_dir(&cfg, root);
    let report = run_experiment(&cfg, &dir)?;
    let mut verdict = report.verdict.clone();
    let (doubled, resolution) = if resolution_double && cfg.kind != Kind::VerifyLemmas {
        let fine = cfg.doubled();
        let doubled = run_experiment(&fine, &dir.join(format!("n{}", fine.n)))?;
        verdict = verdict.and(doubled.verdict.clone());
        let resolution = match (&report.headline, &doubled.headline) {
            (Some(a), Some(b)) => Some(ResolutionCheck::compare(cfg.n, a, b)),
            _ => None,
        };
        if let Some(check) = &resolution {
            output::write_json(&dir.join("resolution.json"), check).map_err(ExperimentError::from)?;
            if cfg.kind.is_verify() && !check.pass {
                verdict = verdict.and(Verdict::CertificationFailure {
                    reason: format!(
                        "{} moved by {:e} under resolution doubling (tolerance {:e})",
                        check.label, check.relative_change, RESOLUTION_TOLERANCE
                    ),
                });
            }
        }
        (Some(doubled), resolution)
    } else {
        (None, None)
    };
    Ok(Execution {
        report,
        doubled,
        resolution,
        verdict,
    })
}
