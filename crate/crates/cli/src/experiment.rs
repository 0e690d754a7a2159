//! Execution of a validated [`ExperimentConfig`] and emission of its artifacts.

use std::path::{Path, PathBuf};

use cch_core::diagnostics::{
    absorbing_radius, blowup_certificate, diagnostic_rows, find_blowup_amplitude, lyapunov_decrease,
    psi_series, within_factor, LyapunovReport,
};
use cch_core::goodman::{construct_phi, goodman_dissipation_residual, shift_distance};
use cch_core::integrate::integrate;
use cch_core::oracles::{
    cch_admissible, cch_gronwall_exponents, gronwall_verify, levine_check, GronwallParams,
};
use cch_core::{
    BigRational, BlowupCertificate, Checkpoint, Family, GaugeParams, GronwallReport, LevineReport,
    ModelSpec, PeriodicGrid, PhiMetadata, RadiusNorm, RunStatus, SampleNorms, SolverConfig,
    SpectralField, Stability, Trajectory,
};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::config::{swept_model, ExperimentConfig, InitialCondition, Kind};
use crate::output::{create_dir, timeseries_csv, write_atomic, write_json, OutputError};

/// Tolerance on the concavity residual and on drops of `Ψ'` and `E` in blow-up runs.
pub const BLOWUP_TOLERANCE: f64 = 1e-3;
/// Largest Gronwall envelope violation accepted by `verify_lemmas`.
pub const GRONWALL_TOLERANCE: f64 = 1e-8;
/// Largest relative error of the recovered pole accepted by `verify_lemmas`.
pub const LEVINE_POLE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Success,
    /// Blow-up or step underflow the experiment did not expect.
    NumericalFailure { reason: String },
    CertificationFailure { reason: String },
}

impl Verdict {
    pub fn exit_code(&self) -> u8 {
        match self {
            Verdict::Success => 0,
            Verdict::NumericalFailure { .. } => 3,
            Verdict::CertificationFailure { .. } => 4,
        }
    }

    fn numerical(reason: impl Into<String>) -> Self {
        Verdict::NumericalFailure { reason: reason.into() }
    }

    fn certification(reason: impl Into<String>) -> Self {
        Verdict::CertificationFailure { reason: reason.into() }
    }

    /// Keeps the first failure; numerical failures take precedence.
    pub fn and(self, other: Verdict) -> Verdict {
        match (&self, &other) {
            (Verdict::NumericalFailure { .. }, _) => self,
            (_, Verdict::NumericalFailure { .. }) => other,
            (Verdict::CertificationFailure { .. }, _) => self,
            _ => other,
        }
    }
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Output(#[from] OutputError),
    #[error("{0}")]
    Compute(String),
}

fn compute<E: std::fmt::Display>(e: E) -> ExperimentError {
    ExperimentError::Compute(e.to_string())
}

/// Resolution-sensitive numbers an experiment reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Headline {
    pub label: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub kind: Kind,
    pub directory: PathBuf,
    pub verdict: Verdict,
    pub headline: Option<Headline>,
}

#[derive(Serialize)]
struct RunSummary {
    model: ModelSpec,
    n: usize,
    solver: SolverConfig,
    status: RunStatus,
    final_time: f64,
    final_norms: SampleNorms,
    samples: usize,
    accepted_steps: usize,
    rejected_steps: usize,
    /// Smallest amplitude of the profile with `E₀ >= 0`, for blow-up profiles.
    blowup_amplitude: Option<f64>,
    initial_scale: f64,
}

struct Run {
    traj: Trajectory,
    u0: SpectralField,
    blowup_amplitude: Option<f64>,
    scale: f64,
}

fn simulate(cfg: &ExperimentConfig, model: &ModelSpec, scale: f64) -> Result<Run, ExperimentError> {
    let grid = model.grid(cfg.n).map_err(compute)?;
    let profile = cfg.initial().profile(&grid).map_err(compute)?;
    let (u0, blowup_amplitude) = match cfg.initial() {
        InitialCondition::BlowupProfile { margin, .. } => {
            let lambda = GaugeParams::from_half_length(model.half_length).lambda;
            let a_star = find_blowup_amplitude(&profile, lambda).map_err(compute)?;
            (profile.scaled(margin * a_star * scale), Some(a_star))
        }
        _ => (profile.scaled(scale), None),
    };
    let traj = integrate(model, &u0, &cfg.solver).map_err(compute)?;
    Ok(Run {
        traj,
        u0,
        blowup_amplitude,
        scale,
    })
}

fn write_run(
    dir: &Path,
    cfg: &ExperimentConfig,
    run: &Run,
    shifts: Option<&[(f64, f64)]>,
) -> Result<(), ExperimentError> {
    let traj = &run.traj;
    let psi = match traj.model.family {
        Family::CubicCch => {
            let lambda = GaugeParams::from_half_length(traj.model.half_length).lambda;
            psi_series(traj, lambda).ok()
        }
        _ => None,
    };
    let rows = diagnostic_rows(traj, psi.as_ref(), shifts);
    write_atomic(&dir.join("timeseries.csv"), &timeseries_csv(&rows))?;
    let checkpoint = Checkpoint::from_field(traj.final_state(), traj.final_time(), Some(traj.status))
        .with_model(traj.model);
    let text = checkpoint.to_json().map_err(compute)?;
    write_atomic(&dir.join("checkpoint.json"), &(text + "\n"))?;
    let summary = RunSummary {
        model: traj.model,
        n: cfg.n,
        solver: cfg.solver,
        status: traj.status,
        final_time: traj.final_time(),
        final_norms: *traj.norms.last().expect("trajectory holds the initial state"),
        samples: traj.len(),
        accepted_steps: traj.accepted_steps,
        rejected_steps: traj.rejected_steps,
        blowup_amplitude: run.blowup_amplitude,
        initial_scale: run.scale,
    };
    write_json(&dir.join("summary.json"), &summary)?;
    Ok(())
}

fn unexpected_status(status: RunStatus, what: &str) -> Verdict {
    match status {
        RunStatus::Completed => Verdict::Success,
        RunStatus::BlowupDetected { t_blow } => {
            Verdict::numerical(format!("{what}: unexpected blow-up at t = {t_blow:e}"))
        }
        RunStatus::StepUnderflow { t } => Verdict::numerical(format!("{what}: step underflow at t = {t:e}")),
    }
}

/// Runs `cfg` and writes its artifacts under `dir`.
pub fn run_experiment(cfg: &ExperimentConfig, dir: &Path) -> Result<Report, ExperimentError> {
    create_dir(dir)?;
    let (verdict, headline) = match cfg.kind {
        Kind::Run => single_run(cfg, dir)?,
        Kind::SweepP | Kind::SweepDelta => sweep(cfg, dir)?,
        Kind::VerifyBlowup => verify_blowup(cfg, dir)?,
        Kind::VerifyDissipativity => verify_dissipativity(cfg, dir)?,
        Kind::VerifyLemmas => (verify_lemmas(cfg, dir)?, None),
        Kind::VerifyGap => verify_gap(cfg, dir)?,
    };
    Ok(Report {
        kind: cfg.kind,
        directory: dir.to_path_buf(),
        verdict,
        headline,
    })
}

fn single_run(cfg: &ExperimentConfig, dir: &Path) -> Result<(Verdict, Option<Headline>), ExperimentError> {
    let run = simulate(cfg, &cfg.model(), 1.0)?;
    write_run(dir, cfg, &run, None)?;
    let headline = match run.traj.status {
        RunStatus::BlowupDetected { t_blow } => Headline {
            label: "t_blow".into(),
            values: vec![t_blow],
        },
        _ => Headline {
            label: "final L2 norm".into(),
            values: vec![run.traj.norms.last().unwrap().l2],
        },
    };
    Ok((unexpected_status(run.traj.status, "run"), Some(headline)))
}

#[derive(Debug, Clone, Serialize)]
struct SweepRow {
    value: f64,
    status: Option<RunStatus>,
    final_time: Option<f64>,
    final_l2: Option<f64>,
    radius: Option<f64>,
    error: Option<String>,
}

impl SweepRow {
    fn csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|v| format!("{v:e}")).unwrap_or_default();
        let status = match (&self.status, &self.error) {
            (Some(RunStatus::Completed), _) => "completed".to_string(),
            (Some(RunStatus::BlowupDetected { .. }), _) => "blowup_detected".to_string(),
            (Some(RunStatus::StepUnderflow { .. }), _) => "step_underflow".to_string(),
            (None, _) => "error".to_string(),
        };
        format!(
            "{:e},{status},{},{},{}",
            self.value,
            opt(self.final_time),
            opt(self.final_l2),
            opt(self.radius)
        )
    }
}

fn sweep(cfg: &ExperimentConfig, dir: &Path) -> Result<(Verdict, Option<Headline>), ExperimentError> {
    let param = if cfg.kind == Kind::SweepP { "p" } else { "delta" };
    let base = cfg.model();
    let outcomes: Vec<Result<SweepRow, OutputError>> = cfg
        .sweep_values
        .par_iter()
        .map(|&value| {
            let model = swept_model(cfg.kind, &base, value);
            let run = match simulate(cfg, &model, 1.0) {
                Ok(run) => run,
                Err(e) => {
                    return Ok(SweepRow {
                        value,
                        status: None,
                        final_time: None,
                        final_l2: None,
                        radius: None,
                        error: Some(e.to_string()),
                    })
                }
            };
            let sub = dir.join(format!("{param}_{value}"));
            match write_run(&sub, cfg, &run, None) {
                Ok(()) => {}
                Err(ExperimentError::Output(e)) => return Err(e),
                Err(e) => {
                    return Ok(SweepRow {
                        value,
                        status: Some(run.traj.status),
                        final_time: Some(run.traj.final_time()),
                        final_l2: None,
                        radius: None,
                        error: Some(e.to_string()),
                    })
                }
            }
            let radius = absorbing_radius(
                std::slice::from_ref(&run.traj),
                None,
                RadiusNorm::for_model(&model),
            )
            .ok();
            Ok(SweepRow {
                value,
                status: Some(run.traj.status),
                final_time: Some(run.traj.final_time()),
                final_l2: Some(run.traj.norms.last().unwrap().l2),
                radius,
                error: None,
            })
        })
        .collect();
    let mut rows = outcomes.into_iter().collect::<Result<Vec<_>, _>>()?;
    rows.sort_by(|a, b| a.value.total_cmp(&b.value));

    let mut csv = format!("{param},status,final_time,L2,radius\n");
    for r in &rows {
        csv.push_str(&r.csv());
        csv.push('\n');
    }
    write_atomic(&dir.join("summary.csv"), &csv)?;
    write_json(&dir.join("summary.json"), &rows)?;

    let mut verdict = Verdict::Success;
    for r in &rows {
        let what = format!("{param} = {}", r.value);
        verdict = verdict.and(match (&r.status, &r.error) {
            (_, Some(e)) => Verdict::numerical(format!("{what}: {e}")),
            (Some(s), None) => unexpected_status(*s, &what),
            (None, None) => Verdict::Success,
        });
    }
    let headline = rows.iter().all(|r| r.radius.is_some()).then(|| Headline {
        label: "absorbing radius per sweep value".into(),
        values: rows.iter().map(|r| r.radius.unwrap()).collect(),
    });
    Ok((verdict, headline))
}

#[derive(Serialize)]
struct BlowupSummary<'a> {
    status: RunStatus,
    blowup_amplitude: Option<f64>,
    certificate: &'a BlowupCertificate,
    tolerance: f64,
}

fn verify_blowup(cfg: &ExperimentConfig, dir: &Path) -> Result<(Verdict, Option<Headline>), ExperimentError> {
    let run = simulate(cfg, &cfg.model(), 1.0)?;
    write_run(dir, cfg, &run, None)?;
    let cert = blowup_certificate(&run.u0, &run.traj).map_err(compute)?;
    write_json(
        &dir.join("certificate.json"),
        &BlowupSummary {
            status: run.traj.status,
            blowup_amplitude: run.blowup_amplitude,
            certificate: &cert,
            tolerance: BLOWUP_TOLERANCE,
        },
    )?;
    let verdict = match run.traj.status {
        RunStatus::StepUnderflow { t } => Verdict::numerical(format!("step underflow at t = {t:e}")),
        _ if !cert.criterion_met => Verdict::certification(format!("E0 = {:e} < 0: the blow-up criterion does not hold", cert.e0)),
        RunStatus::Completed => Verdict::certification("criterion met but no blow-up observed by t_end"),
        RunStatus::BlowupDetected { .. } => {
            let residual = cert.min_relative_residual.unwrap_or(f64::NEG_INFINITY);
            let psi1_drop = cert.psi1_worst_drop.unwrap_or(f64::INFINITY);
            let energy_drop = cert.energy_worst_drop.unwrap_or(f64::INFINITY);
            if residual < -BLOWUP_TOLERANCE {
                Verdict::certification(format!("concavity residual {residual:e} below -{BLOWUP_TOLERANCE:e}"))
            } else if psi1_drop > BLOWUP_TOLERANCE {
                Verdict::certification(format!("Psi' dropped by {psi1_drop:e}"))
            } else if energy_drop > BLOWUP_TOLERANCE {
                Verdict::certification(format!("energy dropped by {energy_drop:e}"))
            } else {
                Verdict::Success
            }
        }
    };
    let headline = cert.observed_t_blow.map(|t| Headline {
        label: "observed blow-up time".into(),
        values: vec![t],
    });
    Ok((verdict, headline))
}

#[derive(Serialize)]
struct DissipativitySummary {
    norm: RadiusNorm,
    amplitudes: Vec<f64>,
    statuses: Vec<RunStatus>,
    radii: Vec<f64>,
    radius: Option<f64>,
    radius_factor: f64,
    lyapunov: Option<Vec<LyapunovReport>>,
    goodman: Option<GoodmanSummary>,
}

#[derive(Serialize)]
struct GoodmanSummary {
    target_gap: f64,
    certified_gap: f64,
    /// Fitted constant of the shift-distance dissipation inequality, per amplitude.
    c_fit: Vec<Option<f64>>,
}

fn verify_dissipativity(cfg: &ExperimentConfig, dir: &Path) -> Result<(Verdict, Option<Headline>), ExperimentError> {
    let model = cfg.model();
    let grid = model.grid(cfg.n).map_err(compute)?;
    let norm = RadiusNorm::for_model(&model);
    let phi = cfg
        .verify
        .goodman_target
        .map(|target| construct_phi(target, &grid))
        .transpose();
    let phi = match phi {
        Ok(phi) => phi,
        Err(e) => return Ok((Verdict::certification(e.to_string()), None)),
    };
    let runs = cfg
        .verify
        .amplitudes
        .par_iter()
        .map(|&a| {
            let run = simulate(cfg, &model, a)?;
            let shifts = match &phi {
                Some(gf) => Some(
                    run.traj
                        .fields
                        .iter()
                        .map(|u| shift_distance(u, &gf.phi).map(|d| (d.r, d.s_star)))
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(compute)?,
                ),
                None => None,
            };
            write_run(&dir.join(format!("amplitude_{a}")), cfg, &run, shifts.as_deref())?;
            Ok(run)
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;

    let statuses: Vec<RunStatus> = runs.iter().map(|r| r.traj.status).collect();
    let mut verdict = Verdict::Success;
    for (a, s) in cfg.verify.amplitudes.iter().zip(&statuses) {
        verdict = verdict.and(unexpected_status(*s, &format!("amplitude {a}")));
    }
    let completed = verdict == Verdict::Success;
    let radii: Vec<f64> = if completed {
        runs.iter()
            .map(|r| absorbing_radius(std::slice::from_ref(&r.traj), cfg.verify.t_transient, norm))
            .collect::<Result<_, _>>()
            .map_err(compute)?
    } else {
        Vec::new()
    };
    let radius = radii.iter().copied().reduce(f64::max);
    if completed && !within_factor(&radii, cfg.verify.radius_factor) {
        verdict = verdict.and(Verdict::certification(format!(
            "radii {radii:?} differ by more than a factor {}",
            cfg.verify.radius_factor
        )));
    }
    let lyapunov = match (model.family, radius) {
        (Family::Sixth { stability: Stability::Stable, .. }, Some(r)) => {
            let reports: Vec<LyapunovReport> = runs
                .iter()
                .map(|run| lyapunov_decrease(&run.traj, r * r))
                .collect::<Result<_, _>>()
                .map_err(compute)?;
            let violations: usize = reports.iter().map(|r| r.violations).sum();
            if violations > 0 {
                verdict = verdict.and(Verdict::certification(format!(
                    "||P^1/2 u||^2 failed to decrease above the threshold {violations} times"
                )));
            }
            Some(reports)
        }
        _ => None,
    };
    let goodman = phi.as_ref().map(|gf| GoodmanSummary {
        target_gap: gf.target_gap,
        certified_gap: gf.certified_gap,
        c_fit: runs
            .iter()
            .map(|r| goodman_dissipation_residual(&r.traj, gf).ok().map(|d| d.c_fit))
            .collect(),
    });
    write_json(
        &dir.join("summary.json"),
        &DissipativitySummary {
            norm,
            amplitudes: cfg.verify.amplitudes.clone(),
            statuses,
            radii: radii.clone(),
            radius,
            radius_factor: cfg.verify.radius_factor,
            lyapunov,
            goodman,
        },
    )?;
    let headline = radius.map(|r| Headline {
        label: "absorbing radius".into(),
        values: vec![r],
    });
    Ok((verdict, headline))
}

#[derive(Serialize)]
struct LevineEntry {
    pole: f64,
    relative_error: f64,
    report: LevineReport,
}

#[derive(Serialize)]
struct LemmaSummary {
    levine: Vec<LevineEntry>,
    decaying_rejected: bool,
    linear_rejected: bool,
    p: f64,
    /// Exact evaluation of the threshold condition at the binary value of `p`.
    admissible: Option<bool>,
    gronwall: Option<GronwallReport>,
    note: Option<String>,
}

fn verify_lemmas(cfg: &ExperimentConfig, dir: &Path) -> Result<Verdict, ExperimentError> {
    let s = &cfg.lemmas;
    let mut verdict = Verdict::Success;
    let mut levine = Vec::new();
    for &pole in &s.levine_poles {
        let times: Vec<f64> = (0..4001).map(|i| 0.95 * pole * i as f64 / 4000.0).collect();
        let psi: Vec<f64> = times.iter().map(|t| (pole - t).powi(-4)).collect();
        let report = levine_check(&times, &psi, 0.25).map_err(compute)?;
        let relative_error = (report.t1 - pole).abs() / pole;
        if !report.hypothesis_ok || relative_error > LEVINE_POLE_TOLERANCE {
            verdict = verdict.and(Verdict::certification(format!(
                "equality case with pole {pole}: hypothesis {}, pole error {relative_error:e}",
                report.hypothesis_ok
            )));
        }
        levine.push(LevineEntry {
            pole,
            relative_error,
            report,
        });
    }
    let times: Vec<f64> = (0..200).map(|i| 2.0 * i as f64 / 199.0).collect();
    let decaying: Vec<f64> = times.iter().map(|t| (-t).exp()).collect();
    let linear: Vec<f64> = times.iter().map(|t| 1.0 + t).collect();
    let decaying_rejected = !levine_check(&times, &decaying, 0.25).map_err(compute)?.hypothesis_ok;
    let linear_rejected = !levine_check(&times, &linear, 0.25).map_err(compute)?.hypothesis_ok;
    if !(decaying_rejected && linear_rejected) {
        verdict = verdict.and(Verdict::certification("a counterexample passed the concavity check"));
    }

    let exact_p = BigRational::from_float(s.p).ok_or_else(|| compute("p is not finite"))?;
    let admissible = cch_admissible(&exact_p).ok();
    let (gronwall, note) = match cch_gronwall_exponents(&exact_p) {
        Err(e) => (None, Some(format!("no Gronwall exponents for p = {}: {e}", s.p))),
        Ok(_) if admissible != Some(true) => (
            None,
            Some(format!("p = {} lies at or above the threshold; the lemma makes no claim", s.p)),
        ),
        Ok(e) => {
            let params = GronwallParams::from_exponents(&e, s.k, s.m, s.eps0).map_err(compute)?;
            let report = gronwall_verify(&params, &s.psi0, s.t_end).map_err(compute)?;
            if !(report.kappa > 0.0 && report.max_violation <= GRONWALL_TOLERANCE) {
                verdict = verdict.and(Verdict::certification(format!(
                    "Gronwall witness failed: kappa {:e}, violation {:e}",
                    report.kappa, report.max_violation
                )));
            }
            (Some(report), None)
        }
    };
    write_json(
        &dir.join("summary.json"),
        &LemmaSummary {
            levine,
            decaying_rejected,
            linear_rejected,
            p: s.p,
            admissible,
            gronwall,
            note,
        },
    )?;
    Ok(verdict)
}

#[derive(Serialize)]
struct GapEntry {
    target_gap: f64,
    certified_gap: f64,
    theta: f64,
    linf_norm: f64,
    h2_norm: f64,
    linf_ratio: f64,
    h2_ratio: f64,
}

#[derive(Serialize)]
struct GapSummary {
    half_length: f64,
    n: usize,
    entries: Vec<GapEntry>,
    /// Common bound on `‖φ‖_∞/N` and `‖φ‖_{H²}/N^{3/2}` across the targets.
    scaling_constant: Option<f64>,
    failure: Option<String>,
}

fn verify_gap(cfg: &ExperimentConfig, dir: &Path) -> Result<(Verdict, Option<Headline>), ExperimentError> {
    let model = cfg.model();
    let grid = PeriodicGrid::new(model.half_length, cfg.n).map_err(compute)?;
    let outcomes: Vec<_> = cfg
        .gap_targets
        .par_iter()
        .map(|&target| construct_phi(target, &grid))
        .collect();
    let mut entries = Vec::new();
    let mut failure = None;
    for (target, outcome) in cfg.gap_targets.iter().zip(outcomes) {
        match outcome {
            Ok(gf) => {
                let cp = Checkpoint::from_field(&gf.phi, 0.0, None).with_phi(PhiMetadata {
                    target_gap: gf.target_gap,
                    certified_gap: gf.certified_gap,
                });
                let text = cp.to_json().map_err(compute)?;
                write_atomic(&dir.join(format!("phi_{target}.json")), &(text + "\n"))?;
                entries.push(GapEntry {
                    target_gap: gf.target_gap,
                    certified_gap: gf.certified_gap,
                    theta: gf.theta,
                    linf_norm: gf.linf_norm,
                    h2_norm: gf.h2_norm,
                    linf_ratio: gf.linf_norm / gf.target_gap,
                    h2_ratio: gf.h2_norm / gf.target_gap.powf(1.5),
                });
            }
            Err(e) => {
                failure.get_or_insert(e.to_string());
            }
        }
    }
    let scaling_constant = (failure.is_none()).then(|| {
        entries
            .iter()
            .map(|e| e.linf_ratio.max(e.h2_ratio))
            .fold(0.0, f64::max)
    });
    let verdict = match &failure {
        Some(f) => Verdict::certification(f.clone()),
        None => Verdict::Success,
    };
    let headline = failure.is_none().then(|| Headline {
        label: "certified gap per target".into(),
        values: entries.iter().map(|e| e.certified_gap).collect(),
    });
    write_json(
        &dir.join("summary.json"),
        &GapSummary {
            half_length: model.half_length,
            n: cfg.n,
            entries,
            scaling_constant,
            failure,
        },
    )?;
    Ok((verdict, headline))
}
