//! Quantities evaluated along trajectories: the gauge `u = e^{λt} v`, the
//! concavity functional Ψ and its derivatives, the energy, blow-up
//! certificates and empirical absorbing radii.
//!
//! All Ψ-related quantities are computed from `u` directly with the gauge
//! factor `e^{-2λt}` applied last, which keeps the intermediate values in
//! range close to blow-up.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::integrate::{RunStatus, Trajectory};
use crate::models::{Family, ModelSpec, Stability};
use crate::spectral::{SpectralError, SpectralField};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("expected a cubic CCH trajectory, got family {0}")]
    WrongFamily(&'static str),
    #[error("initial data is identically zero")]
    ZeroData,
    #[error("trajectory {index} did not complete ({status:?})")]
    NotCompleted { index: usize, status: RunStatus },
    #[error("no trajectories given")]
    Empty,
    #[error("transient cut {t_transient} is not below t_end = {t_end}")]
    TransientTooLong { t_transient: f64, t_end: f64 },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

pub type Result<T> = std::result::Result<T, DiagnosticsError>;

/// Exponent `α` in `Ψ''Ψ - (1+α)Ψ'^2 >= 0` for the cubic problem.
pub const CONCAVITY_ALPHA: f64 = 0.25;

/// Residuals are only meaningful while the amplitude stays below this.
pub const RESIDUAL_LINF_CAP: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaugeParams {
    pub d_bar0: f64,
    pub d0: f64,
    pub lambda: f64,
}

impl GaugeParams {
    pub fn from_half_length(half_length: f64) -> Self {
        let d_bar0 = half_length / std::f64::consts::PI;
        let d0 = d_bar0.max(1.0);
        Self {
            d_bar0,
            d0,
            lambda: 0.5 + 3.0 * d0 * d0,
        }
    }
}

/// `v = e^{-λt} u`.
pub fn gauge_transform(u: &SpectralField, lambda: f64, t: f64) -> SpectralField {
    u.scaled((-lambda * t).exp())
}

/// The four integrals entering Ψ', Ψ'' and E, all in terms of `u`.
#[derive(Debug, Clone, Copy)]
struct EnergyTerms {
    /// `||P^{1/2} u||^2`
    p_half_sqr: f64,
    /// `||∂x u||^2`
    grad_sqr: f64,
    /// `(P(u ∂x u), u)`
    convective: f64,
    /// `(u^4, 1)`
    quartic: f64,
}

impl EnergyTerms {
    fn of(u: &SpectralField, convective: bool) -> Result<Self> {
        let p_half_sqr = u.apply_p_half()?.l2_norm_sqr();
        let convective = if convective {
            let flux = u.product(u)?.derivative(1)?.scaled(0.5);
            flux.apply_p()?.inner(u)?
        } else {
            0.0
        };
        Ok(Self {
            p_half_sqr,
            grad_sqr: u.h_seminorm(1).powi(2),
            convective,
            quartic: u.power_integral(4),
        })
    }

    fn energy(&self, lambda: f64) -> f64 {
        -0.5 * lambda * self.p_half_sqr - 0.5 * self.grad_sqr + 0.25 * self.quartic
    }

    fn psi2(&self, lambda: f64) -> f64 {
        -2.0 * lambda * self.p_half_sqr - 2.0 * self.grad_sqr - 2.0 * self.convective
            + 2.0 * self.quartic
    }
}

/// `E₀ = -(λ/2)||P^{1/2}u₀||² - ½||∂x u₀||² + ¼(u₀⁴, 1)`.
pub fn initial_energy_e0(u0: &SpectralField, lambda: f64) -> Result<f64> {
    Ok(EnergyTerms::of(u0, false)?.energy(lambda))
}

/// Smallest `A > 0` with `E₀(A·profile) >= 0`, by bisection.
pub fn find_blowup_amplitude(profile: &SpectralField, lambda: f64) -> Result<f64> {
    let e0 = |a: f64| initial_energy_e0(&profile.scaled(a), lambda);
    e0(1.0)?;
    if profile.l2_norm() == 0.0 {
        return Err(DiagnosticsError::ZeroData);
    }
    let mut hi = 1.0;
    while e0(hi)? < 0.0 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    while hi - lo > 1e-13 * hi {
        let mid = 0.5 * (lo + hi);
        if e0(mid)? >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Ψ(t) = ∫₀ᵗ ||P^{1/2}v||² + C₀ and its derivatives along a trajectory.
///
/// The residual uses `(Ψ')²`, the standard Levine form; the lemma as printed
/// in some sources writes `Ψ²` in its place.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiSeries {
    pub lambda: f64,
    pub c0: f64,
    pub times: Vec<f64>,
    pub psi: Vec<f64>,
    pub psi1: Vec<f64>,
    pub psi2: Vec<f64>,
    /// `Ψ''Ψ - (5/4)Ψ'²`
    pub residual: Vec<f64>,
    /// Gauged energy `E(t)`.
    pub energy: Vec<f64>,
    /// Nodal maximum of `u` at each sample.
    pub linf: Vec<f64>,
}

impl PsiSeries {
    /// `r / (|Ψ''Ψ| + Ψ'²)` at sample `i`.
    pub fn relative_residual(&self, i: usize) -> f64 {
        let scale = (self.psi2[i] * self.psi[i]).abs() + self.psi1[i].powi(2);
        if scale == 0.0 {
            0.0
        } else {
            self.residual[i] / scale
        }
    }

    fn capped(&self, cap: f64) -> impl Iterator<Item = usize> + '_ {
        (0..self.times.len()).take_while(move |&i| self.linf[i] <= cap)
    }

    /// Minimum relative residual over the samples before the amplitude first
    /// exceeds `cap`.
    pub fn min_relative_residual(&self, cap: f64) -> f64 {
        self.capped(cap)
            .map(|i| self.relative_residual(i))
            .fold(f64::INFINITY, f64::min)
    }

    fn worst_relative_drop(values: &[f64], idx: impl Iterator<Item = usize>) -> f64 {
        let mut worst = 0.0_f64;
        let mut prev: Option<f64> = None;
        for i in idx {
            let v = values[i];
            if let Some(p) = prev {
                let scale = p.abs().max(v.abs());
                if scale > 0.0 {
                    worst = worst.max((p - v) / scale);
                }
            }
            prev = Some(v);
        }
        worst
    }

    /// Largest relative decrease of Ψ' between consecutive samples below `cap`.
    pub fn psi1_worst_drop(&self, cap: f64) -> f64 {
        Self::worst_relative_drop(&self.psi1, self.capped(cap))
    }

    /// Largest decrease of `E` between consecutive samples below `cap`,
    /// relative to `max(|E|, ‖P^{1/2}v‖²·λ/2)`.
    pub fn energy_worst_drop(&self, cap: f64) -> f64 {
        let mut worst = 0.0_f64;
        let idx: Vec<usize> = self.capped(cap).collect();
        for w in idx.windows(2) {
            let (a, b) = (w[0], w[1]);
            let scale = self.energy[a]
                .abs()
                .max(self.energy[b].abs())
                .max(0.5 * self.lambda * self.psi1[b]);
            if scale > 0.0 {
                worst = worst.max((self.energy[a] - self.energy[b]) / scale);
            }
        }
        worst
    }
}

fn require_cubic(model: &ModelSpec) -> Result<()> {
    match model.family {
        Family::CubicCch => Ok(()),
        f => Err(DiagnosticsError::WrongFamily(f.name())),
    }
}

/// Builds Ψ, Ψ', Ψ'' and the concavity residual for a cubic CCH trajectory,
/// with `C₀ = ½||P^{1/2}u₀||²`.
pub fn psi_series(traj: &Trajectory, lambda: f64) -> Result<PsiSeries> {
    require_cubic(&traj.model)?;
    let terms = traj
        .fields
        .iter()
        .map(|u| EnergyTerms::of(u, traj.model.convective))
        .collect::<Result<Vec<_>>>()?;
    let c0 = 0.5 * terms[0].p_half_sqr;
    if c0 == 0.0 {
        return Err(DiagnosticsError::ZeroData);
    }
    let gauge: Vec<f64> = traj.times.iter().map(|t| (-2.0 * lambda * t).exp()).collect();
    let psi1: Vec<f64> = terms.iter().zip(&gauge).map(|(e, g)| g * e.p_half_sqr).collect();
    let psi2: Vec<f64> = terms.iter().zip(&gauge).map(|(e, g)| g * e.psi2(lambda)).collect();
    let energy: Vec<f64> = terms.iter().zip(&gauge).map(|(e, g)| g * e.energy(lambda)).collect();
    let mut psi = Vec::with_capacity(psi1.len());
    let mut acc = c0;
    psi.push(acc);
    for i in 1..psi1.len() {
        acc += 0.5 * (traj.times[i] - traj.times[i - 1]) * (psi1[i] + psi1[i - 1]);
        psi.push(acc);
    }
    let residual = (0..psi.len())
        .map(|i| psi2[i] * psi[i] - (1.0 + CONCAVITY_ALPHA) * psi1[i] * psi1[i])
        .collect();
    Ok(PsiSeries {
        lambda,
        c0,
        times: traj.times.clone(),
        psi,
        psi1,
        psi2,
        residual,
        energy,
        linf: traj.norms.iter().map(|n| n.linf).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupCertificate {
    pub e0: f64,
    pub lambda: f64,
    pub c0: f64,
    /// `Ψ(0) / (αΨ'(0))`; vacuous when the criterion is not met.
    pub t1: f64,
    pub t1_vacuous: bool,
    /// Minimum relative concavity residual while `||u||_∞ <= 1e3`.
    pub min_relative_residual: Option<f64>,
    pub psi1_worst_drop: Option<f64>,
    pub energy_worst_drop: Option<f64>,
    pub observed_t_blow: Option<f64>,
    /// `E₀ >= 0` and `u₀ ≢ 0`.
    pub criterion_met: bool,
    pub blowup_observed: bool,
}

impl BlowupCertificate {
    /// The hypothesis held and the run blew up, or the hypothesis failed.
    pub fn consistent(&self) -> bool {
        !self.criterion_met || self.blowup_observed
    }
}

pub fn blowup_certificate(u0: &SpectralField, traj: &Trajectory) -> Result<BlowupCertificate> {
    require_cubic(&traj.model)?;
    let gauge = GaugeParams::from_half_length(traj.model.half_length);
    let lambda = gauge.lambda;
    let e0 = initial_energy_e0(u0, lambda)?;
    let psi1_0 = u0.apply_p_half()?.l2_norm_sqr();
    let c0 = 0.5 * psi1_0;
    let nonzero = u0.l2_norm() > 0.0;
    let criterion_met = nonzero && e0 >= 0.0;
    let t1 = if psi1_0 > 0.0 {
        c0 / (CONCAVITY_ALPHA * psi1_0)
    } else {
        f64::INFINITY
    };
    let series = if nonzero {
        Some(psi_series(traj, lambda)?)
    } else {
        None
    };
    let observed_t_blow = match traj.status {
        RunStatus::BlowupDetected { t_blow } => Some(t_blow),
        _ => None,
    };
    Ok(BlowupCertificate {
        e0,
        lambda,
        c0,
        t1,
        t1_vacuous: !criterion_met,
        min_relative_residual: series.as_ref().map(|s| s.min_relative_residual(RESIDUAL_LINF_CAP)),
        psi1_worst_drop: series.as_ref().map(|s| s.psi1_worst_drop(RESIDUAL_LINF_CAP)),
        energy_worst_drop: series.as_ref().map(|s| s.energy_worst_drop(RESIDUAL_LINF_CAP)),
        observed_t_blow,
        criterion_met,
        blowup_observed: observed_t_blow.is_some(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadiusNorm {
    L2,
    PHalf,
}

impl RadiusNorm {
    /// `||P^{1/2}u||` for the sixth-order model, `L²` otherwise.
    pub fn for_model(model: &ModelSpec) -> Self {
        match model.family {
            Family::Sixth { .. } => RadiusNorm::PHalf,
            _ => RadiusNorm::L2,
        }
    }

    pub fn of(&self, norms: &crate::integrate::SampleNorms) -> f64 {
        match self {
            RadiusNorm::L2 => norms.l2,
            RadiusNorm::PHalf => norms.p_half,
        }
    }
}

/// `sup` of the designated norm over all samples with `t >= t_transient`.
/// `t_transient` defaults to half the shortest run.
pub fn absorbing_radius(
    trajectories: &[Trajectory],
    t_transient: Option<f64>,
    norm: RadiusNorm,
) -> Result<f64> {
    if trajectories.is_empty() {
        return Err(DiagnosticsError::Empty);
    }
    for (index, tr) in trajectories.iter().enumerate() {
        if tr.status != RunStatus::Completed {
            return Err(DiagnosticsError::NotCompleted {
                index,
                status: tr.status,
            });
        }
    }
    let t_end = trajectories
        .iter()
        .map(|t| t.final_time())
        .fold(f64::INFINITY, f64::min);
    let cut = t_transient.unwrap_or(0.5 * t_end);
    if cut >= t_end {
        return Err(DiagnosticsError::TransientTooLong {
            t_transient: cut,
            t_end,
        });
    }
    Ok(trajectories
        .iter()
        .flat_map(|tr| {
            tr.times
                .iter()
                .zip(&tr.norms)
                .filter(move |(t, _)| **t >= cut)
                .map(move |(_, n)| norm.of(n))
        })
        .fold(0.0, f64::max))
}

/// `max(values) <= factor · min(values)` for non-negative values.
pub fn within_factor(values: &[f64], factor: f64) -> bool {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    values.is_empty() || max <= factor * min
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovReport {
    /// Consecutive sample pairs starting above the threshold.
    pub checked: usize,
    /// Pairs among those where `||P^{1/2}u||²` did not strictly decrease.
    pub violations: usize,
}

/// Checks that `||P^{1/2}u||²` strictly decreases between samples whenever it
/// exceeds `threshold` (a squared norm).
pub fn lyapunov_decrease(traj: &Trajectory, threshold: f64) -> Result<LyapunovReport> {
    if let Family::Sixth { stability, .. } = traj.model.family {
        if stability != Stability::Stable {
            return Err(DiagnosticsError::WrongFamily("sixth (unstable)"));
        }
    } else {
        return Err(DiagnosticsError::WrongFamily(traj.model.family.name()));
    }
    let values: Vec<f64> = traj.norms.iter().map(|n| n.p_half * n.p_half).collect();
    let mut report = LyapunovReport {
        checked: 0,
        violations: 0,
    };
    for w in values.windows(2) {
        if w[0] > threshold {
            report.checked += 1;
            if w[1] >= w[0] {
                report.violations += 1;
            }
        }
    }
    Ok(report)
}

/// Column order of the per-sample time-series file.
pub const CSV_HEADER: [&str; 12] = [
    "t",
    "L2",
    "Linf",
    "H1",
    "PhalfNorm",
    "Psi",
    "Psi1",
    "Psi2",
    "ConcavityResidual",
    "E",
    "R_shift",
    "s_shift",
];

/// One row of the time-series file; `None` cells are written empty.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DiagnosticRow {
    pub t: f64,
    pub l2: f64,
    pub linf: f64,
    pub h1: f64,
    pub p_half: f64,
    pub psi: Option<f64>,
    pub psi1: Option<f64>,
    pub psi2: Option<f64>,
    pub concavity_residual: Option<f64>,
    pub energy: Option<f64>,
    pub r_shift: Option<f64>,
    pub s_shift: Option<f64>,
}

impl DiagnosticRow {
    pub fn cells(&self) -> [String; 12] {
        let req = |v: f64| format!("{v:e}");
        let opt = |v: Option<f64>| v.map(|v| format!("{v:e}")).unwrap_or_default();
        [
            req(self.t),
            req(self.l2),
            req(self.linf),
            req(self.h1),
            req(self.p_half),
            opt(self.psi),
            opt(self.psi1),
            opt(self.psi2),
            opt(self.concavity_residual),
            opt(self.energy),
            opt(self.r_shift),
            opt(self.s_shift),
        ]
    }
}

/// Rows for every sample, filled from the Ψ series and shift pairs `(R, s*)`
/// when given.
pub fn diagnostic_rows(
    traj: &Trajectory,
    psi: Option<&PsiSeries>,
    shifts: Option<&[(f64, f64)]>,
) -> Vec<DiagnosticRow> {
    (0..traj.len())
        .map(|i| {
            let n = &traj.norms[i];
            DiagnosticRow {
                t: traj.times[i],
                l2: n.l2,
                linf: n.linf,
                h1: n.h1,
                p_half: n.p_half,
                psi: psi.map(|s| s.psi[i]),
                psi1: psi.map(|s| s.psi1[i]),
                psi2: psi.map(|s| s.psi2[i]),
                concavity_residual: psi.map(|s| s.residual[i]),
                energy: psi.map(|s| s.energy[i]),
                r_shift: shifts.map(|s| s[i].0),
                s_shift: shifts.map(|s| s[i].1),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrate::{integrate, SolverConfig};
    use crate::spectral::PeriodicGrid;
    use std::f64::consts::PI;

    fn closed_form_e0(a: f64, lambda: f64) -> f64 {
        -(lambda / (2.0 * PI * PI) + PI * PI / 2.0) * a * a + 3.0 / 16.0 * a.powi(4)
    }

    #[test]
    fn gauge_params_at_unit_half_length() {
        let g = GaugeParams::from_half_length(1.0);
        assert_eq!(g.d0, 1.0);
        assert_eq!(g.lambda, 3.5);
        assert!((g.d_bar0 - 1.0 / PI).abs() < 1e-16);
        assert!(GaugeParams::from_half_length(2.0 * PI).lambda > 12.0);
    }

    #[test]
    fn gauge_round_trip() {
        let grid = PeriodicGrid::new(1.0, 32).unwrap();
        let u = SpectralField::sine_mode(&grid, 2, 1.5, 0.3);
        assert_eq!(gauge_transform(&u, 3.5, 0.0), u);
        let v = gauge_transform(&u, 3.5, 1.0);
        assert!((v.l2_norm() - (-3.5_f64).exp() * u.l2_norm()).abs() < 1e-15);
        assert!((&gauge_transform(&v, 3.5, -1.0) - &u).l2_norm() < 1e-14);
    }

    #[test]
    fn e0_matches_closed_form() {
        let grid = PeriodicGrid::new(1.0, 32).unwrap();
        for a in [0.1, 1.0, 5.0, 6.0, 12.0] {
            let u = SpectralField::sine_mode(&grid, 1, a, 0.0);
            let e = initial_energy_e0(&u, 3.5).unwrap();
            let c = closed_form_e0(a, 3.5);
            assert!((e - c).abs() < 1e-12 * (1.0 + c.abs()), "{a}: {e} vs {c}");
        }
        assert_eq!(initial_energy_e0(&SpectralField::zeros(&grid), 3.5).unwrap(), 0.0);
    }

    #[test]
    fn e0_homogeneity() {
        let grid = PeriodicGrid::new(1.0, 32).unwrap();
        let mut u = SpectralField::sine_mode(&grid, 1, 1.0, 0.2);
        u.axpy(1.0, &SpectralField::sine_mode(&grid, 3, 0.7, 1.1));
        let t = EnergyTerms::of(&u, false).unwrap();
        let quad = -0.5 * 3.5 * t.p_half_sqr - 0.5 * t.grad_sqr;
        let e2 = initial_energy_e0(&u.scaled(2.0), 3.5).unwrap();
        assert!((e2 - (4.0 * quad + 16.0 * 0.25 * t.quartic)).abs() < 1e-11 * e2.abs());
    }

    #[test]
    fn e0_rejects_nonzero_mean() {
        let grid = PeriodicGrid::new(1.0, 16).unwrap();
        let u = SpectralField::from_fn(&grid, |x| 0.5 + x.cos());
        assert!(matches!(
            initial_energy_e0(&u, 3.5),
            Err(DiagnosticsError::Spectral(SpectralError::NonZeroMean { .. }))
        ));
    }

    #[test]
    fn blowup_amplitude_for_first_modes() {
        let grid = PeriodicGrid::new(1.0, 32).unwrap();
        let s1 = SpectralField::sine_mode(&grid, 1, 1.0, 0.0);
        let a1 = find_blowup_amplitude(&s1, 3.5).unwrap();
        let exact = ((3.5 / (2.0 * PI * PI) + PI * PI / 2.0) / (3.0 / 16.0)).sqrt();
        assert!((a1 - exact).abs() < 1e-6 * exact);
        assert!((a1 - 5.2215).abs() < 1e-3);
        let e = initial_energy_e0(&s1.scaled(a1), 3.5).unwrap();
        assert!((0.0..1e-6).contains(&e));
        assert!(initial_energy_e0(&s1.scaled(0.99 * a1), 3.5).unwrap() < 0.0);
        let s2 = SpectralField::sine_mode(&grid, 2, 1.0, 0.0);
        assert!(find_blowup_amplitude(&s2, 3.5).unwrap() > a1);
        assert_eq!(
            find_blowup_amplitude(&SpectralField::zeros(&grid), 3.5).unwrap_err(),
            DiagnosticsError::ZeroData
        );
    }

    fn blowup_run(amplitude: f64) -> (SpectralField, Trajectory) {
        let grid = PeriodicGrid::new(1.0, 64).unwrap();
        let model = ModelSpec::new(Family::CubicCch, 1.0).unwrap();
        let u0 = SpectralField::sine_mode(&grid, 1, amplitude, 0.0);
        let cfg = SolverConfig {
            t_end: 10.0,
            dt0: 1e-6,
            dt_min: 1e-30,
            sample_every: 0.0,
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            ..SolverConfig::default()
        };
        let traj = integrate(&model, &u0, &cfg).unwrap();
        (u0, traj)
    }

    #[test]
    fn certificate_for_supercritical_sine() {
        let (u0, traj) = blowup_run(6.0);
        let cert = blowup_certificate(&u0, &traj).unwrap();
        assert!(cert.criterion_met && cert.blowup_observed && cert.consistent());
        assert!(cert.e0 > 0.0);
        assert!((cert.t1 - 2.0).abs() < 1e-14);
        assert!(cert.min_relative_residual.unwrap() >= -1e-3, "{cert:?}");
        assert!(cert.psi1_worst_drop.unwrap() <= 1e-3);
        assert!(cert.energy_worst_drop.unwrap() <= 1e-3);
    }

    #[test]
    fn psi_series_derivatives_are_consistent() {
        let (_, traj) = blowup_run(6.0);
        let s = psi_series(&traj, 3.5).unwrap();
        assert!(s.psi.iter().all(|&p| p > 0.0));
        assert!(s.psi1.iter().all(|&p| p >= 0.0));
        for i in 1..s.times.len() - 1 {
            if s.linf[i + 1] > 50.0 {
                break;
            }
            let (h0, h1) = (s.times[i] - s.times[i - 1], s.times[i + 1] - s.times[i]);
            let d1 = (s.psi[i + 1] - s.psi[i - 1]) / (h0 + h1);
            assert!((d1 - s.psi1[i]).abs() < 1e-3 * s.psi1[i], "Ψ' at {i}");
            let fd = (s.psi1[i + 1] - s.psi1[i - 1]) / (h0 + h1);
            assert!((fd - s.psi2[i]).abs() < 2e-2 * s.psi2[i].abs() + 1e-6, "Ψ'' at {i}");
        }
    }

    #[test]
    fn psi2_matches_model_rhs() {
        let grid = PeriodicGrid::new(1.0, 64).unwrap();
        let model = ModelSpec::new(Family::CubicCch, 1.0).unwrap();
        let mut u = SpectralField::sine_mode(&grid, 1, 3.0, 0.0);
        u.axpy(1.0, &SpectralField::sine_mode(&grid, 2, 1.0, 0.7));
        let t = EnergyTerms::of(&u, true).unwrap();
        let rhs = model.rhs(&u).unwrap();
        let via_rhs = 2.0 * rhs.apply_p().unwrap().inner(&u).unwrap() - 2.0 * 3.5 * t.p_half_sqr;
        assert!((via_rhs - t.psi2(3.5)).abs() < 1e-10 * via_rhs.abs());
    }

    #[test]
    fn subcritical_data_certificate_is_vacuous() {
        let grid = PeriodicGrid::new(1.0, 32).unwrap();
        let model = ModelSpec::new(Family::CubicCch, 1.0).unwrap();
        let u0 = SpectralField::sine_mode(&grid, 1, 0.1, 0.0);
        let cfg = SolverConfig {
            t_end: 0.5,
            ..SolverConfig::default()
        };
        let traj = integrate(&model, &u0, &cfg).unwrap();
        let cert = blowup_certificate(&u0, &traj).unwrap();
        assert!(!cert.criterion_met && cert.t1_vacuous && !cert.blowup_observed);
        assert!(cert.e0 < 0.0);
    }

    #[test]
    fn zero_trajectory_psi_is_rejected() {
        let grid = PeriodicGrid::new(1.0, 16).unwrap();
        let model = ModelSpec::new(Family::CubicCch, 1.0).unwrap();
        let u0 = SpectralField::zeros(&grid);
        let cfg = SolverConfig {
            t_end: 0.1,
            ..SolverConfig::default()
        };
        let traj = integrate(&model, &u0, &cfg).unwrap();
        assert_eq!(psi_series(&traj, 3.5).unwrap_err(), DiagnosticsError::ZeroData);
        let cert = blowup_certificate(&u0, &traj).unwrap();
        assert!(!cert.criterion_met && cert.min_relative_residual.is_none());
    }

    #[test]
    fn psi_series_rejects_other_families() {
        let grid = PeriodicGrid::new(1.0, 16).unwrap();
        let model = ModelSpec::new(Family::Cch { p: 0.3 }, 1.0).unwrap();
        let cfg = SolverConfig {
            t_end: 0.01,
            ..SolverConfig::default()
        };
        let traj = integrate(&model, &SpectralField::sine_mode(&grid, 1, 1.0, 0.0), &cfg).unwrap();
        assert_eq!(psi_series(&traj, 3.5).unwrap_err(), DiagnosticsError::WrongFamily("cch"));
    }

    #[test]
    fn absorbing_radius_contract() {
        let grid = PeriodicGrid::new(1.0, 16).unwrap();
        let model = ModelSpec::new(Family::Cch { p: 0.3 }, 1.0).unwrap();
        let cfg = SolverConfig {
            t_end: 1.0,
            sample_every: 0.1,
            ..SolverConfig::default()
        };
        let traj = integrate(&model, &SpectralField::sine_mode(&grid, 1, 0.5, 0.0), &cfg).unwrap();
        let r = absorbing_radius(std::slice::from_ref(&traj), None, RadiusNorm::L2).unwrap();
        let tail = traj
            .times
            .iter()
            .zip(&traj.norms)
            .filter(|(t, _)| **t >= 0.5)
            .map(|(_, n)| n.l2)
            .fold(0.0, f64::max);
        assert_eq!(r, tail);
        assert_eq!(absorbing_radius(&[], None, RadiusNorm::L2).unwrap_err(), DiagnosticsError::Empty);
        assert!(absorbing_radius(std::slice::from_ref(&traj), Some(1.0), RadiusNorm::L2).is_err());
        let (_, blown) = blowup_run(6.0);
        assert!(matches!(
            absorbing_radius(&[traj, blown], None, RadiusNorm::L2),
            Err(DiagnosticsError::NotCompleted { index: 1, .. })
        ));
    }

    #[test]
    fn within_factor_semantics() {
        assert!(within_factor(&[0.0, 0.0], 1.5));
        assert!(within_factor(&[1.0, 1.4], 1.5));
        assert!(!within_factor(&[1.0, 1.6], 1.5));
        assert!(!within_factor(&[0.0, 1e-300], 1.5));
    }

    #[test]
    fn csv_row_leaves_missing_cells_empty() {
        let row = DiagnosticRow {
            t: 1.0,
            psi: Some(2.5),
            ..DiagnosticRow::default()
        };
        let cells = row.cells();
        assert_eq!(cells[0], "1e0");
        assert_eq!(cells[5], "2.5e0");
        assert!(cells[6].is_empty() && cells[11].is_empty());
    }
}
