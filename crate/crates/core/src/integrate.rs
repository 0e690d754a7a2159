//! Exponential time differencing (ETDRK4) for `u_t = L u + N(u)` with a
//! diagonal stiff symbol, adaptive step-doubling control and blow-up halting.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::models::{ModelError, ModelSpec};
use crate::spectral::{SpectralError, SpectralField};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegrateError {
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("self-convergence needs at least 3 step sizes, got {0}")]
    TooFewSteps(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

pub type Result<T> = std::result::Result<T, IntegrateError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub dt0: f64,
    pub dt_min: f64,
    pub t_end: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Halts with [`RunStatus::BlowupDetected`] once the nodal maximum reaches this.
    pub blowup_linf: f64,
    /// Output cadence in time units; `0` records every accepted step.
    pub sample_every: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt0: 1e-4,
            dt_min: 1e-14,
            t_end: 1.0,
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            blowup_linf: 1e8,
            sample_every: 0.01,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(IntegrateError::InvalidConfig(msg.to_string()));
        let finite = [
            self.dt0,
            self.dt_min,
            self.t_end,
            self.rel_tol,
            self.abs_tol,
            self.blowup_linf,
            self.sample_every,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return bad("all solver parameters must be finite");
        }
        if !(self.dt_min > 0.0 && self.dt_min <= self.dt0) {
            return bad("require 0 < dt_min <= dt0");
        }
        if self.t_end <= 0.0 {
            return bad("t_end must be positive");
        }
        if self.blowup_linf <= 1.0 {
            return bad("blowup_linf must exceed 1");
        }
        if self.rel_tol < 0.0 || self.abs_tol < 0.0 || self.rel_tol + self.abs_tol == 0.0 {
            return bad("tolerances must be non-negative and not both zero");
        }
        if self.sample_every < 0.0 {
            return bad("sample_every must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    BlowupDetected { t_blow: f64 },
    StepUnderflow { t: f64 },
}

impl RunStatus {
    pub fn is_blowup(&self) -> bool {
        matches!(self, RunStatus::BlowupDetected { .. })
    }
}

/// Norms recorded with every sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleNorms {
    pub l2: f64,
    pub linf: f64,
    pub h1: f64,
    pub p_half: f64,
}

impl SampleNorms {
    pub fn of(u: &SpectralField) -> Self {
        Self {
            l2: u.l2_norm(),
            linf: u.linf_nodes(),
            h1: u.h_seminorm(1),
            p_half: u.p_half_norm(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub model: ModelSpec,
    pub times: Vec<f64>,
    pub fields: Vec<SpectralField>,
    pub norms: Vec<SampleNorms>,
    pub status: RunStatus,
    /// Nodal maximum of the state that ended the run; at least `blowup_linf`
    /// when blow-up was detected.
    pub halt_linf: f64,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

impl Trajectory {
    pub fn final_state(&self) -> &SpectralField {
        self.fields.last().expect("trajectory holds the initial state")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory holds the initial state")
    }

    pub fn initial_state(&self) -> &SpectralField {
        &self.fields[0]
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

const CONTOUR_POINTS: usize = 32;

/// ETDRK4 coefficients for one step size.
#[derive(Debug, Clone)]
pub struct Etdrk4 {
    dt: f64,
    e: Vec<f64>,
    e2: Vec<f64>,
    q: Vec<f64>,
    f1: Vec<f64>,
    f2: Vec<f64>,
    f3: Vec<f64>,
}

impl Etdrk4 {
    pub fn new(symbols: &[f64], dt: f64) -> Self {
        let m = symbols.len();
        let mut s = Self {
            dt,
            e: Vec::with_capacity(m),
            e2: Vec::with_capacity(m),
            q: Vec::with_capacity(m),
            f1: Vec::with_capacity(m),
            f2: Vec::with_capacity(m),
            f3: Vec::with_capacity(m),
        };
        for &lam in symbols {
            let z = lam * dt;
            let [q, f1, f2, f3] = phi_coefficients(z);
            s.e.push(z.exp());
            s.e2.push((0.5 * z).exp());
            s.q.push(dt * q);
            s.f1.push(dt * f1);
            s.f2.push(dt * f2);
            s.f3.push(dt * f3);
        }
        s
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// One step. The nonlinearity is assumed to map zero-mean fields to
    /// zero-mean fields.
    pub fn step(
        &self,
        model: &ModelSpec,
        u: &SpectralField,
    ) -> std::result::Result<SpectralField, ModelError> {
        let nl = |v: &SpectralField| model.nonlinear_rhs_unchecked(v);
        let combine = |base: &SpectralField, decay: &[f64], terms: &[(&[f64], f64, &SpectralField)]| {
            let mut out = base.clone();
            for (k, c) in out.coeffs_mut().iter_mut().enumerate() {
                let mut acc = *c * decay[k];
                for (w, s, f) in terms {
                    acc += f.coeffs()[k] * (w[k] * s);
                }
                *c = acc;
            }
            out
        };
        let nu = nl(u)?;
        let a = combine(u, &self.e2, &[(&self.q, 1.0, &nu)]);
        let na = nl(&a)?;
        let b = combine(u, &self.e2, &[(&self.q, 1.0, &na)]);
        let nb = nl(&b)?;
        let c = combine(&a, &self.e2, &[(&self.q, 2.0, &nb), (&self.q, -1.0, &nu)]);
        let nc = nl(&c)?;
        let mut next = combine(
            u,
            &self.e,
            &[
                (&self.f1, 1.0, &nu),
                (&self.f2, 2.0, &na),
                (&self.f2, 2.0, &nb),
                (&self.f3, 1.0, &nc),
            ],
        );
        next.project_zero_mean_in_place();
        let ny = next.grid().nyquist();
        next.coeffs_mut()[ny] = Complex64::new(0.0, 0.0);
        Ok(next)
    }
}

/// `[Q, f1, f2, f3] / dt` as functions of `z = dt * lambda`:
///
/// ```text
/// Q  = (e^{z/2} - 1) / z
/// f1 = (-4 - z + e^z (4 - 3z + z^2)) / z^3
/// f2 = (2 + z + e^z (z - 2)) / z^3
/// f3 = (-4 - 3z - z^2 + e^z (4 - z)) / z^3
/// ```
///
/// Small `|z|` is handled by averaging over a unit circle around `z`, which
/// avoids the cancellation in the closed forms.
fn phi_coefficients(z: f64) -> [f64; 4] {
    if z.abs() >= 1.0 {
        let ez = z.exp();
        let z3 = z * z * z;
        return [
            ((0.5 * z).exp() - 1.0) / z,
            (-4.0 - z + ez * (4.0 - 3.0 * z + z * z)) / z3,
            (2.0 + z + ez * (z - 2.0)) / z3,
            (-4.0 - 3.0 * z - z * z + ez * (4.0 - z)) / z3,
        ];
    }
    let mut acc = [0.0; 4];
    for j in 0..CONTOUR_POINTS {
        let theta = PI * (j as f64 + 0.5) / CONTOUR_POINTS as f64;
        let r = Complex64::new(z, 0.0) + Complex64::from_polar(1.0, theta);
        let er = r.exp();
        let r3 = r * r * r;
        let vals = [
            ((r * 0.5).exp() - 1.0) / r,
            (-4.0 - r + er * (4.0 - 3.0 * r + r * r)) / r3,
            (2.0 + r + er * (r - 2.0)) / r3,
            (-4.0 - 3.0 * r - r * r + er * (4.0 - r)) / r3,
        ];
        // upper half circle; the lower half contributes the conjugates
        for (a, v) in acc.iter_mut().zip(vals) {
            *a += v.re;
        }
    }
    acc.map(|a| a / CONTOUR_POINTS as f64)
}

/// Single ETDRK4 step of size `dt` (no error control).
pub fn step_etdrk4(model: &ModelSpec, u: &SpectralField, dt: f64) -> Result<SpectralField> {
    if dt == 0.0 {
        return Ok(u.clone());
    }
    let scheme = Etdrk4::new(&model.linear_symbols(u.grid()), dt);
    Ok(scheme.step(model, u)?)
}

/// Time stored as an unevaluated sum so that steps far below `eps * t` still
/// advance the clock.
#[derive(Debug, Clone, Copy, Default)]
struct Clock {
    hi: f64,
    lo: f64,
}

impl Clock {
    fn advance(&mut self, dt: f64) {
        let s = self.hi + dt;
        let bp = s - self.hi;
        let err = (self.hi - (s - bp)) + (dt - bp);
        self.lo += err;
        let t = s + self.lo;
        self.lo -= t - s;
        self.hi = t;
    }

    fn value(&self) -> f64 {
        self.hi + self.lo
    }

    /// `target - self`, accurate even when both are close.
    fn until(&self, target: f64) -> f64 {
        (target - self.hi) - self.lo
    }
}

fn check_initial(model: &ModelSpec, u0: &SpectralField) -> Result<()> {
    let l = u0.grid().half_length();
    if l.to_bits() != model.half_length.to_bits() {
        return Err(ModelError::DomainMismatch {
            field: l,
            model: model.half_length,
        }
        .into());
    }
    u0.apply_p_half()?;
    Ok(())
}

fn error_ratio(fine: &SpectralField, coarse: &SpectralField, cfg: &SolverConfig) -> f64 {
    if !fine.is_finite() || !coarse.is_finite() {
        return f64::INFINITY;
    }
    let diff = (fine - coarse).l2_norm();
    let scale = cfg.abs_tol + cfg.rel_tol * fine.l2_norm();
    if scale == 0.0 {
        if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        diff / scale
    }
}

/// Adaptive integration from `u0` until `t_end`, blow-up or step underflow.
pub fn integrate(model: &ModelSpec, u0: &SpectralField, cfg: &SolverConfig) -> Result<Trajectory> {
    cfg.validate()?;
    check_initial(model, u0)?;
    let symbols = model.linear_symbols(u0.grid());
    let mut u = u0.zero_mean();
    let mut traj = Trajectory {
        model: *model,
        times: vec![0.0],
        norms: vec![SampleNorms::of(&u)],
        fields: vec![u.clone()],
        status: RunStatus::Completed,
        halt_linf: u.linf_nodes(),
        accepted_steps: 0,
        rejected_steps: 0,
    };
    let mut clock = Clock::default();
    let mut h = cfg.dt0;
    let mut next_sample = if cfg.sample_every > 0.0 {
        cfg.sample_every.min(cfg.t_end)
    } else {
        cfg.t_end
    };
    let mut last_recorded = true;
    let time_eps = 1e-13 * cfg.t_end;

    loop {
        let remaining = clock.until(cfg.t_end);
        if remaining <= time_eps {
            break;
        }
        let to_sample = clock.until(next_sample);
        let limit = remaining.min(if to_sample > time_eps { to_sample } else { remaining });
        let clipped = h >= limit;
        let h_try = if clipped { limit } else { h };

        let full = Etdrk4::new(&symbols, h_try);
        let half = Etdrk4::new(&symbols, 0.5 * h_try);
        let coarse = full.step(model, &u)?;
        let mid = half.step(model, &u)?;
        let fine = half.step(model, &mid)?;
        let err = error_ratio(&fine, &coarse, cfg);
        let factor = if err == 0.0 {
            2.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.1, 2.0)
        };

        if err <= 1.0 {
            clock.advance(h_try);
            traj.accepted_steps += 1;
            let linf = fine.linf_nodes();
            if !linf.is_finite() || linf >= cfg.blowup_linf {
                if !last_recorded {
                    traj.times.push(clock_before(&clock, h_try));
                    traj.norms.push(SampleNorms::of(&u));
                    traj.fields.push(u.clone());
                }
                traj.status = RunStatus::BlowupDetected { t_blow: clock.value() };
                traj.halt_linf = linf;
                return Ok(traj);
            }
            u = fine;
            last_recorded = false;
            let t = clock.value();
            let at_sample = cfg.sample_every == 0.0 || clock.until(next_sample) <= time_eps;
            let at_end = clock.until(cfg.t_end) <= time_eps;
            if at_sample || at_end {
                traj.times.push(if at_end { cfg.t_end } else { t });
                traj.norms.push(SampleNorms::of(&u));
                traj.fields.push(u.clone());
                last_recorded = true;
                if cfg.sample_every > 0.0 {
                    while clock.until(next_sample) <= time_eps {
                        next_sample = (next_sample + cfg.sample_every).min(cfg.t_end);
                        if next_sample >= cfg.t_end {
                            break;
                        }
                    }
                }
            }
            h = if clipped { h.max(h_try * factor) } else { h_try * factor };
        } else {
            traj.rejected_steps += 1;
            h = h_try * factor.min(0.9);
        }

        if h < cfg.dt_min {
            if !last_recorded {
                traj.times.push(clock.value());
                traj.norms.push(SampleNorms::of(&u));
                traj.fields.push(u.clone());
            }
            traj.status = RunStatus::StepUnderflow { t: clock.value() };
            traj.halt_linf = u.linf_nodes();
            return Ok(traj);
        }
    }
    if !last_recorded {
        traj.times.push(cfg.t_end);
        traj.norms.push(SampleNorms::of(&u));
        traj.fields.push(u.clone());
    }
    traj.halt_linf = u.linf_nodes();
    Ok(traj)
}

fn clock_before(clock: &Clock, dt: f64) -> f64 {
    let mut c = *clock;
    c.advance(-dt);
    c.value()
}

/// Fixed-step integration with `round(t / dt)` steps of equal size.
pub fn integrate_fixed(
    model: &ModelSpec,
    u0: &SpectralField,
    t: f64,
    dt: f64,
) -> Result<SpectralField> {
    check_initial(model, u0)?;
    let steps = (t / dt).round().max(1.0) as usize;
    let scheme = Etdrk4::new(&model.linear_symbols(u0.grid()), t / steps as f64);
    let mut u = u0.zero_mean();
    for _ in 0..steps {
        u = scheme.step(model, &u)?;
    }
    Ok(u)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub dts: Vec<f64>,
    /// `||u(dt_i) - u(dt_{i+1})||` for consecutive entries.
    pub differences: Vec<f64>,
    /// Observed orders from consecutive difference ratios.
    pub orders: Vec<f64>,
}

impl ConvergenceTable {
    pub fn min_order(&self) -> f64 {
        self.orders.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Richardson-style self-convergence study at `t_probe`.
pub fn self_convergence(
    model: &ModelSpec,
    u0: &SpectralField,
    t_probe: f64,
    dt_list: &[f64],
) -> Result<ConvergenceTable> {
    if dt_list.len() < 3 {
        return Err(IntegrateError::TooFewSteps(dt_list.len()));
    }
    let mut dts: Vec<f64> = dt_list.to_vec();
    dts.sort_by(|a, b| b.total_cmp(a));
    let states = dts
        .iter()
        .map(|&dt| integrate_fixed(model, u0, t_probe, dt))
        .collect::<Result<Vec<_>>>()?;
    let differences: Vec<f64> = states.windows(2).map(|w| (&w[0] - &w[1]).l2_norm()).collect();
    let orders = differences
        .windows(2)
        .zip(dts.windows(3))
        .map(|(e, d)| (e[0] / e[1]).ln() / (d[0] / d[1]).ln())
        .collect();
    Ok(ConvergenceTable {
        dts,
        differences,
        orders,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{Family, Stability};
    use crate::spectral::PeriodicGrid;

    #[test]
    fn phi_functions_are_continuous_across_the_switch() {
        for z in [-1.0 - 1e-12, 1.0 + 1e-12] {
            let a = phi_coefficients(z);
            let b = phi_coefficients(z * (1.0 - 2e-12));
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-12, "{a:?} vs {b:?}");
            }
        }
        // limits at z = 0: Q = 1/2, f1 = 1/6, f2 = 1/6, f3 = 1/6
        let c = phi_coefficients(0.0);
        for (v, e) in c.iter().zip([0.5, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0]) {
            assert!((v - e).abs() < 1e-14);
        }
        let huge = phi_coefficients(-4e15);
        assert!(huge.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn linear_flow_is_exact() {
        let l = 1.3;
        let grid = PeriodicGrid::new(l, 32).unwrap();
        let model = ModelSpec::new(Family::Kss { delta: 0.0 }, l)
            .unwrap()
            .with_convection(false);
        let u0 = SpectralField::sine_mode(&grid, 1, 1.0, 0.0);
        let dt = 0.37;
        let next = step_etdrk4(&model, &u0, dt).unwrap();
        let rate = model.linear_symbol(PI / l);
        assert!((&next - &u0.scaled((rate * dt).exp())).l2_norm() < 1e-15);
    }

    #[test]
    fn zero_step_is_identity() {
        let grid = PeriodicGrid::new(1.0, 32).unwrap();
        let model = ModelSpec::new(Family::CubicCch, 1.0).unwrap();
        let u0 = SpectralField::sine_mode(&grid, 2, 0.4, 0.1);
        assert_eq!(step_etdrk4(&model, &u0, 0.0).unwrap(), u0);
    }

    #[test]
    fn config_validation() {
        let ok = SolverConfig::default();
        assert!(ok.validate().is_ok());
        for bad in [
            SolverConfig { dt_min: 0.0, ..ok },
            SolverConfig { dt_min: 1.0, dt0: 0.5, ..ok },
            SolverConfig { t_end: 0.0, ..ok },
            SolverConfig { blowup_linf: 1.0, ..ok },
            SolverConfig { sample_every: -1.0, ..ok },
            SolverConfig { rel_tol: f64::NAN, ..ok },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
    }

    #[test]
    fn zero_data_stays_zero() {
        let grid = PeriodicGrid::new(1.0, 32).unwrap();
        let model = ModelSpec::new(Family::Cch { p: 0.3 }, 1.0).unwrap();
        let cfg = SolverConfig {
            t_end: 2.0,
            sample_every: 0.5,
            ..SolverConfig::default()
        };
        let traj = integrate(&model, &SpectralField::zeros(&grid), &cfg).unwrap();
        assert_eq!(traj.status, RunStatus::Completed);
        assert_eq!(traj.times, vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        assert!(traj.fields.iter().all(|f| f.l2_norm() == 0.0));
    }

    #[test]
    fn rejects_nonzero_mean_initial_data() {
        let grid = PeriodicGrid::new(1.0, 32).unwrap();
        let model = ModelSpec::new(Family::Cch { p: 0.3 }, 1.0).unwrap();
        let u0 = SpectralField::from_fn(&grid, |x| 1.0 + x.sin());
        assert!(integrate(&model, &u0, &SolverConfig::default()).is_err());
    }

    #[test]
    fn samples_are_increasing_and_mean_free() {
        let grid = PeriodicGrid::new(1.0, 32).unwrap();
        let model = ModelSpec::new(Family::sixth(Stability::Stable), 1.0).unwrap();
        let u0 = SpectralField::sine_mode(&grid, 1, 2.0, 0.0);
        let cfg = SolverConfig {
            t_end: 0.05,
            sample_every: 0.01,
            dt0: 1e-5,
            ..SolverConfig::default()
        };
        let traj = integrate(&model, &u0, &cfg).unwrap();
        assert_eq!(traj.status, RunStatus::Completed);
        assert!(traj.times.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(*traj.times.last().unwrap(), 0.05);
        assert!(traj.fields.iter().all(|f| f.mean() == 0.0));
    }

    #[test]
    fn deterministic() {
        let grid = PeriodicGrid::new(1.0, 32).unwrap();
        let model = ModelSpec::new(Family::Cch { p: 0.3 }, 1.0).unwrap();
        let u0 = SpectralField::sine_mode(&grid, 1, 3.0, 0.4);
        let cfg = SolverConfig {
            t_end: 0.1,
            ..SolverConfig::default()
        };
        let a = integrate(&model, &u0, &cfg).unwrap();
        let b = integrate(&model, &u0, &cfg).unwrap();
        assert_eq!(a.times, b.times);
        assert_eq!(a.fields, b.fields);
    }

    #[test]
    fn step_underflow_is_reported() {
        let grid = PeriodicGrid::new(1.0, 32).unwrap();
        let model = ModelSpec::new(Family::CubicCch, 1.0).unwrap();
        let u0 = SpectralField::sine_mode(&grid, 1, 8.0, 0.0);
        let cfg = SolverConfig {
            t_end: 1.0,
            dt0: 1e-3,
            dt_min: 1e-4,
            rel_tol: 1e-12,
            abs_tol: 1e-14,
            ..SolverConfig::default()
        };
        let traj = integrate(&model, &u0, &cfg).unwrap();
        assert!(matches!(traj.status, RunStatus::StepUnderflow { .. }), "{:?}", traj.status);
    }

    #[test]
    fn self_convergence_needs_three_steps() {
        let grid = PeriodicGrid::new(1.0, 32).unwrap();
        let model = ModelSpec::new(Family::Kss { delta: 0.1 }, 1.0).unwrap();
        let u0 = SpectralField::sine_mode(&grid, 1, 1.0, 0.0);
        assert_eq!(
            self_convergence(&model, &u0, 0.1, &[0.01]).unwrap_err(),
            IntegrateError::TooFewSteps(1)
        );
    }

    #[test]
    fn linear_only_convergence_is_roundoff() {
        let grid = PeriodicGrid::new(2.0, 32).unwrap();
        let model = ModelSpec::new(Family::Kss { delta: 0.0 }, 2.0)
            .unwrap()
            .with_convection(false);
        let mut u0 = SpectralField::sine_mode(&grid, 1, 1.0, 0.0);
        u0.axpy(1.0, &SpectralField::sine_mode(&grid, 3, 0.3, 1.0));
        let table = self_convergence(&model, &u0, 0.5, &[0.1, 0.05, 0.025]).unwrap();
        assert!(table.differences.iter().all(|&d| d < 1e-13), "{table:?}");
    }
}
