//! The auxiliary profile φ_N with a certified spectral gap, and the shift
//! machinery comparing a field against the circle of translates
//! `φ_s(x) = φ(x + s)`.
//!
//! Candidate profiles have derivative `-a` away from the origin and a
//! Gaussian spike of mass `2aL` at the origin, with `a = θN` and width
//! `σ = ω N^{-1/3}`. A candidate is only accepted after the smallest
//! eigenvalue of `‖u_xx‖² - ∫φ_x u²` on `{u(0) = 0}` has been computed.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::integrate::Trajectory;
use crate::models::Family;
use crate::oracles::{cch_gronwall_exponents_f64, gronwall_condition, fornberg_weights};
use crate::spectral::{PeriodicGrid, SpectralError, SpectralField};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GoodmanError {
    #[error("target gap {target} is below the minimum {min}")]
    TargetTooSmall { target: f64, min: f64 },
    #[error("no candidate reached gap {target}; best {best} at amplitude factor {theta}")]
    CertificationFailed { target: f64, best: f64, theta: f64 },
    #[error("field and profile live on different grids")]
    GridMismatch,
    #[error("dissipation residual needs a CCH trajectory with p < 4/9, got {0}")]
    NotDissipative(String),
    #[error("bad construction options: {0}")]
    BadOptions(String),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

pub type Result<T> = std::result::Result<T, GoodmanError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoodmanOptions {
    pub min_target: f64,
    /// First amplitude factor θ in `a = θN`.
    pub theta_start: f64,
    pub theta_step: f64,
    pub theta_cap: f64,
    /// ω in `σ = ω N^{-1/3}`.
    pub width: f64,
}

impl Default for GoodmanOptions {
    fn default() -> Self {
        Self {
            min_target: 50.0,
            theta_start: 1.05,
            theta_step: 0.1,
            theta_cap: 3.0,
            width: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoodmanFunction {
    pub phi: SpectralField,
    pub target_gap: f64,
    pub certified_gap: f64,
    /// Amplitude factor that achieved certification.
    pub theta: f64,
    pub h2_norm: f64,
    pub linf_norm: f64,
}

impl GoodmanFunction {
    /// Smallest `C` with `‖φ‖_∞ <= CN` and `‖φ‖_{H²} <= CN^{3/2}`.
    pub fn scaling_constant(&self) -> f64 {
        (self.linf_norm / self.target_gap).max(self.h2_norm / self.target_gap.powf(1.5))
    }
}

/// Coefficients of the candidate `φ'` (zero mean, Nyquist dropped).
fn candidate_derivative(grid: &PeriodicGrid, target: f64, theta: f64, width: f64) -> SpectralField {
    let a = theta * target;
    let sigma = width * target.powf(-1.0 / 3.0);
    let mut coeffs = vec![Complex64::new(0.0, 0.0); grid.modes()];
    for (k, c) in coeffs.iter_mut().enumerate().take(grid.nyquist()).skip(1) {
        let kap = grid.wavenumber(k);
        *c = Complex64::new(a * (-0.5 * kap * kap * sigma * sigma).exp(), 0.0);
    }
    SpectralField::from_coeffs(grid, coeffs).expect("length matches the grid")
}

/// Antiderivative with zero mean.
fn integrate_zero_mean(dphi: &SpectralField) -> SpectralField {
    let grid = dphi.grid().clone();
    let mut coeffs = dphi.coeffs().to_vec();
    coeffs[0] = Complex64::new(0.0, 0.0);
    let ny = grid.nyquist();
    for (k, c) in coeffs.iter_mut().enumerate().skip(1) {
        *c = if k == ny {
            Complex64::new(0.0, 0.0)
        } else {
            *c / Complex64::new(0.0, grid.wavenumber(k))
        };
    }
    SpectralField::from_coeffs(&grid, coeffs).expect("length matches the grid")
}

fn profile_norms(phi: &SpectralField) -> (f64, f64) {
    (phi.h_norm(2), phi.lq_norm(f64::INFINITY).expect("valid exponent"))
}

/// Builds and certifies `φ_N` on `grid`, raising θ until the certified gap
/// reaches `target`.
pub fn construct_phi(target: f64, grid: &PeriodicGrid) -> Result<GoodmanFunction> {
    construct_phi_with(target, grid, &GoodmanOptions::default())
}

pub fn construct_phi_with(
    target: f64,
    grid: &PeriodicGrid,
    opts: &GoodmanOptions,
) -> Result<GoodmanFunction> {
    if !(opts.theta_start > 0.0 && opts.theta_step > 0.0 && opts.width > 0.0) {
        return Err(GoodmanError::BadOptions(
            "theta_start, theta_step and width must be positive".into(),
        ));
    }
    if !(target.is_finite() && target >= opts.min_target) {
        return Err(GoodmanError::TargetTooSmall {
            target,
            min: opts.min_target,
        });
    }
    let mut best = f64::NEG_INFINITY;
    let mut theta = opts.theta_start;
    let mut last_theta = theta;
    while theta <= opts.theta_cap + 1e-12 {
        let phi = integrate_zero_mean(&candidate_derivative(grid, target, theta, opts.width));
        let gap = verify_spectral_gap(&phi)?;
        if gap >= target {
            let (h2_norm, linf_norm) = profile_norms(&phi);
            return Ok(GoodmanFunction {
                phi,
                target_gap: target,
                certified_gap: gap,
                theta,
                h2_norm,
                linf_norm,
            });
        }
        best = best.max(gap);
        last_theta = theta;
        theta += opts.theta_step;
    }
    Err(GoodmanError::CertificationFailed {
        target,
        best,
        theta: last_theta,
    })
}

/// Matrix of `A(u) = ‖u_xx‖² - ∫φ_x u²` in the orthonormal basis
/// `{1/√(2L), cos(κ_k x)/√L, sin(κ_k x)/√L}`, `k = 1..n/2-1`.
fn gap_matrix(phi: &SpectralField) -> Result<DMatrix<f64>> {
    let grid = phi.grid();
    let l = grid.half_length();
    let kmax = grid.nyquist() - 1;
    let dim = 1 + 2 * kmax;
    let w = phi.zero_mean().derivative(1)?;
    let wc = w.coeffs();
    // C(q) = ∫φ' cos(κ_q x), S(q) = ∫φ' sin(κ_q x) for q of either sign.
    let coeff = |q: usize| if q < wc.len() { wc[q] } else { Complex64::new(0.0, 0.0) };
    let cos_int = |q: i64| 2.0 * l * coeff(q.unsigned_abs() as usize).re;
    let sin_int = |q: i64| {
        let v = -2.0 * l * coeff(q.unsigned_abs() as usize).im;
        if q < 0 {
            -v
        } else {
            v
        }
    };
    let cos_idx = |k: usize| 2 * k - 1;
    let sin_idx = |k: usize| 2 * k;
    let mut a = DMatrix::<f64>::zeros(dim, dim);
    let e0 = 1.0 / (2.0 * l).sqrt();
    let ek = 1.0 / l.sqrt();
    a[(0, 0)] = -e0 * e0 * cos_int(0);
    for k in 1..=kmax {
        let ki = k as i64;
        let v = -e0 * ek * cos_int(ki);
        a[(0, cos_idx(k))] = v;
        a[(cos_idx(k), 0)] = v;
        let v = -e0 * ek * sin_int(ki);
        a[(0, sin_idx(k))] = v;
        a[(sin_idx(k), 0)] = v;
    }
    for j in 1..=kmax {
        let ji = j as i64;
        for k in 1..=kmax {
            let ki = k as i64;
            let cc = 0.5 * (cos_int(ji - ki) + cos_int(ji + ki)) / l;
            let ss = 0.5 * (cos_int(ji - ki) - cos_int(ji + ki)) / l;
            let cs = 0.5 * (sin_int(ki + ji) + sin_int(ki - ji)) / l;
            a[(cos_idx(j), cos_idx(k))] = -cc;
            a[(sin_idx(j), sin_idx(k))] = -ss;
            a[(cos_idx(j), sin_idx(k))] = -cs;
            a[(sin_idx(k), cos_idx(j))] = -cs;
        }
        let k4 = grid.wavenumber(j).powi(4);
        a[(cos_idx(j), cos_idx(j))] += k4;
        a[(sin_idx(j), sin_idx(j))] += k4;
    }
    Ok(a)
}

fn pin_vector(grid: &PeriodicGrid, x0: f64) -> DVector<f64> {
    let l = grid.half_length();
    let kmax = grid.nyquist() - 1;
    let mut c = DVector::<f64>::zeros(1 + 2 * kmax);
    c[0] = 1.0 / (2.0 * l).sqrt();
    for k in 1..=kmax {
        let arg = grid.wavenumber(k) * x0;
        c[2 * k - 1] = arg.cos() / l.sqrt();
        c[2 * k] = arg.sin() / l.sqrt();
    }
    c
}

/// Restricts the symmetric `a` to the orthogonal complement of `c` with a
/// Householder reflection whose first column is parallel to `c`.
fn restrict(a: &DMatrix<f64>, c: &DVector<f64>) -> DMatrix<f64> {
    let mut v = c.clone();
    let sign = if c[0] >= 0.0 { 1.0 } else { -1.0 };
    v[0] += sign * c.norm();
    v /= v.norm();
    let y = a * &v;
    let beta = v.dot(&y);
    let mut b = a.clone();
    b -= 2.0 * (&v * y.transpose() + &y * v.transpose());
    b += 4.0 * beta * (&v * v.transpose());
    let n = b.nrows();
    b.view((1, 1), (n - 1, n - 1)).into_owned()
}

fn min_eigenvalue(m: DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m).eigenvalues.min()
}

/// Minimum of `(‖u_xx‖² - ∫φ_x u²)/‖u‖²` over band-limited `u` with
/// `u(x0) = 0`.
pub fn spectral_gap_pinned_at(phi: &SpectralField, x0: f64) -> Result<f64> {
    phi.apply_p_half()?;
    let a = gap_matrix(phi)?;
    Ok(min_eigenvalue(restrict(&a, &pin_vector(phi.grid(), x0))))
}

/// Certified gap on `{u(0) = 0}`.
pub fn verify_spectral_gap(phi: &SpectralField) -> Result<f64> {
    spectral_gap_pinned_at(phi, 0.0)
}

/// Same quotient without the pinning constraint (constants included).
pub fn spectral_gap_unconstrained(phi: &SpectralField) -> Result<f64> {
    phi.apply_p_half()?;
    Ok(min_eigenvalue(gap_matrix(phi)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftDiagnostics {
    /// `min_s ‖u - φ_s‖²`.
    pub r: f64,
    /// Minimizing shift in `[-L, L)`.
    pub s_star: f64,
    /// Value of `u` at the pinning point of `φ_{s*}`, `x = -s*`.
    pub c: f64,
    /// `(u, ∂xφ_{s*})`.
    pub orthogonality_residual: f64,
    /// Residual over `‖u‖ ‖∂xφ‖`.
    pub orthogonality_relative: f64,
    /// Smaller relative residual at the two grid shifts adjacent to `s*`.
    pub neighbor_relative: f64,
    /// `‖u - c‖²`, equal to `‖u‖² + 2Lc²` for zero-mean `u`.
    pub w_norm_sqr: f64,
    pub r_lower: f64,
    pub r_upper: f64,
}

impl ShiftDiagnostics {
    pub fn within_bounds(&self) -> bool {
        let slack = 1e-12 * self.r_upper.abs().max(1.0);
        self.r >= self.r_lower - slack && self.r <= self.r_upper + slack
    }
}

/// `φ_s` as a field.
pub fn shifted(phi: &SpectralField, s: f64) -> SpectralField {
    let grid = phi.grid().clone();
    let coeffs = phi
        .coeffs()
        .iter()
        .enumerate()
        .map(|(k, c)| c * Complex64::from_polar(1.0, grid.wavenumber(k) * s))
        .collect();
    SpectralField::from_coeffs(&grid, coeffs).expect("length matches the grid")
}

/// `s ↦ (u, φ_s)` as a field in `s`.
fn correlation(u: &SpectralField, phi: &SpectralField) -> SpectralField {
    let grid = u.grid().clone();
    let l = grid.half_length();
    let ny = grid.nyquist();
    let coeffs = u
        .coeffs()
        .iter()
        .zip(phi.coeffs())
        .enumerate()
        .map(|(k, (a, b))| {
            let w = if k == ny { l } else { 2.0 * l };
            a.conj() * b * w
        })
        .collect();
    SpectralField::from_coeffs(&grid, coeffs).expect("length matches the grid")
}

fn wrap(s: f64, l: f64) -> f64 {
    let p = 2.0 * l;
    let r = (s + l).rem_euclid(p) - l;
    if r >= l {
        r - p
    } else {
        r
    }
}

/// Minimizes `‖u - φ_s‖²` over `s`: correlation on all grid shifts, a
/// three-point quadratic seed, then Newton steps on the derivative of the
/// correlation kept inside the seed cell.
pub fn shift_distance(u: &SpectralField, phi: &SpectralField) -> Result<ShiftDiagnostics> {
    if u.grid() != phi.grid() {
        return Err(GoodmanError::GridMismatch);
    }
    let grid = u.grid();
    let l = grid.half_length();
    let h = grid.spacing();
    let corr = correlation(u, phi);
    let d1 = corr.derivative(1)?;
    let d2 = corr.derivative(2)?;
    let samples = corr.to_samples();
    let nodes = grid.nodes();
    let n = samples.len();
    let j = (0..n)
        .max_by(|&a, &b| samples[a].total_cmp(&samples[b]))
        .expect("grid is non-empty");
    let (fm, f0, fp) = (samples[(j + n - 1) % n], samples[j], samples[(j + 1) % n]);
    let denom = fm - 2.0 * f0 + fp;
    let offset = if denom < 0.0 {
        (0.5 * (fm - fp) / denom).clamp(-1.0, 1.0)
    } else {
        0.0
    };
    let centre = nodes[j];
    let mut s = centre + offset * h;
    for _ in 0..50 {
        let g1 = d1.eval_at(s);
        let g2 = d2.eval_at(s);
        if g2.is_nan() || g2 >= 0.0 {
            break;
        }
        let next = (s - g1 / g2).clamp(centre - h, centre + h);
        let done = (next - s).abs() <= 1e-15 * l;
        s = next;
        if done {
            break;
        }
    }
    let s_star = wrap(s, l);

    let phi_s = shifted(phi, s_star);
    let r = (u - &phi_s).l2_norm_sqr();
    let dphi_norm = phi.h_seminorm(1);
    let u_norm = u.l2_norm();
    let scale = u_norm * dphi_norm;
    let rel = |v: f64| if scale == 0.0 { 0.0 } else { v.abs() / scale };
    let residual = d1.eval_at(s_star);
    let neighbor_relative = rel(d1.eval_at(nodes[(j + n - 1) % n])).min(rel(d1.eval_at(nodes[(j + 1) % n])));
    let c = u.eval_at(-s_star);
    let mut w = u.clone();
    w.coeffs_mut()[0] -= Complex64::new(c, 0.0);
    let phi_norm = phi.l2_norm();
    Ok(ShiftDiagnostics {
        r,
        s_star,
        c,
        orthogonality_residual: residual,
        orthogonality_relative: rel(residual),
        neighbor_relative,
        w_norm_sqr: w.l2_norm_sqr(),
        r_lower: u_norm * u_norm - 2.0 * u_norm * phi_norm,
        r_upper: u_norm * u_norm + phi_norm * phi_norm,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DissipationReport {
    pub times: Vec<f64>,
    pub r: Vec<f64>,
    /// `dR/dt + N‖u‖²`
    pub lhs: Vec<f64>,
    /// `‖u‖^{2β} + N³` with `β = (3p+4)/(4-p)`
    pub rhs_base: Vec<f64>,
    /// Smallest `C >= 0` with `lhs <= C · rhs_base` at every sample.
    pub c_fit: f64,
    /// `C · rhs_base - lhs`
    pub margin: Vec<f64>,
}

/// Evaluates both sides of `dR/dt + N‖u‖² <= C(‖u‖^{2β} + N³)` along the
/// samples and fits `C`.
pub fn goodman_dissipation_residual(traj: &Trajectory, gf: &GoodmanFunction) -> Result<DissipationReport> {
    let p = match traj.model.family {
        Family::Cch { p } => p,
        f => return Err(GoodmanError::NotDissipative(f.name().to_string())),
    };
    let admissible = cch_gronwall_exponents_f64(p)
        .ok()
        .and_then(|e| gronwall_condition(&e).ok())
        .unwrap_or(false);
    if !admissible {
        return Err(GoodmanError::NotDissipative(format!("cch with p = {p}")));
    }
    let beta = (3.0 * p + 4.0) / (4.0 - p);
    let n_gap = gf.target_gap;
    let r = traj
        .fields
        .iter()
        .map(|u| shift_distance(u, &gf.phi).map(|d| d.r))
        .collect::<Result<Vec<_>>>()?;
    let t = &traj.times;
    let m = t.len();
    let dr: Vec<f64> = (0..m)
        .map(|i| {
            if m < 2 {
                return 0.0;
            }
            let range = if i == 0 {
                0..m.min(3)
            } else if i == m - 1 {
                m.saturating_sub(3)..m
            } else {
                i - 1..i + 2
            };
            let w = fornberg_weights(t[i], &t[range.clone()], 1);
            w[1].iter().zip(&r[range]).map(|(a, b)| a * b).sum()
        })
        .collect();
    let u2: Vec<f64> = traj.norms.iter().map(|nm| nm.l2 * nm.l2).collect();
    let lhs: Vec<f64> = dr.iter().zip(&u2).map(|(d, u)| d + n_gap * u).collect();
    let rhs_base: Vec<f64> = u2.iter().map(|u| u.powf(beta) + n_gap.powi(3)).collect();
    let c_fit = lhs
        .iter()
        .zip(&rhs_base)
        .map(|(a, b)| a / b)
        .fold(0.0_f64, f64::max);
    let margin = lhs.iter().zip(&rhs_base).map(|(a, b)| c_fit * b - a).collect();
    Ok(DissipationReport {
        times: t.clone(),
        r,
        lhs,
        rhs_base,
        c_fit,
        margin,
    })
}
