//! Fourier discretization of the periodic interval `[-L, L)`.
//!
//! A [`SpectralField`] stores the coefficients `c_k`, `k = 0..=n/2`, of a real
//! function
//!
//! ```text
//! f(x) = c_0 + 2 Re sum_{0<k<n/2} c_k exp(i kappa_k x) + Re(c_{n/2} exp(i kappa_{n/2} x)),
//! kappa_k = k pi / L,
//! ```
//!
//! so the coefficients are those of the continuous interpolant, independent of
//! the node layout. Negative wavenumbers are implied by Hermitian symmetry.
//!
//! Nonlinear terms are evaluated on zero-padded physical grids: the 3/2 grid
//! removes aliasing from quadratic products, the doubled grid from cubic ones.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

/// Smallest admissible number of collocation points.
pub const MIN_POINTS: usize = 16;

/// Relative tolerance on the mean coefficient before an operator defined only
/// on zero-mean functions refuses its input.
pub const MEAN_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("half-length must be positive and finite, got {0}")]
    InvalidHalfLength(f64),
    #[error("number of points must be even, got {0}")]
    OddSize(usize),
    #[error("number of points must be at least {MIN_POINTS}, got {0}")]
    TooSmall(usize),
    #[error("expected {expected} values, got {got}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("field has nonzero mean {mean:e}; operator is defined on zero-mean functions only")]
    NonZeroMean { mean: f64 },
    #[error("derivative order must lie in 1..=6, got {0}")]
    InvalidOrder(u32),
    #[error("norm exponent must lie in [1, inf], got {0}")]
    InvalidExponent(f64),
}

pub type Result<T> = std::result::Result<T, SpectralError>;

/// Transform length and direction (`true` for forward).
type PlanKey = (usize, bool);

struct GridInner {
    half_length: f64,
    n: usize,
    planner: Mutex<FftPlanner<f64>>,
    plans: Mutex<HashMap<PlanKey, Arc<dyn Fft<f64>>>>,
}

/// Uniform periodic grid `x_j = -L + 2Lj/n`, `j = 0..n`. Cloning is cheap and
/// FFT plans are shared between clones.
#[derive(Clone)]
pub struct PeriodicGrid {
    inner: Arc<GridInner>,
}

impl fmt::Debug for PeriodicGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PeriodicGrid")
            .field("half_length", &self.inner.half_length)
            .field("n", &self.inner.n)
            .finish()
    }
}

impl PartialEq for PeriodicGrid {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.inner.n == other.inner.n
                && self.inner.half_length.to_bits() == other.inner.half_length.to_bits())
    }
}

impl PeriodicGrid {
    pub fn new(half_length: f64, n: usize) -> Result<Self> {
        if !(half_length.is_finite() && half_length > 0.0) {
            return Err(SpectralError::InvalidHalfLength(half_length));
        }
        if !n.is_multiple_of(2) {
            return Err(SpectralError::OddSize(n));
        }
        if n < MIN_POINTS {
            return Err(SpectralError::TooSmall(n));
        }
        Ok(Self {
            inner: Arc::new(GridInner {
                half_length,
                n,
                planner: Mutex::new(FftPlanner::new()),
                plans: Mutex::new(HashMap::new()),
            }),
        })
    }

    pub fn half_length(&self) -> f64 {
        self.inner.half_length
    }

    pub fn n(&self) -> usize {
        self.inner.n
    }

    /// Period `2L`.
    pub fn length(&self) -> f64 {
        2.0 * self.inner.half_length
    }

    pub fn spacing(&self) -> f64 {
        self.length() / self.inner.n as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.n()).map(|j| -self.half_length() + h * j as f64).collect()
    }

    /// Number of stored coefficients, `n/2 + 1`.
    pub fn modes(&self) -> usize {
        self.inner.n / 2 + 1
    }

    /// Index of the Nyquist coefficient.
    pub fn nyquist(&self) -> usize {
        self.inner.n / 2
    }

    /// Angular wavenumber `k pi / L`.
    pub fn wavenumber(&self, k: usize) -> f64 {
        k as f64 * PI / self.inner.half_length
    }

    /// Same grid with twice as many points.
    pub fn refined(&self) -> Self {
        Self::new(self.half_length(), 2 * self.n()).expect("refining a valid grid")
    }

    /// Size of the 3/2 padded grid used for quadratic products.
    pub fn padded_len(&self) -> usize {
        3 * self.n() / 2
    }

    fn plan(&self, len: usize, forward: bool) -> Arc<dyn Fft<f64>> {
        let mut plans = self.inner.plans.lock().expect("plan cache poisoned");
        plans
            .entry((len, forward))
            .or_insert_with(|| {
                let mut planner = self.inner.planner.lock().expect("planner poisoned");
                if forward {
                    planner.plan_fft_forward(len)
                } else {
                    planner.plan_fft_inverse(len)
                }
            })
            .clone()
    }
}

/// Real periodic function on a [`PeriodicGrid`], stored by its Fourier
/// coefficients.
#[derive(Clone)]
pub struct SpectralField {
    grid: PeriodicGrid,
    coeffs: Vec<Complex64>,
}

impl fmt::Debug for SpectralField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralField")
            .field("grid", &self.grid)
            .field("l2", &self.l2_norm())
            .finish()
    }
}

impl PartialEq for SpectralField {
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid && self.coeffs == other.coeffs
    }
}

impl SpectralField {
    pub fn zeros(grid: &PeriodicGrid) -> Self {
        Self {
            grid: grid.clone(),
            coeffs: vec![Complex64::new(0.0, 0.0); grid.modes()],
        }
    }

    /// Builds a field from coefficients `c_0..=c_{n/2}`. The imaginary parts of
    /// `c_0` and `c_{n/2}` are discarded so that the field is real.
    pub fn from_coeffs(grid: &PeriodicGrid, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.modes() {
            return Err(SpectralError::SizeMismatch {
                expected: grid.modes(),
                got: coeffs.len(),
            });
        }
        let mut field = Self {
            grid: grid.clone(),
            coeffs,
        };
        field.coeffs[0].im = 0.0;
        let ny = grid.nyquist();
        field.coeffs[ny].im = 0.0;
        Ok(field)
    }

    /// Samples `f` at the grid nodes and transforms.
    pub fn from_fn(grid: &PeriodicGrid, f: impl Fn(f64) -> f64) -> Self {
        let samples: Vec<f64> = grid.nodes().into_iter().map(f).collect();
        Self::from_samples(grid, &samples).expect("sample count matches grid")
    }

    /// `a sin(k pi x / L + phase)`.
    pub fn sine_mode(grid: &PeriodicGrid, k: usize, amplitude: f64, phase: f64) -> Self {
        let mut field = Self::zeros(grid);
        if k < grid.nyquist() {
            // a sin(θ + φ) = Re(-i a e^{iφ} e^{iθ}); the stored coefficient is half of that.
            field.coeffs[k] = Complex64::from_polar(0.5 * amplitude, phase) * Complex64::new(0.0, -1.0);
        }
        field
    }

    /// Forward transform of nodal values.
    pub fn from_samples(grid: &PeriodicGrid, samples: &[f64]) -> Result<Self> {
        let n = grid.n();
        if samples.len() != n {
            return Err(SpectralError::SizeMismatch {
                expected: n,
                got: samples.len(),
            });
        }
        let mut buf: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        grid.plan(n, true).process(&mut buf);
        let scale = 1.0 / n as f64;
        let coeffs = (0..grid.modes())
            .map(|k| buf[k] * (sign(k) * scale))
            .collect();
        Self::from_coeffs(grid, coeffs)
    }

    /// Inverse transform to nodal values.
    pub fn to_samples(&self) -> Vec<f64> {
        let n = self.grid.n();
        let ny = self.grid.nyquist();
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for k in 0..ny {
            let v = self.coeffs[k] * sign(k);
            buf[k] = v;
            if k > 0 {
                buf[n - k] = v.conj();
            }
        }
        buf[ny] = Complex64::new(self.coeffs[ny].re * sign(ny), 0.0);
        self.grid.plan(n, false).process(&mut buf);
        buf.into_iter().map(|c| c.re).collect()
    }

    /// Values on the uniform grid of `m >= n` points spanning the same period.
    pub fn padded_samples(&self, m: usize) -> Vec<f64> {
        let ny = self.grid.nyquist();
        assert!(m >= self.grid.n(), "padded grid must not be coarser");
        let mut buf = vec![Complex64::new(0.0, 0.0); m];
        for k in 0..ny {
            let v = self.coeffs[k] * sign(k);
            buf[k] = v;
            if k > 0 {
                buf[m - k] = v.conj();
            }
        }
        let c_ny = self.coeffs[ny];
        if c_ny.re != 0.0 || c_ny.im != 0.0 {
            let half = c_ny * (0.5 * sign(ny));
            if m == self.grid.n() {
                buf[ny] += Complex64::new(c_ny.re * sign(ny), 0.0);
            } else {
                buf[ny] += half;
                buf[m - ny] += half.conj();
            }
        }
        self.grid.plan(m, false).process(&mut buf);
        buf.into_iter().map(|c| c.re).collect()
    }

    /// Transforms values on an `m`-point padded grid and truncates to the
    /// modes `|k| < n/2` of `grid`. The Nyquist coefficient is left at zero.
    pub fn from_padded_samples(grid: &PeriodicGrid, samples: &[f64]) -> Self {
        let m = samples.len();
        assert!(m >= grid.n(), "padded grid must not be coarser");
        let mut buf: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        grid.plan(m, true).process(&mut buf);
        let scale = 1.0 / m as f64;
        let mut field = Self::zeros(grid);
        for (k, (c, b)) in field.coeffs.iter_mut().zip(&buf).take(grid.nyquist()).enumerate() {
            *c = b * (sign(k) * scale);
        }
        field.coeffs[0].im = 0.0;
        field
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    /// Mean value, i.e. the `k = 0` coefficient.
    pub fn mean(&self) -> f64 {
        self.coeffs[0].re
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// Multiplies coefficient `k` by `(i kappa_k)^order`.
    pub fn derivative(&self, order: u32) -> Result<Self> {
        if !(1..=6).contains(&order) {
            return Err(SpectralError::InvalidOrder(order));
        }
        let mut out = self.clone();
        let ny = self.grid.nyquist();
        for (k, c) in out.coeffs.iter_mut().enumerate() {
            let kappa = self.grid.wavenumber(k);
            *c *= Complex64::new(0.0, kappa).powu(order);
        }
        if order % 2 == 1 {
            out.coeffs[ny] = Complex64::new(0.0, 0.0);
        } else {
            out.coeffs[ny].im = 0.0;
        }
        Ok(out)
    }

    /// Sets the mean coefficient to zero, leaving all others untouched.
    pub fn zero_mean(&self) -> Self {
        let mut out = self.clone();
        out.coeffs[0] = Complex64::new(0.0, 0.0);
        out
    }

    pub fn project_zero_mean_in_place(&mut self) {
        self.coeffs[0] = Complex64::new(0.0, 0.0);
    }

    fn check_zero_mean(&self) -> Result<()> {
        let mean = self.mean();
        let rms = self.l2_norm() / self.grid.length().sqrt();
        if mean.abs() > MEAN_TOLERANCE * (1.0 + rms) {
            return Err(SpectralError::NonZeroMean { mean });
        }
        Ok(())
    }

    fn divide_by_wavenumber_power(&self, power: i32) -> Result<Self> {
        self.check_zero_mean()?;
        let mut out = self.zero_mean();
        for k in 1..out.coeffs.len() {
            out.coeffs[k] /= self.grid.wavenumber(k).powi(power);
        }
        Ok(out)
    }

    /// Inverse of `-d^2/dx^2` on zero-mean functions.
    pub fn apply_p(&self) -> Result<Self> {
        self.divide_by_wavenumber_power(2)
    }

    /// Positive square root of [`apply_p`](Self::apply_p).
    pub fn apply_p_half(&self) -> Result<Self> {
        self.divide_by_wavenumber_power(1)
    }

    /// `||P^{1/2} f||` without the zero-mean check; the mean is ignored.
    pub fn p_half_norm(&self) -> f64 {
        self.weighted_sum(|k, c| {
            if k == 0 {
                0.0
            } else {
                c.norm_sqr() / self.grid.wavenumber(k).powi(2)
            }
        })
        .sqrt()
    }

    fn weighted_sum(&self, mut term: impl FnMut(usize, Complex64) -> f64) -> f64 {
        let ny = self.grid.nyquist();
        let mut acc = 0.0;
        for (k, &c) in self.coeffs.iter().enumerate() {
            let w = if k == 0 {
                1.0
            } else if k == ny {
                0.5
            } else {
                2.0
            };
            acc += w * term(k, c);
        }
        self.grid.length() * acc
    }

    /// `(f, g)` in `L^2(-L, L)`, exact by Parseval.
    pub fn inner(&self, other: &Self) -> Result<f64> {
        if self.grid != other.grid {
            return Err(SpectralError::GridMismatch);
        }
        Ok(self.weighted_sum(|k, c| (c * other.coeffs[k].conj()).re))
    }

    pub fn l2_norm_sqr(&self) -> f64 {
        self.weighted_sum(|_, c| c.norm_sqr())
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_sqr().sqrt()
    }

    /// `||d^m f / dx^m||`.
    pub fn h_seminorm(&self, m: u32) -> f64 {
        self.weighted_sum(|k, c| c.norm_sqr() * self.grid.wavenumber(k).powi(2 * m as i32))
            .sqrt()
    }

    /// Full Sobolev norm `(sum_{j<=m} ||d^j f||^2)^{1/2}`.
    pub fn h_norm(&self, m: u32) -> f64 {
        (0..=m).map(|j| self.h_seminorm(j).powi(2)).sum::<f64>().sqrt()
    }

    /// `L^q` norm by trapezoidal quadrature on the 3/2 padded grid.
    pub fn lq_norm(&self, q: f64) -> Result<f64> {
        if q.is_nan() || q < 1.0 {
            return Err(SpectralError::InvalidExponent(q));
        }
        let samples = self.padded_samples(self.grid.padded_len());
        if q.is_infinite() {
            return Ok(samples.iter().fold(0.0_f64, |m, v| m.max(v.abs())));
        }
        let w = self.grid.length() / samples.len() as f64;
        let sum: f64 = samples.iter().map(|v| v.abs().powf(q)).sum();
        Ok((w * sum).powf(1.0 / q))
    }

    /// Max over the collocation nodes.
    pub fn linf_nodes(&self) -> f64 {
        self.to_samples().iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// `int f^q dx` for integer `q >= 1`, exact for the band-limited field.
    pub fn power_integral(&self, q: u32) -> f64 {
        let q = q.max(1) as usize;
        let mut m = q * self.grid.nyquist() + 2;
        m += m % 2;
        let samples = self.padded_samples(m);
        let w = self.grid.length() / m as f64;
        w * samples.iter().map(|v| v.powi(q as i32)).sum::<f64>()
    }

    /// Value at an arbitrary point.
    pub fn eval_at(&self, x: f64) -> f64 {
        let ny = self.grid.nyquist();
        let mut acc = self.coeffs[0].re;
        for k in 1..=ny {
            let e = Complex64::from_polar(1.0, self.grid.wavenumber(k) * x);
            let term = (self.coeffs[k] * e).re;
            acc += if k == ny { term } else { 2.0 * term };
        }
        acc
    }

    /// Product on the 3/2 padded grid, truncated back to this grid. Exact for
    /// the retained modes.
    pub fn product(&self, other: &Self) -> Result<Self> {
        self.product_padded(other, self.grid.padded_len())
    }

    pub fn product_padded(&self, other: &Self, m: usize) -> Result<Self> {
        if self.grid != other.grid {
            return Err(SpectralError::GridMismatch);
        }
        let a = self.padded_samples(m);
        let b = other.padded_samples(m);
        let prod: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
        Ok(Self::from_padded_samples(&self.grid, &prod))
    }

    /// Applies a pointwise map on the 3/2 padded grid and truncates.
    pub fn map_pointwise(&self, f: impl Fn(f64) -> f64) -> Self {
        self.map_pointwise_padded(self.grid.padded_len(), f)
    }

    pub fn map_pointwise_padded(&self, m: usize, f: impl Fn(f64) -> f64) -> Self {
        let mapped: Vec<f64> = self.padded_samples(m).into_iter().map(f).collect();
        Self::from_padded_samples(&self.grid, &mapped)
    }

    /// `f^3` projected onto the retained modes without aliasing (doubled grid).
    pub fn cube(&self) -> Self {
        self.map_pointwise_padded(2 * self.grid.n(), |v| v * v * v)
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.scale_in_place(s);
        out
    }

    pub fn scale_in_place(&mut self, s: f64) {
        for c in &mut self.coeffs {
            *c *= s;
        }
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: f64, other: &Self) {
        assert!(self.grid == other.grid, "axpy across grids");
        for (c, o) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *c += o * a;
        }
    }

    /// `max_k |c_k - d_k|`.
    pub fn max_coeff_diff(&self, other: &Self) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Re-expresses the field on another grid with the same half-length,
    /// truncating or zero-extending the spectrum.
    pub fn resample(&self, grid: &PeriodicGrid) -> Result<Self> {
        if grid.half_length().to_bits() != self.grid.half_length().to_bits() {
            return Err(SpectralError::GridMismatch);
        }
        let mut out = Self::zeros(grid);
        let keep = self.grid.nyquist().min(grid.nyquist());
        for k in 0..keep {
            out.coeffs[k] = self.coeffs[k];
        }
        Ok(out)
    }
}

impl Add<&SpectralField> for &SpectralField {
    type Output = SpectralField;
    fn add(self, rhs: &SpectralField) -> SpectralField {
        let mut out = self.clone();
        out.axpy(1.0, rhs);
        out
    }
}

impl Sub<&SpectralField> for &SpectralField {
    type Output = SpectralField;
    fn sub(self, rhs: &SpectralField) -> SpectralField {
        let mut out = self.clone();
        out.axpy(-1.0, rhs);
        out
    }
}

impl Mul<f64> for &SpectralField {
    type Output = SpectralField;
    fn mul(self, s: f64) -> SpectralField {
        self.scaled(s)
    }
}

impl Neg for &SpectralField {
    type Output = SpectralField;
    fn neg(self) -> SpectralField {
        self.scaled(-1.0)
    }
}

#[inline]
fn sign(k: usize) -> f64 {
    if k.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}
