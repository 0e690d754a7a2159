//! Right-hand sides of the supported equations, split into a diagonal stiff
//! part (the linear symbol) and a nonlinear remainder.
//!
//! | family | equation |
//! |---|---|
//! | `Cch { p }` | `u_t + (u_xx + u|u|^p)_xx + u u_x = 0` |
//! | `CubicCch` | `u_t + (u_xx + u^3)_xx + u u_x = 0` |
//! | `Kss { delta }` | `u_t + u_xxxx + (2u - delta u^3)_xx + u u_x = 0` |
//! | `Sixth { Stable, p }` | `u_t - (u_xx + u - u|u|^p)_xxxx + u u_x = 0` |
//! | `Sixth { Unstable, p }` | `u_t - (u_xx + u + u|u|^p)_xxxx + u u_x = 0` |
//!
//! The convective term is evaluated in conservative form `(u^2/2)_x`, so every
//! right-hand side is an exact derivative and preserves the mean.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spectral::{PeriodicGrid, SpectralError, SpectralField};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("exponent p must be finite and >= 0, got {0}")]
    NegativeExponent(f64),
    #[error("exponent p = {0} is outside the weak-solution range 0 <= p < 4")]
    ExponentOutOfRange(f64),
    #[error("delta must be finite and >= 0, got {0}")]
    NegativeDelta(f64),
    #[error("half-length must be positive and finite, got {0}")]
    InvalidHalfLength(f64),
    #[error("field grid half-length {field} does not match model half-length {model}")]
    DomainMismatch { field: f64, model: f64 },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    /// Potential `u - u|u|^p` (dissipative).
    Stable,
    /// Potential `u + u|u|^p` (concave).
    Unstable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    Cch { p: f64 },
    CubicCch,
    Kss { delta: f64 },
    Sixth { stability: Stability, p: f64 },
}

impl Family {
    /// Sixth-order model with its default cubic potential.
    pub fn sixth(stability: Stability) -> Self {
        Family::Sixth { stability, p: 2.0 }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Family::Cch { .. } => "cch",
            Family::CubicCch => "cubic_cch",
            Family::Kss { .. } => "kss",
            Family::Sixth { .. } => "sixth",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: Family,
    pub half_length: f64,
    pub convective: bool,
}

impl ModelSpec {
    pub fn new(family: Family, half_length: f64) -> Result<Self, ModelError> {
        if !(half_length.is_finite() && half_length > 0.0) {
            return Err(ModelError::InvalidHalfLength(half_length));
        }
        match family {
            Family::Cch { p } => {
                if !(p.is_finite() && p >= 0.0) {
                    return Err(ModelError::NegativeExponent(p));
                }
                if p >= 4.0 {
                    return Err(ModelError::ExponentOutOfRange(p));
                }
            }
            Family::Sixth { p, .. } => {
                if !(p.is_finite() && p >= 0.0) {
                    return Err(ModelError::NegativeExponent(p));
                }
            }
            Family::Kss { delta } => {
                if !(delta.is_finite() && delta >= 0.0) {
                    return Err(ModelError::NegativeDelta(delta));
                }
            }
            Family::CubicCch => {}
        }
        Ok(Self {
            family,
            half_length,
            convective: true,
        })
    }

    pub fn with_convection(mut self, on: bool) -> Self {
        self.convective = on;
        self
    }

    pub fn grid(&self, n: usize) -> Result<PeriodicGrid, ModelError> {
        Ok(PeriodicGrid::new(self.half_length, n)?)
    }

    /// Symbol of the constant-coefficient part at angular wavenumber `kappa`.
    pub fn linear_symbol(&self, kappa: f64) -> f64 {
        let k2 = kappa * kappa;
        match self.family {
            Family::Cch { .. } | Family::CubicCch => -k2 * k2,
            Family::Kss { .. } => -k2 * k2 + 2.0 * k2,
            Family::Sixth { .. } => -k2 * k2 * k2 + k2 * k2,
        }
    }

    /// Symbol evaluated on every stored mode of `grid`.
    pub fn linear_symbols(&self, grid: &PeriodicGrid) -> Vec<f64> {
        (0..grid.modes())
            .map(|k| self.linear_symbol(grid.wavenumber(k)))
            .collect()
    }

    /// The potential nonlinearity `u|u|^p` (or `u^3`) on the retained modes.
    pub fn potential_term(&self, u: &SpectralField) -> SpectralField {
        let p = match self.family {
            Family::Cch { p } | Family::Sixth { p, .. } => p,
            Family::CubicCch | Family::Kss { .. } => 2.0,
        };
        if p == 2.0 {
            u.cube()
        } else if p == 0.0 {
            u.clone()
        } else if p == 1.0 {
            u.map_pointwise(|v| v * v.abs())
        } else {
            u.map_pointwise(move |v| v * v.abs().powf(p))
        }
    }

    /// `(u^2 / 2)_x`, identical to `u u_x` on the retained modes.
    pub fn convective_term(&self, u: &SpectralField) -> Result<SpectralField, ModelError> {
        let half_sq = u.product(u)?.scaled(0.5);
        Ok(half_sq.derivative(1)?)
    }

    fn check_input(&self, u: &SpectralField) -> Result<(), ModelError> {
        let l = u.grid().half_length();
        if l.to_bits() != self.half_length.to_bits() {
            return Err(ModelError::DomainMismatch {
                field: l,
                model: self.half_length,
            });
        }
        // P is not involved here, but the equations are posed on zero-mean data.
        u.apply_p_half()?;
        Ok(())
    }

    /// Nonlinear part of `u_t`. The model is autonomous, so no time argument.
    pub fn nonlinear_rhs(&self, u: &SpectralField) -> Result<SpectralField, ModelError> {
        self.check_input(u)?;
        self.nonlinear_rhs_unchecked(u)
    }

    pub(crate) fn nonlinear_rhs_unchecked(
        &self,
        u: &SpectralField,
    ) -> Result<SpectralField, ModelError> {
        let mut out = match self.family {
            Family::Cch { .. } | Family::CubicCch => {
                self.potential_term(u).derivative(2)?.scaled(-1.0)
            }
            Family::Kss { delta } => {
                if delta == 0.0 {
                    SpectralField::zeros(u.grid())
                } else {
                    u.cube().derivative(2)?.scaled(delta)
                }
            }
            Family::Sixth { stability, .. } => {
                let s = match stability {
                    Stability::Stable => -1.0,
                    Stability::Unstable => 1.0,
                };
                self.potential_term(u).derivative(4)?.scaled(s)
            }
        };
        if self.convective {
            out.axpy(-1.0, &self.convective_term(u)?);
        }
        out.project_zero_mean_in_place();
        Ok(out)
    }

    /// Linear plus nonlinear part: the full `u_t`.
    pub fn rhs(&self, u: &SpectralField) -> Result<SpectralField, ModelError> {
        let mut out = self.nonlinear_rhs(u)?;
        for (k, c) in out.coeffs_mut().iter_mut().enumerate() {
            let sym = self.linear_symbol(u.grid().wavenumber(k));
            *c += u.coeffs()[k] * sym;
        }
        Ok(out)
    }

    /// Distance between `P du_dt` and the equation rewritten with the inverse
    /// Laplacian applied, e.g. for the Cahn-Hilliard family
    /// `P u_t = u_xx - P(u u_x) + g(u) - <g(u)>`.
    ///
    /// The rewritten form is assembled independently of [`rhs`](Self::rhs):
    /// the convective term is taken in the non-conservative form `u * u_x` and
    /// no linear symbol is used.
    pub fn p_form_residual(
        &self,
        u: &SpectralField,
        du_dt: &SpectralField,
    ) -> Result<f64, ModelError> {
        self.check_input(u)?;
        let p_dudt = du_dt.apply_p()?;
        let uxx = u.derivative(2)?;
        let mut expected = match self.family {
            Family::Cch { .. } | Family::CubicCch => {
                let mut e = uxx;
                e.axpy(1.0, &self.potential_term(u).zero_mean());
                e
            }
            Family::Kss { delta } => {
                let mut e = uxx;
                e.axpy(2.0, u);
                if delta != 0.0 {
                    e.axpy(-delta, &u.cube().zero_mean());
                }
                e
            }
            Family::Sixth { stability, .. } => {
                let s = match stability {
                    Stability::Stable => -1.0,
                    Stability::Unstable => 1.0,
                };
                let mut inner = u.derivative(2)?;
                inner.axpy(1.0, u);
                inner.axpy(s, &self.potential_term(u));
                inner.derivative(2)?.scaled(-1.0)
            }
        };
        if self.convective {
            let u_ux = u.product(&u.derivative(1)?)?;
            expected.axpy(-1.0, &u_ux.apply_p()?);
        }
        Ok((&p_dudt - &expected).l2_norm())
    }
}
