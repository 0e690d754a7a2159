//! Scalar checkers for the concavity (Levine) lemma and the Gronwall lemma
//! with a free parameter ε, usable on synthetic series or PDE output.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("sample times must be finite and strictly increasing")]
    NonIncreasingTimes,
    #[error("series lengths differ: {0} times vs {1} values")]
    LengthMismatch(usize, usize),
    #[error("non-finite value in series")]
    NonFinite,
    #[error("exponents violate alpha > beta >= 1, gamma >= 0: ({alpha}, {beta}, {gamma})")]
    BadExponents { alpha: f64, beta: f64, gamma: f64 },
    #[error("invalid Gronwall constants: {0}")]
    BadConstants(String),
    #[error("exponent p = {0} is outside 0 <= p < 4")]
    ExponentOutOfRange(String),
    #[error("epsilon {eps} outside (0, {eps0})")]
    EpsilonOutOfRange { eps: f64, eps0: f64 },
    #[error("exponents are inadmissible: (beta-1)/(alpha-1) >= 1/(gamma+1)")]
    Inadmissible,
    #[error("initial value must be positive and finite, got {0}")]
    BadInitialValue(f64),
}

pub type Result<T> = std::result::Result<T, OracleError>;

/// Relative tolerance of the concavity and monotonicity checks.
pub const LEVINE_REL_TOL: f64 = 1e-3;

const LEVINE_MIN_SAMPLES: usize = 8;
const ONE_SIDED_POINTS: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevineReport {
    pub psi0: f64,
    pub psi1_0: f64,
    /// `Ψ(0)/(αΨ'(0))`; infinite when `Ψ'(0) <= 0`.
    pub t1: f64,
    /// Minimum of `(Ψ''Ψ - (1+α)Ψ'²)/(|Ψ''Ψ| + Ψ'²)` over interior samples.
    pub min_relative_residual: f64,
    pub concavity_ok: bool,
    /// `Ψ(0) > 0`, `Ψ'(0) > 0` and the concavity inequality.
    pub hypothesis_ok: bool,
    /// Ψ' non-decreasing within tolerance.
    pub monotone_ok: bool,
}

/// Finite-difference weights for derivatives `0..=order` at `z` from nodes
/// `x` (Fornberg's recursion). Returns `w[d][j]`.
pub fn fornberg_weights(z: f64, x: &[f64], order: usize) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut c = vec![vec![0.0; n]; order + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    for i in 1..n {
        let mn = i.min(order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

fn check_series(times: &[f64], values: &[f64], need: usize) -> Result<()> {
    if times.len() != values.len() {
        return Err(OracleError::LengthMismatch(times.len(), values.len()));
    }
    if times.len() < need {
        return Err(OracleError::TooFewSamples {
            need,
            got: times.len(),
        });
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(OracleError::NonFinite);
    }
    if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(OracleError::NonIncreasingTimes);
    }
    Ok(())
}

/// Checks `Ψ''Ψ - (1+α)Ψ'² >= 0` on a sampled series and reports the bound
/// `T₁ = Ψ(0)/(αΨ'(0))` on the blow-up time.
///
/// `Ψ'(0)` uses a one-sided high-order stencil; interior derivatives use
/// centred second-order differences and the endpoints are excluded from the
/// concavity check.
pub fn levine_check(times: &[f64], psi: &[f64], alpha: f64) -> Result<LevineReport> {
    check_series(times, psi, LEVINE_MIN_SAMPLES)?;
    let m = ONE_SIDED_POINTS.min(times.len());
    let w = fornberg_weights(times[0], &times[..m], 1);
    let psi1_0: f64 = w[1].iter().zip(psi).map(|(a, b)| a * b).sum();
    let psi0 = psi[0];
    let t1 = if psi1_0 > 0.0 {
        psi0 / (alpha * psi1_0)
    } else {
        f64::INFINITY
    };

    let mut min_rel = f64::INFINITY;
    let mut d1 = Vec::with_capacity(times.len() - 2);
    for i in 1..times.len() - 1 {
        let w = fornberg_weights(times[i], &times[i - 1..=i + 1], 2);
        let p1: f64 = (0..3).map(|j| w[1][j] * psi[i - 1 + j]).sum();
        let p2: f64 = (0..3).map(|j| w[2][j] * psi[i - 1 + j]).sum();
        let r = p2 * psi[i] - (1.0 + alpha) * p1 * p1;
        let scale = (p2 * psi[i]).abs() + p1 * p1;
        let rel = if scale == 0.0 { 0.0 } else { r / scale };
        min_rel = min_rel.min(rel);
        d1.push(p1);
    }
    let concavity_ok = min_rel >= -LEVINE_REL_TOL;
    let monotone_ok = d1.windows(2).all(|w| {
        let scale = w[0].abs().max(w[1].abs());
        w[1] - w[0] >= -LEVINE_REL_TOL * scale
    });
    Ok(LevineReport {
        psi0,
        psi1_0,
        t1,
        min_relative_residual: min_rel,
        concavity_ok,
        hypothesis_ok: psi0 > 0.0 && psi1_0 > 0.0 && concavity_ok,
        monotone_ok,
    })
}

/// Exponent triple `(α, β, γ)` held exactly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GronwallExponents {
    pub alpha: BigRational,
    pub beta: BigRational,
    pub gamma: BigRational,
}

fn exact(v: f64) -> Result<BigRational> {
    BigRational::from_float(v).ok_or(OracleError::NonFinite)
}

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

impl GronwallExponents {
    /// Each float is converted exactly, without rounding.
    pub fn from_f64(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        if !(alpha.is_finite() && beta.is_finite() && gamma.is_finite()) {
            return Err(OracleError::BadExponents { alpha, beta, gamma });
        }
        Ok(Self {
            alpha: exact(alpha)?,
            beta: exact(beta)?,
            gamma: exact(gamma)?,
        })
    }

    pub fn to_f64(&self) -> (f64, f64, f64) {
        let f = |r: &BigRational| r.to_f64().unwrap_or(f64::NAN);
        (f(&self.alpha), f(&self.beta), f(&self.gamma))
    }

    /// `α > β >= 1` and `γ >= 0`.
    pub fn validate(&self) -> Result<()> {
        if self.alpha > self.beta && self.beta >= BigRational::one() && self.gamma >= BigRational::zero() {
            Ok(())
        } else {
            let (alpha, beta, gamma) = self.to_f64();
            Err(OracleError::BadExponents { alpha, beta, gamma })
        }
    }
}

/// `(β - 1)/(α - 1) < 1/(γ + 1)`, decided in exact arithmetic.
pub fn gronwall_condition(e: &GronwallExponents) -> Result<bool> {
    e.validate()?;
    let one = BigRational::one();
    Ok((&e.beta - &one) * (&e.gamma + &one) < &e.alpha - &one)
}

/// Float front end of [`gronwall_condition`]; inputs are taken at their exact
/// binary values.
pub fn gronwall_condition_f64(alpha: f64, beta: f64, gamma: f64) -> Result<bool> {
    gronwall_condition(&GronwallExponents::from_f64(alpha, beta, gamma)?)
}

/// Whether the CCH exponent `p` gives admissible Gronwall exponents; `false`
/// also when `β >= α`.
pub fn cch_admissible(p: &BigRational) -> Result<bool> {
    let e = cch_gronwall_exponents(p)?;
    Ok(matches!(gronwall_condition(&e), Ok(true)))
}

/// `(2, (3p+4)/(4-p), 1)` for the CCH potential exponent `p`.
pub fn cch_gronwall_exponents(p: &BigRational) -> Result<GronwallExponents> {
    if *p < BigRational::zero() || *p >= rat(4, 1) {
        return Err(OracleError::ExponentOutOfRange(p.to_string()));
    }
    Ok(GronwallExponents {
        alpha: rat(2, 1),
        beta: (rat(3, 1) * p + rat(4, 1)) / (rat(4, 1) - p),
        gamma: rat(1, 1),
    })
}

pub fn cch_gronwall_exponents_f64(p: f64) -> Result<GronwallExponents> {
    if !p.is_finite() {
        return Err(OracleError::ExponentOutOfRange(p.to_string()));
    }
    cch_gronwall_exponents(&exact(p)?)
}

/// Constants of `Ψ' + εΨ <= Kε^α Ψ^β + Mε^{-γ}` for `ε ∈ (0, ε₀)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GronwallParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub k: f64,
    /// Strictly positive; the zero case is excluded.
    pub m: f64,
    pub eps0: f64,
}

impl GronwallParams {
    pub fn new(alpha: f64, beta: f64, gamma: f64, k: f64, m: f64, eps0: f64) -> Result<Self> {
        GronwallExponents::from_f64(alpha, beta, gamma)?.validate()?;
        if !(k.is_finite() && k >= 0.0) {
            return Err(OracleError::BadConstants(format!("K must be >= 0, got {k}")));
        }
        if !(m.is_finite() && m > 0.0) {
            return Err(OracleError::BadConstants(format!("M must be > 0, got {m}")));
        }
        if !(eps0.is_finite() && eps0 > 0.0) {
            return Err(OracleError::BadConstants(format!("eps0 must be > 0, got {eps0}")));
        }
        Ok(Self {
            alpha,
            beta,
            gamma,
            k,
            m,
            eps0,
        })
    }

    pub fn from_exponents(e: &GronwallExponents, k: f64, m: f64, eps0: f64) -> Result<Self> {
        let (a, b, g) = e.to_f64();
        Self::new(a, b, g, k, m, eps0)
    }

    pub fn condition_met(&self) -> bool {
        matches!(gronwall_condition_f64(self.alpha, self.beta, self.gamma), Ok(true))
    }

    /// `ε` keeping the superlinear term subordinate at level `psi`:
    /// `ε = min(ε₀/2, (2KΨ^{β-1})^{-1/(α-1)})`, so `Kε^αΨ^β <= ½εΨ`.
    pub fn balanced_epsilon(&self, psi: f64) -> f64 {
        let cap = 0.5 * self.eps0;
        if self.k == 0.0 {
            return cap;
        }
        let bal = (2.0 * self.k * psi.max(0.0).powf(self.beta - 1.0)).powf(-1.0 / (self.alpha - 1.0));
        if bal.is_nan() {
            cap
        } else {
            cap.min(bal)
        }
    }

    fn rhs(&self, eps: f64, psi: f64) -> f64 {
        let sup = if self.k == 0.0 {
            0.0
        } else {
            self.k * eps.powf(self.alpha) * psi.max(0.0).powf(self.beta)
        };
        -eps * psi + sup + self.m * eps.powf(-self.gamma)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum EpsilonChoice {
    Fixed { eps: f64 },
    /// Re-balanced against the current value, see
    /// [`GronwallParams::balanced_epsilon`].
    Balanced,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum GronwallStatus {
    Bounded,
    Escaped { t: f64 },
}

/// Accepted Dormand–Prince steps with the stage data needed for dense output.
#[derive(Debug, Clone)]
pub struct GronwallSolution {
    pub times: Vec<f64>,
    pub psi: Vec<f64>,
    pub status: GronwallStatus,
    stages: Vec<[f64; 7]>,
}

const ESCAPE_LEVEL: f64 = 1e200;
const DP_TOL: f64 = 1e-12;

// Dormand–Prince 5(4) tableau; the problem is autonomous so the nodes are unused.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const DENSE: [[f64; 4]; 7] = [
    [
        1.0,
        -8048581381.0 / 2820520608.0,
        8663915743.0 / 2820520608.0,
        -12715105075.0 / 11282082432.0,
    ],
    [0.0; 4],
    [
        0.0,
        131558114200.0 / 32700410799.0,
        -68118460800.0 / 10900136933.0,
        87487479700.0 / 32700410799.0,
    ],
    [
        0.0,
        -1754552775.0 / 470086768.0,
        14199869525.0 / 1410260304.0,
        -10690763975.0 / 1880347072.0,
    ],
    [
        0.0,
        127303824393.0 / 49829197408.0,
        -318862633887.0 / 49829197408.0,
        701980252875.0 / 199316789632.0,
    ],
    [
        0.0,
        -282668133.0 / 205662961.0,
        2019193451.0 / 616988883.0,
        -1453857185.0 / 822651844.0,
    ],
    [
        0.0,
        40617522.0 / 29380423.0,
        -110615467.0 / 29380423.0,
        69997945.0 / 29380423.0,
    ],
];
const B_ERR: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

impl GronwallSolution {
    /// Dense output on step `i` (between `times[i]` and `times[i+1]`) at
    /// fraction `theta ∈ [0, 1]`, using the 4th-order continuous extension.
    pub fn interpolate(&self, i: usize, theta: f64) -> f64 {
        let h = self.times[i + 1] - self.times[i];
        let powers = [theta, theta * theta, theta.powi(3), theta.powi(4)];
        let incr: f64 = self.stages[i]
            .iter()
            .zip(&DENSE)
            .map(|(k, row)| k * row.iter().zip(&powers).map(|(a, b)| a * b).sum::<f64>())
            .sum();
        self.psi[i] + h * incr
    }

    /// Final sample.
    pub fn last(&self) -> f64 {
        *self.psi.last().expect("solution holds the initial value")
    }
}

/// Solves `Ψ' = -εΨ + Kε^αΨ^β + Mε^{-γ}` (the inequality taken as equality)
/// with an adaptive Dormand–Prince 5(4) pair.
pub fn gronwall_equality_solve(
    params: &GronwallParams,
    eps: EpsilonChoice,
    psi0: f64,
    t_end: f64,
) -> Result<GronwallSolution> {
    if !(psi0.is_finite() && psi0 > 0.0) {
        return Err(OracleError::BadInitialValue(psi0));
    }
    if let EpsilonChoice::Fixed { eps } = eps {
        if !(eps > 0.0 && eps < params.eps0) {
            return Err(OracleError::EpsilonOutOfRange {
                eps,
                eps0: params.eps0,
            });
        }
    }
    let f = |y: f64| {
        let e = match eps {
            EpsilonChoice::Fixed { eps } => eps,
            EpsilonChoice::Balanced => params.balanced_epsilon(y),
        };
        params.rhs(e, y)
    };
    let mut sol = GronwallSolution {
        times: vec![0.0],
        psi: vec![psi0],
        status: GronwallStatus::Bounded,
        stages: Vec::new(),
    };
    let (mut t, mut y) = (0.0_f64, psi0);
    let mut h = (1e-3 * t_end).min(1e-3 * y / f(y).abs().max(1e-300));
    let mut k0 = f(y);
    while t < t_end {
        if t_end - t < 1e-14 * t_end {
            break;
        }
        h = h.min(t_end - t);
        let mut k = [0.0; 7];
        k[0] = k0;
        for s in 1..7 {
            let ys = y + h * (0..s).map(|j| A[s][j] * k[j]).sum::<f64>();
            k[s] = f(ys);
        }
        let y_new = y + h * (0..6).map(|j| A[6][j] * k[j]).sum::<f64>();
        let err_est = h * (0..7).map(|j| B_ERR[j] * k[j]).sum::<f64>();
        let scale = DP_TOL * (1.0 + y.abs().max(y_new.abs()));
        let err = if y_new.is_finite() {
            err_est.abs() / scale
        } else {
            f64::INFINITY
        };
        if err <= 1.0 {
            t += h;
            y = y_new;
            sol.times.push(t);
            sol.psi.push(y);
            sol.stages.push(k);
            k0 = k[6];
            if y > ESCAPE_LEVEL {
                sol.status = GronwallStatus::Escaped { t };
                return Ok(sol);
            }
        }
        let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= fac;
        if h < 1e-15 * t.max(1.0) {
            sol.status = GronwallStatus::Escaped { t };
            return Ok(sol);
        }
    }
    Ok(sol)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GronwallMember {
    pub psi0: f64,
    /// Envelope coefficient `Q(Ψ(0))`.
    pub q_psi0: f64,
    /// `sup_{t >= t_end/2} Ψ(t)`.
    pub tail_sup: f64,
    pub status: GronwallStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GronwallReport {
    pub condition_met: bool,
    pub kappa: f64,
    /// Uniform eventual bound `Q(M)`.
    pub q_m: f64,
    pub members: Vec<GronwallMember>,
    /// Largest `(Ψ(t) - Q(Ψ(0))e^{-κt} - Q(M))⁺ / (Q(Ψ(0))e^{-κt} + Q(M))`
    /// over dense output points not used in the fit.
    pub max_violation: f64,
}

impl GronwallReport {
    /// Ratio of the largest to the smallest member tail bound.
    pub fn tail_spread(&self) -> f64 {
        let max = self.members.iter().map(|m| m.tail_sup).fold(f64::NEG_INFINITY, f64::max);
        let min = self.members.iter().map(|m| m.tail_sup).fold(f64::INFINITY, f64::min);
        max / min
    }
}

/// Fit points closer than this (relative) to `Q(M)` carry no decay
/// information above the solver's accumulated error.
const FIT_NOISE_FLOOR: f64 = 1e-7;
const FIT_POINTS_PER_STEP: usize = 4;
const CHECK_POINTS_PER_STEP: usize = 5;

/// Solves the equality case for each `Ψ(0)` with the balanced ε rule and
/// fits a witness `(κ, Q)` for `Ψ(t) <= Q(Ψ(0))e^{-κt} + Q(M)`.
///
/// `Q(M)` is the largest tail value over the family; `κ` is the smallest
/// decay rate of `Ψ - Q(M)` seen on a dense set of fit points (ignoring
/// points within the solver noise of `Q(M)`), and the envelope is then
/// checked on a disjoint set of points.
pub fn gronwall_verify(params: &GronwallParams, psi0s: &[f64], t_end: f64) -> Result<GronwallReport> {
    if !params.condition_met() {
        return Err(OracleError::Inadmissible);
    }
    if psi0s.is_empty() {
        return Err(OracleError::TooFewSamples { need: 1, got: 0 });
    }
    let sols = psi0s
        .iter()
        .map(|&p| gronwall_equality_solve(params, EpsilonChoice::Balanced, p, t_end))
        .collect::<Result<Vec<_>>>()?;
    let dense = |s: &GronwallSolution, per_step: usize, offset: f64| -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for i in 0..s.stages.len() {
            let h = s.times[i + 1] - s.times[i];
            for j in 0..per_step {
                let theta = (j as f64 + offset) / per_step as f64;
                out.push((s.times[i] + theta * h, s.interpolate(i, theta)));
            }
        }
        out.push((*s.times.last().unwrap(), s.last()));
        out
    };
    let tail_start = 0.5 * t_end;
    let tail_sups: Vec<f64> = sols
        .iter()
        .map(|s| {
            dense(s, FIT_POINTS_PER_STEP, 0.0)
                .into_iter()
                .filter(|(t, _)| *t >= tail_start)
                .map(|(_, v)| v)
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    let q_m = tail_sups.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let mut kappa = f64::INFINITY;
    for (s, &p0) in sols.iter().zip(psi0s) {
        let a = p0 - q_m;
        if a <= 0.0 {
            continue;
        }
        for (t, v) in dense(s, FIT_POINTS_PER_STEP, 0.0) {
            if t > 0.0 && v - q_m > FIT_NOISE_FLOOR * q_m {
                kappa = kappa.min(-((v - q_m) / a).ln() / t);
            }
        }
    }
    if !kappa.is_finite() {
        kappa = params.balanced_epsilon(q_m);
    }
    let mut members = Vec::with_capacity(sols.len());
    let mut max_violation = 0.0_f64;
    for ((s, &p0), &tail_sup) in sols.iter().zip(psi0s).zip(&tail_sups) {
        let q0 = (p0 - q_m).max(0.0);
        for (t, v) in dense(s, CHECK_POINTS_PER_STEP, 0.5) {
            let bound = q0 * (-kappa * t).exp() + q_m;
            max_violation = max_violation.max((v - bound) / bound);
        }
        members.push(GronwallMember {
            psi0: p0,
            q_psi0: q0,
            tail_sup,
            status: s.status,
        });
    }
    Ok(GronwallReport {
        condition_met: true,
        kappa,
        q_m,
        members,
        max_violation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(t_end: f64, n: usize, f: impl Fn(f64) -> f64) -> (Vec<f64>, Vec<f64>) {
        let t: Vec<f64> = (0..n).map(|i| t_end * i as f64 / (n - 1) as f64).collect();
        let v = t.iter().map(|&x| f(x)).collect();
        (t, v)
    }

    #[test]
    fn fornberg_reproduces_polynomials() {
        let x = [0.0, 0.1, 0.25, 0.3, 0.5];
        let w = fornberg_weights(0.0, &x, 2);
        let p = |t: f64| 1.0 + 2.0 * t - 3.0 * t * t + t.powi(4);
        let d1: f64 = w[1].iter().zip(&x).map(|(a, &b)| a * p(b)).sum();
        let d2: f64 = w[2].iter().zip(&x).map(|(a, &b)| a * p(b)).sum();
        assert!((d1 - 2.0).abs() < 1e-10 && (d2 + 6.0).abs() < 1e-9);
    }

    #[test]
    fn levine_equality_case() {
        for t_pole in [1.0, 2.0, 5.0] {
            let (t, v) = sample(0.95 * t_pole, 4001, |x| (t_pole - x).powi(-4));
            let r = levine_check(&t, &v, 0.25).unwrap();
            assert!(r.hypothesis_ok && r.monotone_ok, "{r:?}");
            assert!((r.t1 - t_pole).abs() < 1e-6 * t_pole, "{}", r.t1);
        }
    }

    #[test]
    fn levine_rejects_counterexamples() {
        let (t, v) = sample(2.0, 200, |x| (-x).exp());
        let r = levine_check(&t, &v, 0.25).unwrap();
        assert!(!r.hypothesis_ok && r.psi1_0 < 0.0 && r.t1.is_infinite());
        let (t, v) = sample(2.0, 200, |x| 1.0 + x);
        let r = levine_check(&t, &v, 0.25).unwrap();
        assert!(!r.hypothesis_ok && !r.concavity_ok && r.monotone_ok);
    }

    #[test]
    fn levine_preconditions() {
        let (t, v) = sample(1.0, 7, |x| 1.0 + x);
        assert_eq!(
            levine_check(&t, &v, 0.25).unwrap_err(),
            OracleError::TooFewSamples { need: 8, got: 7 }
        );
        let (mut t, v) = sample(1.0, 10, |x| 1.0 + x);
        t[4] = t[3];
        assert_eq!(levine_check(&t, &v, 0.25).unwrap_err(), OracleError::NonIncreasingTimes);
    }

    #[test]
    fn condition_examples() {
        assert!(gronwall_condition_f64(2.0, 1.0, 1.0).unwrap());
        assert!(gronwall_condition(&cch_gronwall_exponents_f64(0.44).unwrap()).unwrap());
        let b = cch_gronwall_exponents(&rat(4, 9)).unwrap();
        assert_eq!(b.beta, rat(3, 2));
        assert!(!gronwall_condition(&b).unwrap());
        let below = cch_gronwall_exponents(&(rat(4, 9) - rat(1, 1000))).unwrap();
        assert!(gronwall_condition(&below).unwrap());
        assert_eq!(cch_gronwall_exponents(&rat(0, 1)).unwrap().beta, rat(1, 1));
        assert_eq!(cch_gronwall_exponents(&rat(3, 1)).unwrap().beta, rat(13, 1));
        assert!(cch_gronwall_exponents(&rat(4, 1)).is_err());
        assert!(gronwall_condition_f64(1.0, 1.0, 0.0).is_err());
        assert!(gronwall_condition(&cch_gronwall_exponents(&rat(3, 1)).unwrap()).is_err());
        assert!(!cch_admissible(&rat(3, 1)).unwrap());
    }

    #[test]
    fn params_validation() {
        assert!(GronwallParams::new(2.0, 1.2, 1.0, 1.0, 1.0, 1.0).is_ok());
        assert!(GronwallParams::new(2.0, 1.2, 1.0, -1.0, 1.0, 1.0).is_err());
        assert!(GronwallParams::new(2.0, 1.2, 1.0, 1.0, 0.0, 1.0).is_err());
        assert!(GronwallParams::new(2.0, 1.2, 1.0, 1.0, 1.0, 0.0).is_err());
        assert!(GronwallParams::new(1.0, 1.2, 1.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn linear_case_matches_closed_form() {
        let p = GronwallParams::new(2.0, 1.5, 1.0, 0.0, 3.0, 1.0).unwrap();
        let eps = 0.3;
        for psi0 in [0.5, 10.0, 1e4] {
            let s = gronwall_equality_solve(&p, EpsilonChoice::Fixed { eps }, psi0, 40.0).unwrap();
            assert_eq!(s.status, GronwallStatus::Bounded);
            let q = p.m / eps.powf(p.gamma + 1.0);
            for (t, v) in s.times.iter().zip(&s.psi) {
                let e = (-eps * t).exp();
                let exact = psi0 * e + q * (1.0 - e);
                assert!((v - exact).abs() <= 1e-9 * exact, "{t}: {v} vs {exact}");
            }
            for i in (0..s.times.len() - 1).step_by(7) {
                let t = 0.5 * (s.times[i] + s.times[i + 1]);
                let e = (-eps * t).exp();
                let exact = psi0 * e + q * (1.0 - e);
                assert!((s.interpolate(i, 0.5) - exact).abs() <= 1e-9 * exact);
            }
        }
    }

    #[test]
    fn fixed_epsilon_escapes_for_large_data() {
        let e = cch_gronwall_exponents_f64(0.3).unwrap();
        let p = GronwallParams::from_exponents(&e, 1.0, 1.0, 1.0).unwrap();
        let s = gronwall_equality_solve(&p, EpsilonChoice::Fixed { eps: 0.05 }, 1e6, 100.0).unwrap();
        assert!(matches!(s.status, GronwallStatus::Escaped { .. }));
        let s = gronwall_equality_solve(&p, EpsilonChoice::Fixed { eps: 0.05 }, 1.0, 100.0).unwrap();
        assert_eq!(s.status, GronwallStatus::Bounded);
        assert!(gronwall_equality_solve(&p, EpsilonChoice::Fixed { eps: 1.0 }, 1.0, 1.0).is_err());
    }

    #[test]
    fn verify_cch_family() {
        let e = cch_gronwall_exponents_f64(0.3).unwrap();
        let p = GronwallParams::from_exponents(&e, 1.0, 1.0, 1.0).unwrap();
        let r = gronwall_verify(&p, &[1.0, 1e2, 1e4], 3000.0).unwrap();
        assert!(r.kappa > 0.0);
        assert!(r.max_violation <= 1e-8, "{r:?}");
        assert!(r.tail_spread() <= 1.01, "{r:?}");
    }

    #[test]
    fn verify_linear_family_recovers_epsilon() {
        let p = GronwallParams::new(2.0, 1.2, 1.0, 0.0, 2.0, 1.0).unwrap();
        let r = gronwall_verify(&p, &[1.0, 1e2, 1e4], 200.0).unwrap();
        let eps = 0.5;
        assert!((r.kappa - eps).abs() < 1e-6 * eps, "{r:?}");
        let q = p.m / eps.powf(p.gamma + 1.0);
        assert!((r.q_m - q).abs() < 1e-9 * q, "{r:?}");
        assert!(r.max_violation <= 1e-8);
    }

    #[test]
    fn verify_rejects_inadmissible() {
        let e = cch_gronwall_exponents_f64(0.5).unwrap();
        let p = GronwallParams::from_exponents(&e, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(gronwall_verify(&p, &[1.0], 10.0).unwrap_err(), OracleError::Inadmissible);
        let e = cch_gronwall_exponents_f64(1.0).unwrap();
        assert!(GronwallParams::from_exponents(&e, 1.0, 1.0, 1.0).is_err());
    }
}
