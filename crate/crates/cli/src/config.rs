//! Experiment configuration: TOML text, validated in full before any compute.
//!
//! Every error points at the offending line and column of the config file.
//! The grammar is documented in `docs/config.md`.

use std::fmt;
use std::ops::Range;
use std::path::{Path, PathBuf};

use cch_core::{Checkpoint, Family, ModelSpec, PeriodicGrid, SolverConfig, SpectralField, Stability};
use serde::Deserialize;
use thiserror::Error;
use toml::Spanned;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Run,
    SweepP,
    SweepDelta,
    VerifyBlowup,
    VerifyDissipativity,
    VerifyLemmas,
    VerifyGap,
}

impl Kind {
    pub const ALL: [Kind; 7] = [
        Kind::Run,
        Kind::SweepP,
        Kind::SweepDelta,
        Kind::VerifyBlowup,
        Kind::VerifyDissipativity,
        Kind::VerifyLemmas,
        Kind::VerifyGap,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kind::Run => "run",
            Kind::SweepP => "sweep_p",
            Kind::SweepDelta => "sweep_delta",
            Kind::VerifyBlowup => "verify_blowup",
            Kind::VerifyDissipativity => "verify_dissipativity",
            Kind::VerifyLemmas => "verify_lemmas",
            Kind::VerifyGap => "verify_gap",
        }
    }

    pub fn is_sweep(self) -> bool {
        matches!(self, Kind::SweepP | Kind::SweepDelta)
    }

    pub fn is_verify(self) -> bool {
        !self.is_sweep() && self != Kind::Run
    }

    fn needs_model(self) -> bool {
        !matches!(self, Kind::VerifyLemmas)
    }

    fn needs_initial(self) -> bool {
        !matches!(self, Kind::VerifyLemmas | Kind::VerifyGap)
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: cannot read config: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}:{column}: {message}")]
    Invalid {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{path}: {message}")]
    Unlocated { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mode {
    pub k: usize,
    pub amplitude: f64,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    Modes(Vec<Mode>),
    Checkpoint { path: PathBuf, checkpoint: Checkpoint },
    /// The mode profile rescaled to `margin` times its blow-up amplitude.
    BlowupProfile { modes: Vec<Mode>, margin: f64 },
}

impl InitialCondition {
    /// The initial field on `grid`, before any blow-up amplitude scaling.
    pub fn profile(&self, grid: &PeriodicGrid) -> Result<SpectralField, cch_core::CheckpointError> {
        match self {
            InitialCondition::Modes(modes) | InitialCondition::BlowupProfile { modes, .. } => {
                let mut u = SpectralField::zeros(grid);
                for m in modes {
                    u.axpy(1.0, &SpectralField::sine_mode(grid, m.k, m.amplitude, m.phase));
                }
                Ok(u)
            }
            InitialCondition::Checkpoint { checkpoint, .. } => Ok(checkpoint.field()?.resample(grid)?),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifySettings {
    pub amplitudes: Vec<f64>,
    pub radius_factor: f64,
    pub t_transient: Option<f64>,
    pub goodman_target: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LemmaSettings {
    pub p: f64,
    pub psi0: Vec<f64>,
    pub t_end: f64,
    pub k: f64,
    pub m: f64,
    pub eps0: f64,
    pub levine_poles: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub model: Option<ModelSpec>,
    pub n: usize,
    pub solver: SolverConfig,
    pub initial: Option<InitialCondition>,
    /// Output directory as written in the config, resolved later against the output root.
    pub directory: PathBuf,
    /// Directory holding the config file; relative paths in it are resolved here.
    pub base_dir: PathBuf,
    pub sweep_values: Vec<f64>,
    pub verify: VerifySettings,
    pub lemmas: LemmaSettings,
    pub gap_targets: Vec<f64>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &path.display().to_string(), &base_dir)
    }

    /// Parses and validates `text`; `origin` names the source in error messages.
    pub fn parse(text: &str, origin: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let ctx = Ctx { text, origin };
        let raw: RawConfig = toml::from_str(text).map_err(|e| match e.span() {
            Some(span) => ctx.at(&span, e.message().trim_end()),
            None => ConfigError::Unlocated {
                path: origin.to_string(),
                message: e.message().trim_end().to_string(),
            },
        })?;
        ctx.validate(raw, base_dir)
    }

    pub fn model(&self) -> ModelSpec {
        self.model.expect("validated config carries a model for this kind")
    }

    pub fn initial(&self) -> &InitialCondition {
        self.initial
            .as_ref()
            .expect("validated config carries an initial condition for this kind")
    }

    /// Same experiment at twice the resolution.
    pub fn doubled(&self) -> Self {
        Self {
            n: 2 * self.n,
            ..self.clone()
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    kind: Spanned<String>,
    model: Option<Spanned<RawModel>>,
    grid: Option<Spanned<RawGrid>>,
    solver: Option<Spanned<RawSolver>>,
    initial: Option<Spanned<RawInitial>>,
    output: Spanned<RawOutput>,
    sweep: Option<Spanned<RawSweep>>,
    verify: Option<Spanned<RawVerify>>,
    lemmas: Option<Spanned<RawLemmas>>,
    gap: Option<Spanned<RawGap>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    family: Spanned<String>,
    p: Option<Spanned<f64>>,
    delta: Option<Spanned<f64>>,
    stability: Option<Spanned<String>>,
    half_length: Spanned<f64>,
    convective: Option<bool>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    n: Spanned<i64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    dt0: Option<f64>,
    dt_min: Option<f64>,
    t_end: Option<f64>,
    rel_tol: Option<f64>,
    abs_tol: Option<f64>,
    blowup_linf: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInitial {
    modes: Option<Spanned<Vec<Spanned<Mode>>>>,
    checkpoint: Option<Spanned<String>>,
    blowup_profile: Option<Spanned<RawBlowupProfile>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBlowupProfile {
    margin: Spanned<f64>,
    modes: Option<Spanned<Vec<Spanned<Mode>>>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    directory: Spanned<String>,
    cadence: Option<Spanned<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    values: Spanned<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVerify {
    amplitudes: Option<Spanned<Vec<f64>>>,
    radius_factor: Option<Spanned<f64>>,
    t_transient: Option<Spanned<f64>>,
    goodman_target: Option<Spanned<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLemmas {
    p: Option<Spanned<f64>>,
    psi0: Option<Spanned<Vec<f64>>>,
    t_end: Option<Spanned<f64>>,
    k: Option<Spanned<f64>>,
    m: Option<Spanned<f64>>,
    eps0: Option<Spanned<f64>>,
    levine_poles: Option<Spanned<Vec<f64>>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGap {
    targets: Spanned<Vec<f64>>,
}

struct Ctx<'a> {
    text: &'a str,
    origin: &'a str,
}

type Checked<T> = Result<T, ConfigError>;

fn positive(v: f64) -> bool {
    v.is_finite() && v > 0.0
}

impl Ctx<'_> {
    fn at(&self, span: &Range<usize>, message: impl Into<String>) -> ConfigError {
        let start = span.start.min(self.text.len());
        let before = &self.text[..start];
        let line = before.matches('\n').count() + 1;
        let column = before.rsplit('\n').next().map_or(0, |s| s.chars().count()) + 1;
        ConfigError::Invalid {
            path: self.origin.to_string(),
            line,
            column,
            message: message.into(),
        }
    }

    fn positive_at(&self, v: &Spanned<f64>, what: &str) -> Checked<f64> {
        if positive(*v.get_ref()) {
            Ok(*v.get_ref())
        } else {
            Err(self.at(&v.span(), format!("{what} must be positive and finite, got {}", v.get_ref())))
        }
    }

    fn positive_list(&self, v: &Spanned<Vec<f64>>, what: &str) -> Checked<Vec<f64>> {
        if v.get_ref().is_empty() {
            return Err(self.at(&v.span(), format!("{what} must not be empty")));
        }
        if let Some(bad) = v.get_ref().iter().find(|x| !positive(**x)) {
            return Err(self.at(&v.span(), format!("{what} must be positive and finite, got {bad}")));
        }
        Ok(v.get_ref().clone())
    }

    fn validate(&self, raw: RawConfig, base_dir: &Path) -> Checked<ExperimentConfig> {
        let kind = Kind::ALL
            .into_iter()
            .find(|k| k.name() == raw.kind.get_ref())
            .ok_or_else(|| {
                let names: Vec<_> = Kind::ALL.iter().map(|k| k.name()).collect();
                self.at(
                    &raw.kind.span(),
                    format!("unknown experiment kind {:?}; expected one of {}", raw.kind.get_ref(), names.join(", ")),
                )
            })?;
        let kind_span = raw.kind.span();
        let missing = |block: &str| self.at(&kind_span, format!("kind {kind} requires a [{block}] block"));

        let model = match &raw.model {
            Some(m) => Some(self.model(m.get_ref())?),
            None if kind.needs_model() => return Err(missing("model")),
            None => None,
        };
        let n = match &raw.grid {
            Some(g) => self.grid(g.get_ref())?,
            None if kind.needs_model() => return Err(missing("grid")),
            None => 0,
        };
        let mut solver = SolverConfig::default();
        if let Some(s) = &raw.solver {
            let r = s.get_ref();
            solver.dt0 = r.dt0.unwrap_or(solver.dt0);
            solver.dt_min = r.dt_min.unwrap_or(solver.dt_min);
            solver.t_end = r.t_end.unwrap_or(solver.t_end);
            solver.rel_tol = r.rel_tol.unwrap_or(solver.rel_tol);
            solver.abs_tol = r.abs_tol.unwrap_or(solver.abs_tol);
            solver.blowup_linf = r.blowup_linf.unwrap_or(solver.blowup_linf);
        }
        let output = raw.output.get_ref();
        if let Some(c) = &output.cadence {
            let v = *c.get_ref();
            if !(v.is_finite() && v >= 0.0) {
                return Err(self.at(&c.span(), format!("cadence must be non-negative and finite, got {v}")));
            }
            solver.sample_every = v;
        }
        let solver_span = raw.solver.as_ref().map_or(kind_span.clone(), |s| s.span());
        solver
            .validate()
            .map_err(|e| self.at(&solver_span, e.to_string()))?;
        if output.directory.get_ref().is_empty() {
            return Err(self.at(&output.directory.span(), "output directory must not be empty"));
        }

        let initial = match &raw.initial {
            Some(i) => Some(self.initial(i, n, model.as_ref(), base_dir)?),
            None if kind.needs_initial() => return Err(missing("initial")),
            None => None,
        };
        if let (Some(model), Some(init)) = (&model, &initial) {
            self.check_pairing(kind, model, init, raw.model.as_ref().unwrap(), raw.initial.as_ref().unwrap())?;
        }

        let sweep_values = match (&raw.sweep, kind.is_sweep()) {
            (Some(s), true) => self.sweep(kind, s, model.as_ref().unwrap())?,
            (None, true) => return Err(missing("sweep")),
            (Some(s), false) => return Err(self.at(&s.span(), format!("[sweep] is only used by sweep kinds, not {kind}"))),
            (None, false) => Vec::new(),
        };

        let mut verify = VerifySettings {
            amplitudes: vec![1.0, 10.0, 100.0],
            radius_factor: 1.5,
            t_transient: None,
            goodman_target: None,
        };
        if let Some(v) = &raw.verify {
            if kind != Kind::VerifyDissipativity {
                return Err(self.at(&v.span(), format!("[verify] is only used by verify_dissipativity, not {kind}")));
            }
            let r = v.get_ref();
            if let Some(a) = &r.amplitudes {
                verify.amplitudes = self.positive_list(a, "amplitudes")?;
            }
            if let Some(f) = &r.radius_factor {
                verify.radius_factor = self.positive_at(f, "radius_factor")?;
                if verify.radius_factor < 1.0 {
                    return Err(self.at(&f.span(), "radius_factor must be at least 1"));
                }
            }
            if let Some(t) = &r.t_transient {
                let t0 = *t.get_ref();
                if !(t0.is_finite() && t0 >= 0.0 && t0 < solver.t_end) {
                    return Err(self.at(&t.span(), format!("t_transient must lie in [0, t_end), got {t0}")));
                }
                verify.t_transient = Some(t0);
            }
            if let Some(g) = &r.goodman_target {
                let target = self.positive_at(g, "goodman_target")?;
                if !matches!(model.unwrap().family, Family::Cch { .. }) {
                    return Err(self.at(&g.span(), "goodman_target applies to the cch family only"));
                }
                if target < cch_core::GoodmanOptions::default().min_target {
                    return Err(self.at(
                        &g.span(),
                        format!("goodman_target must be at least {}", cch_core::GoodmanOptions::default().min_target),
                    ));
                }
                verify.goodman_target = Some(target);
            }
        }

        let mut lemmas = LemmaSettings {
            p: 0.3,
            psi0: vec![1.0, 1e2, 1e4],
            t_end: 3000.0,
            k: 1.0,
            m: 1.0,
            eps0: 1.0,
            levine_poles: vec![1.0, 2.0, 5.0],
        };
        if let Some(l) = &raw.lemmas {
            if kind != Kind::VerifyLemmas {
                return Err(self.at(&l.span(), format!("[lemmas] is only used by verify_lemmas, not {kind}")));
            }
            let r = l.get_ref();
            if let Some(p) = &r.p {
                let v = *p.get_ref();
                if !(v.is_finite() && (0.0..4.0).contains(&v)) {
                    return Err(self.at(&p.span(), format!("p must lie in [0, 4), got {v}")));
                }
                lemmas.p = v;
            }
            if let Some(v) = &r.psi0 {
                lemmas.psi0 = self.positive_list(v, "psi0")?;
            }
            if let Some(v) = &r.t_end {
                lemmas.t_end = self.positive_at(v, "t_end")?;
            }
            if let Some(v) = &r.k {
                let k = *v.get_ref();
                if !(k.is_finite() && k >= 0.0) {
                    return Err(self.at(&v.span(), format!("k must be non-negative, got {k}")));
                }
                lemmas.k = k;
            }
            if let Some(v) = &r.m {
                lemmas.m = self.positive_at(v, "m")?;
            }
            if let Some(v) = &r.eps0 {
                lemmas.eps0 = self.positive_at(v, "eps0")?;
            }
            if let Some(v) = &r.levine_poles {
                lemmas.levine_poles = self.positive_list(v, "levine_poles")?;
            }
        }

        let gap_targets = match (&raw.gap, kind) {
            (Some(g), Kind::VerifyGap) => {
                let targets = self.positive_list(&g.get_ref().targets, "targets")?;
                let min = cch_core::GoodmanOptions::default().min_target;
                if let Some(t) = targets.iter().find(|t| **t < min) {
                    return Err(self.at(&g.get_ref().targets.span(), format!("gap targets must be at least {min}, got {t}")));
                }
                targets
            }
            (None, Kind::VerifyGap) => return Err(missing("gap")),
            (Some(g), _) => return Err(self.at(&g.span(), format!("[gap] is only used by verify_gap, not {kind}"))),
            (None, _) => Vec::new(),
        };

        Ok(ExperimentConfig {
            kind,
            model,
            n,
            solver,
            initial,
            directory: PathBuf::from(output.directory.get_ref()),
            base_dir: base_dir.to_path_buf(),
            sweep_values,
            verify,
            lemmas,
            gap_targets,
        })
    }

    fn model(&self, m: &RawModel) -> Checked<ModelSpec> {
        let fam = m.family.get_ref().as_str();
        let allowed: &[&str] = match fam {
            "cch" => &["p"],
            "cubic_cch" => &[],
            "kss" => &["delta"],
            "sixth" => &["p", "stability"],
            _ => {
                return Err(self.at(
                    &m.family.span(),
                    format!("unknown model family {fam:?}; expected cch, cubic_cch, kss or sixth"),
                ))
            }
        };
        let stray = [
            ("p", m.p.as_ref().map(|s| s.span())),
            ("delta", m.delta.as_ref().map(|s| s.span())),
            ("stability", m.stability.as_ref().map(|s| s.span())),
        ];
        for (key, span) in stray {
            if let Some(span) = span {
                if !allowed.contains(&key) {
                    return Err(self.at(&span, format!("key {key:?} does not apply to family {fam}")));
                }
            }
        }
        let require = |v: &Option<Spanned<f64>>, key: &str| {
            v.as_ref()
                .map(|s| *s.get_ref())
                .ok_or_else(|| self.at(&m.family.span(), format!("family {fam} requires {key:?}")))
        };
        let family = match fam {
            "cch" => Family::Cch { p: require(&m.p, "p")? },
            "cubic_cch" => Family::CubicCch,
            "kss" => Family::Kss {
                delta: require(&m.delta, "delta")?,
            },
            _ => {
                let stability = match m.stability.as_ref().map(|s| s.get_ref().as_str()) {
                    None | Some("stable") => Stability::Stable,
                    Some("unstable") => Stability::Unstable,
                    Some(other) => {
                        return Err(self.at(
                            &m.stability.as_ref().unwrap().span(),
                            format!("unknown stability {other:?}; expected stable or unstable"),
                        ))
                    }
                };
                Family::Sixth {
                    stability,
                    p: m.p.as_ref().map_or(2.0, |s| *s.get_ref()),
                }
            }
        };
        let value_span = m
            .p
            .as_ref()
            .or(m.delta.as_ref())
            .map_or(m.family.span(), |s| s.span());
        let spec = ModelSpec::new(family, *m.half_length.get_ref()).map_err(|e| {
            let span = match e {
                cch_core::ModelError::InvalidHalfLength(_) => m.half_length.span(),
                _ => value_span,
            };
            self.at(&span, e.to_string())
        })?;
        Ok(spec.with_convection(m.convective.unwrap_or(true)))
    }

    fn grid(&self, g: &RawGrid) -> Checked<usize> {
        let n = *g.n.get_ref();
        let min = cch_core::spectral::MIN_POINTS as i64;
        if n < min || n % 2 != 0 {
            return Err(self.at(&g.n.span(), format!("grid size n must be even and at least {min}, got {n}")));
        }
        Ok(n as usize)
    }

    fn modes(&self, modes: &Spanned<Vec<Spanned<Mode>>>, n: usize) -> Checked<Vec<Mode>> {
        if modes.get_ref().is_empty() {
            return Err(self.at(&modes.span(), "mode list must not be empty"));
        }
        let mut out = Vec::new();
        for m in modes.get_ref() {
            let v = *m.get_ref();
            if v.k == 0 || v.k >= n / 2 {
                return Err(self.at(&m.span(), format!("mode k must lie in 1..{}, got {}", n / 2, v.k)));
            }
            if !v.amplitude.is_finite() || !v.phase.is_finite() {
                return Err(self.at(&m.span(), "mode amplitude and phase must be finite"));
            }
            out.push(v);
        }
        Ok(out)
    }

    fn initial(
        &self,
        init: &Spanned<RawInitial>,
        n: usize,
        model: Option<&ModelSpec>,
        base_dir: &Path,
    ) -> Checked<InitialCondition> {
        let r = init.get_ref();
        let given = [r.modes.is_some(), r.checkpoint.is_some(), r.blowup_profile.is_some()];
        if given.iter().filter(|g| **g).count() != 1 {
            return Err(self.at(
                &init.span(),
                "[initial] needs exactly one of modes, checkpoint or blowup_profile",
            ));
        }
        if let Some(modes) = &r.modes {
            return Ok(InitialCondition::Modes(self.modes(modes, n)?));
        }
        if let Some(bp) = &r.blowup_profile {
            let b = bp.get_ref();
            let margin = self.positive_at(&b.margin, "margin")?;
            if margin <= 1.0 {
                return Err(self.at(&b.margin.span(), format!("margin must exceed 1, got {margin}")));
            }
            let modes = match &b.modes {
                Some(m) => self.modes(m, n)?,
                None => vec![Mode {
                    k: 1,
                    amplitude: 1.0,
                    phase: 0.0,
                }],
            };
            return Ok(InitialCondition::BlowupProfile { modes, margin });
        }
        let cp = r.checkpoint.as_ref().unwrap();
        let path = base_dir.join(cp.get_ref());
        let checkpoint = Checkpoint::read(&path).map_err(|e| self.at(&cp.span(), e.to_string()))?;
        if let Some(model) = model {
            if checkpoint.half_length.to_bits() != model.half_length.to_bits() {
                return Err(self.at(
                    &cp.span(),
                    format!(
                        "checkpoint half-length {} does not match the model's {}",
                        checkpoint.half_length, model.half_length
                    ),
                ));
            }
        }
        Ok(InitialCondition::Checkpoint { path, checkpoint })
    }

    fn check_pairing(
        &self,
        kind: Kind,
        model: &ModelSpec,
        init: &InitialCondition,
        raw_model: &Spanned<RawModel>,
        raw_init: &Spanned<RawInitial>,
    ) -> Checked<()> {
        let is_profile = matches!(init, InitialCondition::BlowupProfile { .. });
        if kind == Kind::VerifyBlowup && model.family != Family::CubicCch {
            return Err(self.at(
                &raw_model.get_ref().family.span(),
                "verify_blowup certifies the cubic model; set family = \"cubic_cch\"",
            ));
        }
        if is_profile && model.family != Family::CubicCch {
            return Err(self.at(&raw_init.span(), "blowup_profile requires family = \"cubic_cch\""));
        }
        if kind == Kind::VerifyBlowup && !model.convective {
            return Err(self.at(&raw_model.span(), "verify_blowup needs the convective term switched on"));
        }
        Ok(())
    }

    fn sweep(&self, kind: Kind, s: &Spanned<RawSweep>, model: &ModelSpec) -> Checked<Vec<f64>> {
        let values = &s.get_ref().values;
        if values.get_ref().is_empty() {
            return Err(self.at(&values.span(), "sweep grid must not be empty"));
        }
        for &v in values.get_ref() {
            let family = match (kind, model.family) {
                (Kind::SweepP, Family::Cch { .. }) => Family::Cch { p: v },
                (Kind::SweepP, Family::Sixth { stability, .. }) => Family::Sixth { stability, p: v },
                (Kind::SweepDelta, Family::Kss { .. }) => Family::Kss { delta: v },
                _ => {
                    return Err(self.at(
                        &s.span(),
                        format!("{kind} does not apply to family {}", model.family.name()),
                    ))
                }
            };
            ModelSpec::new(family, model.half_length)
                .map_err(|e| self.at(&values.span(), format!("sweep value {v}: {e}")))?;
        }
        let mut sorted = values.get_ref().clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(self.at(&values.span(), "sweep values must be distinct"));
        }
        Ok(sorted)
    }
}

/// Model with the swept parameter replaced by `value`.
pub fn swept_model(kind: Kind, base: &ModelSpec, value: f64) -> ModelSpec {
    let family = match (kind, base.family) {
        (Kind::SweepP, Family::Cch { .. }) => Family::Cch { p: value },
        (Kind::SweepP, Family::Sixth { stability, .. }) => Family::Sixth { stability, p: value },
        (Kind::SweepDelta, Family::Kss { .. }) => Family::Kss { delta: value },
        _ => base.family,
    };
    ModelSpec {
        family,
        ..*base
    }
}
