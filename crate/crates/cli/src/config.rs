//! TOML experiment configuration.
//!
//! ```toml
//! [damping]
//! beta = 0.5
//!
//! [problem]
//! n = 1
//! p = 3.0
//! epsilon = 0.6            # simulate
//! epsilons = [0.8, 0.7]    # sweep
//! t_end = 500.0
//!
//! [grid]
//! L = 512.0
//! N = 8192
//!
//! [run]
//! stages = ["aux", "sweep", "fit"]
//! ```
//!
//! Every section is optional at parse time; each stage checks that the
//! sections it reads are present.

use std::fmt;

use dampwave::damping::DampingModel;
use dampwave::heat_kernel::Grid;
use dampwave::lifespan::Regime;
use dampwave::ode_lab::OdeKind;
use dampwave::solver::{BlowupDetector, InitialData, ProblemParams, Shape};
use serde::{Deserialize, Serialize};

pub const STAGES: [&str; 6] = ["aux", "simulate", "sweep", "fit", "identity", "odelab"];

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    Parse { line: usize, message: String },
    Validation(Vec<String>),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Parse { line, message } => write!(f, "parse error at line {line}: {message}"),
            ConfigError::Validation(list) => {
                write!(f, "invalid configuration:")?;
                for v in list {
                    write!(f, "\n  - {v}")?;
                }
                Ok(())
            }
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub damping: Option<DampingSection>,
    pub problem: Option<ProblemSection>,
    pub grid: Option<GridSection>,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub detector: DetectorSection,
    #[serde(default)]
    pub output: OutputSection,
    pub aux: Option<AuxSection>,
    pub identity: Option<IdentitySection>,
    pub fit: Option<FitSection>,
    pub odelab: Option<OdelabSection>,
    pub run: Option<RunSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DampingSection {
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    #[serde(default = "one")]
    pub n: usize,
    pub p: f64,
    pub epsilon: Option<f64>,
    pub epsilons: Option<Vec<f64>>,
    pub t_end: f64,
    #[serde(default = "yes")]
    pub nonlinearity: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(rename = "L")]
    pub half_width: f64,
    #[serde(rename = "N")]
    pub points: usize,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    #[serde(default = "default_shape")]
    pub shape: String,
    #[serde(default = "one_f")]
    pub u0: f64,
    #[serde(default)]
    pub u1: f64,
    #[serde(default = "one_f")]
    pub width: f64,
    #[serde(default)]
    pub offset: [f64; 2],
    #[serde(default)]
    pub require_positive_mass: bool,
}

impl Default for DataSection {
    fn default() -> Self {
        Self { shape: default_shape(), u0: 1.0, u1: 0.0, width: 1.0, offset: [0.0; 2], require_positive_mass: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSection {
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default = "default_spans")]
    pub spans: [f64; 2],
    #[serde(default = "yes")]
    pub confirm_doubling: bool,
}

impl Default for DetectorSection {
    fn default() -> Self {
        Self { theta: default_theta(), spans: default_spans(), confirm_doubling: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub dir: String,
    #[serde(default = "default_stride")]
    pub snapshot_stride: usize,
    /// write snapshot binaries from `simulate`
    #[serde(default = "yes")]
    pub snapshots: bool,
    #[serde(default)]
    pub svg: bool,
    /// Every pipeline is seedless; the flag is recorded in the manifest.
    #[serde(default = "yes")]
    pub deterministic: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: default_dir(), snapshot_stride: default_stride(), snapshots: true, svg: false, deterministic: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuxSection {
    pub t_max: Option<f64>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentitySection {
    pub times: Vec<f64>,
    /// snapshot directory; defaults to the one written by `simulate`
    pub run: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    /// inferred from `n`, `p` and `beta` when absent
    pub regime: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OdelabSection {
    pub kind: String,
    #[serde(default)]
    pub beta: f64,
    pub p: f64,
    pub epsilons: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub stages: Vec<String>,
}

fn one() -> usize {
    1
}
fn one_f() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}
fn default_cfl() -> f64 {
    0.5
}
fn default_shape() -> String {
    "gaussian".into()
}
fn default_theta() -> f64 {
    1e6
}
fn default_spans() -> [f64; 2] {
    [1e4, 1e8]
}
fn default_dir() -> String {
    "out".into()
}
fn default_stride() -> usize {
    8
}
fn default_samples() -> usize {
    200
}
fn default_tol() -> f64 {
    1e-10
}

pub fn parse_shape(s: &str) -> Option<Shape> {
    match s.to_ascii_lowercase().as_str() {
        "gaussian" | "gaussianbump" => Some(Shape::GaussianBump),
        "compact" | "compactbump" => Some(Shape::CompactBump),
        "uniform" => Some(Shape::Uniform),
        _ => None,
    }
}

/// Largest stable `cfl` for RK4 with a spectral Laplacian in `n` dimensions.
pub fn max_cfl(n: usize) -> f64 {
    2.0 * 2f64.sqrt() / (std::f64::consts::PI * (n as f64).sqrt())
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Parses and validates `text`, reporting every violated invariant at once.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
        line: e.span().map_or(1, |s| line_of(text, s.start)),
        message: e.message().to_string(),
    })?;
    let violations = cfg.violations();
    if violations.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigError::Validation(violations))
    }
}

fn check_epsilons(list: &[f64], what: &str, bad: &mut Vec<String>) {
    if list.is_empty() {
        bad.push(format!("{what} must not be empty"));
    }
    if let Some(e) = list.iter().find(|e| !(**e > 0.0) || !e.is_finite()) {
        bad.push(format!("{what}: {e} must be positive"));
    }
    if list.windows(2).any(|w| !(w[1] < w[0])) {
        bad.push(format!("{what} must be strictly decreasing"));
    }
}

/// Positive, finite and strictly decreasing, or the list of complaints.
pub fn check_decreasing(list: &[f64], what: &str) -> Result<(), Vec<String>> {
    let mut bad = Vec::new();
    check_epsilons(list, what, &mut bad);
    if bad.is_empty() {
        Ok(())
    } else {
        Err(bad)
    }
}

impl ExperimentConfig {
    fn violations(&self) -> Vec<String> {
        let mut bad = Vec::new();
        if let Some(d) = &self.damping {
            if !(-1.0..1.0).contains(&d.beta) {
                bad.push(format!("beta = {} outside the admissible range [-1, 1)", d.beta));
            }
        }
        if let Some(p) = &self.problem {
            if p.n != 1 && p.n != 2 {
                bad.push(format!("n = {} must be 1 or 2", p.n));
            }
            if !(p.p > 1.0) {
                bad.push(format!("p must exceed 1 (got {})", p.p));
            }
            if !(p.t_end > 0.0) || !p.t_end.is_finite() {
                bad.push(format!("t_end = {} must be positive", p.t_end));
            }
            if let Some(e) = p.epsilon {
                if !(e >= 0.0) || !e.is_finite() {
                    bad.push(format!("epsilon = {e} must be nonnegative"));
                }
            }
            if let Some(list) = &p.epsilons {
                check_epsilons(list, "epsilons", &mut bad);
            }
        }
        if let Some(g) = &self.grid {
            if !(g.half_width > 0.0) || !g.half_width.is_finite() {
                bad.push(format!("L = {} must be positive", g.half_width));
            }
            if g.points < 32 || !g.points.is_power_of_two() {
                bad.push(format!("N = {} must be a power of two >= 32", g.points));
            }
            let n = self.problem.as_ref().map_or(1, |p| p.n);
            if !(g.cfl > 0.0 && g.cfl <= max_cfl(n)) {
                bad.push(format!("cfl = {} must lie in (0, {:.3}] for n = {n}", g.cfl, max_cfl(n)));
            }
        }
        let d = &self.data;
        if parse_shape(&d.shape).is_none() {
            bad.push(format!("data.shape = {:?} must be gaussian, compact or uniform", d.shape));
        }
        if !(d.width > 0.0) {
            bad.push(format!("data.width = {} must be positive", d.width));
        }
        if !d.u0.is_finite() || !d.u1.is_finite() || d.offset.iter().any(|o| !o.is_finite()) {
            bad.push("data amplitudes and offset must be finite".into());
        }
        let det = &self.detector;
        if !(det.theta > 0.0) || !det.theta.is_finite() {
            bad.push(format!("theta = {} must be positive", det.theta));
        }
        if !(det.spans[0] > 0.0 && det.spans[1] > det.spans[0]) || !det.spans[1].is_finite() {
            bad.push(format!("detector.spans = {:?} must be increasing and positive", det.spans));
        }
        if self.output.snapshot_stride == 0 {
            bad.push("snapshot_stride must be at least 1".into());
        }
        if self.output.dir.is_empty() {
            bad.push("output.dir must not be empty".into());
        }
        if let Some(a) = &self.aux {
            if let Some(t) = a.t_max {
                if !(t > 0.0) || !t.is_finite() {
                    bad.push(format!("aux.t_max = {t} must be positive"));
                }
            }
            if a.samples < 16 {
                bad.push(format!("aux.samples = {} must be at least 16", a.samples));
            }
            if !(a.tol > 0.0 && a.tol < 1e-3) {
                bad.push(format!("aux.tol = {} must lie in (0, 1e-3)", a.tol));
            }
        }
        if let Some(i) = &self.identity {
            if i.times.is_empty() {
                bad.push("identity.times must not be empty".into());
            }
            if i.times.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
                bad.push("identity.times must be nonnegative".into());
            }
        }
        if let Some(f) = &self.fit {
            if let Some(r) = &f.regime {
                if Regime::parse(r).is_none() {
                    bad.push(format!("fit.regime = {r:?} is not SubcriticalPoly, CriticalExp or CriticalDoubleExp"));
                }
            }
        }
        if let Some(o) = &self.odelab {
            if OdeKind::parse(&o.kind).is_none() {
                bad.push(format!("odelab.kind = {:?} must be lemmaA1, lemmaA2 or lizhou", o.kind));
            }
            if !(-1.0..1.0).contains(&o.beta) {
                bad.push(format!("odelab.beta = {} outside the admissible range [-1, 1)", o.beta));
            }
            if !(o.p > 1.0) {
                bad.push(format!("odelab.p must exceed 1 (got {})", o.p));
            }
            check_epsilons(&o.epsilons, "odelab.epsilons", &mut bad);
        }
        if let Some(r) = &self.run {
            if r.stages.is_empty() {
                bad.push("run.stages must not be empty".into());
            }
            for s in &r.stages {
                if !STAGES.contains(&s.as_str()) {
                    bad.push(format!("unknown stage {s:?}; expected one of {}", STAGES.join(", ")));
                }
            }
            for s in &r.stages {
                bad.extend(self.missing_for(s));
            }
        }
        bad
    }

    /// Sections (or fields) stage `stage` needs but the config lacks.
    pub fn missing_for(&self, stage: &str) -> Vec<String> {
        let mut missing = Vec::new();
        let mut need = |ok: bool, what: &str| {
            if !ok {
                missing.push(format!("stage {stage} needs {what}"));
            }
        };
        match stage {
            "aux" => {
                need(self.damping.is_some(), "[damping]");
                need(
                    self.aux.as_ref().and_then(|a| a.t_max).is_some() || self.problem.is_some(),
                    "aux.t_max or [problem].t_end",
                );
            }
            "simulate" | "sweep" => {
                need(self.damping.is_some(), "[damping]");
                need(self.grid.is_some(), "[grid]");
                need(self.problem.is_some(), "[problem]");
                if let Some(p) = &self.problem {
                    if stage == "simulate" {
                        need(p.epsilon.is_some(), "problem.epsilon");
                    } else {
                        need(p.epsilons.is_some(), "problem.epsilons");
                    }
                }
            }
            "fit" => {
                let explicit = self.fit.as_ref().and_then(|f| f.regime.as_ref()).is_some();
                need(
                    explicit || (self.damping.is_some() && self.problem.is_some()),
                    "fit.regime or [damping] and [problem]",
                );
            }
            "identity" => {
                need(self.identity.is_some(), "[identity]");
            }
            "odelab" => need(self.odelab.is_some(), "[odelab]"),
            _ => {}
        }
        missing
    }

    fn require(&self, stage: &str) -> Result<(), ConfigError> {
        let missing = self.missing_for(stage);
        if missing.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Validation(missing))
        }
    }

    pub fn stages(&self) -> Vec<String> {
        self.run.as_ref().map(|r| r.stages.clone()).unwrap_or_default()
    }

    pub fn model(&self) -> Result<DampingModel, ConfigError> {
        let beta = self.damping.as_ref().ok_or_else(|| ConfigError::Validation(vec!["missing [damping]".into()]))?.beta;
        DampingModel::new(beta).map_err(|e| ConfigError::Validation(vec![e.to_string()]))
    }

    /// Problem parameters for `simulate` / `sweep` (with `epsilon` = the
    /// configured single value, or 0 when only a list is given).
    pub fn problem_params(&self, stage: &str) -> Result<ProblemParams, ConfigError> {
        self.require(stage)?;
        let (prob, g) = (self.problem.as_ref().expect("required"), self.grid.as_ref().expect("required"));
        let wrap = |e: dampwave::Error| ConfigError::Validation(vec![e.to_string()]);
        let grid = Grid::new(prob.n, g.half_width, g.points).map_err(wrap)?;
        let mut params =
            ProblemParams::new(prob.p, prob.epsilon.unwrap_or(0.0), self.model()?, grid, prob.t_end).map_err(wrap)?;
        params.cfl = g.cfl;
        params.nonlinearity_on = prob.nonlinearity;
        Ok(params)
    }

    pub fn initial_data(&self) -> InitialData {
        let d = &self.data;
        InitialData {
            shape: parse_shape(&d.shape).expect("validated"),
            amplitude_u0: d.u0,
            amplitude_u1: d.u1,
            width: d.width,
            offset: d.offset,
            require_positive_mass: d.require_positive_mass,
        }
    }

    pub fn detector(&self) -> BlowupDetector {
        let d = &self.detector;
        BlowupDetector {
            theta: d.theta,
            confirm_doubling: d.confirm_doubling,
            insensitivity_span: (d.spans[0], d.spans[1]),
        }
    }

    /// `fit.regime`, or the regime the problem's `(n, p, β)` falls in.
    pub fn regime(&self) -> Result<Regime, ConfigError> {
        if let Some(r) = self.fit.as_ref().and_then(|f| f.regime.as_ref()) {
            return Ok(Regime::parse(r).expect("validated"));
        }
        self.require("fit")?;
        let prob = self.problem.as_ref().expect("required");
        let beta = self.damping.as_ref().expect("required").beta;
        infer_regime(prob.n, prob.p, beta).map_err(|m| ConfigError::Validation(vec![m]))
    }
}

/// Lifespan law for `(n, p, β)`: subcritical below the Fujita exponent,
/// exponential at it, double exponential at it when `β = -1`.
pub fn infer_regime(n: usize, p: f64, beta: f64) -> Result<Regime, String> {
    let fujita = 1.0 + 2.0 / n as f64;
    if p < fujita - 1e-12 {
        Ok(Regime::SubcriticalPoly)
    } else if (p - fujita).abs() <= 1e-12 {
        Ok(if beta == -1.0 { Regime::CriticalDoubleExp } else { Regime::CriticalExp })
    } else {
        Err(format!("p = {p} is above the Fujita exponent {fujita}: no blow-up law to fit; set fit.regime"))
    }
}
