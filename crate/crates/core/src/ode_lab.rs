//! Comparison ODEs for the lifespan lemmas, integrated as equalities
//!
//! ```text
//! LemmaA1:    (t+1)^β f'' + C₁ f' = C₂ f^p / (t+1)
//! LemmaA2:    (t+1)^-1 f'' + C₁ f' = C₂ f^p / ((t+1)(log(t+1)+1))
//! LiZhouBase: h'' + C₁ h' = C₂ h^p
//! ```
//!
//! together with their log-time (`t = e^τ - 1`) and double-log-time
//! (`t = e^{e^τ-1} - 1`) substitutions. Every problem has the shape
//! `a(s) y'' + c(s) y' = k(s) y^p` in its integration variable `s`. In the
//! substituted variables `a(s)` decays like `e^{(β-1)s}` or
//! `e^{-2(e^s-1)}` and the problem is stiff, so those are integrated with an
//! extrapolated linearly implicit Euler scheme in mass-matrix form
//! `diag(1, a) y' = F`, which stays well posed when `a` underflows to zero.
//! Untransformed problems use Dormand-Prince 5(4).

use crate::error::{Error, Result};
use crate::lifespan::{fit_log_lifespans, Regime, ScalingFit};

/// Blow-up threshold on `f`.
pub const BLOWUP_THRESHOLD: f64 = 1e12;

/// A threshold crossing counts as blow-up when `f` doubled within this
/// fraction of the elapsed integration time.
const DOUBLING_FRACTION: f64 = 1e-3;

/// Largest original time `t` integrated before giving up.
pub const HORIZON: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OdeKind {
    LemmaA1,
    LemmaA2,
    LiZhouBase,
}

impl OdeKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().replace(['-', '_', '.'], "").as_str() {
            "lemmaa1" | "a1" => Some(OdeKind::LemmaA1),
            "lemmaa2" | "a2" => Some(OdeKind::LemmaA2),
            "lizhou" | "lizhoubase" => Some(OdeKind::LiZhouBase),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            OdeKind::LemmaA1 => "lemmaA1",
            OdeKind::LemmaA2 => "lemmaA2",
            OdeKind::LiZhouBase => "lizhou",
        }
    }

    /// Fit coordinates of the lifespan law this problem realizes.
    pub fn regime(&self) -> Regime {
        match self {
            OdeKind::LemmaA1 => Regime::CriticalExp,
            OdeKind::LemmaA2 => Regime::CriticalDoubleExp,
            OdeKind::LiZhouBase => Regime::SubcriticalPoly,
        }
    }
}

/// How the integration variable `s` relates to the original time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeVariable {
    /// `s = t`
    Original,
    /// `t = e^s - 1`
    Log,
    /// `t = e^{e^s - 1} - 1`
    DoubleLog,
}

impl TimeVariable {
    /// Original time of `s`; `+∞` once it overflows.
    pub fn to_original(&self, s: f64) -> f64 {
        match self {
            TimeVariable::Original => s,
            TimeVariable::Log => s.exp_m1(),
            TimeVariable::DoubleLog => s.exp_m1().exp_m1(),
        }
    }

    /// `log t` of the original time, finite even when `t` overflows.
    pub fn log_original(&self, s: f64) -> f64 {
        match self {
            TimeVariable::Original => s.ln(),
            // log(e^s - 1) = s + log(1 - e^-s)
            TimeVariable::Log => s + (-(-s).exp()).ln_1p(),
            TimeVariable::DoubleLog => {
                let u = s.exp_m1();
                u + (-(-u).exp()).ln_1p()
            }
        }
    }

    pub fn from_original(&self, t: f64) -> f64 {
        match self {
            TimeVariable::Original => t,
            TimeVariable::Log => t.ln_1p(),
            TimeVariable::DoubleLog => t.ln_1p().ln_1p(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeProblem {
    pub kind: OdeKind,
    /// damping exponent, used by `LemmaA1` only
    pub beta: f64,
    pub c1: f64,
    pub c2: f64,
    pub p: f64,
    /// start of integration, in the integration variable
    pub t0: f64,
    pub f0: f64,
    /// initial slope, in the integration variable
    pub f0p: f64,
    pub variable: TimeVariable,
}

impl OdeProblem {
    /// Problem in the original time with `f(0) = f0`, `f'(0) = 0` and
    /// default coefficients: `C₁ = C₂ = 1` (LiZhouBase), `C₁ = C₂ = 2`
    /// (LemmaA1), `C₁ = 3, C₂ = 1` (LemmaA2). The lemma defaults satisfy the
    /// admissibility conditions of both substitutions at `t₀ = 0`.
    pub fn new(kind: OdeKind, beta: f64, p: f64, f0: f64) -> Self {
        let (c1, c2) = match kind {
            OdeKind::LiZhouBase => (1.0, 1.0),
            OdeKind::LemmaA1 => (2.0, 2.0),
            OdeKind::LemmaA2 => (3.0, 1.0),
        };
        Self { kind, beta, c1, c2, p, t0: 0.0, f0, f0p: 0.0, variable: TimeVariable::Original }
    }

    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if !(self.c1 >= 1.0) {
            bad.push(format!("C1 = {} must be at least 1", self.c1));
        }
        if !(self.c2 > 0.0) {
            bad.push(format!("C2 = {} must be positive", self.c2));
        }
        if !(self.p > 1.0) {
            bad.push(format!("p = {} must exceed 1", self.p));
        }
        if !(self.f0 > 0.0) {
            bad.push(format!("f(t0) = {} must be positive", self.f0));
        }
        if !(self.f0p >= 0.0) {
            bad.push(format!("f'(t0) = {} must be nonnegative", self.f0p));
        }
        if !(self.t0 >= 0.0) || !self.t0.is_finite() {
            bad.push(format!("t0 = {} must be nonnegative", self.t0));
        }
        if self.kind == OdeKind::LemmaA1 && !(-1.0..1.0).contains(&self.beta) {
            bad.push(format!("beta = {} outside [-1, 1)", self.beta));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(bad.join("; ")))
        }
    }

    /// `(a, c, k)` in `a y'' + c y' = k y^p` at `s`.
    pub fn coefficients(&self, s: f64) -> (f64, f64, f64) {
        let (c1, c2) = (self.c1, self.c2);
        match (self.kind, self.variable) {
            (OdeKind::LiZhouBase, _) => (1.0, c1, c2),
            (OdeKind::LemmaA1, TimeVariable::Log) => {
                let a = ((self.beta - 1.0) * s).exp();
                (a, c1 - a, c2)
            }
            (OdeKind::LemmaA2, TimeVariable::DoubleLog) => {
                let w = (-2.0 * s.exp_m1()).exp();
                let a = w * (-s).exp();
                (a, c1 - w - a, c2)
            }
            (OdeKind::LemmaA1, _) => ((s + 1.0).powf(self.beta), c1, c2 / (s + 1.0)),
            (OdeKind::LemmaA2, _) => (1.0 / (s + 1.0), c1, c2 / ((s + 1.0) * (s.ln_1p() + 1.0))),
        }
    }

    /// `diag(1, a) y' = F(s, y)` with `y = (f, f')`.
    fn mass_rhs(&self, s: f64, y: [f64; 2]) -> (f64, [f64; 2]) {
        let (a, c, k) = self.coefficients(s);
        (a, [y[1], k * y[0].abs().powf(self.p) - c * y[1]])
    }

    fn jacobian(&self, s: f64, y: [f64; 2]) -> [[f64; 2]; 2] {
        let (_, c, k) = self.coefficients(s);
        [[0.0, 1.0], [k * self.p * y[0].abs().powf(self.p - 1.0) * y[0].signum(), -c]]
    }

    fn explicit_rhs(&self, s: f64, y: [f64; 2]) -> [f64; 2] {
        let (a, f) = self.mass_rhs(s, y);
        [f[0], f[1] / a]
    }
}

/// Log-time substitution `t = e^τ - 1` of a `LemmaA1` problem.
pub fn substitute_log(problem: &OdeProblem) -> Result<OdeProblem> {
    if problem.kind != OdeKind::LemmaA1 || problem.variable != TimeVariable::Original {
        return Err(Error::InvalidParameter("log substitution applies to LemmaA1 in original time".into()));
    }
    problem.validate()?;
    let tau0 = problem.t0.ln_1p();
    let margin = problem.c1 - ((problem.beta - 1.0) * tau0).exp();
    if !(margin > 0.0) {
        return Err(Error::HypothesisViolation(format!("C1 - exp((beta-1) tau0) = {margin} must be positive")));
    }
    Ok(OdeProblem { t0: tau0, f0p: problem.f0p * (problem.t0 + 1.0), variable: TimeVariable::Log, ..*problem })
}

/// Double-log-time substitution `t = e^{e^τ-1} - 1` of a `LemmaA2` problem.
pub fn substitute_doublelog(problem: &OdeProblem) -> Result<OdeProblem> {
    if problem.kind != OdeKind::LemmaA2 || problem.variable != TimeVariable::Original {
        return Err(Error::InvalidParameter("double-log substitution applies to LemmaA2 in original time".into()));
    }
    problem.validate()?;
    let l = problem.t0.ln_1p();
    let tau0 = l.ln_1p();
    let w = (-2.0 * tau0.exp_m1()).exp();
    let margin = problem.c1 - w - w * (-tau0).exp();
    if !(margin > 0.0) {
        return Err(Error::HypothesisViolation(format!(
            "C1 - exp(-2(e^tau0 - 1)) (1 + exp(-tau0)) = {margin} must be positive"
        )));
    }
    Ok(OdeProblem {
        t0: tau0,
        f0p: problem.f0p * (problem.t0 + 1.0) * (l + 1.0),
        variable: TimeVariable::DoubleLog,
        ..*problem
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    DormandPrince,
    LinearlyImplicit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    /// relative tolerance of the integration and of the bracket width
    pub tol: f64,
    pub threshold: f64,
    pub horizon: f64,
    pub max_steps: usize,
    /// `None` picks Dormand-Prince in original time and the linearly
    /// implicit scheme in substituted variables.
    pub method: Option<Method>,
}

impl OdeOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, threshold: BLOWUP_THRESHOLD, horizon: HORIZON, max_steps: 5_000_000, method: None }
    }
}

/// Blow-up bracket of one integration.
#[derive(Debug, Clone, PartialEq)]
pub struct OdeBlowup {
    pub variable: TimeVariable,
    /// bracket in the integration variable
    pub s_lo: f64,
    pub s_hi: f64,
    /// bracket in original time (`+∞` where not representable)
    pub t_lo: f64,
    pub t_hi: f64,
    /// `log` of the original blow-up time `t_hi`
    pub log_t: f64,
    pub steps: usize,
    pub rejected: usize,
    /// accepted steps after the start with `f' ≤ 0`
    pub slope_violations: usize,
    /// accepted steps after the start with `f'' ≤ 0` (only checked where `a = 1`)
    pub convexity_violations: usize,
}

const DP_C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const DP_B: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const DP_E: [f64; 7] =
    [71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0];

fn dopri_step(prob: &OdeProblem, s: f64, y: [f64; 2], h: f64) -> ([f64; 2], [f64; 2]) {
    let mut k = [[0.0; 2]; 7];
    for i in 0..7 {
        let mut yi = y;
        for (j, kj) in k.iter().enumerate().take(i) {
            for d in 0..2 {
                yi[d] += h * DP_A[i][j] * kj[d];
            }
        }
        k[i] = prob.explicit_rhs(s + DP_C[i] * h, yi);
    }
    let mut out = y;
    let mut err = [0.0; 2];
    for i in 0..7 {
        for d in 0..2 {
            out[d] += h * DP_B[i] * k[i][d];
            err[d] += h * DP_E[i] * k[i][d];
        }
    }
    (out, err)
}

/// Substeps of the extrapolation tableau (harmonic sequence).
const EXTRAPOLATION_STAGES: usize = 4;

/// `n` linearly implicit Euler substeps of `diag(1, a) y' = F` over `h`.
fn linearly_implicit_euler(prob: &OdeProblem, s: f64, y: [f64; 2], h: f64, n: usize) -> [f64; 2] {
    let dt = h / n as f64;
    let mut y = y;
    for i in 1..=n {
        let s1 = s + dt * i as f64;
        let (a, f) = prob.mass_rhs(s1, y);
        let j = prob.jacobian(s1, y);
        // (diag(1, a) - dt J) Δ = dt F
        let m = [[1.0 - dt * j[0][0], -dt * j[0][1]], [-dt * j[1][0], a - dt * j[1][1]]];
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        let r = [dt * f[0], dt * f[1]];
        y[0] += (r[0] * m[1][1] - m[0][1] * r[1]) / det;
        y[1] += (m[0][0] * r[1] - m[1][0] * r[0]) / det;
    }
    y
}

fn extrapolated_step(prob: &OdeProblem, s: f64, y: [f64; 2], h: f64) -> ([f64; 2], [f64; 2]) {
    let mut table: Vec<[f64; 2]> = Vec::with_capacity(EXTRAPOLATION_STAGES);
    let mut err = [0.0; 2];
    for j in 1..=EXTRAPOLATION_STAGES {
        let mut row = vec![linearly_implicit_euler(prob, s, y, h, j)];
        // Aitken-Neville for a first-order method: T_{j,k+1} = T_{j,k} + (T_{j,k} - T_{j-1,k}) / (n_j/n_{j-k} - 1)
        for k in 1..j {
            let ratio = j as f64 / (j - k) as f64 - 1.0;
            let prev = &table[k - 1];
            let cur = row[k - 1];
            row.push([cur[0] + (cur[0] - prev[0]) / ratio, cur[1] + (cur[1] - prev[1]) / ratio]);
        }
        if j == EXTRAPOLATION_STAGES {
            let best = row[j - 1];
            let lower = row[j - 2];
            err = [best[0] - lower[0], best[1] - lower[1]];
        }
        table = row;
    }
    (table[EXTRAPOLATION_STAGES - 1], err)
}

struct Attempt {
    y: [f64; 2],
    err_norm: f64,
}

fn attempt(prob: &OdeProblem, method: Method, s: f64, y: [f64; 2], h: f64, tol: f64) -> Option<Attempt> {
    let (y_new, err) = match method {
        Method::DormandPrince => dopri_step(prob, s, y, h),
        Method::LinearlyImplicit => extrapolated_step(prob, s, y, h),
    };
    if !(y_new[0].is_finite() && y_new[1].is_finite()) || !(y_new[0] > 0.0) {
        return None;
    }
    let floor = 1e-6 * prob.f0;
    let err_norm = (0..2).map(|d| err[d].abs() / (tol * y[d].abs().max(y_new[d].abs()).max(floor))).fold(0.0, f64::max);
    Some(Attempt { y: y_new, err_norm })
}

fn order(method: Method) -> f64 {
    match method {
        Method::DormandPrince => 5.0,
        Method::LinearlyImplicit => EXTRAPOLATION_STAGES as f64,
    }
}

struct Crossing {
    s_lo: f64,
    y_lo: [f64; 2],
    s_hi: f64,
    steps: usize,
    rejected: usize,
    slope_violations: usize,
    convexity_violations: usize,
}

/// Adaptive integration from `(s, y)` until `y[0] ≥ threshold` (confirmed
/// by a doubling within the last ten accepted steps) or `s_max`.
#[allow(clippy::too_many_arguments)]
fn integrate_until_crossing(
    prob: &OdeProblem,
    method: Method,
    opts: &OdeOptions,
    mut s: f64,
    mut y: [f64; 2],
    s_max: f64,
    h_max: f64,
    confirm: bool,
) -> Result<Option<Crossing>> {
    let s_start = prob.t0;
    let mut h = (1e-3 * (1.0 + s.abs())).min(h_max);
    // (s, f) after every accepted step
    let mut history: Vec<(f64, f64)> = vec![(s, y[0])];
    let (mut steps, mut rejected, mut slope_violations, mut convexity_violations) = (0, 0, 0, 0);
    while s < s_max {
        if steps + rejected >= opts.max_steps {
            return Err(Error::NonConvergent(format!("ODE step budget exhausted at s = {s}")));
        }
        let h_try = h.min(s_max - s);
        let Some(att) = attempt(prob, method, s, y, h_try, opts.tol).filter(|a| a.err_norm <= 1.0) else {
            rejected += 1;
            h = 0.25 * h_try;
            if h < 1e-15 * (1.0 + s.abs()) {
                return Err(Error::NonConvergent(format!("ODE step size underflow at s = {s}")));
            }
            continue;
        };
        let s_new = s + h_try;
        steps += 1;
        if att.y[1] <= 0.0 && s_new > s_start {
            slope_violations += 1;
        }
        let (a, c, k) = prob.coefficients(s_new);
        if a == 1.0 && k * att.y[0].powf(prob.p) - c * att.y[1] <= 0.0 {
            convexity_violations += 1;
        }
        history.push((s_new, att.y[0]));
        let fac = 0.9 * att.err_norm.max(1e-10).powf(-1.0 / order(method));
        h = (h_try * fac.clamp(0.2, 4.0)).min(h_max);
        if att.y[0] >= opts.threshold {
            // the last doubling must be short against the elapsed time
            let doubled_at = history.iter().rev().find(|(_, v)| *v <= 0.5 * att.y[0]).map(|(t, _)| *t);
            let local = doubled_at.map_or(false, |t| s_new - t <= DOUBLING_FRACTION * (s_new - s_start + 1.0));
            if !confirm || local {
                return Ok(Some(Crossing {
                    s_lo: s,
                    y_lo: y,
                    s_hi: s_new,
                    steps,
                    rejected,
                    slope_violations,
                    convexity_violations,
                }));
            }
        }
        s = s_new;
        y = att.y;
    }
    Ok(None)
}

pub fn integrate_blowup(problem: &OdeProblem, tol: f64) -> Result<OdeBlowup> {
    integrate_blowup_with(problem, &OdeOptions::with_tol(tol))
}

/// Integrates to `f ≥ threshold` and narrows the bracket until its width in
/// the integration variable is at most `tol` relative.
pub fn integrate_blowup_with(problem: &OdeProblem, opts: &OdeOptions) -> Result<OdeBlowup> {
    problem.validate()?;
    if !(opts.tol > 0.0 && opts.tol < 1.0) {
        return Err(Error::InvalidParameter(format!("tolerance {} must lie in (0, 1)", opts.tol)));
    }
    let method = opts.method.unwrap_or(match problem.variable {
        TimeVariable::Original => Method::DormandPrince,
        _ => Method::LinearlyImplicit,
    });
    let s_max = problem.variable.from_original(opts.horizon);
    let y0 = [problem.f0, problem.f0p];
    let first = integrate_until_crossing(problem, method, opts, problem.t0, y0, s_max, f64::INFINITY, true)?
        .ok_or(Error::NoBlowupWithinHorizon { horizon: opts.horizon })?;
    let (steps, rejected) = (first.steps, first.rejected);
    let (slope_violations, convexity_violations) = (first.slope_violations, first.convexity_violations);
    let (mut s_lo, mut y_lo, mut s_hi) = (first.s_lo, first.y_lo, first.s_hi);
    for _ in 0..40 {
        let width = s_hi - s_lo;
        if width <= opts.tol * s_hi.abs().max(1e-300) {
            break;
        }
        match integrate_until_crossing(problem, method, opts, s_lo, y_lo, s_hi, width / 16.0, false)? {
            Some(c) => {
                s_lo = c.s_lo;
                y_lo = c.y_lo;
                s_hi = c.s_hi;
            }
            // threshold reached only at the old upper end
            None => break,
        }
    }
    Ok(OdeBlowup {
        variable: problem.variable,
        s_lo,
        s_hi,
        t_lo: problem.variable.to_original(s_lo),
        t_hi: problem.variable.to_original(s_hi),
        log_t: problem.variable.log_original(s_hi),
        steps,
        rejected,
        slope_violations,
        convexity_violations,
    })
}

/// The form each kind is integrated in for scaling studies: substituted for
/// the lemmas, original time for the base problem.
pub fn study_problem(kind: OdeKind, beta: f64, p: f64, epsilon: f64) -> Result<OdeProblem> {
    let base = OdeProblem::new(kind, beta, p, epsilon);
    match kind {
        OdeKind::LemmaA1 => substitute_log(&base),
        OdeKind::LemmaA2 => substitute_doublelog(&base),
        OdeKind::LiZhouBase => {
            base.validate()?;
            Ok(base)
        }
    }
}

/// One integration per ε; failures are kept per point.
pub fn scaling_points(kind: OdeKind, beta: f64, p: f64, epsilons: &[f64], tol: f64) -> Vec<Result<OdeBlowup>> {
    use rayon::prelude::*;
    epsilons
        .par_iter()
        .map(|&eps| study_problem(kind, beta, p, eps).and_then(|prob| integrate_blowup(&prob, tol)))
        .collect()
}

/// Integrates every ε and fits `log T` (or `log log T`) in the kind's regime.
pub fn scaling_study(kind: OdeKind, beta: f64, p: f64, epsilons: &[f64]) -> Result<ScalingFit> {
    if epsilons.len() < 3 {
        return Err(Error::InsufficientPoints { needed: 3, got: epsilons.len() });
    }
    let samples = scaling_points(kind, beta, p, epsilons, 1e-9)
        .into_iter()
        .zip(epsilons)
        .map(|(r, &eps)| r.map(|b| (eps, b.log_t)))
        .collect::<Result<Vec<_>>>()?;
    fit_log_lifespans(&samples, kind.regime(), p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn substitutions_start_at_zero() {
        let a1 = substitute_log(&OdeProblem::new(OdeKind::LemmaA1, 0.5, 3.0, 0.3)).unwrap();
        assert_eq!(a1.t0, 0.0);
        assert_eq!(a1.f0p, 0.0);
        let a2 = substitute_doublelog(&OdeProblem::new(OdeKind::LemmaA2, 0.0, 3.0, 0.3)).unwrap();
        assert_eq!(a2.t0, 0.0);
        assert!((TimeVariable::DoubleLog.to_original(1.0) - 4.574_941_524_760_88).abs() < 1e-12);
    }

    #[test]
    fn slope_maps_by_the_chain_rule() {
        let mut base = OdeProblem::new(OdeKind::LemmaA1, 0.5, 3.0, 0.3);
        base.t0 = 3.0;
        base.f0p = 0.5;
        let sub = substitute_log(&base).unwrap();
        assert!((sub.t0 - 4f64.ln()).abs() < 1e-15);
        assert_eq!(sub.f0p, 2.0);
    }

    #[test]
    fn inadmissible_start_is_rejected() {
        let mut base = OdeProblem::new(OdeKind::LemmaA1, 0.5, 3.0, 0.3);
        base.c1 = 1.0;
        assert!(matches!(substitute_log(&base), Err(Error::HypothesisViolation(_))));
        let mut base = OdeProblem::new(OdeKind::LemmaA2, 0.0, 3.0, 0.3);
        base.c1 = 2.0;
        assert!(matches!(substitute_doublelog(&base), Err(Error::HypothesisViolation(_))));
        assert!(substitute_log(&OdeProblem::new(OdeKind::LemmaA2, 0.0, 3.0, 0.3)).is_err());
    }

    #[test]
    fn log_time_is_finite_beyond_overflow() {
        let v = TimeVariable::DoubleLog;
        assert_eq!(v.to_original(8.0), f64::INFINITY);
        assert!((v.log_original(8.0) - 8f64.exp_m1()).abs() < 1e-9);
        assert!((TimeVariable::Log.log_original(2.0) - 2f64.exp_m1().ln()).abs() < 1e-14);
    }

    #[test]
    fn invalid_problems() {
        let mut p = OdeProblem::new(OdeKind::LiZhouBase, 0.0, 3.0, 0.1);
        p.f0 = 0.0;
        p.p = 1.0;
        let Err(Error::InvalidParameter(msg)) = p.validate() else { panic!() };
        assert!(msg.contains("p = 1") && msg.contains("f(t0)"));
    }

    #[test]
    fn base_problem_blows_up() {
        let prob = OdeProblem::new(OdeKind::LiZhouBase, 0.0, 3.0, 1.0);
        let b = integrate_blowup(&prob, 1e-10).unwrap();
        assert!(b.t_hi > b.t_lo && b.t_hi - b.t_lo <= 1e-10 * b.t_hi);
        assert_eq!(b.slope_violations, 0);
        assert_eq!(b.convexity_violations, 0);
    }
}
