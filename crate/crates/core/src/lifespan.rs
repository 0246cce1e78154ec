//! Lifespan estimation: blow-up bracketing, ε-sweeps and scaling-law fits.

use rayon::prelude::*;

use crate::damping::AuxFunctions;
use crate::error::{Error, Result};
use crate::solver::{
    init_state, run_from, BlowupDetector, BlowupReason, CapacityPolicy, Detection, InitialData, ProblemParams,
    RunOptions, RunOutcome,
};

/// Environment variable overriding the size of the sweep worker pool.
pub const WORKERS_ENV: &str = "DAMPWAVE_WORKERS";

/// Relative spread of `T` over the alternate thresholds above which a record
/// is flagged.
pub const INSENSITIVITY_LIMIT: f64 = 0.02;

/// Checkpoints kept during the main run; only the recent ones matter for the
/// refinement rerun.
const CHECKPOINTS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    ThresholdCrossed,
    DtUnderflow,
    Overflow,
    NoBlowupWithinHorizon,
    Failed,
}

impl Termination {
    pub fn name(&self) -> &'static str {
        match self {
            Termination::ThresholdCrossed => "ThresholdCrossed",
            Termination::DtUnderflow => "DtUnderflow",
            Termination::Overflow => "Overflow",
            Termination::NoBlowupWithinHorizon => "NoBlowupWithinHorizon",
            Termination::Failed => "Failed",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            Termination::ThresholdCrossed,
            Termination::DtUnderflow,
            Termination::Overflow,
            Termination::NoBlowupWithinHorizon,
            Termination::Failed,
        ]
        .into_iter()
        .find(|t| t.name() == s)
    }
}

impl From<BlowupReason> for Termination {
    fn from(r: BlowupReason) -> Self {
        match r {
            BlowupReason::ThresholdCrossed => Termination::ThresholdCrossed,
            BlowupReason::DtUnderflow => Termination::DtUnderflow,
            BlowupReason::Overflow => Termination::Overflow,
        }
    }
}

/// Blow-up bracket `(t_lo, t_hi]` for one ε.
#[derive(Debug, Clone, PartialEq)]
pub struct LifespanRecord {
    pub epsilon: f64,
    pub t_lo: f64,
    /// `+∞` when no blow-up was seen before the horizon.
    pub t_hi: f64,
    pub reason: Termination,
    pub theta_used: f64,
    pub insensitivity_ratio: Option<f64>,
    pub dt_final: f64,
    /// Excluded from fits.
    pub flagged: bool,
    pub note: Option<String>,
}

impl LifespanRecord {
    fn no_blowup(epsilon: f64, horizon: f64, theta: f64) -> Self {
        Self {
            epsilon,
            t_lo: horizon,
            t_hi: f64::INFINITY,
            reason: Termination::NoBlowupWithinHorizon,
            theta_used: theta,
            insensitivity_ratio: None,
            dt_final: f64::NAN,
            flagged: true,
            note: Some(format!("no blow-up before t = {horizon}")),
        }
    }

    fn failed(epsilon: f64, theta: f64, err: &Error) -> Self {
        Self {
            epsilon,
            t_lo: f64::NAN,
            t_hi: f64::NAN,
            reason: Termination::Failed,
            theta_used: theta,
            insensitivity_ratio: None,
            dt_final: f64::NAN,
            flagged: true,
            note: Some(err.to_string()),
        }
    }

    pub fn is_blowup(&self) -> bool {
        matches!(self.reason, Termination::ThresholdCrossed | Termination::DtUnderflow | Termination::Overflow)
    }

    pub fn usable_for_fit(&self) -> bool {
        self.is_blowup() && !self.flagged && self.t_hi.is_finite() && self.t_hi > 0.0
    }

    /// The detection time `t_hi`.
    pub fn lifespan(&self) -> f64 {
        self.t_hi
    }
}

fn checkpoint_options() -> RunOptions {
    RunOptions {
        snapshot_stride: 8,
        snapshot_capacity: CapacityPolicy::KeepLatest(CHECKPOINTS),
        record_trajectory: false,
    }
}

/// Runs to blow-up, then reruns the final window from the last checkpoint
/// below every threshold with a quarter of the step, watching `θ` and the two
/// alternate thresholds at once.
pub fn estimate_lifespan(
    params: &ProblemParams,
    data: &InitialData,
    aux: &AuxFunctions,
    detector: &BlowupDetector,
) -> Result<LifespanRecord> {
    if !params.nonlinearity_on {
        return Err(Error::InvalidParameter("lifespan estimation needs the nonlinearity on".into()));
    }
    let state = init_state(params, data, aux)?;
    detector.validate(state.max_abs_u())?;
    let (main, _) = run_from(params, state, &[detector.theta], detector.confirm_doubling, checkpoint_options())?;
    let coarse = match main.outcome {
        RunOutcome::Completed { t_end } => return Err(Error::NoBlowupWithinHorizon { horizon: t_end }),
        RunOutcome::Blowup(d) => d,
    };

    let (alt_lo, alt_hi) = detector.insensitivity_span;
    let thetas = [detector.theta, alt_lo, alt_hi];
    let safe_level = 0.5 * thetas.iter().cloned().fold(f64::INFINITY, f64::min);
    let checkpoint = main
        .store
        .entries
        .iter()
        .rev()
        .find(|s| s.t < coarse.t_hi && s.max_abs_u() <= safe_level)
        .unwrap_or(&main.store.entries[0]);
    let mut restart = checkpoint.to_state();
    restart.dt_current = 0.25 * restart.dt_current;
    let (fine, crossings) = run_from(params, restart, &thetas, detector.confirm_doubling, checkpoint_options())?;

    let record = |d: Detection, ratio: Option<f64>, note: Option<String>| {
        let width_ok = d.t_hi - d.t_lo <= 5.0 * d.dt_final * (1.0 + 1e-12);
        let ratio_ok = ratio.map_or(false, |r| r <= INSENSITIVITY_LIMIT);
        LifespanRecord {
            epsilon: params.epsilon,
            t_lo: d.t_lo,
            t_hi: d.t_hi,
            reason: d.reason.into(),
            theta_used: detector.theta,
            insensitivity_ratio: ratio,
            dt_final: d.dt_final,
            flagged: !(width_ok && ratio_ok),
            note,
        }
    };

    match fine.outcome {
        RunOutcome::Completed { .. } => {
            Ok(record(coarse, None, Some("refinement rerun reached the horizon without blow-up".into())))
        }
        RunOutcome::Blowup(_) => {
            let primary = crossings[0].expect("thresholds resolved on blow-up");
            let t = primary.t_hi;
            let ratio = crossings[1..].iter().flatten().map(|d| (d.t_hi - t).abs() / t).fold(0.0, f64::max);
            Ok(record(primary, Some(ratio), None))
        }
    }
}

fn worker_count() -> Option<usize> {
    std::env::var(WORKERS_ENV).ok()?.trim().parse().ok().filter(|&n| n > 0)
}

/// One [`estimate_lifespan`] per ε, in parallel. Records come back in the
/// order of `epsilons`; failures are recorded and flagged.
pub fn sweep(
    template: &ProblemParams,
    epsilons: &[f64],
    data: &InitialData,
    aux: &AuxFunctions,
    detector: &BlowupDetector,
) -> Result<Vec<LifespanRecord>> {
    if let Some(bad) = epsilons.iter().find(|e| !(**e > 0.0)) {
        return Err(Error::InvalidParameter(format!("epsilon {bad} must be positive")));
    }
    if epsilons.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidParameter("epsilons must be strictly decreasing".into()));
    }
    let one = |&eps: &f64| {
        let params = template.with_epsilon(eps);
        match estimate_lifespan(&params, data, aux, detector) {
            Ok(r) => r,
            Err(Error::NoBlowupWithinHorizon { horizon }) => LifespanRecord::no_blowup(eps, horizon, detector.theta),
            Err(e) => LifespanRecord::failed(eps, detector.theta, &e),
        }
    };
    let records = match worker_count() {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("worker pool: {e}")))?
            .install(|| epsilons.par_iter().map(one).collect()),
        None => epsilons.par_iter().map(one).collect(),
    };
    Ok(records)
}

/// `T` non-increasing in ε over the blow-up records (non-strict).
pub fn is_monotone(records: &[LifespanRecord]) -> bool {
    let mut pts: Vec<(f64, f64)> =
        records.iter().filter(|r| r.is_blowup()).map(|r| (r.epsilon, r.lifespan())).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts.windows(2).all(|w| w[1].1 <= w[0].1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `(log ε, log T)`
    SubcriticalPoly,
    /// `(ε^-(p-1), log T)`
    CriticalExp,
    /// `(ε^-(p-1), log log T)`
    CriticalDoubleExp,
}

impl Regime {
    pub fn name(&self) -> &'static str {
        match self {
            Regime::SubcriticalPoly => "SubcriticalPoly",
            Regime::CriticalExp => "CriticalExp",
            Regime::CriticalDoubleExp => "CriticalDoubleExp",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        let key: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_lowercase();
        match key.as_str() {
            "subcriticalpoly" | "subcritical" | "poly" => Some(Regime::SubcriticalPoly),
            "criticalexp" | "exp" => Some(Regime::CriticalExp),
            "criticaldoubleexp" | "doubleexp" => Some(Regime::CriticalDoubleExp),
            _ => None,
        }
    }

    /// Transformed coordinates from `(ε, log T)`.
    pub fn transform(&self, p: f64, epsilon: f64, log_t: f64) -> (f64, f64) {
        match self {
            Regime::SubcriticalPoly => (epsilon.ln(), log_t),
            Regime::CriticalExp => (epsilon.powf(-(p - 1.0)), log_t),
            Regime::CriticalDoubleExp => (epsilon.powf(-(p - 1.0)), log_t.ln()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingFit {
    pub regime: Regime,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

impl ScalingFit {
    pub fn n_points(&self) -> usize {
        self.xs.len()
    }
}

/// Least-squares line through `(x, y)`; points are sorted first so the
/// result does not depend on their order.
pub fn fit_line(regime: Regime, mut pts: Vec<(f64, f64)>) -> Result<ScalingFit> {
    pts.retain(|(x, y)| x.is_finite() && y.is_finite());
    if pts.len() < 3 {
        return Err(Error::InsufficientPoints { needed: 3, got: pts.len() });
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("all abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r_squared = if syy == 0.0 { 1.0 } else { (1.0 - ss_res / syy).clamp(0.0, 1.0) };
    Ok(ScalingFit {
        regime,
        xs: pts.iter().map(|p| p.0).collect(),
        ys: pts.iter().map(|p| p.1).collect(),
        slope,
        intercept,
        r_squared,
    })
}

/// Fits `(ε, log T)` samples in the regime's coordinates.
pub fn fit_log_lifespans(samples: &[(f64, f64)], regime: Regime, p: f64) -> Result<ScalingFit> {
    let pts = samples.iter().map(|&(e, lt)| regime.transform(p, e, lt)).collect();
    fit_line(regime, pts)
}

/// Fits the usable records (unflagged blow-ups); `p` enters the critical
/// abscissa `ε^-(p-1)`.
pub fn fit_scaling(records: &[LifespanRecord], regime: Regime, p: f64) -> Result<ScalingFit> {
    let samples: Vec<(f64, f64)> =
        records.iter().filter(|r| r.usable_for_fit()).map(|r| (r.epsilon, r.lifespan().ln())).collect();
    if samples.len() < 3 {
        return Err(Error::InsufficientPoints { needed: 3, got: samples.len() });
    }
    fit_log_lifespans(&samples, regime, p)
}
