//! Time integration of `u'' - Δu + b(t) u' = |u|^p` on a periodic box.
//!
//! The first-order system `u' = v`, `v' = Δu - b(t) v + |u|^p` is advanced by
//! classical RK4 with a Fourier-spectral Laplacian. The step is
//! `min(cfl·dx, controller cap)`; the controller halves the cap whenever
//! `max|u|` doubles within ten accepted steps.

use crate::damping::{AuxFunctions, DampingModel};
use crate::error::{Error, Result};
use crate::heat_kernel::Grid;
use crate::spectral::Spectral;

/// Smallest step the growth controller may reach before giving up.
pub const DT_FLOOR: f64 = 1e-8;

/// Window (in accepted steps) of the growth controller.
pub const GROWTH_WINDOW: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemParams {
    pub p: f64,
    /// Hölder conjugate `p/(p-1)`
    pub p_prime: f64,
    /// Fujita exponent `1 + 2/n`
    pub p_fujita: f64,
    pub epsilon: f64,
    pub model: DampingModel,
    pub grid: Grid,
    pub t_end: f64,
    pub cfl: f64,
    pub nonlinearity_on: bool,
    /// Drops the damping term entirely; only used for undamped wave checks.
    pub damping_on: bool,
}

impl ProblemParams {
    pub fn new(p: f64, epsilon: f64, model: DampingModel, grid: Grid, t_end: f64) -> Result<Self> {
        if !(p > 1.0) {
            return Err(Error::InvalidParameter(format!("p = {p} must exceed 1")));
        }
        if !(epsilon >= 0.0) {
            return Err(Error::InvalidParameter(format!("epsilon = {epsilon} must be nonnegative")));
        }
        if !(t_end > 0.0) {
            return Err(Error::InvalidParameter(format!("t_end = {t_end} must be positive")));
        }
        Ok(Self {
            p,
            p_prime: p / (p - 1.0),
            p_fujita: 1.0 + 2.0 / grid.dim as f64,
            epsilon,
            model,
            grid,
            t_end,
            cfl: 0.5,
            nonlinearity_on: true,
            damping_on: true,
        })
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        Self { epsilon, ..self.clone() }
    }

    /// Nominal step `cfl·dx`.
    pub fn dt_nominal(&self) -> f64 {
        self.cfl * self.grid.dx()
    }

    pub fn damping(&self, t: f64) -> f64 {
        if self.damping_on {
            self.model.b(t)
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    /// `exp(-|x-x₀|²/w²)`
    GaussianBump,
    /// `exp(1 - 1/(1 - |x-x₀|²/w²))` inside the ball of radius `w`, zero outside
    CompactBump,
    /// spatially constant profile (reduces the equation to an ODE)
    Uniform,
}

impl Shape {
    pub fn profile(&self, r2: f64, width: f64) -> f64 {
        match self {
            Shape::GaussianBump => (-r2 / (width * width)).exp(),
            Shape::CompactBump => {
                let s = r2 / (width * width);
                if s < 1.0 {
                    (1.0 - 1.0 / (1.0 - s)).exp()
                } else {
                    0.0
                }
            }
            Shape::Uniform => 1.0,
        }
    }
}

/// Unscaled initial data `(u₀, u₁)`; the solver multiplies both by `ε`.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialData {
    pub shape: Shape,
    pub amplitude_u0: f64,
    pub amplitude_u1: f64,
    pub width: f64,
    pub offset: [f64; 2],
    /// Enforce `∫(u₀ + b* u₁) > 0` at initialization.
    pub require_positive_mass: bool,
}

impl InitialData {
    /// `u₀ = A exp(-|x|²/w²)`, `u₁ = 0`.
    pub fn gaussian(amplitude: f64, width: f64) -> Self {
        Self {
            shape: Shape::GaussianBump,
            amplitude_u0: amplitude,
            amplitude_u1: 0.0,
            width,
            offset: [0.0; 2],
            require_positive_mass: false,
        }
    }

    fn profile_field(&self, grid: &Grid) -> Vec<f64> {
        let n = grid.points;
        (0..grid.len())
            .map(|idx| {
                let r2 = match grid.dim {
                    1 => (grid.coord(idx) - self.offset[0]).powi(2),
                    _ => {
                        (grid.coord(idx / n) - self.offset[0]).powi(2) + (grid.coord(idx % n) - self.offset[1]).powi(2)
                    }
                };
                self.shape.profile(r2, self.width)
            })
            .collect()
    }

    /// Samples `(u₀, u₁)` at the grid nodes.
    pub fn sample(&self, grid: &Grid) -> (Vec<f64>, Vec<f64>) {
        let profile = self.profile_field(grid);
        let u0 = profile.iter().map(|p| self.amplitude_u0 * p).collect();
        let u1 = profile.iter().map(|p| self.amplitude_u1 * p).collect();
        (u0, u1)
    }

    /// Discrete `∫(u₀ + b* u₁) dx`.
    pub fn positivity_integral(&self, grid: &Grid, b_star: f64) -> f64 {
        let (u0, u1) = self.sample(grid);
        let combined: Vec<f64> = u0.iter().zip(&u1).map(|(a, b)| a + b_star * b).collect();
        grid.integrate(&combined)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub step_count: usize,
    pub dt_current: f64,
}

impl SimState {
    pub fn max_abs_u(&self) -> f64 {
        self.u.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.u.iter().chain(&self.v).all(|x| x.is_finite())
    }
}

pub fn init_state(params: &ProblemParams, data: &InitialData, aux: &AuxFunctions) -> Result<SimState> {
    if data.require_positive_mass {
        let integral = data.positivity_integral(&params.grid, aux.b_star);
        if !(integral > 0.0) {
            return Err(Error::PositivityViolation(integral));
        }
    }
    let (u0, u1) = data.sample(&params.grid);
    Ok(SimState {
        t: 0.0,
        u: u0.iter().map(|x| params.epsilon * x).collect(),
        v: u1.iter().map(|x| params.epsilon * x).collect(),
        step_count: 0,
        dt_current: params.dt_nominal(),
    })
}

/// `|u|^p`, with exact products for the common integer exponents.
fn nonlinearity_of(p: f64, u: f64) -> f64 {
    if p == 2.0 {
        u * u
    } else if p == 3.0 {
        u.abs() * u * u
    } else {
        u.abs().powf(p)
    }
}

/// RK4 stepper owning its FFT plans and stage buffers.
pub struct Integrator {
    params: ProblemParams,
    spectral: Spectral,
    lap: Vec<f64>,
    ku: [Vec<f64>; 4],
    kv: [Vec<f64>; 4],
    stage_u: Vec<f64>,
    stage_v: Vec<f64>,
}

impl Integrator {
    pub fn new(params: &ProblemParams) -> Self {
        let len = params.grid.len();
        let zeros = || vec![0.0; len];
        Self {
            params: params.clone(),
            spectral: Spectral::new(params.grid),
            lap: zeros(),
            ku: [zeros(), zeros(), zeros(), zeros()],
            kv: [zeros(), zeros(), zeros(), zeros()],
            stage_u: zeros(),
            stage_v: zeros(),
        }
    }

    pub fn params(&self) -> &ProblemParams {
        &self.params
    }

    fn rhs(&mut self, t: f64, stage: usize) {
        let (u, v) = (&self.stage_u, &self.stage_v);
        self.spectral.laplacian(u, &mut self.lap);
        let b = self.params.damping(t);
        let on = self.params.nonlinearity_on;
        let p = self.params.p;
        for i in 0..u.len() {
            self.ku[stage][i] = v[i];
            let source = if on { nonlinearity_of(p, u[i]) } else { 0.0 };
            self.kv[stage][i] = self.lap[i] - b * v[i] + source;
        }
    }

    /// One RK4 step of size `dt` (not checked against the controller).
    pub fn step_by(&mut self, state: &mut SimState, dt: f64) {
        let t = state.t;
        let coeffs = [0.0, 0.5, 0.5, 1.0];
        for stage in 0..4 {
            if stage == 0 {
                self.stage_u.copy_from_slice(&state.u);
                self.stage_v.copy_from_slice(&state.v);
            } else {
                let c = coeffs[stage] * dt;
                for i in 0..state.u.len() {
                    self.stage_u[i] = state.u[i] + c * self.ku[stage - 1][i];
                    self.stage_v[i] = state.v[i] + c * self.kv[stage - 1][i];
                }
            }
            self.rhs(t + coeffs[stage] * dt, stage);
        }
        let w = dt / 6.0;
        for i in 0..state.u.len() {
            state.u[i] += w * (self.ku[0][i] + 2.0 * self.ku[1][i] + 2.0 * self.ku[2][i] + self.ku[3][i]);
            state.v[i] += w * (self.kv[0][i] + 2.0 * self.kv[1][i] + 2.0 * self.kv[2][i] + self.kv[3][i]);
        }
        state.t = t + dt;
        state.step_count += 1;
    }

    /// Advances by `min(dt_current, t_end - t)`.
    pub fn step(&mut self, state: &mut SimState) {
        let dt = state.dt_current.min(self.params.t_end - state.t);
        self.step_by(state, dt);
    }

    /// `½∫(v² + |∇u|²) dx`.
    pub fn energy(&mut self, state: &SimState) -> f64 {
        let kinetic = self.params.grid.integrate(&state.v.iter().map(|v| v * v).collect::<Vec<_>>());
        0.5 * (kinetic + self.spectral.gradient_energy(&state.u))
    }
}

/// A stored copy of the solution.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub step_count: usize,
    pub dt: f64,
}

impl Snapshot {
    pub fn of(state: &SimState) -> Self {
        Self { t: state.t, u: state.u.clone(), v: state.v.clone(), step_count: state.step_count, dt: state.dt_current }
    }

    pub fn to_state(&self) -> SimState {
        SimState { t: self.t, u: self.u.clone(), v: self.v.clone(), step_count: self.step_count, dt_current: self.dt }
    }

    pub fn max_abs_u(&self) -> f64 {
        self.u.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// What a [`SnapshotStore`] does once it holds `n` entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CapacityPolicy {
    Unbounded,
    /// Drop every other entry (keeping the first) and double the stride.
    Thin(usize),
    /// Keep the initial entry and the `n - 1` most recent ones.
    KeepLatest(usize),
}

/// Decimated history of the run. The first entry is the initial state;
/// entry times strictly increase.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotStore {
    pub stride: usize,
    pub entries: Vec<Snapshot>,
    pub capacity: CapacityPolicy,
}

impl SnapshotStore {
    pub fn new(stride: usize, capacity: CapacityPolicy) -> Self {
        Self { stride: stride.max(1), entries: Vec::new(), capacity }
    }

    pub fn push(&mut self, snap: Snapshot) {
        if let Some(last) = self.entries.last() {
            if snap.t <= last.t {
                return;
            }
        }
        self.entries.push(snap);
        match self.capacity {
            CapacityPolicy::Unbounded => {}
            CapacityPolicy::Thin(cap) => {
                if self.entries.len() > cap.max(2) {
                    let kept: Vec<Snapshot> =
                        self.entries.drain(..).enumerate().filter(|(i, _)| i % 2 == 0).map(|(_, s)| s).collect();
                    self.entries = kept;
                    self.stride *= 2;
                }
            }
            CapacityPolicy::KeepLatest(cap) => {
                if self.entries.len() > cap.max(2) {
                    self.entries.remove(1);
                }
            }
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.entries.iter().map(|s| s.t).collect()
    }
}

/// Sup-norm blow-up criterion.
#[derive(Debug, Clone, PartialEq)]
pub struct BlowupDetector {
    pub theta: f64,
    /// Demand that `max|u|` doubled within `10·dt_nominal` before the crossing.
    pub confirm_doubling: bool,
    /// Alternate thresholds for the insensitivity check.
    pub insensitivity_span: (f64, f64),
}

impl Default for BlowupDetector {
    fn default() -> Self {
        Self { theta: 1e6, confirm_doubling: true, insensitivity_span: (1e4, 1e8) }
    }
}

impl BlowupDetector {
    pub fn with_theta(theta: f64) -> Self {
        Self { theta, ..Self::default() }
    }

    pub fn validate(&self, initial_max: f64) -> Result<()> {
        if !(self.theta > 0.0) || self.theta < 1e3 * initial_max {
            return Err(Error::InvalidParameter(format!(
                "theta = {} must exceed the initial max|u| = {initial_max} by a factor 1e3",
                self.theta
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlowupReason {
    ThresholdCrossed,
    DtUnderflow,
    Overflow,
}

impl BlowupReason {
    pub fn name(&self) -> &'static str {
        match self {
            BlowupReason::ThresholdCrossed => "ThresholdCrossed",
            BlowupReason::DtUnderflow => "DtUnderflow",
            BlowupReason::Overflow => "Overflow",
        }
    }
}

/// Blow-up detected between the last finite state below threshold (`t_lo`)
/// and the detection time (`t_hi`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub t_lo: f64,
    pub t_hi: f64,
    pub reason: BlowupReason,
    pub dt_final: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunOutcome {
    Completed { t_end: f64 },
    Blowup(Detection),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRow {
    pub t: f64,
    pub max_abs_u: f64,
    pub l2_u: f64,
    pub energy: f64,
    pub dt: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub store: SnapshotStore,
    pub outcome: RunOutcome,
    pub trajectory: Vec<TrajectoryRow>,
    pub final_state: SimState,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub snapshot_stride: usize,
    pub snapshot_capacity: CapacityPolicy,
    pub record_trajectory: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { snapshot_stride: 8, snapshot_capacity: CapacityPolicy::Unbounded, record_trajectory: true }
    }
}

/// Integrates from `(εu₀, εu₁)` until `t_end` or blow-up.
pub fn run(
    params: &ProblemParams,
    data: &InitialData,
    aux: &AuxFunctions,
    detector: &BlowupDetector,
    options: RunOptions,
) -> Result<RunOutput> {
    let state = init_state(params, data, aux)?;
    run_from(params, state, &[detector.theta], detector.confirm_doubling, options).map(|(out, _)| out)
}

/// Integrates from `state`, watching every threshold in `thetas`. Stops at the
/// largest threshold (or overflow / dt underflow / `t_end`) and also returns
/// the first confirmed crossing bracket of each threshold.
pub fn run_from(
    params: &ProblemParams,
    mut state: SimState,
    thetas: &[f64],
    confirm_doubling: bool,
    options: RunOptions,
) -> Result<(RunOutput, Vec<Option<Detection>>)> {
    let mut integrator = Integrator::new(params);
    let dt_nominal = params.dt_nominal();
    let theta_stop = thetas.iter().cloned().fold(0.0, f64::max);
    let mut crossings: Vec<Option<Detection>> = vec![None; thetas.len()];
    let mut store = SnapshotStore::new(options.snapshot_stride, options.snapshot_capacity);
    let mut trajectory = Vec::new();
    let record = |integrator: &mut Integrator, state: &SimState, trajectory: &mut Vec<TrajectoryRow>| {
        if options.record_trajectory {
            let l2 = params.grid.integrate(&state.u.iter().map(|u| u * u).collect::<Vec<_>>()).sqrt();
            trajectory.push(TrajectoryRow {
                t: state.t,
                max_abs_u: state.max_abs_u(),
                l2_u: l2,
                energy: integrator.energy(state),
                dt: state.dt_current,
            });
        }
    };
    store.push(Snapshot::of(&state));
    record(&mut integrator, &state, &mut trajectory);

    // (t, max|u|) after every accepted step
    let mut history: Vec<(f64, f64)> = vec![(state.t, state.max_abs_u())];
    let mut window_start = 0usize;
    let mut steps_since_snapshot = 0usize;
    let mut prev_t;

    let blowup = |reason, t_lo: f64, t_hi: f64, dt_final: f64| Detection { t_lo, t_hi, reason, dt_final };

    let outcome = loop {
        if state.t >= params.t_end {
            break RunOutcome::Completed { t_end: state.t };
        }
        prev_t = state.t;
        let dt_used = state.dt_current.min(params.t_end - state.t);
        integrator.step(&mut state);

        if !state.is_finite() {
            break RunOutcome::Blowup(blowup(BlowupReason::Overflow, prev_t, state.t, dt_used));
        }
        let m = state.max_abs_u();
        history.push((state.t, m));

        // growth controller
        let last = history.len() - 1;
        let before = history.len().checked_sub(GROWTH_WINDOW + 1).map_or(0.0, |k| history[k].1);
        if last - window_start >= GROWTH_WINDOW && before > 0.0 && m >= 2.0 * before {
            state.dt_current *= 0.5;
            window_start = last;
            if state.dt_current < DT_FLOOR {
                break RunOutcome::Blowup(blowup(BlowupReason::DtUnderflow, prev_t, state.t, dt_used));
            }
        }

        for (k, &theta) in thetas.iter().enumerate() {
            if crossings[k].is_none() && m >= theta && doubling_confirmed(&history, dt_nominal, confirm_doubling) {
                crossings[k] = Some(blowup(BlowupReason::ThresholdCrossed, prev_t, state.t, dt_used));
            }
        }

        steps_since_snapshot += 1;
        if steps_since_snapshot >= store.stride {
            steps_since_snapshot = 0;
            store.push(Snapshot::of(&state));
            record(&mut integrator, &state, &mut trajectory);
        }

        if m >= theta_stop && crossings.iter().all(|c| c.is_some()) {
            let main = crossings.iter().flatten().max_by(|a, b| a.t_hi.total_cmp(&b.t_hi)).copied().expect("non-empty");
            break RunOutcome::Blowup(main);
        }
    };

    if let RunOutcome::Blowup(d) = &outcome {
        // thresholds never crossed before an overflow or underflow inherit it
        for c in crossings.iter_mut() {
            if c.is_none() {
                *c = Some(*d);
            }
        }
    }
    if options.record_trajectory && trajectory.last().map(|r| r.t) != Some(state.t) && state.is_finite() {
        record(&mut integrator, &state, &mut trajectory);
    }
    Ok((RunOutput { store, outcome, trajectory, final_state: state }, crossings))
}

/// The latest sample at or below half the current level must lie within
/// `10·dt_nominal` of now.
fn doubling_confirmed(history: &[(f64, f64)], dt_nominal: f64, required: bool) -> bool {
    if !required {
        return true;
    }
    let (t_now, m_now) = *history.last().expect("non-empty");
    history.iter().rev().find(|(_, m)| *m <= 0.5 * m_now).map_or(false, |(t, _)| t_now - t < 10.0 * dt_nominal)
}
