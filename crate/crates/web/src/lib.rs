//! wasm-bindgen bindings behind `www/index.html`.
//!
//! Each export takes plain numbers (lists as comma-separated strings) and
//! returns a JSON document; errors come back as `{"error": "..."}` so the
//! page can show them inline.

use dampwave::damping::{build_aux, DampingModel};
use dampwave::heat_kernel::Grid;
use dampwave::lifespan::fit_log_lifespans;
use dampwave::ode_lab::{scaling_points, OdeKind};
use dampwave::solver::{run, BlowupDetector, CapacityPolicy, InitialData, ProblemParams, RunOptions, RunOutcome};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Debug, Serialize)]
pub struct AuxCurves {
    pub b_star: f64,
    pub t: Vec<f64>,
    pub b: Vec<f64>,
    pub g: Vec<f64>,
    pub big_g: Vec<f64>,
    pub gamma: Vec<f64>,
    pub bg_minus_1: Vec<f64>,
}

pub fn aux_curves(beta: f64, t_max: f64, samples: usize) -> Result<AuxCurves, String> {
    let model = DampingModel::new(beta).map_err(|e| e.to_string())?;
    let aux = build_aux(model, t_max, samples.max(16), 1e-10).map_err(|e| e.to_string())?;
    let mut out = AuxCurves {
        b_star: aux.b_star,
        t: vec![],
        b: vec![],
        g: vec![],
        big_g: vec![],
        gamma: vec![],
        bg_minus_1: vec![],
    };
    for [t, b, g, _, big_g, gamma, r] in aux.rows() {
        out.t.push(t);
        out.b.push(b);
        out.g.push(g);
        out.big_g.push(big_g);
        out.gamma.push(gamma);
        out.bg_minus_1.push(r);
    }
    Ok(out)
}

#[derive(Debug, Serialize)]
pub struct OdePoint {
    pub epsilon: f64,
    /// `None` when no blow-up happened before the horizon
    pub t_blowup: Option<f64>,
    pub note: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct OdeStudy {
    pub regime: String,
    pub points: Vec<OdePoint>,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub r_squared: Option<f64>,
    pub fit_note: Option<String>,
}

pub fn ode_study(kind: &str, beta: f64, p: f64, epsilons: &[f64]) -> Result<OdeStudy, String> {
    let kind = OdeKind::parse(kind).ok_or_else(|| format!("unknown kind {kind:?}"))?;
    let results = scaling_points(kind, beta, p, epsilons, 1e-9);
    let mut points = Vec::new();
    let mut samples = Vec::new();
    for (&epsilon, r) in epsilons.iter().zip(results) {
        match r {
            Ok(b) => {
                samples.push((epsilon, b.log_t));
                points.push(OdePoint { epsilon, t_blowup: Some(b.t_hi), note: None });
            }
            Err(e) => points.push(OdePoint { epsilon, t_blowup: None, note: Some(e.to_string()) }),
        }
    }
    let mut study = OdeStudy {
        regime: kind.regime().name().into(),
        points,
        xs: vec![],
        ys: vec![],
        slope: None,
        intercept: None,
        r_squared: None,
        fit_note: None,
    };
    match fit_log_lifespans(&samples, kind.regime(), p) {
        Ok(f) => {
            study.slope = Some(f.slope);
            study.intercept = Some(f.intercept);
            study.r_squared = Some(f.r_squared);
            study.xs = f.xs;
            study.ys = f.ys;
        }
        Err(e) => study.fit_note = Some(e.to_string()),
    }
    Ok(study)
}

#[derive(Debug, Serialize)]
pub struct WaveRun {
    pub t: Vec<f64>,
    pub max_abs_u: Vec<f64>,
    pub x: Vec<f64>,
    /// final profile, downsampled to at most 512 points
    pub u: Vec<f64>,
    pub t_final: f64,
    /// `[T_lo, T_hi]` when the run blew up
    pub blowup: Option<[f64; 2]>,
}

/// Gaussian data `ε exp(-x²)` in 1D on `[-L, L)` with `N` points.
pub fn wave_run(
    beta: f64,
    p: f64,
    epsilon: f64,
    t_end: f64,
    half_width: f64,
    points: usize,
) -> Result<WaveRun, String> {
    let err = |e: dampwave::Error| e.to_string();
    let model = DampingModel::new(beta).map_err(err)?;
    let grid = Grid::new(1, half_width, points).map_err(err)?;
    let params = ProblemParams::new(p, epsilon, model, grid, t_end).map_err(err)?;
    let aux = build_aux(model, t_end, 64, 1e-10).map_err(err)?;
    let detector = BlowupDetector::default();
    let options = RunOptions {
        snapshot_stride: 1 << 20,
        snapshot_capacity: CapacityPolicy::KeepLatest(1),
        record_trajectory: true,
    };
    let out = run(&params, &InitialData::gaussian(1.0, 1.0), &aux, &detector, options).map_err(err)?;
    let stride = (grid.points / 512).max(1);
    let u = &out.final_state.u;
    let blowup = match out.outcome {
        RunOutcome::Completed { .. } => None,
        RunOutcome::Blowup(d) => Some([d.t_lo, d.t_hi]),
    };
    Ok(WaveRun {
        t: out.trajectory.iter().map(|r| r.t).collect(),
        max_abs_u: out.trajectory.iter().map(|r| r.max_abs_u).collect(),
        x: (0..grid.points).step_by(stride).map(|j| grid.coord(j)).collect(),
        u: u.iter().step_by(stride).copied().collect(),
        t_final: out.final_state.t,
        blowup,
    })
}

fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().map_err(|_| format!("{t:?} is not a number")))
        .collect()
}

fn to_json<T: Serialize>(r: Result<T, String>) -> String {
    match r {
        Ok(v) => serde_json::to_string(&v).expect("serializable"),
        Err(e) => serde_json::json!({ "error": e }).to_string(),
    }
}

#[wasm_bindgen(js_name = auxCurves)]
pub fn aux_curves_js(beta: f64, t_max: f64, samples: usize) -> String {
    to_json(aux_curves(beta, t_max, samples))
}

#[wasm_bindgen(js_name = odeStudy)]
pub fn ode_study_js(kind: &str, beta: f64, p: f64, epsilons: &str) -> String {
    to_json(parse_list(epsilons).and_then(|e| ode_study(kind, beta, p, &e)))
}

#[wasm_bindgen(js_name = waveRun)]
pub fn wave_run_js(beta: f64, p: f64, epsilon: f64, t_end: f64, half_width: f64, points: usize) -> String {
    to_json(wave_run(beta, p, epsilon, t_end, half_width, points))
}
