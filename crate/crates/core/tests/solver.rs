use std::f64::consts::PI;

use dampwave::damping::{build_aux, AuxFunctions, DampingModel};
use dampwave::heat_kernel::Grid;
use dampwave::solver::{
    init_state, run, BlowupDetector, InitialData, Integrator, ProblemParams, RunOptions, RunOutcome, Shape, SimState,
};
use proptest::prelude::*;

fn aux_for(beta: f64) -> AuxFunctions {
    build_aux(DampingModel::new(beta).unwrap(), 100.0, 32, 1e-10).unwrap()
}

fn params(beta: f64, l: f64, n: usize, p: f64, eps: f64, t_end: f64) -> ProblemParams {
    let grid = Grid::new(1, l, n).unwrap();
    ProblemParams::new(p, eps, DampingModel::new(beta).unwrap(), grid, t_end).unwrap()
}

/// Steps `state` to exactly `t_end` with the nominal step.
fn advance(integrator: &mut Integrator, state: &mut SimState, t_end: f64) {
    let dt = integrator.params().dt_nominal();
    while state.t < t_end - 1e-12 {
        let h = dt.min(t_end - state.t);
        integrator.step_by(state, h);
    }
}

#[test]
fn undamped_plane_wave_is_exact() {
    let mut prm = params(0.0, PI, 256, 2.0, 1.0, 1.0);
    prm.nonlinearity_on = false;
    prm.damping_on = false;
    let grid = prm.grid;
    let k = 3.0;
    let u: Vec<f64> = (0..grid.len()).map(|j| (k * grid.coord(j)).cos()).collect();
    let mut state = SimState { t: 0.0, v: vec![0.0; u.len()], u, step_count: 0, dt_current: prm.dt_nominal() };
    let mut integ = Integrator::new(&prm);
    advance(&mut integ, &mut state, 1.0);
    let err = (0..grid.len())
        .map(|j| (state.u[j] - (k * 1.0f64).cos() * (k * grid.coord(j)).cos()).abs())
        .fold(0.0, f64::max);
    assert!(err < 1e-6, "err {err}");
}

#[test]
fn linear_energy_is_non_increasing() {
    for beta in [-0.5, 0.0, 0.5] {
        let mut prm = params(beta, 32.0, 512, 2.0, 1.0, 10.0);
        prm.nonlinearity_on = false;
        let mut state = init_state(&prm, &InitialData::gaussian(1.0, 1.5), &aux_for(beta)).unwrap();
        state.v = state.u.iter().map(|u| 0.3 * u).collect();
        let mut integ = Integrator::new(&prm);
        let mut e_prev = integ.energy(&state);
        for _ in 0..400 {
            integ.step(&mut state);
            let e = integ.energy(&state);
            assert!(e <= e_prev + 1e-8, "beta={beta} t={} e={e} prev={e_prev}", state.t);
            e_prev = e;
        }
    }
}

#[test]
fn linear_problem_scales_with_epsilon() {
    let mut prm = params(0.5, 32.0, 512, 2.0, 0.1, 5.0);
    prm.nonlinearity_on = false;
    let aux = aux_for(0.5);
    let data = InitialData { amplitude_u1: 0.7, ..InitialData::gaussian(1.0, 1.0) };
    let det = BlowupDetector::default();
    let small = run(&prm, &data, &aux, &det, RunOptions::default()).unwrap();
    let large = run(&prm.with_epsilon(1.0), &data, &aux, &det, RunOptions::default()).unwrap();
    assert!(matches!(small.outcome, RunOutcome::Completed { .. }));
    let scale = large.final_state.max_abs_u();
    let err =
        small.final_state.u.iter().zip(&large.final_state.u).map(|(a, b)| (10.0 * a - b).abs()).fold(0.0, f64::max);
    assert!(err <= 1e-10 * scale, "err {err}");
}

#[test]
fn at_least_second_order_convergence() {
    let aux = aux_for(0.0);
    let data = InitialData::gaussian(1.0, 1.0);
    let t = 10.0;
    let maxima: Vec<f64> = [128, 256, 512, 1024]
        .iter()
        .map(|&n| {
            let prm = params(0.0, 32.0, n, 2.0, 0.25, t);
            let mut state = init_state(&prm, &data, &aux).unwrap();
            let mut integ = Integrator::new(&prm);
            advance(&mut integ, &mut state, t);
            state.max_abs_u()
        })
        .collect();
    let e1 = (maxima[0] - maxima[1]).abs();
    let e2 = (maxima[1] - maxima[2]).abs();
    let e3 = (maxima[2] - maxima[3]).abs();
    assert!(e1 / e2 >= 3.0 && e2 / e3 >= 3.0, "errors {e1:e} {e2:e} {e3:e}");
}

#[test]
fn finite_propagation_speed() {
    let prm = params(0.0, 40.0, 2048, 2.0, 0.5, 20.0);
    let aux = aux_for(0.0);
    let r0 = 2.0;
    let data = InitialData { shape: Shape::CompactBump, ..InitialData::gaussian(1.0, r0) };
    let mut state = init_state(&prm, &data, &aux).unwrap();
    let mut integ = Integrator::new(&prm);
    let dx = prm.grid.dx();
    for t in [2.0, 5.0, 8.0] {
        advance(&mut integ, &mut state, t);
        let m = state.max_abs_u();
        let outside = (0..prm.grid.len())
            .filter(|&j| prm.grid.coord(j).abs() > r0 + t + 3.0 * dx)
            .map(|j| state.u[j].abs())
            .fold(0.0, f64::max);
        assert!(outside <= 1e-6 * m, "t={t}: {outside:e} vs {m:e}");
    }
}

#[test]
fn zero_data_and_linear_runs_complete() {
    let aux = aux_for(0.0);
    let data = InitialData::gaussian(1.0, 1.0);
    let det = BlowupDetector::default();
    let out = run(&params(0.0, 16.0, 128, 2.0, 0.0, 3.0), &data, &aux, &det, RunOptions::default()).unwrap();
    assert_eq!(out.outcome, RunOutcome::Completed { t_end: out.final_state.t });
    assert!((out.final_state.t - 3.0).abs() < 1e-12);
    assert!(out.final_state.u.iter().all(|&u| u == 0.0));

    let mut prm = params(0.0, 16.0, 128, 2.0, 10.0, 3.0);
    prm.nonlinearity_on = false;
    let out = run(&prm, &data, &aux, &det, RunOptions::default()).unwrap();
    assert!(matches!(out.outcome, RunOutcome::Completed { .. }));
}

#[test]
fn larger_data_blows_up_sooner() {
    let aux = aux_for(0.0);
    let data = InitialData::gaussian(1.0, 1.0);
    let det = BlowupDetector::default();
    let lifespan = |eps: f64| {
        let out = run(&params(0.0, 32.0, 512, 2.0, eps, 20.0), &data, &aux, &det, RunOptions::default()).unwrap();
        match out.outcome {
            RunOutcome::Blowup(d) => {
                assert!(d.t_lo < d.t_hi);
                d.t_hi
            }
            other => panic!("no blow-up for eps={eps}: {other:?}"),
        }
    };
    let (t2, t4) = (lifespan(2.0), lifespan(4.0));
    assert!(t4 < t2, "T(4) = {t4}, T(2) = {t2}");
}

#[test]
fn snapshots_start_at_initial_state_and_increase() {
    let aux = aux_for(0.0);
    let prm = params(0.0, 16.0, 128, 2.0, 0.5, 2.0);
    let data = InitialData::gaussian(1.0, 1.0);
    let out = run(&prm, &data, &aux, &BlowupDetector::default(), RunOptions::default()).unwrap();
    let first = &out.store.entries[0];
    assert_eq!(first.t, 0.0);
    assert_eq!(first.u, init_state(&prm, &data, &aux).unwrap().u);
    assert!(out.store.times().windows(2).all(|w| w[1] > w[0]));
    assert!(out.trajectory.iter().all(|r| r.max_abs_u.is_finite() && r.dt > 0.0));
}

#[test]
fn two_dimensional_runs() {
    let grid = Grid::new(2, 16.0, 64).unwrap();
    let mut prm = ProblemParams::new(2.0, 0.5, DampingModel::new(0.5).unwrap(), grid, 1.0).unwrap();
    prm.nonlinearity_on = false;
    assert_eq!(prm.p_fujita, 2.0);
    let data = InitialData { offset: [1.0, -2.0], ..InitialData::gaussian(1.0, 2.0) };
    let state = init_state(&prm, &data, &aux_for(0.5)).unwrap();
    let peak = state.u.iter().cloned().fold(0.0, f64::max);
    let idx = state.u.iter().position(|&u| u == peak).unwrap();
    assert_eq!((grid.coord(idx / 64), grid.coord(idx % 64)), (1.0, -2.0));
    let out = run(&prm, &data, &aux_for(0.5), &BlowupDetector::default(), RunOptions::default()).unwrap();
    assert!(matches!(out.outcome, RunOutcome::Completed { .. }));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn initial_mass_is_linear(eps in 0.0f64..3.0, amp in 0.1f64..2.0, width in 0.5f64..3.0) {
        let prm = params(0.0, 32.0, 512, 2.0, eps, 1.0);
        let data = InitialData::gaussian(amp, width);
        let s = init_state(&prm, &data, &aux_for(0.0)).unwrap();
        let mass = prm.grid.integrate(&s.u);
        let exact = eps * amp * width * PI.sqrt();
        prop_assert!((mass - exact).abs() <= 1e-12 * exact.max(1.0));
    }
}
