use std::f64::consts::PI;

use dampwave::damping::{build_aux, AuxFunctions, DampingModel};
use dampwave::heat_kernel::{kernel_value, Grid};
use dampwave::identity::{
    admissibility_margin, estimate_j0, functional_h, identity_report, term_a, term_b, term_c, term_d, term_e,
};
use dampwave::solver::{run, BlowupDetector, InitialData, ProblemParams, RunOptions, Snapshot};
use dampwave::Error;

fn aux_for(beta: f64, t_max: f64) -> AuxFunctions {
    build_aux(DampingModel::new(beta).unwrap(), t_max, 64, 1e-12).unwrap()
}

/// Snapshots of `x ↦ f(s, x)` at `k + 1` equally spaced times in `[0, t]`.
fn frozen(grid: &Grid, t: f64, k: usize, f: impl Fn(f64, f64) -> f64) -> Vec<Snapshot> {
    (0..=k)
        .map(|i| {
            let s = t * i as f64 / k as f64;
            let v: Vec<f64> = grid.radii_sq().map(|r2| f(s, r2)).collect();
            Snapshot { t: s, u: v.clone(), v, step_count: i, dt: t / k as f64 }
        })
        .collect()
}

#[test]
fn weighted_integrals_of_gaussians() {
    let aux = aux_for(0.0, 10.0);
    let grid = Grid::new(1, 60.0, 4096).unwrap();
    let t = 4.0;
    // ∫ e^{-x²/20} e^{-x²} = √(π / (1 + 1/20))
    let u: Vec<f64> = grid.radii_sq().map(|r2| (-r2).exp()).collect();
    let exact = (PI / 1.05).sqrt();
    assert!((term_a(&grid, &aux, t, &u).unwrap() - exact).abs() < 1e-10);
    assert!((term_b(&grid, &aux, t, &u).unwrap() - exact).abs() < 1e-10);
}

#[test]
fn data_term_closed_form() {
    let aux = aux_for(0.5, 10.0);
    let grid = Grid::new(1, 60.0, 4096).unwrap();
    let data = InitialData { amplitude_u1: 0.4, ..InitialData::gaussian(1.0, 1.5) };
    let eps = 0.3;
    for t in [0.0, 1.0, 3.0] {
        let big_g = aux.big_g(t).unwrap();
        let tau = 2.0 * big_g + 1.0;
        let mass = (PI / (1.0 / (4.0 * tau) + 1.0 / 2.25)).sqrt();
        let exact = eps * ((big_g + 1.0) / tau).sqrt() * (1.0 + 1.5 * 0.4) * mass;
        let got = term_c(&grid, &aux, t, &data, eps).unwrap();
        assert!((got - exact).abs() < 1e-10 * exact, "t={t}: {got} vs {exact}");
    }
}

#[test]
fn identity_holds_exactly_at_time_zero() {
    let aux = aux_for(-0.5, 10.0);
    let grid = Grid::new(1, 40.0, 1024).unwrap();
    let data = InitialData { amplitude_u1: -0.7, ..InitialData::gaussian(1.0, 2.0) };
    let eps = 0.8;
    let (u0, u1) = data.sample(&grid);
    let u: Vec<f64> = u0.iter().map(|x| eps * x).collect();
    let v: Vec<f64> = u1.iter().map(|x| eps * x).collect();
    let lhs = term_a(&grid, &aux, 0.0, &u).unwrap() + term_b(&grid, &aux, 0.0, &v).unwrap();
    let c = term_c(&grid, &aux, 0.0, &data, eps).unwrap();
    assert!((lhs - c).abs() < 1e-12 * c.abs());
}

// With v(s) = 𝒢(G(s)+1) the space integral in E collapses to
// -(n/2) (4π)^{-n/2} (2G(t)+2)^{-n/2-1}, leaving ∫ g².
#[test]
fn history_term_e_against_kernel_oracle() {
    let aux = aux_for(0.5, 10.0);
    let grid = Grid::new(1, 50.0, 4096).unwrap();
    let t = 2.0;
    let snaps = frozen(&grid, t, 4000, |s, r2| kernel_value(1, aux.big_g(s).unwrap() + 1.0, r2));
    let big_g = aux.big_g(t).unwrap();
    // g = √(s+1) + 1/2
    let int_g2 = 0.5 * ((t + 1.0).powi(2) - 1.0) + (2.0 / 3.0) * ((t + 1.0).powf(1.5) - 1.0) + 0.25 * t;
    let exact = 0.5 * (big_g + 1.0).sqrt() * (2.0 * big_g + 2.0).powf(-1.5) * int_g2;
    let got = term_e(&grid, &aux, &snaps).unwrap();
    assert!((got - exact).abs() <= 1e-6 * exact, "{got} vs {exact}");
}

// With p = 1 and u(s) = 𝒢(G(s)+1) the kernel weights combine to 2^{-n/2}.
#[test]
fn history_term_d_against_kernel_oracle() {
    let aux = aux_for(0.5, 10.0);
    let grid = Grid::new(1, 50.0, 4096).unwrap();
    let t = 2.0;
    let snaps = frozen(&grid, t, 4000, |s, r2| kernel_value(1, aux.big_g(s).unwrap() + 1.0, r2));
    let int_g = (2.0 / 3.0) * ((t + 1.0).powf(1.5) - 1.0) + 0.5 * t;
    let exact = 0.5f64.sqrt() * int_g;
    let got = term_d(&grid, &aux, &snaps, 1.0).unwrap();
    assert!((got - exact).abs() <= 1e-6 * exact, "{got} vs {exact}");
}

#[test]
fn history_terms_converge_under_time_refinement() {
    let aux = aux_for(-0.5, 10.0);
    let grid = Grid::new(1, 40.0, 1024).unwrap();
    let f = |s: f64, r2: f64| (1.0 + s).sin() * (-r2 / (1.0 + s)).exp();
    let coarse = term_d(&grid, &aux, &frozen(&grid, 3.0, 200, f), 3.0).unwrap();
    let fine = term_d(&grid, &aux, &frozen(&grid, 3.0, 400, f), 3.0).unwrap();
    let finer = term_d(&grid, &aux, &frozen(&grid, 3.0, 800, f), 3.0).unwrap();
    let ratio = (coarse - fine).abs() / (fine - finer).abs();
    assert!((ratio - 4.0).abs() < 0.2, "ratio {ratio}");
}

#[test]
fn zero_trajectory_has_zero_terms() {
    let aux = aux_for(0.0, 10.0);
    let grid = Grid::new(1, 40.0, 256).unwrap();
    let snaps = frozen(&grid, 2.0, 10, |_, _| 0.0);
    let data = InitialData::gaussian(1.0, 1.0);
    let report = identity_report(&grid, &aux, &snaps, &data, 0.0, 2.0, &[0.0, 1.0, 2.0]).unwrap();
    for row in &report.rows {
        assert_eq!((row.a, row.b, row.c, row.d, row.e, row.residual), (0.0, 0.0, 0.0, 0.0, 0.0, 0.0));
        assert_eq!(row.relative_residual, 0.0);
    }
}

#[test]
fn identity_on_a_computed_trajectory() {
    let aux = aux_for(0.0, 50.0);
    let grid = Grid::new(1, 64.0, 2048).unwrap();
    let prm = ProblemParams::new(2.0, 0.25, DampingModel::new(0.0).unwrap(), grid, 10.0).unwrap();
    let data = InitialData::gaussian(1.0, 1.0);
    let opts = RunOptions { snapshot_stride: 4, ..RunOptions::default() };
    let out = run(&prm, &data, &aux, &BlowupDetector::default(), opts).unwrap();
    let report = identity_report(&grid, &aux, &out.store.entries, &data, 0.25, 2.0, &[2.5, 5.0, 10.0]).unwrap();
    assert!(report.rows.iter().all(|r| r.error.is_none() && r.margin >= 1.0));
    assert!(report.max_relative_residual() <= 1e-3, "{report:?}");
    assert!(report.rows.iter().all(|r| r.d > 0.0));
}

#[test]
fn short_box_is_reported_per_row() {
    let aux = aux_for(0.0, 50.0);
    let grid = Grid::new(1, 24.0, 256).unwrap();
    let snaps = frozen(&grid, 20.0, 80, |_, r2| (-r2).exp());
    let data = InitialData::gaussian(1.0, 1.0);
    let report = identity_report(&grid, &aux, &snaps, &data, 1.0, 2.0, &[1.0, 20.0]).unwrap();
    assert!(report.rows[0].error.is_none());
    assert!(report.rows[1].error.is_some() && report.rows[1].a.is_nan());
    assert!(admissibility_margin(&grid, &aux, 20.0).unwrap() < 1.0);
    assert!(matches!(term_c(&grid, &aux, 20.0, &data, 1.0), Err(Error::DomainTooSmall { .. })));
}

#[test]
fn j0_examples() {
    let grid = Grid::new(1, 40.0, 2048).unwrap();
    let aux = aux_for(0.5, 10.0);
    // mass of u₀ is √π, of u₁ is 2√π; b* = 3/2
    let data = InitialData { amplitude_u1: 2.0, ..InitialData::gaussian(1.0, 1.0) };
    let exact = 0.5f64.sqrt() * PI.sqrt() * (1.0 + 1.5 * 2.0);
    assert!((estimate_j0(&grid, &aux, &data).unwrap() - exact).abs() < 1e-12);

    let grid2 = Grid::new(2, 20.0, 256).unwrap();
    let data = InitialData::gaussian(1.0, 1.0);
    assert!((estimate_j0(&grid2, &aux, &data).unwrap() - 0.5 * PI).abs() < 1e-12);
}

#[test]
fn h_approaches_j0() {
    let aux = aux_for(0.0, 1000.0);
    let grid = Grid::new(1, 400.0, 8192).unwrap();
    let data = InitialData { amplitude_u1: 0.5, ..InitialData::gaussian(1.0, 1.0) };
    let j0 = estimate_j0(&grid, &aux, &data).unwrap();
    let gaps: Vec<f64> =
        [10.0, 100.0, 1000.0].iter().map(|&t| (functional_h(&grid, &aux, t, &data).unwrap() - j0).abs() / j0).collect();
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
    assert!(gaps[2] < 1e-3, "{gaps:?}");
}
