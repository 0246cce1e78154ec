use dampwave::lifespan::Regime;
use dampwave::ode_lab::{
    integrate_blowup, integrate_blowup_with, scaling_study, study_problem, substitute_doublelog, substitute_log,
    Method, OdeKind, OdeOptions, OdeProblem, TimeVariable,
};
use dampwave::Error;
use proptest::prelude::*;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Classical RK4 on `f'' + f' = f^p` with a step shrinking like
/// `f^{-(p-1)/2}`, stopped at `f ≥ 1e12`. The time left from there to the
/// singularity is below 1e-5.
fn rk4_oracle(p: f64, f0: f64) -> f64 {
    let rhs = |y: [f64; 2]| [y[1], y[0].powf(p) - y[1]];
    let (mut t, mut y) = (0.0, [f0, 0.0]);
    while y[0] < 1e12 {
        let h = 2e-4 / (1.0 + y[0].powf((p - 1.0) / 2.0));
        let k1 = rhs(y);
        let k2 = rhs([y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
        let k3 = rhs([y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]]);
        let k4 = rhs([y[0] + h * k3[0], y[1] + h * k3[1]]);
        for i in 0..2 {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        t += h;
    }
    t
}

#[test]
fn base_problem_against_rk4() {
    for (p, f0) in [(2.0, 0.5), (3.0, 0.3)] {
        let oracle = rk4_oracle(p, f0);
        let got = integrate_blowup(&OdeProblem::new(OdeKind::LiZhouBase, 0.0, p, f0), 1e-10).unwrap();
        assert!(rel(got.t_hi, oracle) < 1e-5, "p={p}: {} vs {oracle}", got.t_hi);
    }
}

#[test]
fn refinement_is_self_consistent() {
    let cases =
        [(OdeKind::LiZhouBase, 0.0, 3.0, 0.2), (OdeKind::LemmaA1, 0.5, 3.0, 0.5), (OdeKind::LemmaA2, 0.0, 3.0, 1.0)];
    for (kind, beta, p, eps) in cases {
        let prob = study_problem(kind, beta, p, eps).unwrap();
        let loose = integrate_blowup(&prob, 1e-6).unwrap();
        let tight = integrate_blowup(&prob, 1e-9).unwrap();
        assert!(rel(loose.log_t, tight.log_t) < 1e-4, "{kind:?}");
        assert!(tight.s_lo <= tight.s_hi && tight.s_hi - tight.s_lo <= 1e-9 * tight.s_hi, "{kind:?}: {tight:?}");
        assert_eq!(tight.slope_violations, 0, "{kind:?}");
    }
}

#[test]
fn substituted_and_direct_integrations_agree() {
    let base = OdeProblem::new(OdeKind::LemmaA1, 0.5, 3.0, 0.5);
    let direct = integrate_blowup_with(
        &base,
        &OdeOptions { method: Some(Method::DormandPrince), ..OdeOptions::with_tol(1e-10) },
    )
    .unwrap();
    let sub = integrate_blowup(&substitute_log(&base).unwrap(), 1e-10).unwrap();
    assert!(rel(direct.t_hi, sub.t_hi) < 1e-3, "{} vs {}", direct.t_hi, sub.t_hi);

    let base = OdeProblem::new(OdeKind::LemmaA2, 0.0, 3.0, 1.0);
    let direct = integrate_blowup(&base, 1e-10).unwrap();
    let sub = integrate_blowup(&substitute_doublelog(&base).unwrap(), 1e-10).unwrap();
    assert_eq!(sub.variable, TimeVariable::DoubleLog);
    assert!(rel(direct.t_hi, sub.t_hi) < 1e-3, "{} vs {}", direct.t_hi, sub.t_hi);
}

#[test]
fn solutions_stay_increasing_and_convex() {
    for kind in [OdeKind::LiZhouBase, OdeKind::LemmaA1] {
        let b = integrate_blowup(&OdeProblem::new(kind, 0.0, 2.0, 0.4), 1e-10).unwrap();
        assert_eq!((b.slope_violations, b.convexity_violations), (0, 0), "{kind:?}");
    }
}

#[test]
fn lifespans_follow_their_laws() {
    let fit = scaling_study(OdeKind::LiZhouBase, 0.0, 3.0, &[0.2, 0.1, 0.05, 0.025]).unwrap();
    assert_eq!(fit.regime, Regime::SubcriticalPoly);
    assert!(fit.slope < -1.6 && fit.slope > -2.2 && fit.r_squared > 0.99, "{fit:?}");

    let fit = scaling_study(OdeKind::LemmaA1, 0.5, 3.0, &[0.5, 0.35, 0.25, 0.18]).unwrap();
    assert_eq!(fit.regime, Regime::CriticalExp);
    assert!(fit.slope > 0.0 && fit.r_squared > 0.99, "{fit:?}");
}

#[test]
fn small_data_outlasts_the_horizon_after_double_log_substitution() {
    let prob = study_problem(OdeKind::LemmaA2, 0.0, 3.0, 0.5).unwrap();
    assert!(matches!(integrate_blowup(&prob, 1e-9), Err(Error::NoBlowupWithinHorizon { .. })));
}

#[test]
fn kind_names_round_trip() {
    for k in [OdeKind::LemmaA1, OdeKind::LemmaA2, OdeKind::LiZhouBase] {
        assert_eq!(OdeKind::parse(k.name()), Some(k));
    }
    assert_eq!(OdeKind::parse("Lemma-A2"), Some(OdeKind::LemmaA2));
    assert_eq!(OdeKind::parse("lemmaA3"), None);
}

#[test]
fn time_variables_invert() {
    for v in [TimeVariable::Original, TimeVariable::Log, TimeVariable::DoubleLog] {
        for t in [0.0, 0.5, 10.0, 1e6] {
            assert!(rel(v.to_original(v.from_original(t)), t.max(1e-300)) < 1e-12 || t == 0.0);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn larger_data_blows_up_sooner(f0 in 0.2f64..2.0, factor in 1.05f64..2.0) {
        let small = integrate_blowup(&OdeProblem::new(OdeKind::LiZhouBase, 0.0, 2.0, f0), 1e-9).unwrap();
        let large = integrate_blowup(&OdeProblem::new(OdeKind::LiZhouBase, 0.0, 2.0, f0 * factor), 1e-9).unwrap();
        prop_assert!(large.t_hi < small.t_lo);
    }
}
