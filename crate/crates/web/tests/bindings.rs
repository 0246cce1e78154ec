use dampwave_web::{aux_curves, aux_curves_js, ode_study, ode_study_js, wave_run, wave_run_js};

#[test]
fn classical_damping_curves() {
    let c = aux_curves(0.0, 10.0, 32).unwrap();
    assert_eq!(c.t.len(), 32);
    // b ≡ 1 gives g ≡ 1 and G(t) = t
    assert!((c.b_star - 1.0).abs() < 1e-10);
    for (t, (g, big_g)) in c.t.iter().zip(c.g.iter().zip(&c.big_g)) {
        assert!((g - 1.0).abs() < 1e-8 && (big_g - t).abs() < 1e-7 * (1.0 + t));
    }
}

#[test]
fn ode_study_fits_three_points() {
    let s = ode_study("lemmaA1", 0.0, 3.0, &[1.0, 0.8, 0.6]).unwrap();
    assert_eq!(s.regime, "CriticalExp");
    assert!(s.points.iter().all(|p| p.t_blowup.is_some()));
    assert_eq!(s.xs.len(), 3);
    assert!(s.slope.unwrap() > 0.0);
}

#[test]
fn wave_blows_up_for_large_data() {
    let r = wave_run(0.0, 2.0, 2.0, 30.0, 32.0, 256).unwrap();
    let [lo, hi] = r.blowup.unwrap();
    assert!(lo < hi && hi <= 30.0);
    assert_eq!(r.x.len(), 256);
    assert!(wave_run(0.0, 2.0, 0.0, 1.0, 32.0, 256).unwrap().blowup.is_none());
}

#[test]
fn json_wrappers_report_errors() {
    assert!(aux_curves_js(1.5, 10.0, 32).contains("\"error\""));
    assert!(ode_study_js("nope", 0.0, 3.0, "1,0.5").contains("\"error\""));
    assert!(ode_study_js("lemmaA1", 0.0, 3.0, "1,x").contains("not a number"));
    assert!(wave_run_js(0.0, 2.0, 1.0, 1.0, 32.0, 100).contains("\"error\""));
    let ok: serde_json::Value = serde_json::from_str(&aux_curves_js(0.5, 5.0, 20)).unwrap();
    assert_eq!(ok["t"].as_array().unwrap().len(), 20);
}
