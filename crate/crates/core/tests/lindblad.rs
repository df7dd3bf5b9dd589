use qca_core::dense::{InitialKind, RowState};
use qca_core::lindblad::{
    compare_at_probabilities, compare_qca_to_lindblad, integrate_rk4, LindbladParams, RateConvention,
};
use qca_core::ObservableSet;

fn terminal_density(dt: f64, t_final: f64) -> f64 {
    let init = RowState::initial(4, &InitialKind::FullyOccupied).unwrap();
    let params = LindbladParams::new(4, 5.75, 1.0, dt, RateConvention::default()).unwrap();
    let run = integrate_rk4(&init, &params, t_final, ObservableSet::MEAN_ONLY).unwrap();
    assert!(run.max_trace_drift < 1e-9);
    *run.series.n_mean.last().unwrap()
}

#[test]
fn step_halving_shows_fourth_order() {
    // terminal error oscillates in time; 1/γ keeps it far above roundoff
    let t_final = 1.0;
    let reference = terminal_density(1e-3, t_final);
    let coarse = (terminal_density(1e-2, t_final) - reference).abs();
    let fine = (terminal_density(5e-3, t_final) - reference).abs();
    let ratio = coarse / fine;
    assert!((12.0..=20.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn discrepancy_is_first_order_in_the_step() {
    let steps = [0.02, 0.01, 0.005, 0.0025];
    let errors: Vec<f64> = steps
        .iter()
        .map(|&g| compare_qca_to_lindblad(4, 5.75, g, 10.0, RateConvention::default()).unwrap().max_abs_diff)
        .collect();
    let xs: Vec<f64> = steps.iter().map(|s| s.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / 4.0, ys.iter().sum::<f64>() / 4.0);
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    assert!((slope - 1.0).abs() <= 0.2, "slope {slope}, errors {errors:?}");
    let halving = errors[1] / errors[2];
    assert!((1.5..=2.5).contains(&halving), "halving ratio {halving}");
}

#[test]
fn reference_point_overlay() {
    let matched = compare_at_probabilities(4, 0.006597, 0.004991672, 10.0, RateConvention::ThetaSqEqGammaDt).unwrap();
    assert!((matched.gamma_dt - 0.005).abs() < 1e-9);
    assert_eq!(matched.times.len(), 2001);
    assert!(matched.max_abs_diff < 0.02, "{}", matched.max_abs_diff);

    // read under the half-rate mapping, the QCA decays at γ/2 against a rate-γ master equation
    let literal =
        compare_at_probabilities(4, 0.006597, 0.004991672, 10.0, RateConvention::ThetaSqEqHalfGammaDt).unwrap();
    assert!((literal.gamma_dt - 0.01).abs() < 1e-9);
    assert!((literal.omega_over_gamma - 5.75).abs() < 1e-3);
    assert!(literal.max_abs_diff > 0.1, "{}", literal.max_abs_diff);
}

#[test]
fn comparison_record_round_trips_through_json() {
    let rec = compare_qca_to_lindblad(3, 2.0, 0.02, 0.2, RateConvention::ThetaSqEqHalfGammaDt).unwrap();
    assert_eq!(rec.times.len(), 11);
    let text = serde_json::to_string(&rec).unwrap();
    assert!(text.contains("\"rate_convention\":\"theta-sq-eq-half-gamma-dt\""));
    let back: qca_core::lindblad::ComparisonRecord = serde_json::from_str(&text).unwrap();
    assert_eq!(back, rec);
}
