use proptest::prelude::*;
use qca_core::meanfield::{
    linspace, mf_critical_line, mf_p1_one_closed_form, mf_phase_diagram, mf_stationary, mf_step, order_boundary,
    MeanFieldMap, MeanFieldState, PhaseDiagram, RunConfig, TransitionOrder, DEFAULT_GRADIENT_THRESHOLD,
};
use qca_core::GateParams;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Update rules as printed alongside the product-state closure. Known to
/// disagree with the three-site contraction; kept to document where.
fn printed_update(s: &MeanFieldState, p1: f64, p2: f64) -> MeanFieldState {
    let (n, sx, sy) = (s.n, s.sx, s.sy);
    let r2 = std::f64::consts::SQRT_2;
    let (a, b, q) = (p1.sqrt(), (1.0 - p1).sqrt(), (1.0 - p2).sqrt());
    let n1 = (1.0 - p2) * (p1 * n * n + (r2 / 2.0 * a * b * sx - p1 / 2.0 - 1.0) * n - p1 / 8.0 * (sx * sx + sy * sy));
    let sy1 = q * sy * (n * (1.0 - b) + r2 / 2.0 * a * sx + b);
    let sx1 = q * (2.0 * r2 * a * b * n * n - (2.0 * r2 * a * b + (2.0 * p1 + b - 1.0) * sx) * n)
        + q * (b * sx - r2 / 4.0 * a * (b - 1.0) * sx * sx)
        - r2 / 4.0 * q * a * (b + 1.0) * sy * sy;
    MeanFieldState { n: n1, sx: sx1, sy: sy1 }
}

#[test]
fn printed_equations_disagree_with_contraction() {
    // at p1 = 1 the printed density rule is (1-p2)(n² - 3n/2); the contraction gives (1-p2)(3n/2 - n²)
    for n in [0.2, 0.5, 1.0] {
        for p2 in [0.0, 0.3] {
            let s = MeanFieldState::new(n, 0.0, 0.0).unwrap();
            let printed = printed_update(&s, 1.0, p2);
            let exact = mf_step(&s, &GateParams::new(1.0, p2).unwrap()).unwrap();
            assert!((exact.n - (1.0 - p2) * (1.5 * n - n * n)).abs() < 1e-14);
            assert!((printed.n + exact.n).abs() < 1e-14, "n={n} p2={p2}");
        }
    }
    let printed = printed_update(&MeanFieldState::FULLY_OCCUPIED, 1.0, 0.0);
    assert!(printed.n < 0.0);
}

#[test]
fn printed_density_rule_flips_sign_under_pure_decay() {
    let s = MeanFieldState::new(0.4, 0.3, 0.1).unwrap();
    let exact = mf_step(&s, &GateParams::new(0.0, 0.2).unwrap()).unwrap();
    let printed = printed_update(&s, 0.0, 0.2);
    assert!((exact.n - 0.8 * 0.4).abs() < 1e-14);
    assert!((printed.n + exact.n).abs() < 1e-14);
}

#[test]
fn stationary_density_at_full_branching() {
    let r = mf_stationary(&GateParams::new(1.0, 0.2).unwrap(), &MeanFieldState::FULLY_OCCUPIED, 10_000, 1e-12)
        .unwrap();
    assert!(r.converged);
    assert!((r.state.n - 0.25).abs() < 1e-6);
    let moved = mf_step(&r.state, &GateParams::new(1.0, 0.2).unwrap()).unwrap();
    assert!((moved.n - r.state.n).abs() < 1e-11);
}

#[test]
fn full_branching_row_matches_closed_form() {
    let p2_grid = linspace(0.0, 0.99, 100);
    let d = mf_phase_diagram(&[1.0], &p2_grid, RunConfig::default()).unwrap();
    for (j, p2) in p2_grid.iter().enumerate() {
        let closed = mf_p1_one_closed_form(*p2).unwrap();
        // slowing down near 1/3 limits the iterated value; compare where it converged
        let got = d.n_stationary[0][j];
        if (p2 - 1.0 / 3.0).abs() > 0.02 {
            assert!((got - closed).abs() < 1e-9, "p2={p2}: {got} vs {closed}");
        }
    }
}

#[test]
fn iterated_and_root_found_fixed_points_agree() {
    for (p1, p2) in [(1.0, 0.2), (0.8, 0.1), (0.5, 0.05), (0.3, 0.02)] {
        let map = MeanFieldMap::from_probabilities(p1, p2).unwrap();
        let it = map.stationary(&MeanFieldState::FULLY_OCCUPIED, 10_000, 1e-12).unwrap();
        assert!(it.converged);
        let root = map.refine_fixed_point(&it.state, 50, 1e-14).unwrap();
        assert!(root.converged);
        assert!((root.state.n - it.state.n).abs() < 1e-9, "({p1}, {p2})");
        assert!((root.state.sx - it.state.sx).abs() < 1e-9, "({p1}, {p2})");
    }
}

fn fine_diagram(p1_grid: &[f64]) -> PhaseDiagram {
    mf_phase_diagram(p1_grid, &linspace(0.0, 1.0, 2001), RunConfig::default()).unwrap()
}

#[test]
fn order_at_low_and_full_branching() {
    let d = fine_diagram(&[0.2, 1.0]);
    let line = mf_critical_line(&d, DEFAULT_GRADIENT_THRESHOLD).unwrap();
    assert_eq!(line[0].order, Some(TransitionOrder::Discontinuous));
    assert_eq!(line[1].order, Some(TransitionOrder::Continuous));
}

#[test]
fn central_difference_peak_sits_below_the_kink() {
    // n* = 3/2 + 1/(p2 - 1) steepens up to the kink at 1/3, but the stencil
    // straddling the kink averages in the flat side, so the peak lands early
    let spacing = 1.0 / 2000.0;
    let p2_grid = linspace(0.0, 1.0, 2001);
    let exact: Vec<f64> = p2_grid.iter().map(|&p| mf_p1_one_closed_form(p.min(0.999)).unwrap()).collect();
    let exact_diagram = PhaseDiagram {
        p1_grid: vec![1.0],
        p2_grid: p2_grid.clone(),
        n_stationary: vec![exact],
        max_iter: 0,
        tol: 0.0,
        unconverged: 0,
    };
    let exact_peak = mf_critical_line(&exact_diagram, DEFAULT_GRADIENT_THRESHOLD).unwrap()[0].p2_crit.unwrap();
    assert!((exact_peak - 0.3325).abs() < 1e-12, "{exact_peak}");

    // 10⁴ iterations leave a slow tail near 1/3 that pulls the peak one more sample down
    let iterated = mf_critical_line(&fine_diagram(&[1.0]), DEFAULT_GRADIENT_THRESHOLD).unwrap()[0];
    let peak = iterated.p2_crit.unwrap();
    assert!((peak - 0.332).abs() < 1e-12, "{peak}");
    let offset = (1.0 / 3.0 - peak) / spacing;
    assert!(offset > 1.0 && offset < 3.0, "{offset}");
}

#[test]
fn order_boundary_on_fine_grid() {
    let p1_grid = linspace(0.5, 0.8, 31);
    let line = mf_critical_line(&fine_diagram(&p1_grid), DEFAULT_GRADIENT_THRESHOLD).unwrap();
    let boundary = order_boundary(&line).unwrap();
    assert!((boundary - 0.66).abs() <= 0.05, "boundary {boundary}");
}

#[test]
fn diagram_serializes() {
    let d = mf_phase_diagram(&[0.0, 1.0], &[0.2, 0.5], RunConfig::default()).unwrap();
    let json = serde_json::to_string(&d).unwrap();
    let back: PhaseDiagram = serde_json::from_str(&json).unwrap();
    assert_eq!(back, d);
    let mut buf = Vec::new();
    d.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "p1,p2,n_star");
    assert_eq!(lines.len(), 5);
    let first: Vec<f64> = lines[1].split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(first[..2], [0.0, 0.2]);
    assert_eq!(first[2], d.n_stationary[0][0]);
}

#[test]
fn feasible_states_stay_feasible() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0_f64;
    for _ in 0..10_000 {
        let r: f64 = rng.random_range(0.0..1.0_f64).cbrt();
        let z: f64 = rng.random_range(-1.0..1.0);
        let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let rho = (1.0 - z * z).sqrt();
        let s = MeanFieldState::new((1.0 + r * z) / 2.0, r * rho * phi.cos(), r * rho * phi.sin()).unwrap();
        let params = GateParams::new(rng.random_range(0.0..=1.0), rng.random_range(0.0..=1.0)).unwrap();
        let out = mf_step(&s, &params).unwrap();
        worst = worst.max(out.bloch_radius_sq());
        assert!((-1e-12..=1.0 + 1e-12).contains(&out.n));
    }
    assert!(worst <= 1.0 + 1e-12, "{worst}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sy_sector_is_closed(p1 in 0.0f64..=1.0, p2 in 0.0f64..=1.0, n in 0.0f64..=1.0, frac in -1.0f64..=1.0) {
        let sx = frac * 2.0 * (n * (1.0 - n)).sqrt();
        let map = MeanFieldMap::from_probabilities(p1, p2).unwrap();
        let mut s = MeanFieldState::new(n, sx, 0.0).unwrap();
        for _ in 0..50 {
            s = map.step(&s).unwrap();
            prop_assert!(s.sy.abs() < 1e-14);
        }
    }

    #[test]
    fn stationary_point_is_fixed(p1 in 0.0f64..=1.0, p2 in 0.0f64..0.9) {
        let params = GateParams::new(p1, p2).unwrap();
        let r = mf_stationary(&params, &MeanFieldState::FULLY_OCCUPIED, 10_000, 1e-12).unwrap();
        if r.converged {
            let next = mf_step(&r.state, &params).unwrap();
            prop_assert!((next.n - r.state.n).abs() < 1e-11);
            prop_assert!((next.sx - r.state.sx).abs() < 1e-11);
        }
    }

    #[test]
    fn closed_form_is_a_fixed_point(p2 in 0.0f64..0.999) {
        let n = mf_p1_one_closed_form(p2).unwrap();
        let out = mf_step(&MeanFieldState::new(n, 0.0, 0.0).unwrap(), &GateParams::new(1.0, p2).unwrap()).unwrap();
        prop_assert!((out.n - n).abs() < 1e-12);
    }
}
