use voltbound::bounds::{solve_bounds, verify_result, BoundsOptions, BoundsResult, SolveMode, VerifyOptions};
use voltbound::feasibility::{region_check, FeasibilityQuery};
use voltbound::network::{build_admittance, fixtures, NetworkModel};
use voltbound::quadratics;
use voltbound::{bounds, oracle, BoundsError, Side, VerificationError};

fn solve(model: &NetworkModel<f64>) -> BoundsResult<f64> {
    solve_bounds(model, &BoundsOptions::default()).unwrap()
}

fn intervals(r: &BoundsResult<f64>) -> Vec<(f64, f64)> {
    r.buses.iter().map(|b| (b.vmin, b.vmax)).collect()
}

#[test]
fn three_bus_bounds_contain_envelope() {
    let model = fixtures::three_bus();
    let result = solve(&model);
    let expected = [(0.986551, 0.987864), (0.971104, 0.974888), (0.964129, 0.968888)];
    for ((lo, hi), (elo, ehi)) in intervals(&result).into_iter().zip(expected) {
        assert!((lo - elo).abs() < 1e-5 && (hi - ehi).abs() < 1e-5, "[{lo}, {hi}]");
    }
    let report = verify_result(&model, &result, &VerifyOptions::default()).unwrap();
    assert!(report.retained > 0);
    assert!(report.margins.iter().all(|m| m.lower_margin >= -1e-9 && m.upper_margin >= -1e-9));
    assert!(result.perimeter_bound >= report.empirical_perimeter);
}

#[test]
fn decoupled_matches_joint() {
    let model = fixtures::three_bus();
    let joint = solve(&model);
    let dec = solve_bounds(&model, &BoundsOptions { mode: SolveMode::Decoupled, ..Default::default() }).unwrap();
    for (a, b) in joint.buses.iter().zip(&dec.buses) {
        assert!((a.vmin_sq - b.vmin_sq).abs() < 1e-5, "{a:?} {b:?}");
        assert!((a.vmax_sq - b.vmax_sq).abs() < 1e-5, "{a:?} {b:?}");
    }
}

#[test]
fn certificates_have_no_counterexamples_among_power_flow_samples() {
    let model = fixtures::three_bus();
    let result = solve(&model);
    let y = build_admittance(&model).unwrap();
    let env = oracle::monte_carlo(&model, &y, 500, 7).unwrap();
    let voltages: Vec<_> = env.samples.iter().filter_map(|s| s.voltages.clone()).collect();
    let qs = quadratics::constraint_set(&y, &model).unwrap();
    for cert in &result.certificates {
        let query = FeasibilityQuery {
            q0: bounds::side_form(3, cert.bus, cert.side, cert.bound_sq).unwrap(),
            qs: qs.clone(),
            catalog: result.catalog.clone(),
        };
        let check = region_check(&query, &voltages);
        assert!(check.in_region > 0);
        assert_eq!(check.violations, 0, "bus {} {}", cert.bus, cert.side);
    }
}

#[test]
fn larger_margin_never_tightens_bounds() {
    let model = fixtures::single_bus();
    let tight = solve(&model);
    let loose = solve_bounds(&model, &BoundsOptions { epsilon: 1e-4, ..Default::default() }).unwrap();
    let (a, b) = (&tight.buses[0], &loose.buses[0]);
    assert!(b.vmin_sq <= a.vmin_sq + 1e-9 && b.vmax_sq >= a.vmax_sq - 1e-9, "{a:?} {b:?}");
}

#[test]
fn larger_ellipsoid_widens_bounds() {
    let model = fixtures::single_bus();
    let mut wide = model.clone();
    wide.ellipsoid_shape = wide.ellipsoid_shape.map(|z| z / 4.0);
    let (a, b) = (solve(&model), solve(&wide));
    assert!(b.buses[0].vmin_sq <= a.buses[0].vmin_sq + 1e-9);
    assert!(b.buses[0].vmax_sq >= a.buses[0].vmax_sq - 1e-9);
    assert!(b.perimeter_bound > a.perimeter_bound);
}

#[test]
fn relabeling_buses_permutes_bounds() {
    let model = fixtures::three_bus();
    let perm = [2, 0, 1];
    let base = solve(&model);
    let moved = solve(&model.relabeled(&perm));
    for (k, b) in base.buses.iter().enumerate() {
        let m = &moved.buses[perm[k]];
        assert!((b.vmin_sq - m.vmin_sq).abs() < 1e-6 && (b.vmax_sq - m.vmax_sq).abs() < 1e-6, "{b:?} {m:?}");
    }
}

#[test]
fn tiny_current_limits_give_an_empty_region() {
    let mut model = fixtures::three_bus();
    model.current_limits = vec![1e-6; 3];
    for mode in [SolveMode::Joint, SolveMode::Decoupled] {
        let err = solve_bounds(&model, &BoundsOptions { mode, ..Default::default() }).unwrap_err();
        assert!(matches!(err, BoundsError::EmptyRegion), "{err}");
    }
}

#[test]
fn result_json_round_trips() {
    let model = fixtures::single_bus();
    let result = solve(&model);
    let text = result.to_json_string();
    let parsed: bounds::ResultJson = serde_json::from_str(&text).unwrap();
    let back = BoundsResult::from_json(&parsed, 1).unwrap();
    // The reloaded catalog is the unpruned one; everything else is identical.
    let again = back.to_json();
    assert!(!again.links_pruned);
    assert_eq!(bounds::ResultJson { links_pruned: parsed.links_pruned, ..again }, parsed);
    verify_result(&model, &back, &VerifyOptions { samples: 200, ..Default::default() }).unwrap();
}

#[test]
fn raised_lower_bound_is_caught_by_sampling() {
    let model = fixtures::three_bus();
    let mut result = solve(&model);
    let b = &mut result.buses[1];
    b.vmin_sq = 0.95;
    b.vmin = 0.95f64.sqrt();
    let width: f64 = result.buses.iter().map(|b| b.vmax_sq - b.vmin_sq).sum();
    result.perimeter_bound = result.vartheta * width;
    let err = verify_result(&model, &result, &VerifyOptions { samples: 2000, ..Default::default() }).unwrap_err();
    assert!(matches!(err, VerificationError::Containment { bus: 2, .. }), "{err}");
}

#[test]
fn shrinking_ellipsoid_brackets_the_nominal_point() {
    let mut model = fixtures::single_bus();
    model.ellipsoid_shape = model.ellipsoid_shape.map(|z| z * 1e3);
    model.current_limits = vec![10.0];
    let result = solve(&model);
    let y = build_admittance(&model).unwrap();
    let nominal = oracle::nominal_solution(&y, &model).unwrap().magnitudes_squared()[0];
    let b = &result.buses[0];
    assert!(b.vmin_sq <= nominal && nominal <= b.vmax_sq, "{b:?} {nominal}");
    let env = oracle::monte_carlo(&model, &y, 500, 3).unwrap();
    assert!(env.max_sq[0] - env.min_sq[0] < 1e-3);
    assert!(b.vmin_sq <= env.min_sq[0] && env.max_sq[0] <= b.vmax_sq);
}

#[test]
fn tampered_bounds_fail_verification() {
    let model = fixtures::single_bus();
    let mut result = solve(&model);
    let b = &mut result.buses[0];
    let mid = 0.5 * (b.vmin_sq + b.vmax_sq);
    b.vmax_sq = mid;
    b.vmax = mid.sqrt();
    result.perimeter_bound = result.vartheta * (mid - b.vmin_sq);
    if let Some(c) = result.certificates.iter_mut().find(|c| c.side == Side::Max) {
        c.bound_sq = mid;
    }
    assert!(verify_result(&model, &result, &VerifyOptions { samples: 200, ..Default::default() }).is_err());
}

#[test]
fn single_precision_solve_is_close_to_double() {
    let model = fixtures::single_bus();
    let double = solve(&model);
    let single = solve_bounds(&model.cast::<f32>(), &BoundsOptions { epsilon: 1e-4, ..Default::default() }).unwrap();
    let (a, b) = (&double.buses[0], &single.buses[0]);
    assert!((a.vmin as f32 - b.vmin).abs() < 2e-3 && (a.vmax as f32 - b.vmax).abs() < 2e-3, "{a:?} {b:?}");
}
