use voltbound::network::{build_admittance, fixtures};
use voltbound::oracle::{self, flat_start, solve_power_flow};

#[test]
fn nominal_solution_satisfies_the_power_balance() {
    let model = fixtures::three_bus();
    let y = build_admittance(&model).unwrap();
    let sol = oracle::nominal_solution(&y, &model).unwrap();
    let currents = y.load_currents(model.slack_voltage, &sol.voltages);
    for (k, (v, i)) in sol.voltages.iter().zip(&currents).enumerate() {
        let s = v * i.conj() + model.load_powers[k] - model.nominal_injections[k];
        assert!(s.norm() < 1e-9, "bus {}: {s}", k + 1);
    }
    for (v, want) in sol.voltages.iter().zip([0.987, 0.972, 0.965]) {
        assert!((v.norm() - want).abs() < 1e-3);
    }
}

#[test]
fn warm_and_flat_starts_agree() {
    let model = fixtures::three_bus();
    let y = build_admittance(&model).unwrap();
    let nominal = oracle::nominal_solution(&y, &model).unwrap();
    let again = solve_power_flow(&y, &model, &model.nominal_injections, &nominal.voltages).unwrap();
    let flat = solve_power_flow(&y, &model, &model.nominal_injections, &flat_start(&model)).unwrap();
    for (a, b) in again.voltages.iter().zip(&flat.voltages) {
        assert!((a - b).norm() < 1e-9);
    }
}

#[test]
fn csv_is_reproducible_and_complete() {
    let model = fixtures::three_bus();
    let y = build_admittance(&model).unwrap();
    let a = oracle::monte_carlo(&model, &y, 300, 42).unwrap();
    let b = oracle::monte_carlo(&model, &y, 300, 42).unwrap();
    assert_eq!(a.to_csv(), b.to_csv());
    assert_eq!(a.to_csv().lines().count(), 301);
    assert_eq!(a.retained + a.non_convergent + a.current_violating, a.requested);
    let c = oracle::monte_carlo(&model, &y, 300, 43).unwrap();
    assert_ne!(a.to_csv(), c.to_csv());
}
