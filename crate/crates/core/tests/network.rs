use voltbound::error::ModelError;
use voltbound::network::{build_admittance, fixtures, NetworkModel};
use voltbound::Network;

#[test]
fn fixtures_parse_and_round_trip() {
    for text in [fixtures::THREE_BUS_JSON, fixtures::SINGLE_BUS_JSON] {
        let model = Network::from_json_str(text).unwrap();
        let again = Network::from_json_str(&model.to_json_string()).unwrap();
        assert_eq!(model, again);
    }
}

#[test]
fn syntax_errors_carry_a_position() {
    let err = Network::from_json_str("{\n  \"n_buses\": 3,\n  \"lines\": [oops]\n}").unwrap_err();
    let msg = err.to_string();
    assert!(matches!(err, ModelError::Parse(_)));
    assert!(msg.contains("line 3"), "{msg}");
}

#[test]
fn unknown_fields_are_rejected() {
    let text = fixtures::SINGLE_BUS_JSON.replacen("\"n_buses\"", "\"extra\": 1, \"n_buses\"", 1);
    assert!(matches!(Network::from_json_str(&text), Err(ModelError::Parse(_))));
}

#[test]
fn negative_limits_and_shapes_are_reported_by_field() {
    let mut model = fixtures::three_bus();
    model.current_limits[1] = -1.0;
    model.ellipsoid_shape[(0, 0)] = voltbound::Complex::new(-5.0, 0.0);
    let fields: Vec<&str> = model.validate().iter().map(|v| v.field).collect();
    assert!(fields.contains(&"current_limits"), "{fields:?}");
    assert!(fields.contains(&"ellipsoid_shape"), "{fields:?}");
}

#[test]
fn admittance_rows_sum_to_shunts() {
    let model: NetworkModel<f64> = fixtures::three_bus();
    let y = build_admittance(&model).unwrap();
    for i in 0..=3 {
        let row: voltbound::Complex<f64> = (0..=3).map(|j| y.get(i, j)).sum();
        let shunt = if i == 0 { voltbound::Complex::new(0.0, 0.0) } else { model.shunt_loads[i - 1] };
        assert!((row - shunt).norm() < 1e-9, "row {i}: {row}");
        for j in 0..=3 {
            assert_eq!(y.get(i, j), y.get(j, i));
        }
    }
}
