#![allow(dead_code)]

use nalgebra::DMatrix;
use proptest::prelude::*;
use voltbound::network::{LineSpec, NetworkModel};
use voltbound::Complex;

pub fn c(re: f64, im: f64) -> Complex<f64> {
    Complex::new(re, im)
}

/// Radial feeder `0 - 1 - ... - N` with an optional extra tie line, light
/// loads and a diagonal ellipsoid.
pub fn feeder(n: usize, admittances: &[(f64, f64)], loads: &[(f64, f64)], radius: f64, tie: bool) -> NetworkModel<f64> {
    let mut lines: Vec<LineSpec<f64>> =
        (0..n).map(|k| LineSpec { from_bus: k, to_bus: k + 1, admittance: c(admittances[k].0, admittances[k].1) }).collect();
    if tie && n >= 2 {
        lines.push(LineSpec { from_bus: 0, to_bus: n, admittance: c(admittances[n].0, admittances[n].1) });
    }
    let shape = DMatrix::from_diagonal_element(n, n, c(1.0 / (radius * radius), 0.0));
    NetworkModel {
        n_buses: n,
        lines,
        shunt_loads: vec![c(0.0, 0.0); n],
        slack_voltage: c(1.0, 0.0),
        load_powers: loads.iter().map(|(p, q)| c(*p, *q)).collect(),
        nominal_injections: vec![c(0.0, 0.0); n],
        ellipsoid_shape: shape,
        current_limits: vec![10.0; n],
        reactive_fixed: false,
    }
}

pub fn arb_network(max_n: usize) -> impl Strategy<Value = NetworkModel<f64>> {
    (1..=max_n).prop_flat_map(|n| {
        (
            Just(n),
            prop::collection::vec((5.0..50.0f64, -80.0..-10.0f64), n + 1),
            prop::collection::vec((0.0..0.3f64, 0.0..0.1f64), n),
            0.02..0.2f64,
            any::<bool>(),
        )
            .prop_map(|(n, y, loads, r, tie)| feeder(n, &y, &loads, r, tie))
    })
}

/// Voltages with magnitude below one.
pub fn arb_voltages(n: usize) -> impl Strategy<Value = Vec<Complex<f64>>> {
    prop::collection::vec((0.0..1.0f64, -std::f64::consts::PI..std::f64::consts::PI), n)
        .prop_map(|v| v.into_iter().map(|(r, a)| Complex::from_polar(r, a)).collect())
}

pub fn arb_hermitian(max_dim: usize) -> impl Strategy<Value = DMatrix<Complex<f64>>> {
    (1..=max_dim).prop_flat_map(|d| {
        prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), d * d).prop_map(move |v| {
            let a = DMatrix::from_iterator(d, d, v.into_iter().map(|(re, im)| c(re, im)));
            (&a + a.adjoint()).map(|z| z * 0.5)
        })
    })
}
