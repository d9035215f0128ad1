//! Network data model, admittance matrix and JSON ingestion.
//!
//! Buses are numbered `0..=N` with bus 0 the slack bus. Per-bus vectors
//! (`shunt_loads`, `load_powers`, ...) have length `N` and are indexed by
//! `bus - 1`.

use std::collections::{BTreeSet, VecDeque};
use std::path::Path;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Violation};
use crate::linalg::{self, CMatrix};
use crate::scalar::Scalar;

/// Asymmetry of `Ψ` that is silently repaired by averaging with `Ψ*`.
pub const HERMITIAN_REPAIR_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct LineSpec<T: Scalar> {
    pub from_bus: usize,
    pub to_bus: usize,
    pub admittance: Complex<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel<T: Scalar> {
    pub n_buses: usize,
    pub lines: Vec<LineSpec<T>>,
    pub shunt_loads: Vec<Complex<T>>,
    pub slack_voltage: Complex<T>,
    pub load_powers: Vec<Complex<T>>,
    pub nominal_injections: Vec<Complex<T>>,
    pub ellipsoid_shape: CMatrix<T>,
    pub current_limits: Vec<T>,
    /// Reactive injections are pinned to their nominal value; only the real
    /// part of each injection is uncertain.
    pub reactive_fixed: bool,
}

/// Symmetric (not Hermitian) bus admittance matrix of size `(N+1)x(N+1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmittanceMatrix<T: Scalar> {
    pub entries: CMatrix<T>,
}

impl<T: Scalar> AdmittanceMatrix<T> {
    pub fn n_buses(&self) -> usize {
        self.entries.nrows() - 1
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex<T> {
        self.entries[(i, j)]
    }

    /// Injected currents `i_k = sum_j Y_kj v_j` at the load buses, with the
    /// slack voltage prepended to `voltages`.
    pub fn load_currents(&self, slack: Complex<T>, voltages: &[Complex<T>]) -> Vec<Complex<T>> {
        let n = self.n_buses();
        (1..=n)
            .map(|k| {
                let mut acc = self.entries[(k, 0)] * slack;
                for (m, v) in voltages.iter().enumerate() {
                    acc += self.entries[(k, m + 1)] * v;
                }
                acc
            })
            .collect()
    }
}

impl<T: Scalar> NetworkModel<T> {
    /// Lists every violated model invariant. An empty list means the model
    /// is usable by all downstream modules.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let n = self.n_buses;
        let mut push = |field: &'static str, rule: String| out.push(Violation { field, rule });
        if n == 0 {
            push("n_buses", "must be at least 1".into());
        }
        for (field, len) in [
            ("shunt_loads", self.shunt_loads.len()),
            ("load_powers", self.load_powers.len()),
            ("nominal_injections", self.nominal_injections.len()),
            ("current_limits", self.current_limits.len()),
        ] {
            if len != n {
                push(field, format!("expected {n} entries, found {len}"));
            }
        }
        let finite = |z: &Complex<T>| z.re.is_finite() && z.im.is_finite();
        if !finite(&self.slack_voltage) {
            push("slack_voltage", "must be finite".into());
        }
        for (field, values) in [
            ("shunt_loads", &self.shunt_loads),
            ("load_powers", &self.load_powers),
            ("nominal_injections", &self.nominal_injections),
        ] {
            if !values.iter().all(finite) {
                push(field, "entries must be finite".into());
            }
        }
        let psi = &self.ellipsoid_shape;
        if psi.nrows() != n || psi.ncols() != n {
            push("ellipsoid_shape", format!("expected {n}x{n}, found {}x{}", psi.nrows(), psi.ncols()));
        } else if !psi.iter().all(finite) {
            push("ellipsoid_shape", "entries must be finite".into());
        } else {
            let defect = linalg::hermitian_defect(psi);
            if defect > T::c(HERMITIAN_REPAIR_TOL) {
                push("ellipsoid_shape", format!("not Hermitian (defect {defect:e})"));
            } else if n > 0 {
                let scale = linalg::max_abs(psi).max(T::one());
                let min_eig = linalg::hermitian_min_eigenvalue(psi);
                if min_eig < -T::c(1e-12) * scale {
                    push("ellipsoid_shape", format!("not positive semidefinite (eigenvalue {min_eig:e})"));
                }
            }
        }
        for (k, limit) in self.current_limits.iter().enumerate() {
            if !(limit.is_finite() && *limit > T::zero()) {
                push("current_limits", format!("limit at bus {} must be positive and finite", k + 1));
            }
        }
        if let Err(e) = self.check_topology() {
            push("lines", e.to_string());
        }
        out
    }

    /// Validates, repairs a near-Hermitian `Ψ`, and returns the model.
    pub fn checked(mut self) -> Result<Self, ModelError> {
        let violations = self.validate();
        if !violations.is_empty() {
            return Err(ModelError::Invalid(violations));
        }
        self.ellipsoid_shape = linalg::hermitian_part(&self.ellipsoid_shape);
        Ok(self)
    }

    fn check_topology(&self) -> Result<(), ModelError> {
        let n = self.n_buses;
        let mut seen = BTreeSet::new();
        let mut adjacency = vec![Vec::new(); n + 1];
        for line in &self.lines {
            for bus in [line.from_bus, line.to_bus] {
                if bus > n {
                    return Err(ModelError::BusOutOfRange { bus, n });
                }
            }
            if line.from_bus == line.to_bus {
                return Err(ModelError::SelfLoop(line.from_bus));
            }
            if !(line.admittance.re.is_finite() && line.admittance.im.is_finite()) {
                return Err(ModelError::Parse(format!("line {}-{} has a non-finite admittance", line.from_bus, line.to_bus)));
            }
            let key = (line.from_bus.min(line.to_bus), line.from_bus.max(line.to_bus));
            if !seen.insert(key) {
                return Err(ModelError::DuplicateLine(key.0, key.1));
            }
            adjacency[line.from_bus].push(line.to_bus);
            adjacency[line.to_bus].push(line.from_bus);
        }
        let mut reached = vec![false; n + 1];
        reached[0] = true;
        let mut queue = VecDeque::from([0usize]);
        while let Some(b) = queue.pop_front() {
            for &next in &adjacency[b] {
                if !reached[next] {
                    reached[next] = true;
                    queue.push_back(next);
                }
            }
        }
        match reached.iter().position(|r| !r) {
            Some(bus) => Err(ModelError::Disconnected(bus)),
            None => Ok(()),
        }
    }

    /// Element-wise conversion to another scalar type.
    pub fn cast<U: Scalar>(&self) -> NetworkModel<U> {
        let cc = |z: &Complex<T>| Complex::new(U::c(z.re.to_f64_lossy()), U::c(z.im.to_f64_lossy()));
        NetworkModel {
            n_buses: self.n_buses,
            lines: self
                .lines
                .iter()
                .map(|l| LineSpec { from_bus: l.from_bus, to_bus: l.to_bus, admittance: cc(&l.admittance) })
                .collect(),
            shunt_loads: self.shunt_loads.iter().map(cc).collect(),
            slack_voltage: cc(&self.slack_voltage),
            load_powers: self.load_powers.iter().map(cc).collect(),
            nominal_injections: self.nominal_injections.iter().map(cc).collect(),
            ellipsoid_shape: self.ellipsoid_shape.map(|z| cc(&z)),
            current_limits: self.current_limits.iter().map(|x| U::c(x.to_f64_lossy())).collect(),
            reactive_fixed: self.reactive_fixed,
        }
    }

    /// Same network with load buses relabeled: old bus `k` becomes bus
    /// `perm[k-1] + 1`. The slack bus keeps label 0.
    pub fn relabeled(&self, perm: &[usize]) -> NetworkModel<T> {
        let n = self.n_buses;
        assert_eq!(perm.len(), n, "permutation length must equal N");
        let map = |b: usize| if b == 0 { 0 } else { perm[b - 1] + 1 };
        let permute = |v: &[Complex<T>]| {
            let mut out = v.to_vec();
            for (k, z) in v.iter().enumerate() {
                out[perm[k]] = *z;
            }
            out
        };
        let mut psi = self.ellipsoid_shape.clone();
        let mut limits = self.current_limits.clone();
        for i in 0..n {
            limits[perm[i]] = self.current_limits[i];
            for j in 0..n {
                psi[(perm[i], perm[j])] = self.ellipsoid_shape[(i, j)];
            }
        }
        NetworkModel {
            n_buses: n,
            lines: self
                .lines
                .iter()
                .map(|l| LineSpec { from_bus: map(l.from_bus), to_bus: map(l.to_bus), admittance: l.admittance })
                .collect(),
            shunt_loads: permute(&self.shunt_loads),
            slack_voltage: self.slack_voltage,
            load_powers: permute(&self.load_powers),
            nominal_injections: permute(&self.nominal_injections),
            ellipsoid_shape: psi,
            current_limits: limits,
            reactive_fixed: self.reactive_fixed,
        }
    }
}

/// Assembles `Y` from the line list and the shunt loads.
pub fn build_admittance<T: Scalar>(model: &NetworkModel<T>) -> Result<AdmittanceMatrix<T>, ModelError> {
    model.check_topology()?;
    let n = model.n_buses;
    let mut y = CMatrix::<T>::zeros(n + 1, n + 1);
    for line in &model.lines {
        let (i, j, a) = (line.from_bus, line.to_bus, line.admittance);
        y[(i, j)] -= a;
        y[(j, i)] -= a;
        y[(i, i)] += a;
        y[(j, j)] += a;
    }
    for (k, shunt) in model.shunt_loads.iter().enumerate().take(n) {
        y[(k + 1, k + 1)] += *shunt;
    }
    Ok(AdmittanceMatrix { entries: y })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexJson {
    pub re: f64,
    pub im: f64,
}

impl From<ComplexJson> for Complex<f64> {
    fn from(c: ComplexJson) -> Self {
        Complex::new(c.re, c.im)
    }
}

impl From<Complex<f64>> for ComplexJson {
    fn from(c: Complex<f64>) -> Self {
        ComplexJson { re: c.re, im: c.im }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineJson {
    pub from: usize,
    pub to: usize,
    pub y: ComplexJson,
}

/// On-disk layout of a network description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    pub n_buses: usize,
    pub slack_voltage: ComplexJson,
    pub lines: Vec<LineJson>,
    pub shunt_loads: Vec<ComplexJson>,
    pub load_powers: Vec<ComplexJson>,
    pub nominal_injections: Vec<ComplexJson>,
    pub psi: Vec<Vec<ComplexJson>>,
    pub current_limits: Vec<f64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub reactive_fixed: bool,
}

impl NetworkFile {
    /// Converts to a model without running validation.
    pub fn into_model(self) -> Result<NetworkModel<f64>, ModelError> {
        let n = self.psi.len();
        if let Some((row, r)) = self.psi.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(ModelError::Parse(format!("psi row {row} has {} entries, expected {n}", r.len())));
        }
        let flat: Vec<Complex<f64>> = self.psi.into_iter().flatten().map(Into::into).collect();
        Ok(NetworkModel {
            n_buses: self.n_buses,
            lines: self.lines.into_iter().map(|l| LineSpec { from_bus: l.from, to_bus: l.to, admittance: l.y.into() }).collect(),
            shunt_loads: self.shunt_loads.into_iter().map(Into::into).collect(),
            slack_voltage: self.slack_voltage.into(),
            load_powers: self.load_powers.into_iter().map(Into::into).collect(),
            nominal_injections: self.nominal_injections.into_iter().map(Into::into).collect(),
            ellipsoid_shape: CMatrix::from_row_slice(n, n, &flat),
            current_limits: self.current_limits,
            reactive_fixed: self.reactive_fixed,
        })
    }

    pub fn from_model(model: &NetworkModel<f64>) -> Self {
        let psi = &model.ellipsoid_shape;
        NetworkFile {
            n_buses: model.n_buses,
            slack_voltage: model.slack_voltage.into(),
            lines: model.lines.iter().map(|l| LineJson { from: l.from_bus, to: l.to_bus, y: l.admittance.into() }).collect(),
            shunt_loads: model.shunt_loads.iter().map(|&z| z.into()).collect(),
            load_powers: model.load_powers.iter().map(|&z| z.into()).collect(),
            nominal_injections: model.nominal_injections.iter().map(|&z| z.into()).collect(),
            psi: (0..psi.nrows()).map(|i| (0..psi.ncols()).map(|j| psi[(i, j)].into()).collect()).collect(),
            current_limits: model.current_limits.clone(),
            reactive_fixed: model.reactive_fixed,
        }
    }
}

impl NetworkModel<f64> {
    /// Parses and validates a JSON network description.
    pub fn from_json_str(text: &str) -> Result<Self, ModelError> {
        let file: NetworkFile = serde_json::from_str(text)
            .map_err(|e| ModelError::Parse(format!("line {}, column {}: {e}", e.line(), e.column())))?;
        file.into_model()?.checked()
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| ModelError::Parse(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&NetworkFile::from_model(self)).expect("network serialization cannot fail")
    }
}

/// Bundled example networks.
pub mod fixtures {
    use super::NetworkModel;

    /// Three-bus radial feeder with three renewable injections and tight
    /// current limits.
    pub const THREE_BUS_JSON: &str = include_str!("../data/three_bus.json");
    /// One load bus behind a single line.
    pub const SINGLE_BUS_JSON: &str = include_str!("../data/single_bus.json");

    pub fn three_bus() -> NetworkModel<f64> {
        NetworkModel::from_json_str(THREE_BUS_JSON).expect("bundled fixture is valid")
    }

    pub fn single_bus() -> NetworkModel<f64> {
        NetworkModel::from_json_str(SINGLE_BUS_JSON).expect("bundled fixture is valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    fn two_bus(y: Complex<f64>) -> NetworkModel<f64> {
        NetworkModel {
            n_buses: 1,
            lines: vec![LineSpec { from_bus: 0, to_bus: 1, admittance: y }],
            shunt_loads: vec![c(0.0, 0.0)],
            slack_voltage: c(1.0, 0.0),
            load_powers: vec![c(0.5, 0.1)],
            nominal_injections: vec![c(0.2, 0.0)],
            ellipsoid_shape: CMatrix::from_element(1, 1, c(100.0, 0.0)),
            current_limits: vec![1.0],
            reactive_fixed: false,
        }
    }

    #[test]
    fn single_line_admittance() {
        let y = build_admittance(&two_bus(c(1.0, -2.0))).unwrap();
        let expected = CMatrix::from_row_slice(2, 2, &[c(1.0, -2.0), c(-1.0, 2.0), c(-1.0, 2.0), c(1.0, -2.0)]);
        assert_eq!(y.entries, expected);
    }

    #[test]
    fn empty_line_list_is_disconnected() {
        let mut m = two_bus(c(1.0, -2.0));
        m.lines.clear();
        assert!(matches!(build_admittance(&m), Err(ModelError::Disconnected(1))));
    }

    #[test]
    fn parallel_and_self_lines_rejected() {
        let mut m = two_bus(c(1.0, -2.0));
        m.lines.push(LineSpec { from_bus: 1, to_bus: 0, admittance: c(3.0, 0.0) });
        assert!(matches!(build_admittance(&m), Err(ModelError::DuplicateLine(0, 1))));
        let mut m = two_bus(c(1.0, -2.0));
        m.lines.push(LineSpec { from_bus: 1, to_bus: 1, admittance: c(3.0, 0.0) });
        assert!(matches!(build_admittance(&m), Err(ModelError::SelfLoop(1))));
    }

    #[test]
    fn three_bus_fixture_structure() {
        let model = fixtures::three_bus();
        assert!(model.validate().is_empty());
        let y = build_admittance(&model).unwrap();
        assert_eq!(y.entries, y.entries.transpose());
        let mut pairs = 0;
        for i in 0..4 {
            for j in (i + 1)..4 {
                if y.get(i, j) != c(0.0, 0.0) {
                    pairs += 1;
                }
            }
            let row: Complex<f64> = (0..4).map(|j| y.get(i, j)).sum();
            assert!(row.norm() < 1e-12);
        }
        assert_eq!(pairs, 3);
        // Hand assembly of the chain 0-1-2-3.
        let z = |r: f64, x: f64| c(1.0, 0.0) / c(r, x);
        let (y01, y12, y23) = (z(0.0035, 0.0051), z(0.0100, 0.0142), z(0.0060, 0.0087));
        assert!((y.get(1, 1) - (y01 + y12)).norm() < 1e-9);
        assert!((y.get(2, 2) - (y12 + y23)).norm() < 1e-9);
        assert!((y.get(3, 3) - y23).norm() < 1e-9);
        assert!((y.get(1, 2) + y12).norm() < 1e-9);
        assert_eq!(y.get(0, 3), c(0.0, 0.0));
    }

    #[test]
    fn validation_names_fields() {
        let mut m = two_bus(c(1.0, -2.0));
        m.ellipsoid_shape[(0, 0)] = c(-1.0, 0.0);
        let v = m.validate();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].field, "ellipsoid_shape");

        let mut m = fixtures::three_bus();
        m.current_limits[1] = 0.0;
        let v = m.validate();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].field, "current_limits");
    }

    #[test]
    fn near_hermitian_shape_is_repaired() {
        let mut m = fixtures::three_bus();
        m.ellipsoid_shape[(0, 1)] = c(1e-11, 0.0);
        let fixed = m.clone().checked().unwrap();
        assert_eq!(fixed.ellipsoid_shape[(0, 1)], c(5e-12, 0.0));
        m.ellipsoid_shape[(0, 1)] = c(1e-6, 0.0);
        assert!(matches!(m.checked(), Err(ModelError::Invalid(_))));
    }

    #[test]
    fn json_round_trip() {
        let model = fixtures::three_bus();
        let again = NetworkModel::from_json_str(&model.to_json_string()).unwrap();
        assert_eq!(model, again);
        assert!(matches!(
            NetworkModel::from_json_str(&fixtures::THREE_BUS_JSON.replace("\"n_buses\": 3", "\"n_buses\": 0")),
            Err(ModelError::Invalid(_))
        ));
        assert!(matches!(NetworkModel::from_json_str("{\"n_buses\": 1"), Err(ModelError::Parse(_))));
    }

    #[test]
    fn relabeling_permutes_admittance() {
        let model = fixtures::three_bus();
        let perm = [2, 0, 1];
        let y = build_admittance(&model).unwrap();
        let yp = build_admittance(&model.relabeled(&perm)).unwrap();
        let map = |b: usize| if b == 0 { 0 } else { perm[b - 1] + 1 };
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(y.get(i, j), yp.get(map(i), map(j)));
            }
        }
    }

    #[test]
    fn generic_over_f32() {
        let model: NetworkModel<f32> = fixtures::single_bus().cast();
        let y = build_admittance(&model).unwrap();
        assert!((y.get(1, 1).re - 20.0f32).abs() < 1e-5);
        assert!(y.get(0, 1).im.abs() > 0.0);
    }
}
