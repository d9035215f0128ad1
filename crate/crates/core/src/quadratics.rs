//! Hermitian quadratic forms over the monomial vector
//! `X = (V ⊗ V*; V; 1)` of dimension `N² + N + 1`.
//!
//! Storage is 0-based: position `a*N + b` holds `v_a conj(v_b)`, position
//! `N² + a` holds `v_a`, and the last position holds the constant 1, where
//! `a`, `b` index the load buses from 0. Public functions that take a bus
//! use the network numbering `1..=N`.

use nalgebra::DMatrix;
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::AssemblyError;
use crate::linalg::{self, CMatrix, CVector};
use crate::network::{AdmittanceMatrix, NetworkModel};
use crate::scalar::Scalar;

/// Dimension `N² + N + 1` of the monomial vector.
#[inline]
pub fn monomial_dim(n: usize) -> usize {
    n * n + n + 1
}

/// Position of `v_a conj(v_b)` (0-based load-bus indices).
#[inline]
pub fn product_index(n: usize, a: usize, b: usize) -> usize {
    a * n + b
}

/// Position of `v_a` (0-based load-bus index).
#[inline]
pub fn linear_index(n: usize, a: usize) -> usize {
    n * n + a
}

/// Position of the constant entry.
#[inline]
pub fn constant_index(n: usize) -> usize {
    n * n + n
}

/// A unit row vector `u_k` of the monomial space (0-based position).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BasisRow {
    pub index: usize,
}

impl BasisRow {
    /// The rank-one form `u_kᵀ u_k`.
    pub fn outer<T: Scalar>(self, dim: usize) -> CMatrix<T> {
        let mut m = CMatrix::zeros(dim, dim);
        m[(self.index, self.index)] = Complex::new(T::one(), T::zero());
        m
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonomialVector<T: Scalar> {
    pub entries: CVector<T>,
}

impl<T: Scalar> MonomialVector<T> {
    pub fn n(&self) -> usize {
        // dim = n² + n + 1
        let dim = self.entries.len();
        let mut n = 0;
        while monomial_dim(n) < dim {
            n += 1;
        }
        n
    }

    /// Squared Euclidean norm `‖X‖²`.
    pub fn norm_squared(&self) -> T {
        self.entries.iter().fold(T::zero(), |s, z| s + z.norm_sqr())
    }
}

/// Builds `X(V)`.
pub fn monomial_vector<T: Scalar>(v: &[Complex<T>]) -> MonomialVector<T> {
    let n = v.len();
    let mut x = CVector::zeros(monomial_dim(n));
    for a in 0..n {
        for b in 0..n {
            x[product_index(n, a, b)] = v[a] * v[b].conj();
        }
        x[linear_index(n, a)] = v[a];
    }
    x[constant_index(n)] = Complex::new(T::one(), T::zero());
    MonomialVector { entries: x }
}

/// Role of a quadratic form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FormLabel {
    Injection,
    Current(usize),
    VMin(usize),
    VMax(usize),
    Link { family: u8, indices: Vec<usize> },
    Custom(String),
}

impl std::fmt::Display for FormLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FormLabel::Injection => write!(f, "injection"),
            FormLabel::Current(k) => write!(f, "current {k}"),
            FormLabel::VMin(k) => write!(f, "vmin {k}"),
            FormLabel::VMax(k) => write!(f, "vmax {k}"),
            FormLabel::Link { family, indices } => {
                let idx: Vec<String> = indices.iter().map(|i| i.to_string()).collect();
                write!(f, "link {family} ({})", idx.join(","))
            }
            FormLabel::Custom(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticForm<T: Scalar> {
    pub label: FormLabel,
    pub matrix: CMatrix<T>,
}

/// One nonzero entry in a JSON dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryJson {
    pub i: usize,
    pub j: usize,
    pub re: f64,
    pub im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormJson {
    pub n: usize,
    pub label: String,
    pub entries: Vec<EntryJson>,
}

impl<T: Scalar> QuadraticForm<T> {
    pub fn new(label: FormLabel, matrix: CMatrix<T>) -> Self {
        QuadraticForm { label, matrix }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `X* Q X` (real for Hermitian `Q`).
    pub fn evaluate(&self, x: &MonomialVector<T>) -> T {
        linalg::quadratic_value(&self.matrix, &x.entries)
    }

    pub fn hermitian_defect(&self) -> T {
        linalg::hermitian_defect(&self.matrix)
    }

    /// Nonzero entries in row-major order, for cross-implementation diffing.
    pub fn to_json(&self, n: usize) -> FormJson {
        let mut entries = Vec::new();
        for i in 0..self.matrix.nrows() {
            for j in 0..self.matrix.ncols() {
                let z = self.matrix[(i, j)];
                if z.re != T::zero() || z.im != T::zero() {
                    entries.push(EntryJson { i, j, re: z.re.to_f64_lossy(), im: z.im.to_f64_lossy() });
                }
            }
        }
        FormJson { n, label: self.label.to_string(), entries }
    }
}

fn check_dims<T: Scalar>(y: &AdmittanceMatrix<T>, model: &NetworkModel<T>) -> Result<usize, AssemblyError> {
    let n = model.n_buses;
    if y.entries.nrows() != n + 1 || y.entries.ncols() != n + 1 {
        return Err(AssemblyError::DimensionMismatch { what: "admittance matrix", expected: n + 1, found: y.entries.nrows() });
    }
    for (what, len) in [
        ("load_powers", model.load_powers.len()),
        ("nominal_injections", model.nominal_injections.len()),
        ("current_limits", model.current_limits.len()),
    ] {
        if len != n {
            return Err(AssemblyError::DimensionMismatch { what, expected: n, found: len });
        }
    }
    if model.ellipsoid_shape.nrows() != n || model.ellipsoid_shape.ncols() != n {
        return Err(AssemblyError::DimensionMismatch {
            what: "ellipsoid_shape",
            expected: n,
            found: model.ellipsoid_shape.nrows(),
        });
    }
    Ok(n)
}

fn check_bus(n: usize, bus: usize) -> Result<usize, AssemblyError> {
    if bus == 0 || bus > n {
        return Err(AssemblyError::BusOutOfRange { bus, n });
    }
    Ok(bus - 1)
}

/// `N x dim` matrix with `M X = S_g - S_g⁰`, where `S_g` is the injection
/// that balances the power-flow equations at voltages `V`.
pub fn build_m_sg<T: Scalar>(y: &AdmittanceMatrix<T>, model: &NetworkModel<T>) -> Result<CMatrix<T>, AssemblyError> {
    let n = check_dims(y, model)?;
    let mut m = CMatrix::zeros(n, monomial_dim(n));
    let v0 = model.slack_voltage;
    for k in 0..n {
        for b in 0..n {
            m[(k, product_index(n, k, b))] = y.get(k + 1, b + 1).conj();
        }
        m[(k, linear_index(n, k))] = y.get(k + 1, 0).conj() * v0.conj();
        m[(k, constant_index(n))] = model.load_powers[k] - model.nominal_injections[k];
    }
    Ok(m)
}

/// `M* Ψ M - u_lastᵀ u_last`: negative exactly inside the injection
/// ellipsoid.
pub fn build_q_sg<T: Scalar>(y: &AdmittanceMatrix<T>, model: &NetworkModel<T>) -> Result<QuadraticForm<T>, AssemblyError> {
    let n = check_dims(y, model)?;
    let m = build_m_sg(y, model)?;
    let mut q = m.adjoint() * &model.ellipsoid_shape * &m;
    let last = constant_index(n);
    q[(last, last)] -= Complex::new(T::one(), T::zero());
    Ok(QuadraticForm::new(FormLabel::Injection, linalg::hermitian_part(&q)))
}

/// `N x dim` matrix with `M X = (i_1, ..., i_N)`.
pub fn build_m_i<T: Scalar>(y: &AdmittanceMatrix<T>, model: &NetworkModel<T>) -> Result<CMatrix<T>, AssemblyError> {
    let n = check_dims(y, model)?;
    let mut m = CMatrix::zeros(n, monomial_dim(n));
    for k in 0..n {
        for b in 0..n {
            m[(k, linear_index(n, b))] = y.get(k + 1, b + 1);
        }
        m[(k, constant_index(n))] = y.get(k + 1, 0) * model.slack_voltage;
    }
    Ok(m)
}

/// `|i_k|² - (I_k^max)²` as a quadratic form.
pub fn build_q_current<T: Scalar>(
    y: &AdmittanceMatrix<T>,
    model: &NetworkModel<T>,
    bus: usize,
) -> Result<QuadraticForm<T>, AssemblyError> {
    let n = check_dims(y, model)?;
    let k = check_bus(n, bus)?;
    let m = build_m_i(y, model)?;
    let row = m.row(k);
    let mut q = row.adjoint() * row;
    let last = constant_index(n);
    let limit = model.current_limits[k];
    q[(last, last)] -= Complex::new(limit * limit, T::zero());
    Ok(QuadraticForm::new(FormLabel::Current(bus), linalg::hermitian_part(&q)))
}

/// `|v_k|² - vmin_sq`; affine in `vmin_sq`.
pub fn build_q_vmin<T: Scalar>(n: usize, bus: usize, vmin_sq: T) -> Result<QuadraticForm<T>, AssemblyError> {
    let k = check_bus(n, bus)?;
    if vmin_sq < T::zero() {
        return Err(AssemblyError::NegativeBound(vmin_sq.to_f64_lossy()));
    }
    let dim = monomial_dim(n);
    let mut q = CMatrix::zeros(dim, dim);
    q[(linear_index(n, k), linear_index(n, k))] = Complex::new(T::one(), T::zero());
    q[(dim - 1, dim - 1)] = Complex::new(-vmin_sq, T::zero());
    Ok(QuadraticForm::new(FormLabel::VMin(bus), q))
}

/// `vmax_sq - |v_k|²`; affine in `vmax_sq`.
pub fn build_q_vmax<T: Scalar>(n: usize, bus: usize, vmax_sq: T) -> Result<QuadraticForm<T>, AssemblyError> {
    let k = check_bus(n, bus)?;
    if vmax_sq < T::zero() {
        return Err(AssemblyError::NegativeBound(vmax_sq.to_f64_lossy()));
    }
    let dim = monomial_dim(n);
    let mut q = CMatrix::zeros(dim, dim);
    q[(linear_index(n, k), linear_index(n, k))] = Complex::new(-T::one(), T::zero());
    q[(dim - 1, dim - 1)] = Complex::new(vmax_sq, T::zero());
    Ok(QuadraticForm::new(FormLabel::VMax(bus), q))
}

/// The constraint set `{Q^Sg, Q^I_1, ..., Q^I_N}` describing admissible
/// operating points.
pub fn constraint_set<T: Scalar>(
    y: &AdmittanceMatrix<T>,
    model: &NetworkModel<T>,
) -> Result<Vec<QuadraticForm<T>>, AssemblyError> {
    let mut out = vec![build_q_sg(y, model)?];
    for bus in 1..=model.n_buses {
        out.push(build_q_current(y, model, bus)?);
    }
    Ok(out)
}

/// Congruence `T` (identity with its last column replaced by `x0`) that
/// recenters the monomial space at `x0 = X(V_nominal)`.
///
/// Quadratic forms around a nominal operating point are dominated by a
/// single direction; solving in the sheared coordinates `T* Q T` keeps the
/// interior-point iterations well conditioned.
pub fn centering_congruence<T: Scalar>(x0: &MonomialVector<T>) -> CMatrix<T> {
    let dim = x0.entries.len();
    let mut t = CMatrix::identity(dim, dim);
    t.set_column(dim - 1, &x0.entries);
    t
}

/// Real part of a Hermitian matrix, used where the imaginary part is known
/// to vanish.
pub fn real_part<T: Scalar>(h: &CMatrix<T>) -> DMatrix<T> {
    h.map(|z| z.re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{build_admittance, fixtures};

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn monomial_examples() {
        let x = monomial_vector(&[c(1.0, 0.0)]);
        assert_eq!(x.entries.as_slice(), &[c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0)]);
        let x = monomial_vector(&[c(0.0, 1.0)]);
        assert_eq!(x.entries.as_slice(), &[c(1.0, 0.0), c(0.0, 1.0), c(1.0, 0.0)]);
        let x = monomial_vector(&[c(1.0, 1.0), c(2.0, 0.0)]);
        assert_eq!(
            x.entries.as_slice(),
            &[c(2.0, 0.0), c(2.0, 2.0), c(2.0, -2.0), c(4.0, 0.0), c(1.0, 1.0), c(2.0, 0.0), c(1.0, 0.0)]
        );
        assert_eq!(x.n(), 2);
    }

    #[test]
    fn m_sg_single_bus_layout() {
        let model = fixtures::single_bus();
        let y = build_admittance(&model).unwrap();
        let m = build_m_sg(&y, &model).unwrap();
        assert_eq!(m.shape(), (1, 3));
        assert_eq!(m[(0, 0)], y.get(1, 1).conj());
        assert_eq!(m[(0, 1)], y.get(1, 0).conj());
        assert_eq!(m[(0, 2)], c(0.6 - 0.3, 0.2));
    }

    #[test]
    fn zero_network_gives_zero_m_sg() {
        let mut model = fixtures::single_bus();
        model.load_powers = vec![c(0.0, 0.0)];
        model.nominal_injections = vec![c(0.0, 0.0)];
        let y = AdmittanceMatrix { entries: CMatrix::zeros(2, 2) };
        assert!(build_m_sg(&y, &model).unwrap().iter().all(|z| *z == c(0.0, 0.0)));
    }

    #[test]
    fn current_at_zero_voltage() {
        let model = fixtures::three_bus();
        let y = build_admittance(&model).unwrap();
        let m = build_m_i(&y, &model).unwrap();
        let x = monomial_vector(&[c(0.0, 0.0); 3]);
        let i = &m * &x.entries;
        assert_eq!(i[0], y.get(1, 0) * model.slack_voltage);
        assert_eq!(i[1], c(0.0, 0.0));
    }

    #[test]
    fn bound_forms_and_errors() {
        let q = build_q_vmin(1, 1, 0.0).unwrap();
        assert!(q.evaluate(&monomial_vector(&[c(0.3, -0.4)])) >= 0.0);
        let q = build_q_vmax(2, 2, 0.25).unwrap();
        assert!(q.evaluate(&monomial_vector(&[c(3.0, 0.0), c(0.3, 0.4)])).abs() < 1e-15);
        assert_eq!(build_q_vmin::<f64>(2, 3, 0.1).unwrap_err(), AssemblyError::BusOutOfRange { bus: 3, n: 2 });
        assert_eq!(build_q_vmax::<f64>(2, 1, -0.1).unwrap_err(), AssemblyError::NegativeBound(-0.1));
    }

    #[test]
    fn nominal_point_inside_ellipsoid() {
        let model = fixtures::three_bus();
        let y = build_admittance(&model).unwrap();
        let nominal = [
            Complex::from_polar(0.987, (-0.124f64).to_radians()),
            Complex::from_polar(0.972, (-0.273f64).to_radians()),
            Complex::from_polar(0.965, (-0.302f64).to_radians()),
        ];
        let q = build_q_sg(&y, &model).unwrap();
        assert!(q.evaluate(&monomial_vector(&nominal)) < 0.0);
    }

    #[test]
    fn json_dump_lists_nonzeros() {
        let q = build_q_vmin(2, 1, 0.5).unwrap();
        let dump = q.to_json(2);
        assert_eq!(dump.label, "vmin 1");
        assert_eq!(dump.entries.len(), 2);
        assert_eq!(dump.entries[0], EntryJson { i: 4, j: 4, re: 1.0, im: 0.0 });
    }

    #[test]
    fn centering_maps_last_basis_vector() {
        let x0 = monomial_vector(&[c(0.9, 0.1), c(1.0, -0.2)]);
        let t = centering_congruence(&x0);
        let e_last = CVector::from_fn(7, |i, _| if i == 6 { c(1.0, 0.0) } else { c(0.0, 0.0) });
        assert_eq!(&t * e_last, x0.entries);
    }
}
