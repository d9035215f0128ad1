//! Monte-Carlo reference: sample the injection ellipsoid, solve the
//! nonlinear power flow for each sample, and record the empirical range of
//! the squared voltage magnitudes over samples that respect the current
//! limits.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{EnvelopeError, PfError, SamplerError};
use crate::linalg::{self, CMatrix};
use crate::network::{AdmittanceMatrix, NetworkModel};
use crate::scalar::{round_significant, Scalar};

pub const PF_MAX_ITERATIONS: usize = 50;
/// Samples solved sequentially with warm starts; chunks run in parallel.
pub const CHUNK_SIZE: usize = 64;

/// Power-flow mismatch tolerance for the scalar type.
pub fn pf_tolerance<T: Scalar>() -> T {
    T::c(1e-10).max(T::machine_epsilon() * T::c(100.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerFlowSolution<T: Scalar> {
    pub voltages: Vec<Complex<T>>,
    pub iterations: usize,
    /// Infinity norm of the complex power mismatch.
    pub residual: T,
}

impl<T: Scalar> PowerFlowSolution<T> {
    pub fn magnitudes_squared(&self) -> Vec<T> {
        self.voltages.iter().map(|v| v.norm_sqr()).collect()
    }
}

/// Power-flow mismatch `s_g - s_l - v ∘ conj(i)` at the load buses.
pub fn mismatch<T: Scalar>(
    y: &AdmittanceMatrix<T>,
    model: &NetworkModel<T>,
    injections: &[Complex<T>],
    voltages: &[Complex<T>],
) -> Vec<Complex<T>> {
    let currents = y.load_currents(model.slack_voltage, voltages);
    (0..model.n_buses).map(|k| injections[k] - model.load_powers[k] - voltages[k] * currents[k].conj()).collect()
}

fn inf_norm<T: Scalar>(r: &[Complex<T>]) -> T {
    r.iter().fold(T::zero(), |m, z| m.max(z.re.abs()).max(z.im.abs()))
}

/// Newton iteration in rectangular coordinates.
pub fn solve_power_flow<T: Scalar>(
    y: &AdmittanceMatrix<T>,
    model: &NetworkModel<T>,
    injections: &[Complex<T>],
    v_init: &[Complex<T>],
) -> Result<PowerFlowSolution<T>, PfError> {
    let n = model.n_buses;
    for len in [injections.len(), v_init.len()] {
        if len != n {
            return Err(PfError::DimensionMismatch { expected: n, found: len });
        }
    }
    let tol = pf_tolerance::<T>();
    let mut v = v_init.to_vec();
    let mut r = mismatch(y, model, injections, &v);
    let mut res = inf_norm(&r);
    for it in 0..=PF_MAX_ITERATIONS {
        if !res.is_finite() {
            break;
        }
        if res <= tol {
            return Ok(PowerFlowSolution { voltages: v, iterations: it, residual: res });
        }
        if it == PF_MAX_ITERATIONS {
            break;
        }
        let currents = y.load_currents(model.slack_voltage, &v);
        // Rows: Re/Im of g_k = v_k conj(i_k); columns: Re/Im of v_m.
        let mut jac = DMatrix::<T>::zeros(2 * n, 2 * n);
        let j = Complex::new(T::zero(), T::one());
        for k in 0..n {
            for m in 0..n {
                let ykm = y.get(k + 1, m + 1).conj();
                let mut de = v[k] * ykm;
                let mut df = -(j * v[k] * ykm);
                if k == m {
                    de += currents[k].conj();
                    df += j * currents[k].conj();
                }
                jac[(k, m)] = de.re;
                jac[(k + n, m)] = de.im;
                jac[(k, m + n)] = df.re;
                jac[(k + n, m + n)] = df.im;
            }
        }
        let rhs = DVector::from_iterator(2 * n, r.iter().map(|z| z.re).chain(r.iter().map(|z| z.im)));
        let lu = jac.lu();
        let step = lu.solve(&rhs).ok_or(PfError::Singular)?;
        if !step.iter().all(|x| x.is_finite()) {
            return Err(PfError::Singular);
        }
        for k in 0..n {
            v[k] += Complex::new(step[k], step[k + n]);
        }
        r = mismatch(y, model, injections, &v);
        res = inf_norm(&r);
    }
    Err(PfError::NoConvergence { iterations: PF_MAX_ITERATIONS, residual: res.to_f64_lossy() })
}

/// Flat start: every load bus at the slack voltage.
pub fn flat_start<T: Scalar>(model: &NetworkModel<T>) -> Vec<Complex<T>> {
    vec![model.slack_voltage; model.n_buses]
}

/// Power flow at the ellipsoid center from a flat start.
pub fn nominal_solution<T: Scalar>(y: &AdmittanceMatrix<T>, model: &NetworkModel<T>) -> Result<PowerFlowSolution<T>, PfError> {
    solve_power_flow(y, model, &model.nominal_injections, &flat_start(model))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerOptions {
    /// Fraction of samples drawn in the shell `[0.99, 1)` of the Ψ-norm.
    pub boundary_fraction: f64,
    /// Sample only the real part of the injections.
    pub reactive_fixed: bool,
}

impl Default for SamplerOptions {
    fn default() -> Self {
        SamplerOptions { boundary_fraction: 0.3, reactive_fixed: false }
    }
}

impl SamplerOptions {
    pub fn for_model<T: Scalar>(model: &NetworkModel<T>) -> Self {
        SamplerOptions { reactive_fixed: model.reactive_fixed, ..Default::default() }
    }
}

/// Draws `count` injection vectors strictly inside
/// `{S : (S - center)* Ψ (S - center) < 1}`.
///
/// Interior samples are uniform in the Ψ-metric ball (Gaussian direction,
/// radius `U^(1/d)`); a `boundary_fraction` of them is placed in the outer
/// shell where worst cases live.
pub fn sample_ellipsoid<T: Scalar>(
    center: &[Complex<T>],
    shape: &CMatrix<T>,
    count: usize,
    seed: u64,
    options: &SamplerOptions,
) -> Result<Vec<Vec<Complex<T>>>, SamplerError> {
    let n = center.len();
    if shape.nrows() != n || shape.ncols() != n {
        return Err(SamplerError::DimensionMismatch { center: n, shape: shape.nrows() });
    }
    let shape64 = shape.map(|z| Complex::new(z.re.to_f64_lossy(), z.im.to_f64_lossy()));
    let metric: DMatrix<f64> = if options.reactive_fixed { shape64.map(|z| z.re) } else { linalg::realify(&shape64) };
    let d = metric.nrows();
    let chol = nalgebra::Cholesky::new(metric.clone()).ok_or(SamplerError::Singular)?;
    let lt = chol.l().transpose();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut w = DVector::<f64>::from_fn(d, |_, _| rng.sample(StandardNormal));
        let len = w.norm();
        if len > 0.0 {
            w /= len;
        }
        let u: f64 = rng.gen();
        let boundary: f64 = rng.gen();
        let radius = if boundary < options.boundary_fraction { 0.99 + 0.01 * u } else { u.powf(1.0 / d as f64) };
        w *= radius;
        let mut delta = lt.solve_upper_triangular(&w).ok_or(SamplerError::Singular)?;
        let q = delta.dot(&(&metric * &delta));
        if q >= 1.0 {
            delta *= ((1.0 - 1e-12) / q).sqrt();
        }
        let sample = (0..n)
            .map(|k| {
                let (re, im) = if options.reactive_fixed { (delta[k], 0.0) } else { (delta[k], delta[k + n]) };
                center[k] + Complex::new(T::c(re), T::c(im))
            })
            .collect();
        out.push(sample);
    }
    Ok(out)
}

/// Ψ-norm `(s - center)* Ψ (s - center)`.
pub fn ellipsoid_norm<T: Scalar>(center: &[Complex<T>], shape: &CMatrix<T>, s: &[Complex<T>]) -> T {
    let delta = nalgebra::DVector::from_iterator(s.len(), s.iter().zip(center).map(|(a, b)| *a - *b));
    linalg::quadratic_value(shape, &delta)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleOutcome<T: Scalar> {
    pub id: usize,
    pub injection: Vec<Complex<T>>,
    /// `None` when the power flow did not converge.
    pub voltages: Option<Vec<Complex<T>>>,
    pub current_ok: bool,
}

impl<T: Scalar> SampleOutcome<T> {
    pub fn converged(&self) -> bool {
        self.voltages.is_some()
    }

    pub fn retained(&self) -> bool {
        self.converged() && self.current_ok
    }

    pub fn magnitudes_squared(&self) -> Option<Vec<T>> {
        self.voltages.as_ref().map(|v| v.iter().map(|z| z.norm_sqr()).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Envelope<T: Scalar> {
    pub min_sq: Vec<T>,
    pub max_sq: Vec<T>,
    pub requested: usize,
    pub retained: usize,
    pub non_convergent: usize,
    pub current_violating: usize,
    pub samples: Vec<SampleOutcome<T>>,
}

fn solve_chunk<T: Scalar>(
    y: &AdmittanceMatrix<T>,
    model: &NetworkModel<T>,
    start_id: usize,
    chunk: &[Vec<Complex<T>>],
) -> Vec<SampleOutcome<T>> {
    let flat = flat_start(model);
    let mut warm = flat.clone();
    chunk
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let solved = solve_power_flow(y, model, s, &warm).or_else(|_| solve_power_flow(y, model, s, &flat));
            let voltages = solved.ok().map(|sol| sol.voltages);
            let current_ok = match &voltages {
                Some(v) => {
                    warm = v.clone();
                    y.load_currents(model.slack_voltage, v)
                        .iter()
                        .zip(&model.current_limits)
                        .all(|(i, lim)| i.norm_sqr().sqrt() < *lim)
                }
                None => false,
            };
            SampleOutcome { id: start_id + i, injection: s.clone(), voltages, current_ok }
        })
        .collect()
}

/// Solves every sample (in parallel over fixed chunks, so the result does
/// not depend on the thread count) and reduces to per-bus extremes.
pub fn build_envelope<T: Scalar>(
    model: &NetworkModel<T>,
    samples: &[Vec<Complex<T>>],
    y: &AdmittanceMatrix<T>,
) -> Result<Envelope<T>, EnvelopeError> {
    let n = model.n_buses;
    let outcomes: Vec<SampleOutcome<T>> = samples
        .par_chunks(CHUNK_SIZE)
        .enumerate()
        .flat_map_iter(|(c, chunk)| solve_chunk(y, model, c * CHUNK_SIZE, chunk))
        .collect();
    let big = T::max_value().unwrap_or_else(T::one);
    let mut env = Envelope {
        min_sq: vec![big; n],
        max_sq: vec![-big; n],
        requested: samples.len(),
        retained: 0,
        non_convergent: 0,
        current_violating: 0,
        samples: Vec::new(),
    };
    for o in &outcomes {
        if !o.converged() {
            env.non_convergent += 1;
        } else if !o.current_ok {
            env.current_violating += 1;
        } else {
            env.retained += 1;
            for (k, m) in o.magnitudes_squared().unwrap_or_default().into_iter().enumerate() {
                env.min_sq[k] = env.min_sq[k].min(m);
                env.max_sq[k] = env.max_sq[k].max(m);
            }
        }
    }
    if env.retained == 0 {
        return Err(EnvelopeError::Empty { non_convergent: env.non_convergent, current_violating: env.current_violating });
    }
    env.samples = outcomes;
    Ok(env)
}

/// Samples the model's ellipsoid and builds the envelope in one call.
pub fn monte_carlo<T: Scalar>(
    model: &NetworkModel<T>,
    y: &AdmittanceMatrix<T>,
    count: usize,
    seed: u64,
) -> Result<Envelope<T>, EnvelopeError> {
    let samples =
        sample_ellipsoid(&model.nominal_injections, &model.ellipsoid_shape, count, seed, &SamplerOptions::for_model(model))?;
    build_envelope(model, &samples, y)
}

fn fmt10(x: f64) -> String {
    let r = round_significant(x, 10, 0);
    format!("{r}")
}

impl<T: Scalar> Envelope<T> {
    /// CSV dump: `sample_id,converged,current_ok,vsq_1,...,vsq_N`.
    pub fn to_csv(&self) -> String {
        let n = self.min_sq.len();
        let mut out = String::from("sample_id,converged,current_ok");
        for k in 1..=n {
            out.push_str(&format!(",vsq_{k}"));
        }
        out.push('\n');
        for s in &self.samples {
            out.push_str(&format!("{},{},{}", s.id, s.converged(), s.current_ok));
            match s.magnitudes_squared() {
                Some(m) => m.iter().for_each(|x| out.push_str(&format!(",{}", fmt10(x.to_f64_lossy())))),
                None => (0..n).for_each(|_| out.push(',')),
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{build_admittance, fixtures};

    #[test]
    fn single_bus_closed_form() {
        // v conj(y (v - v0)) = sg - sl with v0 real; the real-root branch
        // near v0 solves a quadratic in Re v after eliminating Im v.
        let model = fixtures::single_bus();
        let y = build_admittance(&model).unwrap();
        let sol = nominal_solution(&y, &model).unwrap();
        let yl = model.lines[0].admittance;
        let s = model.nominal_injections[0] - model.load_powers[0];
        let c = s / yl.conj();
        let v0 = model.slack_voltage.re;
        // v conj(v - v0) = c  =>  |v|² - v0 conj(v) = c  with v = a + jb:
        // b = -Im(c)/v0 and a² - v0 a + b² - Re(c) = 0.
        let b = -c.im / v0;
        let a = (v0 + (v0 * v0 - 4.0 * (b * b - c.re)).sqrt()) / 2.0;
        assert!((sol.voltages[0] - Complex::new(a, b)).norm() < 1e-10);
    }

    #[test]
    fn three_bus_nominal_voltages() {
        let model = fixtures::three_bus();
        let y = build_admittance(&model).unwrap();
        let sol = nominal_solution(&y, &model).unwrap();
        let expected = [(0.987, -0.124), (0.972, -0.273), (0.965, -0.302)];
        for (v, (mag, deg)) in sol.voltages.iter().zip(expected) {
            assert!((v.norm() - mag).abs() < 1e-3, "{v}");
            assert!((v.arg().to_degrees() - deg).abs() < 5e-3, "{v}");
        }
        assert!(sol.residual <= 1e-10);
    }

    #[test]
    fn divergence_is_reported() {
        let model = fixtures::three_bus();
        let y = build_admittance(&model).unwrap();
        let huge = vec![Complex::new(-500.0, -300.0); 3];
        assert!(matches!(
            solve_power_flow(&y, &model, &huge, &flat_start(&model)),
            Err(PfError::NoConvergence { .. }) | Err(PfError::Singular)
        ));
    }

    #[test]
    fn samples_are_inside_and_reproducible() {
        let center = vec![Complex::new(0.0, 0.0); 2];
        let shape = CMatrix::identity(2, 2);
        let a = sample_ellipsoid(&center, &shape, 500, 7, &SamplerOptions::default()).unwrap();
        let b = sample_ellipsoid(&center, &shape, 500, 7, &SamplerOptions::default()).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|s| ellipsoid_norm(&center, &shape, s) < 1.0));
        let shell = a.iter().filter(|s| ellipsoid_norm(&center, &shape, s) >= 0.99 * 0.99).count();
        assert!(shell > 100);
        let singular = CMatrix::<f64>::zeros(2, 2);
        assert_eq!(sample_ellipsoid(&center, &singular, 1, 0, &SamplerOptions::default()), Err(SamplerError::Singular));
    }

    #[test]
    fn reactive_fixed_box() {
        let model = fixtures::three_bus();
        let samples =
            sample_ellipsoid(&model.nominal_injections, &model.ellipsoid_shape, 2000, 3, &SamplerOptions::for_model(&model))
                .unwrap();
        let half = [0.08, 0.06, 0.1];
        for s in &samples {
            for k in 0..3 {
                assert_eq!(s[k].im, 0.0);
                assert!((s[k].re - model.nominal_injections[k].re).abs() < half[k]);
            }
        }
    }

    #[test]
    fn center_sample_envelope() {
        let model = fixtures::single_bus();
        let y = build_admittance(&model).unwrap();
        let env = build_envelope(&model, std::slice::from_ref(&model.nominal_injections), &y).unwrap();
        let nominal = nominal_solution(&y, &model).unwrap().magnitudes_squared();
        assert_eq!(env.min_sq, nominal);
        assert_eq!(env.max_sq, nominal);
    }

    #[test]
    fn zero_limits_reject_everything() {
        let mut model = fixtures::single_bus();
        model.current_limits = vec![0.0];
        let y = build_admittance(&model).unwrap();
        let err = monte_carlo(&model, &y, 50, 1).unwrap_err();
        assert!(matches!(err, EnvelopeError::Empty { current_violating: 50, .. }));
    }

    #[test]
    fn csv_layout() {
        let model = fixtures::three_bus();
        let y = build_admittance(&model).unwrap();
        let env = monte_carlo(&model, &y, 100, 42).unwrap();
        let csv = env.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "sample_id,converged,current_ok,vsq_1,vsq_2,vsq_3");
        assert_eq!(csv.lines().count(), 101);
        assert_eq!(env.retained + env.non_convergent + env.current_violating, 100);
        assert_eq!(csv, monte_carlo(&model, &y, 100, 42).unwrap().to_csv());
    }
}
