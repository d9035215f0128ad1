//! Certified per-bus bounds on `|v_k|²` over every operating point whose
//! injection lies in the uncertainty ellipsoid and whose currents respect
//! their limits.
//!
//! For each bus and side one certificate block
//! `Q_side(k, s) + Σ τ_i Q_i + Σ τ̃_ℓ Q̃_ℓ ⪰ εI` is imposed, where `s` is the
//! squared bound and enters affinely. The joint program minimizes
//! `Σ_k (vmax_sq_k - vmin_sq_k)`; the decoupled mode solves the `2N` blocks
//! independently, which yields the same optimum because the blocks share no
//! variables.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{BoundsError, Side, VerificationError};
use crate::feasibility::{self, CertificateJson, FeasibilityOptions, FeasibilityQuery, Multipliers};
use crate::linalg::CMatrix;
use crate::links::{enumerate_links, prune, LinkCatalog};
use crate::network::{build_admittance, AdmittanceMatrix, NetworkModel};
use crate::oracle;
use crate::quadratics::{self, centering_congruence, constant_index, monomial_vector, FormLabel, QuadraticForm};
use crate::scalar::{round_significant, Scalar};
use crate::sdp::{self, AffineMatrixExpr, SdpOptions, SdpProblem, SdpStatus, VarId};

pub const SCHEMA_VERSION: u32 = 1;
/// Significant digits of reported bounds.
pub const REPORT_DIGITS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMode {
    Joint,
    Decoupled,
}

impl SolveMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveMode::Joint => "joint",
            SolveMode::Decoupled => "decoupled",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundsOptions<T: Scalar> {
    pub epsilon: T,
    pub tau_floor: T,
    /// Perimeter weight; `2^(N-1)` when unset.
    pub vartheta: Option<T>,
    pub prune: bool,
    pub mode: SolveMode,
    /// Solve in coordinates centered at the nominal operating point.
    pub precondition: bool,
    pub sdp: SdpOptions<T>,
}

impl<T: Scalar> Default for BoundsOptions<T> {
    fn default() -> Self {
        BoundsOptions {
            epsilon: T::c(feasibility::DEFAULT_EPSILON),
            tau_floor: T::c(feasibility::DEFAULT_TAU_FLOOR),
            vartheta: None,
            prune: true,
            mode: SolveMode::Joint,
            precondition: true,
            sdp: SdpOptions::default(),
        }
    }
}

pub fn default_vartheta<T: Scalar>(n: usize) -> T {
    T::c(2f64.powi(n as i32 - 1))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BusBounds<T: Scalar> {
    pub bus: usize,
    pub vmin_sq: T,
    pub vmax_sq: T,
    pub vmin: T,
    pub vmax: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockCertificate<T: Scalar> {
    pub bus: usize,
    pub side: Side,
    pub bound_sq: T,
    pub multipliers: Multipliers<T>,
    pub min_eig: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverDiagnostics {
    pub backend: String,
    pub mode: SolveMode,
    pub status: SdpStatus,
    pub iterations: usize,
    pub gap: f64,
    pub message: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundsResult<T: Scalar> {
    pub buses: Vec<BusBounds<T>>,
    pub perimeter_bound: T,
    pub vartheta: T,
    pub epsilon: T,
    pub tau_floor: T,
    /// Catalog the link multipliers refer to.
    pub catalog: LinkCatalog<T>,
    pub certificates: Vec<BlockCertificate<T>>,
    pub diagnostics: SolverDiagnostics,
}

/// Per-bus intervals `[vmin_sq, vmax_sq]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperrectangle<T: Scalar> {
    pub intervals: Vec<(T, T)>,
}

impl<T: Scalar> Hyperrectangle<T> {
    pub fn contains(&self, magnitudes_sq: &[T], tol: T) -> bool {
        self.intervals.iter().zip(magnitudes_sq).all(|((lo, hi), m)| *m >= *lo - tol && *m <= *hi + tol)
    }

    pub fn is_nonempty(&self) -> bool {
        self.intervals.iter().all(|(lo, hi)| lo <= hi)
    }
}

impl<T: Scalar> BoundsResult<T> {
    pub fn hyperrectangle(&self) -> Hyperrectangle<T> {
        Hyperrectangle { intervals: self.buses.iter().map(|b| (b.vmin_sq, b.vmax_sq)).collect() }
    }

    pub fn certificate(&self, bus: usize, side: Side) -> Option<&BlockCertificate<T>> {
        self.certificates.iter().find(|c| c.bus == bus && c.side == side)
    }
}

/// Bound form `Q_side(k, s)` as an affine expression in `s`.
fn side_expr<T: Scalar>(n: usize, bus: usize, side: Side) -> Result<(CMatrix<T>, CMatrix<T>), BoundsError> {
    let at_zero = match side {
        Side::Min => quadratics::build_q_vmin(n, bus, T::zero())?,
        Side::Max => quadratics::build_q_vmax(n, bus, T::zero())?,
    };
    let dim = at_zero.dim();
    let mut slope = CMatrix::zeros(dim, dim);
    let last = constant_index(n);
    slope[(last, last)] = nalgebra::Complex::new(if side == Side::Min { -T::one() } else { T::one() }, T::zero());
    Ok((at_zero.matrix, slope))
}

/// Bound form at a concrete squared bound.
pub fn side_form<T: Scalar>(n: usize, bus: usize, side: Side, bound_sq: T) -> Result<QuadraticForm<T>, BoundsError> {
    Ok(match side {
        Side::Min => quadratics::build_q_vmin(n, bus, bound_sq)?,
        Side::Max => quadratics::build_q_vmax(n, bus, bound_sq)?,
    })
}

struct BlockVars {
    bus: usize,
    side: Side,
    s: VarId,
    tau: Vec<VarId>,
    links: Vec<VarId>,
}

struct Assembled<T: Scalar> {
    problem: SdpProblem<T>,
    vars: Vec<BlockVars>,
}

fn assemble<T: Scalar>(
    n: usize,
    constraints: &[QuadraticForm<T>],
    catalog: &LinkCatalog<T>,
    blocks: &[(usize, Side)],
    congruence: Option<&CMatrix<T>>,
    options: &BoundsOptions<T>,
) -> Result<Assembled<T>, BoundsError> {
    let dim = quadratics::monomial_dim(n);
    let dense_links: Vec<CMatrix<T>> = catalog.links.iter().map(|l| l.to_dense(dim)).collect();
    let mut problem = SdpProblem::new(options.epsilon);
    let mut vars = Vec::new();
    for &(bus, side) in blocks {
        let s = problem.add_variable(format!("{side}_sq_{bus}"), Some(options.epsilon));
        problem.objective[s] = if side == Side::Min { -T::one() } else { T::one() };
        let (constant, slope) = side_expr::<T>(n, bus, side)?;
        let mut expr = AffineMatrixExpr::new(constant);
        expr.add_term(s, slope);
        let tau: Vec<VarId> = (0..constraints.len())
            .map(|i| problem.add_variable(format!("tau_{side}_{bus}_{i}"), Some(options.tau_floor)))
            .collect();
        for (id, q) in tau.iter().zip(constraints) {
            expr.add_term(*id, q.matrix.clone());
        }
        let links: Vec<VarId> =
            catalog.links.iter().map(|l| problem.add_variable(format!("link_{side}_{bus}_{}", l.raw_index), None)).collect();
        for (id, m) in links.iter().zip(&dense_links) {
            expr.add_term(*id, m.clone());
        }
        problem.add_block(format!("bus {bus} {side}"), expr, congruence.cloned());
        vars.push(BlockVars { bus, side, s, tau, links });
    }
    for bus in 1..=n {
        let min = vars.iter().find(|v| v.bus == bus && v.side == Side::Min);
        let max = vars.iter().find(|v| v.bus == bus && v.side == Side::Max);
        if let (Some(lo), Some(hi)) = (min, max) {
            problem.add_constraint(format!("interval {bus}"), vec![(hi.s, T::one()), (lo.s, -T::one())], options.epsilon);
        }
    }
    Ok(Assembled { problem, vars })
}

/// Everything needed to build the bound programs for a model.
pub struct BoundsSetup<T: Scalar> {
    pub n: usize,
    pub admittance: AdmittanceMatrix<T>,
    pub constraints: Vec<QuadraticForm<T>>,
    pub catalog: LinkCatalog<T>,
    pub congruence: Option<CMatrix<T>>,
}

impl<T: Scalar> BoundsSetup<T> {
    pub fn new(model: &NetworkModel<T>, options: &BoundsOptions<T>) -> Result<Self, BoundsError> {
        let violations = model.validate();
        if !violations.is_empty() {
            return Err(crate::error::ModelError::Invalid(violations).into());
        }
        let n = model.n_buses;
        let admittance = build_admittance(model)?;
        let constraints = quadratics::constraint_set(&admittance, model)?;
        let raw = enumerate_links(n);
        let catalog = if options.prune { prune(&raw) } else { raw };
        let congruence = options.precondition.then(|| {
            let nominal =
                oracle::nominal_solution(&admittance, model).map(|s| s.voltages).unwrap_or_else(|_| oracle::flat_start(model));
            centering_congruence(&monomial_vector(&nominal))
        });
        Ok(BoundsSetup { n, admittance, constraints, catalog, congruence })
    }

    pub fn all_blocks(&self) -> Vec<(usize, Side)> {
        (1..=self.n).flat_map(|k| [(k, Side::Min), (k, Side::Max)]).collect()
    }

    /// The joint bound program.
    pub fn joint_problem(&self, options: &BoundsOptions<T>) -> Result<SdpProblem<T>, BoundsError> {
        Ok(assemble(self.n, &self.constraints, &self.catalog, &self.all_blocks(), self.congruence.as_ref(), options)?.problem)
    }

    /// Tries to prove that no operating point satisfies the constraints, by
    /// certifying the constant form `-1` as nonnegative on the region.
    pub fn region_is_empty(&self, options: &BoundsOptions<T>) -> Result<bool, BoundsError> {
        let dim = quadratics::monomial_dim(self.n);
        let last = constant_index(self.n);
        let mut m = CMatrix::zeros(dim, dim);
        m[(last, last)] = nalgebra::Complex::new(-T::one(), T::zero());
        let query = FeasibilityQuery {
            q0: QuadraticForm::new(FormLabel::Custom("empty region".into()), m),
            qs: self.constraints.clone(),
            catalog: self.catalog.clone(),
        };
        let fo = FeasibilityOptions {
            epsilon: options.epsilon,
            tau_floor: options.tau_floor,
            sdp: options.sdp,
            congruence: self.congruence.clone(),
        };
        Ok(feasibility::test_feasibility(&query, &fo)?.is_certified())
    }

    fn query(&self, bus: usize, side: Side, bound_sq: T) -> Result<FeasibilityQuery<T>, BoundsError> {
        Ok(FeasibilityQuery {
            q0: side_form(self.n, bus, side, bound_sq)?,
            qs: self.constraints.clone(),
            catalog: self.catalog.clone(),
        })
    }
}

struct SolvedBlock<T: Scalar> {
    bus: usize,
    side: Side,
    bound_sq: T,
    multipliers: Multipliers<T>,
}

struct SolveSummary<T: Scalar> {
    blocks: Vec<SolvedBlock<T>>,
    status: SdpStatus,
    iterations: usize,
    gap: f64,
    message: Option<String>,
}

fn worse(a: SdpStatus, b: SdpStatus) -> SdpStatus {
    let rank = |s: SdpStatus| match s {
        SdpStatus::Optimal => 0,
        SdpStatus::NumericalTrouble => 1,
        SdpStatus::Infeasible => 2,
    };
    if rank(b) > rank(a) {
        b
    } else {
        a
    }
}

fn run<T: Scalar>(
    setup: &BoundsSetup<T>,
    blocks: &[(usize, Side)],
    options: &BoundsOptions<T>,
) -> Result<SolveSummary<T>, BoundsError> {
    let assembled = assemble(setup.n, &setup.constraints, &setup.catalog, blocks, setup.congruence.as_ref(), options)?;
    let sol = match sdp::solve(&assembled.problem, &options.sdp) {
        Err(crate::error::SdpError::Unbounded) => return Err(BoundsError::EmptyRegion),
        other => other?,
    };
    let extracted = assembled
        .vars
        .iter()
        .map(|v| SolvedBlock {
            bus: v.bus,
            side: v.side,
            bound_sq: sol.values[v.s],
            multipliers: Multipliers {
                tau: v.tau.iter().map(|i| sol.values[*i]).collect(),
                tau_tilde: v.links.iter().map(|i| sol.values[*i]).collect(),
            },
        })
        .collect();
    Ok(SolveSummary {
        blocks: extracted,
        status: sol.status,
        iterations: sol.iterations,
        gap: sol.gap.to_f64_lossy(),
        message: sol.message,
    })
}

fn decoupled<T: Scalar>(setup: &BoundsSetup<T>, options: &BoundsOptions<T>) -> Result<SolveSummary<T>, BoundsError> {
    let results: Vec<Result<SolveSummary<T>, BoundsError>> =
        setup.all_blocks().par_iter().map(|b| run(setup, std::slice::from_ref(b), options)).collect();
    let mut summary = SolveSummary { blocks: Vec::new(), status: SdpStatus::Optimal, iterations: 0, gap: 0.0, message: None };
    let mut failing = None;
    for (r, block) in results.into_iter().zip(setup.all_blocks()) {
        let r = r?;
        if r.status == SdpStatus::Infeasible {
            failing = Some(block);
        }
        summary.status = worse(summary.status, r.status);
        summary.iterations += r.iterations;
        summary.gap = summary.gap.max(r.gap);
        if summary.message.is_none() {
            summary.message = r.message;
        }
        summary.blocks.extend(r.blocks);
    }
    if failing.is_some() {
        return Err(BoundsError::NoCertificate { failing });
    }
    Ok(summary)
}

/// Computes certified bounds for every load bus.
pub fn solve_bounds<T: Scalar>(model: &NetworkModel<T>, options: &BoundsOptions<T>) -> Result<BoundsResult<T>, BoundsError> {
    let setup = BoundsSetup::new(model, options)?;
    let summary = match options.mode {
        SolveMode::Joint => {
            let s = run(&setup, &setup.all_blocks(), options)?;
            if s.status == SdpStatus::Infeasible {
                // Name the block that fails on its own, if any.
                return match decoupled(&setup, options) {
                    Err(e) => Err(e),
                    Ok(_) => Err(BoundsError::NoCertificate { failing: None }),
                };
            }
            // An empty region lets every width shrink to the margin.
            let collapsed = (1..=setup.n).any(|k| {
                let get = |side| s.blocks.iter().find(|b| b.bus == k && b.side == side).map(|b| b.bound_sq);
                match (get(Side::Min), get(Side::Max)) {
                    (Some(lo), Some(hi)) => hi - lo <= T::c(100.0) * options.epsilon,
                    _ => false,
                }
            });
            if collapsed && setup.region_is_empty(options)? {
                return Err(BoundsError::EmptyRegion);
            }
            s
        }
        SolveMode::Decoupled => decoupled(&setup, options)?,
    };
    finish(model, &setup, summary, options)
}

fn finish<T: Scalar>(
    model: &NetworkModel<T>,
    setup: &BoundsSetup<T>,
    summary: SolveSummary<T>,
    options: &BoundsOptions<T>,
) -> Result<BoundsResult<T>, BoundsError> {
    let n = model.n_buses;
    let tol = options.sdp.tol_feas;
    let mut certificates = Vec::new();
    let mut buses = Vec::new();
    for bus in 1..=n {
        let pick = |side: Side| summary.blocks.iter().find(|b| b.bus == bus && b.side == side).expect("every block solved");
        let (lo, hi) = (pick(Side::Min), pick(Side::Max));
        // Outward rounding keeps every certificate valid: lowering vmin_sq
        // or raising vmax_sq adds a positive multiple of the constant
        // direction to the block.
        let vmin_sq = T::c(round_significant(lo.bound_sq.to_f64_lossy(), REPORT_DIGITS, -1));
        let mut vmax_sq = T::c(round_significant(hi.bound_sq.to_f64_lossy(), REPORT_DIGITS, 1));
        if vmax_sq < vmin_sq + options.epsilon {
            vmax_sq = T::c(round_significant((vmin_sq + options.epsilon).to_f64_lossy(), REPORT_DIGITS, 1));
        }
        for (block, bound_sq) in [(lo, vmin_sq), (hi, vmax_sq)] {
            let mut multipliers = block.multipliers.clone();
            for t in &mut multipliers.tau {
                *t = t.max(options.tau_floor);
            }
            let query = setup.query(bus, block.side, bound_sq)?;
            let min_eig = feasibility::evaluate_certificate(&query, &multipliers)?;
            if min_eig < options.epsilon - tol {
                return Err(BoundsError::NumericalTrouble(format!(
                    "certificate for bus {bus} {} re-verifies at {:e} below the margin {:e} (solver status {}{})",
                    block.side,
                    min_eig.to_f64_lossy(),
                    options.epsilon.to_f64_lossy(),
                    summary.status,
                    summary.message.as_deref().map(|m| format!(": {m}")).unwrap_or_default()
                )));
            }
            certificates.push(BlockCertificate { bus, side: block.side, bound_sq, multipliers, min_eig });
        }
        if !(vmin_sq > T::zero()) {
            return Err(BoundsError::NoCertificate { failing: Some((bus, Side::Min)) });
        }
        let down = |x: T| T::c(round_significant(x.sqrt().to_f64_lossy(), REPORT_DIGITS, -1));
        let up = |x: T| T::c(round_significant(x.sqrt().to_f64_lossy(), REPORT_DIGITS, 1));
        buses.push(BusBounds { bus, vmin_sq, vmax_sq, vmin: down(vmin_sq), vmax: up(vmax_sq) });
    }
    let vartheta = options.vartheta.unwrap_or_else(|| default_vartheta(n));
    let width = buses.iter().fold(T::zero(), |s, b| s + (b.vmax_sq - b.vmin_sq));
    let perimeter_bound = T::c(round_significant((vartheta * width).to_f64_lossy(), REPORT_DIGITS, 1));
    Ok(BoundsResult {
        buses,
        perimeter_bound,
        vartheta,
        epsilon: options.epsilon,
        tau_floor: options.tau_floor,
        catalog: setup.catalog.clone(),
        certificates,
        diagnostics: SolverDiagnostics {
            backend: "ipm".into(),
            mode: options.mode,
            status: summary.status,
            iterations: summary.iterations,
            gap: summary.gap,
            message: summary.message,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions<T: Scalar> {
    pub samples: usize,
    pub seed: u64,
    pub tol_feas: T,
    /// Allowed overshoot of a sampled `|v_k|²` beyond a bound.
    pub containment_tol: T,
}

impl<T: Scalar> Default for VerifyOptions<T> {
    fn default() -> Self {
        VerifyOptions { samples: 10_000, seed: 42, tol_feas: T::c(1e-8), containment_tol: T::c(1e-9) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BusMargin<T: Scalar> {
    pub bus: usize,
    pub envelope_min_sq: T,
    pub envelope_max_sq: T,
    /// `envelope_min_sq - vmin_sq`.
    pub lower_margin: T,
    /// `vmax_sq - envelope_max_sq`.
    pub upper_margin: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport<T: Scalar> {
    pub certificate_min_eigs: Vec<(usize, Side, T)>,
    pub margins: Vec<BusMargin<T>>,
    pub empirical_perimeter: T,
    pub requested: usize,
    pub retained: usize,
    pub non_convergent: usize,
    pub current_violating: usize,
}

/// Re-checks the result's invariants, confirms that a Monte-Carlo envelope
/// lies inside the bounds, then re-verifies every certificate from scratch.
pub fn verify_result<T: Scalar>(
    model: &NetworkModel<T>,
    result: &BoundsResult<T>,
    options: &VerifyOptions<T>,
) -> Result<VerificationReport<T>, VerificationError> {
    let n = model.n_buses;
    let inv = |msg: String| Err(VerificationError::Invariant(msg));
    if result.buses.len() != n || result.buses.iter().enumerate().any(|(i, b)| b.bus != i + 1) {
        return inv(format!("expected bounds for buses 1..={n}"));
    }
    if !(result.vartheta > T::zero()) || !(result.epsilon > T::zero()) {
        return inv("vartheta and epsilon must be positive".into());
    }
    let rel = T::c(1e-9);
    for b in &result.buses {
        if !(b.vmax_sq > b.vmin_sq && b.vmin_sq > T::zero()) {
            return inv(format!("bus {}: need vmax_sq > vmin_sq > 0", b.bus));
        }
        if (b.vmin * b.vmin - b.vmin_sq).abs() > rel * b.vmin_sq || (b.vmax * b.vmax - b.vmax_sq).abs() > rel * b.vmax_sq {
            return inv(format!("bus {}: magnitudes disagree with their squares", b.bus));
        }
        if b.vmin * b.vmin > b.vmin_sq * (T::one() + T::c(1e-12)) || b.vmax * b.vmax < b.vmax_sq * (T::one() - T::c(1e-12)) {
            return inv(format!("bus {}: magnitudes are not rounded outward", b.bus));
        }
    }
    let width = result.buses.iter().fold(T::zero(), |s, b| s + (b.vmax_sq - b.vmin_sq));
    if (result.perimeter_bound - result.vartheta * width).abs() > rel * result.perimeter_bound.abs().max(T::one()) {
        return inv("perimeter_bound differs from vartheta times the summed widths".into());
    }

    let y = build_admittance(model)?;
    let constraints = quadratics::constraint_set(&y, model)?;
    let env = oracle::monte_carlo(model, &y, options.samples, options.seed)?;
    for s in env.samples.iter().filter(|s| s.retained()) {
        for (k, m) in s.magnitudes_squared().unwrap_or_default().into_iter().enumerate() {
            let b = &result.buses[k];
            if m < b.vmin_sq - options.containment_tol || m > b.vmax_sq + options.containment_tol {
                return Err(VerificationError::Containment {
                    bus: k + 1,
                    sample: s.id,
                    value: m.to_f64_lossy(),
                    lower: b.vmin_sq.to_f64_lossy(),
                    upper: b.vmax_sq.to_f64_lossy(),
                });
            }
        }
    }
    let mut certificate_min_eigs = Vec::new();
    for b in &result.buses {
        for (side, bound_sq) in [(Side::Min, b.vmin_sq), (Side::Max, b.vmax_sq)] {
            let fail = |reason: String| VerificationError::Certificate { bus: b.bus, side, reason };
            let cert = result.certificate(b.bus, side).ok_or_else(|| fail("missing".into()))?;
            if cert.multipliers.tau.len() != constraints.len() {
                return Err(fail(format!("expected {} constraint multipliers", constraints.len())));
            }
            if let Some(t) = cert.multipliers.tau.iter().find(|t| !(**t >= result.tau_floor && **t > T::zero())) {
                return Err(fail(format!("multiplier {} is below the floor {}", t, result.tau_floor)));
            }
            let query = FeasibilityQuery {
                q0: side_form(n, b.bus, side, bound_sq).map_err(|e| fail(e.to_string()))?,
                qs: constraints.clone(),
                catalog: result.catalog.clone(),
            };
            crate::links::verify_annihilation(&result.catalog, 5).map_err(|e| fail(e.to_string()))?;
            let min_eig = feasibility::evaluate_certificate(&query, &cert.multipliers).map_err(|e| fail(e.to_string()))?;
            if min_eig < result.epsilon - options.tol_feas {
                return Err(fail(format!("minimum eigenvalue {min_eig:e} below margin {:e}", result.epsilon)));
            }
            certificate_min_eigs.push((b.bus, side, min_eig));
        }
    }

    let margins = result
        .buses
        .iter()
        .enumerate()
        .map(|(k, b)| BusMargin {
            bus: b.bus,
            envelope_min_sq: env.min_sq[k],
            envelope_max_sq: env.max_sq[k],
            lower_margin: env.min_sq[k] - b.vmin_sq,
            upper_margin: b.vmax_sq - env.max_sq[k],
        })
        .collect();
    let empirical_width = env.min_sq.iter().zip(&env.max_sq).fold(T::zero(), |s, (lo, hi)| s + (*hi - *lo));
    Ok(VerificationReport {
        certificate_min_eigs,
        margins,
        empirical_perimeter: result.vartheta * empirical_width,
        requested: env.requested,
        retained: env.retained,
        non_convergent: env.non_convergent,
        current_violating: env.current_violating,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BusJson {
    pub k: usize,
    pub vmin: f64,
    pub vmax: f64,
    pub vmin_sq: f64,
    pub vmax_sq: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverJson {
    pub backend: String,
    pub mode: String,
    pub status: String,
    pub iterations: usize,
    pub gap: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockCertificateJson {
    pub k: usize,
    pub side: String,
    pub bound_sq: f64,
    #[serde(flatten)]
    pub certificate: CertificateJson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultJson {
    pub schema_version: u32,
    pub buses: Vec<BusJson>,
    pub perimeter_bound: f64,
    pub vartheta: f64,
    pub epsilon: f64,
    pub tau_floor: f64,
    pub links_pruned: bool,
    pub solver: SolverJson,
    pub certificates: Vec<BlockCertificateJson>,
}

fn r10(x: f64) -> f64 {
    round_significant(x, REPORT_DIGITS, 0)
}

impl<T: Scalar> BoundsResult<T> {
    pub fn to_json(&self) -> ResultJson {
        ResultJson {
            schema_version: SCHEMA_VERSION,
            buses: self
                .buses
                .iter()
                .map(|b| BusJson {
                    k: b.bus,
                    vmin: b.vmin.to_f64_lossy(),
                    vmax: b.vmax.to_f64_lossy(),
                    vmin_sq: b.vmin_sq.to_f64_lossy(),
                    vmax_sq: b.vmax_sq.to_f64_lossy(),
                })
                .collect(),
            perimeter_bound: self.perimeter_bound.to_f64_lossy(),
            vartheta: r10(self.vartheta.to_f64_lossy()),
            epsilon: r10(self.epsilon.to_f64_lossy()),
            tau_floor: r10(self.tau_floor.to_f64_lossy()),
            links_pruned: self.catalog.pruned,
            solver: SolverJson {
                backend: self.diagnostics.backend.clone(),
                mode: self.diagnostics.mode.as_str().into(),
                status: self.diagnostics.status.as_str().into(),
                iterations: self.diagnostics.iterations,
                gap: r10(self.diagnostics.gap),
                message: self.diagnostics.message.clone(),
            },
            certificates: self
                .certificates
                .iter()
                .map(|c| BlockCertificateJson {
                    k: c.bus,
                    side: c.side.to_string(),
                    bound_sq: c.bound_sq.to_f64_lossy(),
                    certificate: CertificateJson::new(&self.catalog, &c.multipliers, c.min_eig),
                })
                .collect(),
        }
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("result serialization cannot fail") + "\n"
    }
}

impl BoundsResult<f64> {
    /// Rebuilds a result from its JSON form; link multipliers are mapped
    /// onto the unpruned catalog.
    pub fn from_json(json: &ResultJson, n: usize) -> Result<Self, VerificationError> {
        let inv = |m: String| VerificationError::Invariant(m);
        if json.schema_version != SCHEMA_VERSION {
            return Err(inv(format!("unsupported schema_version {}", json.schema_version)));
        }
        let catalog = enumerate_links::<f64>(n);
        let parse_side = |s: &str| match s {
            "min" => Ok(Side::Min),
            "max" => Ok(Side::Max),
            other => Err(inv(format!("unknown certificate side '{other}'"))),
        };
        let mut certificates = Vec::new();
        for c in &json.certificates {
            let side = parse_side(&c.side)?;
            let multipliers = c.certificate.multipliers(&catalog).ok_or_else(|| VerificationError::Certificate {
                bus: c.k,
                side,
                reason: "unknown link".into(),
            })?;
            certificates.push(BlockCertificate {
                bus: c.k,
                side,
                bound_sq: c.bound_sq,
                multipliers,
                min_eig: c.certificate.min_eig,
            });
        }
        let status = match json.solver.status.as_str() {
            "optimal" => SdpStatus::Optimal,
            "infeasible" => SdpStatus::Infeasible,
            _ => SdpStatus::NumericalTrouble,
        };
        Ok(BoundsResult {
            buses: json
                .buses
                .iter()
                .map(|b| BusBounds { bus: b.k, vmin_sq: b.vmin_sq, vmax_sq: b.vmax_sq, vmin: b.vmin, vmax: b.vmax })
                .collect(),
            perimeter_bound: json.perimeter_bound,
            vartheta: json.vartheta,
            epsilon: json.epsilon,
            tau_floor: json.tau_floor,
            catalog,
            certificates,
            diagnostics: SolverDiagnostics {
                backend: json.solver.backend.clone(),
                mode: if json.solver.mode == "decoupled" { SolveMode::Decoupled } else { SolveMode::Joint },
                status,
                iterations: json.solver.iterations,
                gap: json.solver.gap,
                message: json.solver.message.clone(),
            },
        })
    }
}
