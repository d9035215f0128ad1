//! Certificates that a quadratic form is positive on a region cut out by
//! quadratic constraints over the monomial manifold.
//!
//! If multipliers `τ_i > 0` and free `τ̃_ℓ` make
//! `Q₀ + Σ τ_i Q_i + Σ τ̃_ℓ Q̃_ℓ ⪰ ε I`, then `X*Q₀X > 0` for every `V`
//! with `X*Q_iX < 0` for all `i`: multiply by `X(V)` on both sides, the link
//! terms vanish, and the constraint terms are negative. The converse does
//! not hold, so a failed search never proves the property false.

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use crate::error::FeasibilityError;
use crate::linalg::{self, CMatrix};
use crate::links::LinkCatalog;
use crate::quadratics::{monomial_vector, QuadraticForm};
use crate::scalar::Scalar;
use crate::sdp::{self, AffineMatrixExpr, SdpOptions, SdpProblem, SdpStatus};

pub const DEFAULT_EPSILON: f64 = 1e-7;
pub const DEFAULT_TAU_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityQuery<T: Scalar> {
    pub q0: QuadraticForm<T>,
    pub qs: Vec<QuadraticForm<T>>,
    pub catalog: LinkCatalog<T>,
}

impl<T: Scalar> FeasibilityQuery<T> {
    pub fn dim(&self) -> usize {
        self.q0.dim()
    }

    pub fn check(&self) -> Result<(), FeasibilityError> {
        let d = self.dim();
        let catalog_dim = if self.catalog.is_empty() { d } else { self.catalog.dim() };
        for found in self.qs.iter().map(|q| q.dim()).chain([self.q0.matrix.ncols(), catalog_dim]) {
            if found != d {
                return Err(FeasibilityError::DimensionMismatch { expected: d, found });
            }
        }
        Ok(())
    }
}

/// Constraint multipliers `τ` and link multipliers `τ̃` (one per catalog
/// entry, in catalog order).
#[derive(Debug, Clone, PartialEq)]
pub struct Multipliers<T: Scalar> {
    pub tau: Vec<T>,
    pub tau_tilde: Vec<T>,
}

impl<T: Scalar> Multipliers<T> {
    /// `τ = floor`, `τ̃ = 0`.
    pub fn trivial(n_constraints: usize, n_links: usize, floor: T) -> Self {
        Multipliers { tau: vec![floor; n_constraints], tau_tilde: vec![T::zero(); n_links] }
    }

    /// Link multipliers indexed by raw enumeration position; links removed
    /// by pruning get zero.
    pub fn expand(&self, catalog: &LinkCatalog<T>) -> Vec<T> {
        let mut out = vec![T::zero(); catalog.raw_count];
        for (link, v) in catalog.links.iter().zip(&self.tau_tilde) {
            out[link.raw_index] = *v;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityOptions<T: Scalar> {
    pub epsilon: T,
    pub tau_floor: T,
    pub sdp: SdpOptions<T>,
    /// Coordinates in which the solver works (see
    /// [`crate::quadratics::centering_congruence`]).
    pub congruence: Option<CMatrix<T>>,
}

impl<T: Scalar> Default for FeasibilityOptions<T> {
    fn default() -> Self {
        FeasibilityOptions {
            epsilon: T::c(DEFAULT_EPSILON),
            tau_floor: T::c(DEFAULT_TAU_FLOOR),
            sdp: SdpOptions::default(),
            congruence: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FeasibilityOutcome<T: Scalar> {
    Certified {
        multipliers: Multipliers<T>,
        min_eig: T,
    },
    /// No certificate at margin ε was found. This does not mean the
    /// implication fails.
    NotCertified {
        best_margin: Option<T>,
        status: SdpStatus,
    },
}

impl<T: Scalar> FeasibilityOutcome<T> {
    pub fn is_certified(&self) -> bool {
        matches!(self, FeasibilityOutcome::Certified { .. })
    }
}

/// `Q₀ + Σ τ_i Q_i + Σ τ̃_ℓ Q̃_ℓ`.
pub fn assemble<T: Scalar>(query: &FeasibilityQuery<T>, m: &Multipliers<T>) -> Result<CMatrix<T>, FeasibilityError> {
    query.check()?;
    if m.tau.len() != query.qs.len() {
        return Err(FeasibilityError::MultiplierMismatch { expected: query.qs.len(), found: m.tau.len() });
    }
    if m.tau_tilde.len() != query.catalog.len() {
        return Err(FeasibilityError::MultiplierMismatch { expected: query.catalog.len(), found: m.tau_tilde.len() });
    }
    let mut sum = query.q0.matrix.clone();
    for (q, t) in query.qs.iter().zip(&m.tau) {
        sum += q.matrix.map(|z| z * *t);
    }
    for (link, t) in query.catalog.links.iter().zip(&m.tau_tilde) {
        for &(i, j, v) in &link.entries {
            sum[(i, j)] += v * *t;
        }
    }
    Ok(sum)
}

/// Smallest eigenvalue of the assembled certificate matrix.
pub fn evaluate_certificate<T: Scalar>(query: &FeasibilityQuery<T>, m: &Multipliers<T>) -> Result<T, FeasibilityError> {
    Ok(linalg::hermitian_min_eigenvalue(&assemble(query, m)?))
}

/// Searches for multipliers with margin `ε`: first the trivial point, then
/// the SDP maximizing the margin `t` of `Q₀ + Στ Q + Στ̃ Q̃ - tI ⪰ εI`
/// (capped at `t ≤ 1`).
pub fn test_feasibility<T: Scalar>(
    query: &FeasibilityQuery<T>,
    options: &FeasibilityOptions<T>,
) -> Result<FeasibilityOutcome<T>, FeasibilityError> {
    query.check()?;
    let trivial = Multipliers::trivial(query.qs.len(), query.catalog.len(), options.tau_floor);
    let min_eig = evaluate_certificate(query, &trivial)?;
    if min_eig >= options.epsilon {
        return Ok(FeasibilityOutcome::Certified { multipliers: trivial, min_eig });
    }

    let d = query.dim();
    let mut problem = SdpProblem::new(options.epsilon);
    let mut expr = AffineMatrixExpr::new(query.q0.matrix.clone());
    let taus: Vec<_> = (0..query.qs.len()).map(|i| problem.add_variable(format!("tau_{i}"), Some(options.tau_floor))).collect();
    for (id, q) in taus.iter().zip(&query.qs) {
        expr.add_term(*id, q.matrix.clone());
    }
    let links: Vec<_> = query.catalog.links.iter().map(|l| problem.add_variable(format!("link_{}", l.raw_index), None)).collect();
    for (id, l) in links.iter().zip(&query.catalog.links) {
        expr.add_term(*id, l.to_dense(d));
    }
    let t = problem.add_variable("margin", None);
    expr.add_term(t, CMatrix::identity(d, d).map(|z: Complex<T>| -z));
    problem.objective[t] = -T::one();
    problem.add_constraint("margin cap", vec![(t, -T::one())], -T::one());
    problem.add_block("certificate", expr, options.congruence.clone());
    let sol = sdp::solve(&problem, &options.sdp)?;
    let multipliers = Multipliers {
        tau: taus.iter().map(|i| sol.values[*i]).collect(),
        tau_tilde: links.iter().map(|i| sol.values[*i]).collect(),
    };
    let min_eig = evaluate_certificate(query, &multipliers)?;
    let floor_ok = multipliers.tau.iter().all(|t| *t >= options.tau_floor - options.sdp.tol_feas && *t > T::zero());
    if sol.status != SdpStatus::Infeasible && floor_ok && min_eig >= options.epsilon - options.sdp.tol_feas {
        return Ok(FeasibilityOutcome::Certified { multipliers, min_eig });
    }
    Ok(FeasibilityOutcome::NotCertified { best_margin: Some(sol.values[t]), status: sol.status })
}

/// Result of evaluating the implication on concrete voltage vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegionCheck {
    pub checked: usize,
    pub in_region: usize,
    pub violations: usize,
}

/// Counts voltage vectors that satisfy every `X*Q_iX < 0` yet have
/// `X*Q₀X ≤ 0`.
pub fn region_check<T: Scalar>(query: &FeasibilityQuery<T>, voltages: &[Vec<Complex<T>>]) -> RegionCheck {
    let mut report = RegionCheck { checked: voltages.len(), in_region: 0, violations: 0 };
    for v in voltages {
        let x = monomial_vector(v);
        if query.qs.iter().all(|q| q.evaluate(&x) < T::zero()) {
            report.in_region += 1;
            if query.q0.evaluate(&x) <= T::zero() {
                report.violations += 1;
            }
        }
    }
    report
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkMultiplierJson {
    pub family: u8,
    pub indices: Vec<usize>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateJson {
    pub tau: Vec<f64>,
    pub tau_tilde: Vec<LinkMultiplierJson>,
    pub min_eig: f64,
}

impl CertificateJson {
    /// Multipliers at full precision; zero link multipliers are omitted.
    pub fn new<T: Scalar>(catalog: &LinkCatalog<T>, m: &Multipliers<T>, min_eig: T) -> Self {
        CertificateJson {
            tau: m.tau.iter().map(|t| t.to_f64_lossy()).collect(),
            tau_tilde: catalog
                .links
                .iter()
                .zip(&m.tau_tilde)
                .filter(|(_, v)| **v != T::zero())
                .map(|(l, v)| LinkMultiplierJson { family: l.family, indices: l.indices.clone(), value: v.to_f64_lossy() })
                .collect(),
            min_eig: min_eig.to_f64_lossy(),
        }
    }

    /// Multipliers aligned with `catalog`; `None` if a referenced link is
    /// not in the catalog.
    pub fn multipliers<T: Scalar>(&self, catalog: &LinkCatalog<T>) -> Option<Multipliers<T>> {
        let mut tau_tilde = vec![T::zero(); catalog.len()];
        for entry in &self.tau_tilde {
            let pos = catalog.links.iter().position(|l| l.family == entry.family && l.indices == entry.indices)?;
            tau_tilde[pos] += T::c(entry.value);
        }
        Some(Multipliers { tau: self.tau.iter().map(|t| T::c(*t)).collect(), tau_tilde })
    }
}
