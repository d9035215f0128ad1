//! Hermitian linear matrix inequalities and their solution as real
//! semidefinite programs.
//!
//! A problem minimizes `cᵀy` subject to affine Hermitian blocks
//! `F_j(y) = F_j0 + Σ y_i F_ji ⪰ ε I`, optional variable lower bounds and
//! linear inequalities. Blocks are realified, optionally transformed by a
//! congruence, normalized, and handed to the embedded interior-point
//! method. Every returned point is re-verified by a direct eigensolve of the
//! original blocks.

mod ipm;
pub mod sdpa;

use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

use crate::error::{EmbeddingError, SdpError};
use crate::linalg::{self, CMatrix};
use crate::scalar::Scalar;

pub use sdpa::{read_sdpa, write_sdpa};

pub type VarId = usize;

/// `constant + Σ value(id) · coefficient`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMatrixExpr<T: Scalar> {
    pub constant: CMatrix<T>,
    pub terms: Vec<(VarId, CMatrix<T>)>,
}

impl<T: Scalar> AffineMatrixExpr<T> {
    pub fn new(constant: CMatrix<T>) -> Self {
        AffineMatrixExpr { constant, terms: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.constant.nrows()
    }

    pub fn add_term(&mut self, var: VarId, coefficient: CMatrix<T>) {
        self.terms.push((var, coefficient));
    }

    pub fn evaluate(&self, values: &[T]) -> CMatrix<T> {
        let mut out = self.constant.clone();
        for (id, coef) in &self.terms {
            let v = values[*id];
            if v != T::zero() {
                out += coef.map(|z| z * v);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsdBlock<T: Scalar> {
    pub label: String,
    pub expr: AffineMatrixExpr<T>,
    /// Invertible `S` such that the solver works with `S* (F - εI) S`.
    /// The feasible set is unchanged; only conditioning differs.
    pub congruence: Option<CMatrix<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable<T: Scalar> {
    pub name: String,
    pub lower: Option<T>,
}

/// `Σ coeff · value ≥ rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint<T: Scalar> {
    pub label: String,
    pub coeffs: Vec<(VarId, T)>,
    pub rhs: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpProblem<T: Scalar> {
    pub variables: Vec<Variable<T>>,
    /// Minimized linear cost, one coefficient per variable.
    pub objective: Vec<T>,
    pub blocks: Vec<PsdBlock<T>>,
    pub constraints: Vec<LinearConstraint<T>>,
    pub epsilon: T,
}

impl<T: Scalar> SdpProblem<T> {
    pub fn new(epsilon: T) -> Self {
        SdpProblem { variables: Vec::new(), objective: Vec::new(), blocks: Vec::new(), constraints: Vec::new(), epsilon }
    }

    pub fn add_variable(&mut self, name: impl Into<String>, lower: Option<T>) -> VarId {
        self.variables.push(Variable { name: name.into(), lower });
        self.objective.push(T::zero());
        self.variables.len() - 1
    }

    pub fn add_block(&mut self, label: impl Into<String>, expr: AffineMatrixExpr<T>, congruence: Option<CMatrix<T>>) {
        self.blocks.push(PsdBlock { label: label.into(), expr, congruence });
    }

    pub fn add_constraint(&mut self, label: impl Into<String>, coeffs: Vec<(VarId, T)>, rhs: T) {
        self.constraints.push(LinearConstraint { label: label.into(), coeffs, rhs });
    }

    pub fn validate(&self) -> Result<(), SdpError> {
        let m = self.variables.len();
        if !(self.epsilon > T::zero()) {
            return Err(SdpError::InvalidProblem("margin must be positive".into()));
        }
        if self.objective.len() != m {
            return Err(SdpError::InvalidProblem(format!("objective has {} entries for {m} variables", self.objective.len())));
        }
        for blk in &self.blocks {
            let d = blk.expr.dim();
            let tol = hermitian_tol(&blk.expr.constant);
            check_square(&blk.expr.constant)?;
            if linalg::hermitian_defect(&blk.expr.constant) > tol {
                return Err(EmbeddingError::NotHermitian(linalg::hermitian_defect(&blk.expr.constant).to_f64_lossy()).into());
            }
            for (id, coef) in &blk.expr.terms {
                if *id >= m {
                    return Err(SdpError::InvalidProblem(format!("block {} references undeclared variable {id}", blk.label)));
                }
                if coef.shape() != (d, d) {
                    return Err(SdpError::InvalidProblem(format!("block {} mixes dimensions", blk.label)));
                }
                let defect = linalg::hermitian_defect(coef);
                if defect > hermitian_tol(coef) {
                    return Err(EmbeddingError::NotHermitian(defect.to_f64_lossy()).into());
                }
            }
            if let Some(s) = &blk.congruence {
                if s.shape() != (d, d) {
                    return Err(SdpError::InvalidProblem(format!("congruence of block {} has wrong shape", blk.label)));
                }
            }
        }
        for c in &self.constraints {
            if c.coeffs.iter().any(|(id, _)| *id >= m) {
                return Err(SdpError::InvalidProblem(format!("constraint {} references an undeclared variable", c.label)));
            }
        }
        Ok(())
    }

    /// Smallest eigenvalue of each block at `values`.
    pub fn block_min_eigs(&self, values: &[T]) -> Vec<T> {
        self.blocks.iter().map(|b| linalg::hermitian_min_eigenvalue(&b.expr.evaluate(values))).collect()
    }

    /// Largest violation of bounds and linear constraints at `values`.
    pub fn scalar_violation(&self, values: &[T]) -> T {
        let mut worst = T::zero();
        for (v, var) in values.iter().zip(&self.variables) {
            if let Some(l) = var.lower {
                worst = worst.max(l - *v);
            }
        }
        for c in &self.constraints {
            let lhs = c.coeffs.iter().fold(T::zero(), |s, (id, a)| s + *a * values[*id]);
            worst = worst.max(c.rhs - lhs);
        }
        worst
    }

    pub fn objective_value(&self, values: &[T]) -> T {
        self.objective.iter().zip(values).fold(T::zero(), |s, (c, v)| s + *c * *v)
    }
}

fn hermitian_tol<T: Scalar>(h: &CMatrix<T>) -> T {
    T::c(1e-10) * linalg::max_abs(h).max(T::one())
}

fn check_square<T: Scalar>(h: &CMatrix<T>) -> Result<(), EmbeddingError> {
    if h.nrows() != h.ncols() {
        return Err(EmbeddingError::NotSquare(h.nrows(), h.ncols()));
    }
    Ok(())
}

/// Real symmetric embedding `[[Re H, -Im H], [Im H, Re H]]` of a Hermitian
/// matrix.
pub fn realify<T: Scalar>(h: &CMatrix<T>) -> Result<DMatrix<T>, EmbeddingError> {
    check_square(h)?;
    let defect = linalg::hermitian_defect(h);
    if defect > hermitian_tol(h) {
        return Err(EmbeddingError::NotHermitian(defect.to_f64_lossy()));
    }
    Ok(linalg::realify(h))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdpStatus {
    Optimal,
    Infeasible,
    NumericalTrouble,
}

impl SdpStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SdpStatus::Optimal => "optimal",
            SdpStatus::Infeasible => "infeasible",
            SdpStatus::NumericalTrouble => "numerical-trouble",
        }
    }
}

impl std::fmt::Display for SdpStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpSolution<T: Scalar> {
    pub status: SdpStatus,
    pub values: Vec<T>,
    pub objective: T,
    /// Smallest eigenvalue of each block at `values`.
    pub block_min_eigs: Vec<T>,
    /// Smallest of `block_min_eigs`.
    pub min_block_eig: T,
    pub iterations: usize,
    pub primal_infeasibility: T,
    pub dual_infeasibility: T,
    pub gap: T,
    pub message: Option<String>,
}

/// Available solver back ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Backend {
    /// Embedded dense primal-dual interior-point method.
    #[default]
    InteriorPoint,
}

impl FromStr for Backend {
    type Err = SdpError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ipm" | "interior-point" | "" => Ok(Backend::InteriorPoint),
            other => Err(SdpError::InvalidProblem(format!("unknown solver backend '{other}' (available: ipm)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdpOptions<T: Scalar> {
    pub tol_feas: T,
    pub tol_obj: T,
    pub tol_inf: T,
    pub max_iterations: usize,
    /// Normalize blocks and variables before solving.
    pub scaling: bool,
    pub backend: Backend,
}

impl<T: Scalar> Default for SdpOptions<T> {
    fn default() -> Self {
        // Single precision cannot reach 1e-8; loosen to what the type supports.
        let eps = T::machine_epsilon();
        let tol = T::c(1e-8).max(eps.powf(T::c(2.0 / 3.0)));
        SdpOptions {
            tol_feas: tol,
            tol_obj: tol,
            tol_inf: tol,
            max_iterations: 200,
            scaling: true,
            backend: Backend::InteriorPoint,
        }
    }
}

struct Scaled<T: Scalar> {
    std: ipm::StdProblem<T>,
    var_scale: Vec<T>,
}

fn to_standard<T: Scalar>(p: &SdpProblem<T>, scaling: bool) -> Scaled<T> {
    let m = p.variables.len();
    let mut blocks = Vec::new();
    for blk in &p.blocks {
        let d = blk.expr.dim();
        let shift = CMatrix::<T>::identity(d, d).map(|z| z * p.epsilon);
        let mut c = &blk.expr.constant - shift;
        let mut coefs: Vec<(VarId, CMatrix<T>)> = blk.expr.terms.iter().map(|(i, a)| (*i, a.map(|z| -z))).collect();
        if let Some(s) = &blk.congruence {
            let sa = s.adjoint();
            c = &sa * c * s;
            for (_, a) in &mut coefs {
                *a = &sa * &*a * s;
            }
        }
        c = linalg::hermitian_part(&c);
        for (_, a) in &mut coefs {
            *a = linalg::hermitian_part(a);
        }
        let real = c.iter().chain(coefs.iter().flat_map(|(_, a)| a.iter())).all(|z| z.im == T::zero());
        let embed = |h: &CMatrix<T>| if real { h.map(|z| z.re) } else { linalg::realify(h) };
        let mut merged: Vec<(VarId, DMatrix<T>)> = Vec::new();
        for (i, a) in &coefs {
            let e = embed(a);
            match merged.iter_mut().find(|(j, _)| j == i) {
                Some((_, acc)) => *acc += e,
                None => merged.push((*i, e)),
            }
        }
        blocks.push(ipm::StdBlock { c: embed(&c), a: merged });
    }
    for (i, var) in p.variables.iter().enumerate() {
        if let Some(l) = var.lower {
            blocks
                .push(ipm::StdBlock { c: DMatrix::from_element(1, 1, -l), a: vec![(i, DMatrix::from_element(1, 1, -T::one()))] });
        }
    }
    for con in &p.constraints {
        let mut a: Vec<(VarId, DMatrix<T>)> = Vec::new();
        for (i, coef) in &con.coeffs {
            match a.iter_mut().find(|(j, _)| j == i) {
                Some((_, acc)) => acc[(0, 0)] -= *coef,
                None => a.push((*i, DMatrix::from_element(1, 1, -*coef))),
            }
        }
        blocks.push(ipm::StdBlock { c: DMatrix::from_element(1, 1, -con.rhs), a });
    }
    let mut b = DVector::from_iterator(m, p.objective.iter().map(|c| -*c));
    let mut var_scale = vec![T::one(); m];
    if scaling {
        for blk in &mut blocks {
            let size = blk.a.iter().map(|(_, a)| a.norm()).fold(blk.c.norm(), T::max);
            if size > T::zero() {
                let inv = T::one() / size;
                blk.c *= inv;
                for (_, a) in &mut blk.a {
                    *a *= inv;
                }
            }
        }
        let mut col = vec![T::zero(); m];
        for blk in &blocks {
            for (i, a) in &blk.a {
                col[*i] = col[*i].max(a.norm());
            }
        }
        for (i, s) in col.iter().enumerate() {
            if *s > T::zero() {
                var_scale[i] = *s;
            }
        }
        for blk in &mut blocks {
            for (i, a) in &mut blk.a {
                *a /= var_scale[*i];
            }
        }
        for i in 0..m {
            b[i] /= var_scale[i];
        }
        let bmax = b.iter().fold(T::zero(), |acc, x| acc.max(x.abs()));
        if bmax > T::zero() {
            b /= bmax;
        }
    }
    Scaled { std: ipm::StdProblem { b, blocks }, var_scale }
}

/// Solves the problem. An unbounded objective is an error; infeasibility
/// and solver trouble are reported through the status.
pub fn solve<T: Scalar>(problem: &SdpProblem<T>, options: &SdpOptions<T>) -> Result<SdpSolution<T>, SdpError> {
    problem.validate()?;
    let Backend::InteriorPoint = options.backend;
    let scaled = to_standard(problem, options.scaling);
    let settings = ipm::IpmSettings {
        tol_feas: options.tol_feas,
        tol_obj: options.tol_obj,
        tol_inf: options.tol_inf,
        max_iterations: options.max_iterations,
    };
    let outcome = ipm::solve(&scaled.std, &settings);
    let unscale = |y: &DVector<T>| -> Vec<T> { y.iter().zip(&scaled.var_scale).map(|(v, s)| *v / *s).collect() };
    let accept = |values: &[T]| -> bool {
        let eigs = problem.block_min_eigs(values);
        eigs.iter().all(|e| *e >= problem.epsilon - options.tol_feas) && problem.scalar_violation(values) <= options.tol_feas
    };
    let current = unscale(&outcome.y);
    let best = outcome.best_y.as_ref().map(unscale);
    let (status, values, message) = match &outcome.status {
        ipm::IpmStatus::Unbounded => return Err(SdpError::Unbounded),
        ipm::IpmStatus::Infeasible => (SdpStatus::Infeasible, current, None),
        ipm::IpmStatus::Converged if accept(&current) => (SdpStatus::Optimal, current, None),
        ipm::IpmStatus::Converged => match best {
            Some(b) if accept(&b) => (SdpStatus::NumericalTrouble, b, Some("converged point failed re-verification".to_string())),
            _ => (SdpStatus::NumericalTrouble, current, Some("converged point failed re-verification".to_string())),
        },
        ipm::IpmStatus::Trouble(msg) => match best {
            Some(b) => (SdpStatus::NumericalTrouble, b, Some(msg.clone())),
            None => (SdpStatus::NumericalTrouble, current, Some(msg.clone())),
        },
    };
    let block_min_eigs = problem.block_min_eigs(&values);
    let min_block_eig = block_min_eigs.iter().copied().fold(T::max_value().unwrap_or_else(T::one), T::min);
    Ok(SdpSolution {
        status,
        objective: problem.objective_value(&values),
        values,
        block_min_eigs,
        min_block_eig,
        iterations: outcome.iterations,
        primal_infeasibility: outcome.pinf,
        dual_infeasibility: outcome.dinf,
        gap: outcome.gap,
        message,
    })
}

impl<T: Scalar> SdpSolution<T> {
    /// `true` when `values` satisfies every block with margin `ε - tol` and
    /// every scalar constraint within `tol`.
    pub fn is_certified(&self, problem: &SdpProblem<T>, tol: T) -> bool {
        self.block_min_eigs.iter().all(|e| *e >= problem.epsilon - tol) && problem.scalar_violation(&self.values) <= tol
    }
}

/// Identity-valued Hermitian matrix helper.
pub fn identity<T: Scalar>(n: usize) -> CMatrix<T> {
    CMatrix::identity(n, n)
}

/// Real scalar as a `1x1` Hermitian matrix.
pub fn scalar_matrix<T: Scalar>(x: T) -> CMatrix<T> {
    CMatrix::from_element(1, 1, Complex::new(x, T::zero()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn realify_examples() {
        assert_eq!(realify(&scalar_matrix(2.0)).unwrap(), DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 2.0]));
        assert_eq!(realify(&identity::<f64>(3)).unwrap(), DMatrix::identity(6, 6));
        let h = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(0.0, 0.0)]);
        let eig = linalg::symmetric_eigenvalues(&realify(&h).unwrap());
        for (got, want) in eig.iter().zip([-1.0, -1.0, 1.0, 1.0]) {
            assert!((got - want).abs() < 1e-12);
        }
        let bad = CMatrix::from_row_slice(1, 1, &[c(0.0, 1.0)]);
        assert!(matches!(realify(&bad), Err(EmbeddingError::NotHermitian(_))));
    }

    #[test]
    fn scalar_margin_problem() {
        let mut p = SdpProblem::<f64>::new(1e-6);
        let x = p.add_variable("x", None);
        p.objective[x] = 1.0;
        let mut e = AffineMatrixExpr::new(scalar_matrix(0.0));
        e.add_term(x, scalar_matrix(1.0));
        p.add_block("x", e, None);
        let sol = solve(&p, &SdpOptions::default()).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert!((sol.values[0] - 1e-6).abs() < 1e-9, "{}", sol.values[0]);
    }

    #[test]
    fn unbounded_is_an_error() {
        let mut p = SdpProblem::<f64>::new(1e-6);
        let x = p.add_variable("x", None);
        p.objective[x] = 1.0;
        let mut e = AffineMatrixExpr::new(scalar_matrix(1.0));
        e.add_term(x, scalar_matrix(-1.0));
        p.add_block("x", e, None);
        assert_eq!(solve(&p, &SdpOptions::default()), Err(SdpError::Unbounded));
    }

    #[test]
    fn infeasible_lmi() {
        // -1 + 0·x ⪰ ε has no solution.
        let mut p = SdpProblem::<f64>::new(1e-6);
        let x = p.add_variable("x", None);
        let mut e = AffineMatrixExpr::new(scalar_matrix(-1.0));
        e.add_term(x, scalar_matrix(0.0));
        p.add_block("x", e.clone(), None);
        let mut e2 = AffineMatrixExpr::new(scalar_matrix(0.0));
        e2.add_term(x, scalar_matrix(1.0));
        p.add_block("y", e2, None);
        let sol = solve(&p, &SdpOptions::default()).unwrap();
        assert_eq!(sol.status, SdpStatus::Infeasible);
    }

    #[test]
    fn validation_catches_undeclared_variables() {
        let mut p = SdpProblem::<f64>::new(1e-6);
        let mut e = AffineMatrixExpr::new(scalar_matrix(1.0));
        e.add_term(3, scalar_matrix(1.0));
        p.add_block("b", e, None);
        assert!(matches!(p.validate(), Err(SdpError::InvalidProblem(_))));
        assert!(matches!(SdpProblem::<f64>::new(0.0).validate(), Err(SdpError::InvalidProblem(_))));
    }

    #[test]
    fn backend_names() {
        assert_eq!("ipm".parse::<Backend>().unwrap(), Backend::InteriorPoint);
        assert!("mosek".parse::<Backend>().is_err());
    }
}
