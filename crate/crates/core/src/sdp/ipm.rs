//! Infeasible-start primal-dual interior-point method (HKM direction,
//! Mehrotra predictor-corrector) for real block-diagonal SDPs in the dual
//! standard form
//!
//! ```text
//! maximize bᵀy  subject to  Z_j = C_j - Σ_i y_i A_ij ⪰ 0  for every block j.
//! ```
//!
//! The matching primal is `minimize Σ <C_j, X_j>` subject to
//! `Σ_j <A_ij, X_j> = b_i`, `X_j ⪰ 0`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::linalg::{frobenius_dot, symmetric_min_eigenvalue, symmetrize};
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub(crate) struct StdBlock<T: Scalar> {
    pub c: DMatrix<T>,
    pub a: Vec<(usize, DMatrix<T>)>,
}

#[derive(Debug, Clone)]
pub(crate) struct StdProblem<T: Scalar> {
    pub b: DVector<T>,
    pub blocks: Vec<StdBlock<T>>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct IpmSettings<T: Scalar> {
    pub tol_feas: T,
    pub tol_obj: T,
    pub tol_inf: T,
    pub max_iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum IpmStatus {
    Converged,
    Infeasible,
    Unbounded,
    Trouble(String),
}

#[derive(Debug, Clone)]
pub(crate) struct IpmOutcome<T: Scalar> {
    pub status: IpmStatus,
    pub y: DVector<T>,
    /// Dual point with the largest objective whose slack factored as
    /// positive definite, if any was seen.
    pub best_y: Option<DVector<T>>,
    pub iterations: usize,
    pub pinf: T,
    pub dinf: T,
    pub gap: T,
}

type Blocks<T> = Vec<DMatrix<T>>;

struct Workspace<'a, T: Scalar> {
    p: &'a StdProblem<T>,
    m: usize,
}

impl<'a, T: Scalar> Workspace<'a, T> {
    fn a_op(&self, mats: &Blocks<T>) -> DVector<T> {
        let mut r = DVector::zeros(self.m);
        for (blk, mb) in self.p.blocks.iter().zip(mats) {
            for (i, a) in &blk.a {
                r[*i] += frobenius_dot(a, mb);
            }
        }
        r
    }

    fn a_adj(&self, y: &DVector<T>) -> Blocks<T> {
        self.p
            .blocks
            .iter()
            .map(|blk| {
                let mut s = DMatrix::zeros(blk.c.nrows(), blk.c.ncols());
                for (i, a) in &blk.a {
                    if y[*i] != T::zero() {
                        s += a * y[*i];
                    }
                }
                s
            })
            .collect()
    }

    fn dual_slack(&self, y: &DVector<T>) -> Blocks<T> {
        self.a_adj(y).into_iter().zip(&self.p.blocks).map(|(s, blk)| &blk.c - s).collect()
    }
}

fn inner<T: Scalar>(a: &Blocks<T>, b: &Blocks<T>) -> T {
    a.iter().zip(b).fold(T::zero(), |s, (x, y)| s + frobenius_dot(x, y))
}

fn norm<T: Scalar>(a: &Blocks<T>) -> T {
    inner(a, a).sqrt()
}

fn all_pd<T: Scalar>(mats: &Blocks<T>) -> bool {
    mats.iter().all(|m| m.iter().all(|x| x.is_finite()) && Cholesky::new(m.clone()).is_some())
}

/// Largest `α` with `P + α dP ⪰ 0` (capped at a large value).
fn max_step<T: Scalar>(p: &Blocks<T>, dp: &Blocks<T>) -> T {
    let cap = T::c(1e30);
    let mut alpha = cap;
    for (pb, dpb) in p.iter().zip(dp) {
        let lambda = if pb.nrows() == 1 {
            dpb[(0, 0)] / pb[(0, 0)]
        } else {
            let chol = match Cholesky::new(pb.clone()) {
                Some(c) => c,
                None => return T::zero(),
            };
            let l = chol.l();
            let w1 = match l.solve_lower_triangular(dpb) {
                Some(w) => w,
                None => return T::zero(),
            };
            let w = match l.solve_lower_triangular(&w1.transpose()) {
                Some(w) => w,
                None => return T::zero(),
            };
            symmetric_min_eigenvalue(&symmetrize(&w))
        };
        if lambda < T::zero() {
            alpha = alpha.min(-T::one() / lambda);
        }
    }
    alpha
}

fn initial_point<T: Scalar>(p: &StdProblem<T>) -> (Blocks<T>, Blocks<T>) {
    let norm_c = p.blocks.iter().map(|b| b.c.norm()).fold(T::zero(), T::max);
    let norm_a = p.blocks.iter().flat_map(|b| b.a.iter().map(|(_, a)| a.norm())).fold(T::zero(), T::max);
    let mut a_norm_by_var = vec![T::zero(); p.b.len()];
    for blk in &p.blocks {
        for (i, a) in &blk.a {
            a_norm_by_var[*i] = a_norm_by_var[*i].max(a.norm());
        }
    }
    let ratio = p.b.iter().zip(&a_norm_by_var).map(|(bi, an)| (T::one() + bi.abs()) / (T::one() + *an)).fold(T::one(), T::max);
    let ten = T::c(10.0);
    let mut xs = Vec::with_capacity(p.blocks.len());
    let mut zs = Vec::with_capacity(p.blocks.len());
    for blk in &p.blocks {
        let n = blk.c.nrows();
        let sn = T::c(n as f64).sqrt();
        let xi = ten.max(sn * ratio);
        let eta = ten.max(sn).max(norm_c).max(sn * norm_a);
        xs.push(DMatrix::identity(n, n) * xi);
        zs.push(DMatrix::identity(n, n) * eta);
    }
    (xs, zs)
}

pub(crate) fn solve<T: Scalar>(p: &StdProblem<T>, s: &IpmSettings<T>) -> IpmOutcome<T> {
    let m = p.b.len();
    let ws = Workspace { p, m };
    let ntot: usize = p.blocks.iter().map(|b| b.c.nrows()).sum();
    let ntot_t = T::c(ntot.max(1) as f64);
    let cs: Blocks<T> = p.blocks.iter().map(|b| b.c.clone()).collect();
    let norm_c = norm(&cs);
    let norm_b = p.b.norm();
    let (mut x, mut z) = initial_point(p);
    let mut y = DVector::zeros(m);
    let mut best: Option<(T, DVector<T>)> = None;
    let out = |status, y: DVector<T>, best: Option<(T, DVector<T>)>, it, pinf, dinf, gap| IpmOutcome {
        status,
        y,
        best_y: best.map(|(_, b)| b),
        iterations: it,
        pinf,
        dinf,
        gap,
    };
    let (mut pinf, mut dinf, mut gap) = (T::one(), T::one(), T::one());
    let mut stalled = 0usize;
    for it in 0..s.max_iterations {
        let aty = ws.a_adj(&y);
        let rd: Blocks<T> = p.blocks.iter().zip(&z).zip(&aty).map(|((blk, zb), sb)| &blk.c - zb - sb).collect();
        let ax = ws.a_op(&x);
        let rp = &p.b - &ax;
        let mu = inner(&x, &z) / ntot_t;
        let pobj = inner(&cs, &x);
        let dobj = p.b.dot(&y);
        pinf = rp.norm() / (T::one() + norm_b);
        dinf = norm(&rd) / (T::one() + norm_c);
        gap = (pobj - dobj).abs() / (T::one() + pobj.abs() + dobj.abs());

        let slack = ws.dual_slack(&y);
        if all_pd(&slack) && best.as_ref().is_none_or(|(v, _)| dobj > *v) {
            best = Some((dobj, y.clone()));
        }
        if pinf <= s.tol_feas && dinf <= s.tol_feas && gap <= s.tol_obj {
            return out(IpmStatus::Converged, y, best, it, pinf, dinf, gap);
        }
        // Farkas ray for the primal: the LMI has no feasible point.
        if pobj < T::zero() && ax.norm() / (-pobj) < s.tol_inf && dinf > s.tol_feas {
            return out(IpmStatus::Infeasible, y, best, it, pinf, dinf, gap);
        }
        let cz = norm(&cs.iter().zip(&rd).map(|(c, r)| c - r).collect());
        if dobj > T::zero() && cz / dobj < s.tol_inf && dinf <= s.tol_feas {
            return out(IpmStatus::Unbounded, y, best, it, pinf, dinf, gap);
        }

        let zinv: Option<Blocks<T>> = z.iter().map(|zb| Cholesky::new(zb.clone()).map(|c| c.inverse())).collect();
        let zinv = match zinv {
            Some(v) => v,
            None => return out(IpmStatus::Trouble("dual slack lost definiteness".into()), y, best, it, pinf, dinf, gap),
        };
        let mut schur = DMatrix::<T>::zeros(m, m);
        for ((blk, xb), zib) in p.blocks.iter().zip(&x).zip(&zinv) {
            let g: Vec<DMatrix<T>> = blk.a.iter().map(|(_, a)| xb * a * zib).collect();
            for (jj, (vj, _)) in blk.a.iter().enumerate() {
                for (vi, ai) in blk.a.iter().take(jj + 1) {
                    let v = frobenius_dot(ai, &g[jj]);
                    schur[(*vi, *vj)] += v;
                    if vi != vj {
                        schur[(*vj, *vi)] += v;
                    }
                }
            }
        }
        let chol = match factor_schur(schur) {
            Some(c) => c,
            None => {
                return out(IpmStatus::Trouble("Schur complement is not positive definite".into()), y, best, it, pinf, dinf, gap)
            }
        };

        let direction = |rc: &Blocks<T>| -> (DVector<T>, Blocks<T>, Blocks<T>) {
            let rcz: Blocks<T> = rc.iter().zip(&zinv).map(|(r, zi)| r * zi).collect();
            let xrz: Blocks<T> = x.iter().zip(&rd).zip(&zinv).map(|((xb, r), zi)| xb * r * zi).collect();
            let rhs = &rp - ws.a_op(&rcz) + ws.a_op(&xrz);
            let dy = chol.solve(&rhs);
            let ady = ws.a_adj(&dy);
            let dz: Blocks<T> = rd.iter().zip(&ady).map(|(r, a)| r - a).collect();
            let dx: Blocks<T> =
                rc.iter().zip(&x).zip(&dz).zip(&zinv).map(|(((r, xb), dzb), zi)| symmetrize(&((r - xb * dzb) * zi))).collect();
            (dy, dx, dz)
        };

        let rc_pred: Blocks<T> = x.iter().zip(&z).map(|(xb, zb)| -(xb * zb)).collect();
        let (_, dxa, dza) = direction(&rc_pred);
        let ap = T::one().min(max_step(&x, &dxa));
        let ad = T::one().min(max_step(&z, &dza));
        let mu_aff = x
            .iter()
            .zip(&dxa)
            .zip(z.iter().zip(&dza))
            .fold(T::zero(), |acc, ((xb, dxb), (zb, dzb))| acc + frobenius_dot(&(xb + dxb * ap), &(zb + dzb * ad)))
            / ntot_t;
        let ratio = (mu_aff / mu).max(T::zero());
        let sigma = T::one().min(ratio * ratio * ratio);
        let rc_corr: Blocks<T> = x
            .iter()
            .zip(&z)
            .zip(dxa.iter().zip(&dza))
            .map(|((xb, zb), (dxb, dzb))| {
                let n = xb.nrows();
                DMatrix::identity(n, n) * (sigma * mu) - xb * zb - dxb * dzb
            })
            .collect();
        let (dy, dx, dz) = direction(&rc_corr);
        let frac = T::c(0.98);
        let mut ap = T::one().min(frac * max_step(&x, &dx));
        let mut ad = T::one().min(frac * max_step(&z, &dz));
        let shrink = T::c(0.8);
        let mut x_new = step(&x, &dx, ap);
        for _ in 0..30 {
            if all_pd(&x_new) {
                break;
            }
            ap *= shrink;
            x_new = step(&x, &dx, ap);
        }
        let mut z_new = step(&z, &dz, ad);
        for _ in 0..30 {
            if all_pd(&z_new) {
                break;
            }
            ad *= shrink;
            z_new = step(&z, &dz, ad);
        }
        let tiny = T::c(1e-8);
        if ap < tiny && ad < tiny {
            stalled += 1;
            if stalled >= 3 {
                return out(IpmStatus::Trouble("step length collapsed".into()), y, best, it, pinf, dinf, gap);
            }
        } else {
            stalled = 0;
        }
        if !all_pd(&x_new) || !all_pd(&z_new) {
            return out(IpmStatus::Trouble("iterate left the cone".into()), y, best, it, pinf, dinf, gap);
        }
        x = x_new;
        z = z_new;
        y += dy * ad;
    }
    out(IpmStatus::Trouble(format!("iteration limit {} reached", s.max_iterations)), y, best, s.max_iterations, pinf, dinf, gap)
}

fn step<T: Scalar>(p: &Blocks<T>, dp: &Blocks<T>, alpha: T) -> Blocks<T> {
    p.iter().zip(dp).map(|(a, d)| symmetrize(&(a + d * alpha))).collect()
}

/// Cholesky of the Schur matrix, retrying with a tiny diagonal shift.
fn factor_schur<T: Scalar>(mut schur: DMatrix<T>) -> Option<Cholesky<T, Dyn>> {
    schur = symmetrize(&schur);
    if let Some(c) = Cholesky::new(schur.clone()) {
        return Some(c);
    }
    let max_diag = schur.diagonal().iter().fold(T::zero(), |a, b| a.max(b.abs()));
    let shift = max_diag * T::c(1e-13).max(T::machine_epsilon() * T::c(10.0));
    for i in 0..schur.nrows() {
        schur[(i, i)] += shift;
    }
    Cholesky::new(schur)
}
