//! Sparse SDPA text format.
//!
//! The exported problem is `minimize cᵀy` subject to
//! `Σ y_i F_i - F_0 ⪰ 0`, with Hermitian blocks realified, the margin `ε`
//! folded into `F_0`, and bounds plus linear constraints collected into one
//! diagonal (LP) block. Congruences are not exported; they do not change
//! the feasible set. A `*epsilon` comment line lets [`read_sdpa`] restore
//! the margin.

use std::fmt::Write;

use nalgebra::DMatrix;
use num_complex::Complex;

use super::{AffineMatrixExpr, SdpProblem};
use crate::error::SdpError;
use crate::linalg::{self, CMatrix};
use crate::scalar::Scalar;

/// `F_0` and the `(variable, F_i)` terms of one realified block.
type RealBlock<T> = (DMatrix<T>, Vec<(usize, DMatrix<T>)>);

fn fmt(x: f64) -> String {
    format!("{x:.17e}")
}

pub fn write_sdpa<T: Scalar>(problem: &SdpProblem<T>) -> Result<String, SdpError> {
    problem.validate()?;
    let m = problem.variables.len();
    let mut psd: Vec<RealBlock<T>> = Vec::new();
    for blk in &problem.blocks {
        let d = blk.expr.dim();
        let real = blk.expr.constant.iter().chain(blk.expr.terms.iter().flat_map(|(_, a)| a.iter())).all(|z| z.im == T::zero());
        let embed = |h: &CMatrix<T>| if real { h.map(|z| z.re) } else { linalg::realify(h) };
        let shift = CMatrix::<T>::identity(d, d).map(|z| z * problem.epsilon);
        let f0 = embed(&(shift - &blk.expr.constant));
        let terms = blk.expr.terms.iter().map(|(i, a)| (*i, embed(a))).collect();
        psd.push((f0, terms));
    }
    let mut lp: Vec<(T, Vec<(usize, T)>)> = Vec::new();
    for (i, var) in problem.variables.iter().enumerate() {
        if let Some(l) = var.lower {
            lp.push((l, vec![(i, T::one())]));
        }
    }
    for con in &problem.constraints {
        lp.push((con.rhs, con.coeffs.clone()));
    }

    let mut out = String::new();
    let _ = writeln!(out, "\"voltbound SDP export");
    let _ = writeln!(out, "*epsilon {}", fmt(problem.epsilon.to_f64_lossy()));
    for (i, v) in problem.variables.iter().enumerate() {
        let _ = writeln!(out, "*var {} {}", i + 1, v.name);
    }
    let _ = writeln!(out, "{m}");
    let nblocks = psd.len() + usize::from(!lp.is_empty());
    let _ = writeln!(out, "{nblocks}");
    let mut sizes: Vec<String> = psd.iter().map(|(f0, _)| f0.nrows().to_string()).collect();
    if !lp.is_empty() {
        sizes.push(format!("-{}", lp.len()));
    }
    let _ = writeln!(out, "{}", sizes.join(" "));
    let costs: Vec<String> = problem.objective.iter().map(|c| fmt(c.to_f64_lossy())).collect();
    let _ = writeln!(out, "{}", costs.join(" "));
    for (b, (f0, terms)) in psd.iter().enumerate() {
        let mut write_mat = |mat_no: usize, mat: &DMatrix<T>| {
            for i in 0..mat.nrows() {
                for j in i..mat.ncols() {
                    let v = mat[(i, j)];
                    if v != T::zero() {
                        let _ = writeln!(out, "{mat_no} {} {} {} {}", b + 1, i + 1, j + 1, fmt(v.to_f64_lossy()));
                    }
                }
            }
        };
        write_mat(0, f0);
        let mut sorted: Vec<&(usize, DMatrix<T>)> = terms.iter().collect();
        sorted.sort_by_key(|(i, _)| *i);
        for (i, a) in sorted {
            write_mat(i + 1, a);
        }
    }
    let lp_block = psd.len() + 1;
    for (r, (rhs, coeffs)) in lp.iter().enumerate() {
        if *rhs != T::zero() {
            let _ = writeln!(out, "0 {lp_block} {} {} {}", r + 1, r + 1, fmt(rhs.to_f64_lossy()));
        }
        for (i, a) in coeffs {
            if *a != T::zero() {
                let _ = writeln!(out, "{} {lp_block} {} {} {}", i + 1, r + 1, r + 1, fmt(a.to_f64_lossy()));
            }
        }
    }
    Ok(out)
}

/// Parses a sparse SDPA file into a problem with real blocks.
pub fn read_sdpa(text: &str) -> Result<SdpProblem<f64>, SdpError> {
    let err = |msg: String| SdpError::Format(msg);
    let mut epsilon: Option<f64> = None;
    let mut names: Vec<(usize, String)> = Vec::new();
    let mut tokens: Vec<String> = Vec::new();
    let mut header_lines = 0;
    let mut entries: Vec<(usize, usize, usize, usize, f64)> = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('"') {
            continue;
        }
        if let Some(rest) = line.strip_prefix('*') {
            let mut parts = rest.split_whitespace();
            match parts.next() {
                Some("epsilon") => epsilon = parts.next().and_then(|s| s.parse().ok()),
                Some("var") => {
                    if let (Some(i), Some(name)) = (parts.next().and_then(|s| s.parse().ok()), parts.next()) {
                        names.push((i, name.to_string()));
                    }
                }
                _ => {}
            }
            continue;
        }
        let cleaned: String = line.chars().map(|c| if "{}(),".contains(c) { ' ' } else { c }).collect();
        if header_lines < 4 {
            tokens.extend(cleaned.split_whitespace().map(String::from));
            header_lines += 1;
            continue;
        }
        let f: Vec<&str> = cleaned.split_whitespace().collect();
        if f.len() != 5 {
            return Err(err(format!("expected 5 fields in entry line '{line}'")));
        }
        let p = |s: &str| s.parse::<usize>().map_err(|e| err(format!("{s}: {e}")));
        let v = f[4].parse::<f64>().map_err(|e| err(format!("{}: {e}", f[4])))?;
        entries.push((p(f[0])?, p(f[1])?, p(f[2])?, p(f[3])?, v));
    }
    let mut it = tokens.into_iter();
    let mut next_usize = |what: &str| -> Result<usize, SdpError> {
        it.next().ok_or_else(|| err(format!("missing {what}")))?.parse().map_err(|e| err(format!("{what}: {e}")))
    };
    let m = next_usize("variable count")?;
    let nblocks = next_usize("block count")?;
    let rest: Vec<String> = it.collect();
    if rest.len() != nblocks + m {
        return Err(err(format!("header lists {} values, expected {}", rest.len(), nblocks + m)));
    }
    let sizes: Vec<i64> = rest[..nblocks]
        .iter()
        .map(|s| s.parse::<i64>().map_err(|e| err(format!("block size {s}: {e}"))))
        .collect::<Result<_, _>>()?;
    let costs: Vec<f64> =
        rest[nblocks..].iter().map(|s| s.parse::<f64>().map_err(|e| err(format!("cost {s}: {e}")))).collect::<Result<_, _>>()?;
    let epsilon = epsilon.unwrap_or(0.0);

    let mut problem = SdpProblem::new(if epsilon > 0.0 { epsilon } else { f64::EPSILON });
    for (i, cost) in costs.iter().enumerate() {
        let name = names.iter().find(|(k, _)| *k == i + 1).map(|(_, n)| n.clone()).unwrap_or_else(|| format!("y{}", i + 1));
        problem.add_variable(name, None);
        problem.objective[i] = *cost;
    }
    let mut mats: Vec<Vec<DMatrix<f64>>> = sizes
        .iter()
        .map(|&s| (0..=m).map(|_| DMatrix::zeros(s.unsigned_abs() as usize, s.unsigned_abs() as usize)).collect())
        .collect();
    for (mat, blk, i, j, v) in entries {
        if mat > m || blk == 0 || blk > nblocks {
            return Err(err(format!("entry refers to matrix {mat} block {blk}")));
        }
        let n = sizes[blk - 1].unsigned_abs() as usize;
        if i == 0 || j == 0 || i > n || j > n {
            return Err(err(format!("entry ({i},{j}) outside block {blk}")));
        }
        if sizes[blk - 1] < 0 && i != j {
            return Err(err(format!("off-diagonal entry in LP block {blk}")));
        }
        mats[blk - 1][mat][(i - 1, j - 1)] = v;
        mats[blk - 1][mat][(j - 1, i - 1)] = v;
    }
    for (b, &size) in sizes.iter().enumerate() {
        let blk = &mats[b];
        if size > 0 {
            let n = size as usize;
            let lift = |d: &DMatrix<f64>| d.map(|x| Complex::new(x, 0.0));
            let constant = lift(&(DMatrix::identity(n, n) * epsilon - &blk[0]));
            let mut expr = AffineMatrixExpr::new(constant);
            for (i, a) in blk.iter().enumerate().skip(1) {
                if a.iter().any(|x| *x != 0.0) {
                    expr.add_term(i - 1, lift(a));
                }
            }
            problem.add_block(format!("block {}", b + 1), expr, None);
        } else {
            for r in 0..size.unsigned_abs() as usize {
                let coeffs: Vec<(usize, f64)> =
                    blk.iter().enumerate().skip(1).filter(|(_, a)| a[(r, r)] != 0.0).map(|(i, a)| (i - 1, a[(r, r)])).collect();
                problem.add_constraint(format!("lp {}", r + 1), coeffs, blk[0][(r, r)]);
            }
        }
    }
    Ok(problem)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdp::{scalar_matrix, solve, SdpOptions};

    #[test]
    fn round_trip_preserves_solution() {
        let mut p = SdpProblem::<f64>::new(1e-6);
        let t = p.add_variable("t", Some(-5.0));
        p.objective[t] = 1.0;
        let a = CMatrix::from_row_slice(
            2,
            2,
            &[Complex::new(0.0, 0.0), Complex::new(1.0, 0.0), Complex::new(1.0, 0.0), Complex::new(0.0, 0.0)],
        );
        let mut e = AffineMatrixExpr::new(a.map(|z| -z));
        e.add_term(t, CMatrix::identity(2, 2));
        p.add_block("t", e, None);
        p.add_constraint("cap", vec![(t, -1.0)], -10.0);
        let text = write_sdpa(&p).unwrap();
        let q = read_sdpa(&text).unwrap();
        assert_eq!(q.variables[0].name, "t");
        assert_eq!(q.epsilon, 1e-6);
        let s1 = solve(&p, &SdpOptions::default()).unwrap();
        let s2 = solve(&q, &SdpOptions::default()).unwrap();
        assert_eq!(s1.status, s2.status);
        assert!((s1.values[0] - s2.values[0]).abs() < 1e-6);
        let _ = scalar_matrix(1.0);
    }

    #[test]
    fn malformed_input() {
        assert!(read_sdpa("1\n1\n2\n1.0\n1 1 1 1\n").is_err());
        assert!(read_sdpa("1\n").is_err());
    }
}
