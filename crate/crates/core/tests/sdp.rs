use voltbound::linalg::{self, CMatrix};
use voltbound::sdp::{self, sdpa, AffineMatrixExpr, SdpOptions, SdpProblem, SdpStatus};
use voltbound::Complex;

fn m2(a: f64, b: f64, c: f64, d: f64) -> CMatrix<f64> {
    CMatrix::from_row_slice(2, 2, &[a, b, c, d].map(|x| Complex::new(x, 0.0)))
}

#[test]
fn largest_eigenvalue_as_an_sdp() {
    // minimize t s.t. tI - A ⪰ ε, A = [[0,1],[1,0]].
    let mut p = SdpProblem::<f64>::new(1e-9);
    let t = p.add_variable("t", None);
    p.objective[t] = 1.0;
    let mut e = AffineMatrixExpr::new(m2(0.0, -1.0, -1.0, 0.0));
    e.add_term(t, m2(1.0, 0.0, 0.0, 1.0));
    p.add_block("t", e, None);
    let sol = sdp::solve(&p, &SdpOptions::default()).unwrap();
    assert_eq!(sol.status, SdpStatus::Optimal);
    assert!((sol.values[t] - 1.0).abs() < 1e-6, "{}", sol.values[t]);
}

#[test]
fn unit_correlation_matrix_is_feasible() {
    let mut p = SdpProblem::<f64>::new(1e-6);
    let x = p.add_variable("x", None);
    let mut e = AffineMatrixExpr::new(m2(1.0, 0.0, 0.0, 1.0));
    e.add_term(x, m2(0.0, 1.0, 1.0, 0.0));
    p.add_block("c", e, None);
    let sol = sdp::solve(&p, &SdpOptions::default()).unwrap();
    assert_eq!(sol.status, SdpStatus::Optimal);
    assert!(sol.values[x].abs() < 1.0 - 1e-6);
    assert!(sol.min_block_eig >= 1e-6 - 1e-8);
}

#[test]
fn complex_blocks_are_solved_through_realification() {
    // minimize t s.t. tI - H ⪰ ε with H having eigenvalues ±sqrt(2).
    let h = CMatrix::from_row_slice(
        2,
        2,
        &[Complex::new(1.0, 0.0), Complex::new(0.0, 1.0), Complex::new(0.0, -1.0), Complex::new(-1.0, 0.0)],
    );
    let mut p = SdpProblem::<f64>::new(1e-9);
    let t = p.add_variable("t", None);
    p.objective[t] = 1.0;
    let mut e = AffineMatrixExpr::new(-h.clone());
    e.add_term(t, sdp::identity(2));
    p.add_block("t", e, None);
    let sol = sdp::solve(&p, &SdpOptions::default()).unwrap();
    let lmax = linalg::hermitian_eigenvalues(&h).iter().cloned().fold(f64::MIN, f64::max);
    assert!((sol.values[t] - lmax).abs() < 1e-6, "{} vs {lmax}", sol.values[t]);
}

#[test]
fn sdpa_export_reimports_to_the_same_answer() {
    let mut p = SdpProblem::<f64>::new(1e-7);
    let t = p.add_variable("t", Some(-10.0));
    let u = p.add_variable("u", None);
    p.objective[t] = 1.0;
    p.objective[u] = 0.5;
    let mut e = AffineMatrixExpr::new(m2(0.0, -1.0, -1.0, 0.0));
    e.add_term(t, m2(1.0, 0.0, 0.0, 1.0));
    e.add_term(u, m2(1.0, 0.0, 0.0, 0.0));
    p.add_block("b", e, None);
    p.add_constraint("u nonneg", vec![(u, 1.0)], 0.0);
    let text = sdpa::write_sdpa(&p).unwrap();
    let q = sdpa::read_sdpa(&text).unwrap();
    let (a, b) = (sdp::solve(&p, &SdpOptions::default()).unwrap(), sdp::solve(&q, &SdpOptions::default()).unwrap());
    assert_eq!(a.status, b.status);
    assert!((a.objective - b.objective).abs() < 1e-6);
}
