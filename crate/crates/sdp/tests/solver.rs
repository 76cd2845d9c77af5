use nalgebra::DMatrix;
use see_sdp::{
    embed_hermitian, ConicProblem, HermitianMatrix, LinearExpr, LmiExpr, Sense, SolveStatus, SolverSettings, C64,
};

fn settings() -> SolverSettings {
    SolverSettings::default()
}

fn e11(n: usize) -> HermitianMatrix {
    let mut d = vec![0.0; n];
    d[0] = 1.0;
    HermitianMatrix::from_diagonal(&d)
}

#[test]
fn trace_min_with_pinned_corner() {
    let mut p = ConicProblem::new();
    let x = p.add_psd(3);
    p.minimize(LinearExpr::new().trace_of(x, 3, 1.0));
    p.add_linear(LinearExpr::new().trace(x, e11(3)), Sense::Equal, 1.0);
    let sol = p.solve(&settings()).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    assert!((sol.objective - 1.0).abs() < 1e-6, "{}", sol.objective);
    let m = sol.matrix(x);
    assert!((m.as_matrix()[(0, 0)].re - 1.0).abs() < 1e-6);
}

#[test]
fn scalar_lp() {
    let mut p = ConicProblem::new();
    let t = p.add_nonneg();
    p.minimize(LinearExpr::new().scalar(t, 1.0));
    p.add_linear(LinearExpr::new().scalar(t, 1.0), Sense::GreaterEq, 3.0);
    let sol = p.solve(&settings()).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    assert!((sol.scalar(t) - 3.0).abs() < 1e-6);
}

#[test]
fn detects_infeasible() {
    let mut p = ConicProblem::new();
    let t = p.add_nonneg();
    p.minimize(LinearExpr::new().scalar(t, 1.0));
    p.add_linear(LinearExpr::new().scalar(t, -1.0), Sense::GreaterEq, 1.0);
    let sol = p.solve(&settings()).unwrap();
    assert_eq!(sol.status, SolveStatus::Infeasible);
}

#[test]
fn detects_infeasible_lmi() {
    // X ⪰ 0 and Tr X ≤ -1.
    let mut p = ConicProblem::new();
    let x = p.add_psd(2);
    p.minimize(LinearExpr::new().trace_of(x, 2, 1.0));
    p.add_linear(LinearExpr::new().trace_of(x, 2, -1.0), Sense::GreaterEq, 1.0);
    let sol = p.solve(&settings()).unwrap();
    assert_eq!(sol.status, SolveStatus::Infeasible);
}

#[test]
fn detects_unbounded() {
    let mut p = ConicProblem::new();
    let t = p.add_free();
    p.minimize(LinearExpr::new().scalar(t, 1.0));
    p.add_linear(LinearExpr::new().scalar(t, -1.0), Sense::GreaterEq, 1.0);
    let sol = p.solve(&settings()).unwrap();
    assert_eq!(sol.status, SolveStatus::Unbounded);
}

#[test]
fn lmi_eigenvalue_bound() {
    // minimize t s.t. t I - A ⪰ 0  →  t = λmax(A)
    let a = DMatrix::from_row_slice(
        2,
        2,
        &[C64::new(2.0, 0.0), C64::new(0.0, 1.0), C64::new(0.0, -1.0), C64::new(1.0, 0.0)],
    );
    let a = HermitianMatrix::from_matrix(a).unwrap();
    let lmax = a.max_eigenvalue();
    let mut p = ConicProblem::new();
    let t = p.add_free();
    p.minimize(LinearExpr::new().scalar(t, 1.0));
    p.add_lmi(LmiExpr::new(a.scale(-1.0)).scalar(t, HermitianMatrix::identity(2)));
    let sol = p.solve(&settings()).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    assert!((sol.objective - lmax).abs() < 1e-6, "{} vs {}", sol.objective, lmax);
    // the LMI dual is a unit-trace PSD matrix on the top eigenvector
    let dual = sol.lmi_dual(0);
    assert!((dual.trace() - 1.0).abs() < 1e-5);
}

#[test]
fn complex_and_embedded_real_agree() {
    // minimize Tr(C X) s.t. Tr X = 1, X ⪰ 0  →  λmin(C)
    let c = DMatrix::from_fn(3, 3, |i, j| C64::new((i + j) as f64, i as f64 - j as f64));
    let c = HermitianMatrix::from_matrix(c).unwrap();
    let mut p = ConicProblem::new();
    let x = p.add_psd(3);
    p.minimize(LinearExpr::new().trace(x, c.clone()));
    p.add_linear(LinearExpr::new().trace_of(x, 3, 1.0), Sense::Equal, 1.0);
    let complex = p.solve(&settings()).unwrap();

    let ce = HermitianMatrix::from_matrix(embed_hermitian(&c).map(|v| C64::new(v, 0.0))).unwrap();
    let mut q = ConicProblem::new();
    let y = q.add_real_psd(6);
    q.minimize(LinearExpr::new().trace(y, ce));
    q.add_linear(LinearExpr::new().trace_of(y, 6, 1.0), Sense::Equal, 2.0);
    let real = q.solve(&settings()).unwrap();
    assert!(complex.is_optimal() && real.is_optimal());
    assert!((complex.objective - c.min_eigenvalue()).abs() < 1e-6);
    assert!((real.objective - 2.0 * complex.objective).abs() < 1e-6);
}

#[test]
fn congruence_terms_match_direct_evaluation() {
    // minimize Tr X s.t. L^H X L - I ⪰ 0 with a tall L.
    let l = DMatrix::from_fn(3, 2, |i, j| C64::new(1.0 + i as f64 * 0.5, j as f64 - 0.3 * i as f64));
    let mut p = ConicProblem::new();
    let x = p.add_psd(3);
    p.minimize(LinearExpr::new().trace_of(x, 3, 1.0));
    let lmi = LmiExpr::new(HermitianMatrix::identity(2).scale(-1.0)).congruence(Some(l.clone()), vec![(x, 1.0)]);
    p.add_lmi(lmi.clone());
    let sol = p.solve(&settings()).unwrap();
    assert!(sol.is_optimal());
    let value = sol.evaluate_lmi(&lmi);
    assert!(value.min_eigenvalue() > -1e-6);
    // Optimum: Tr((L^H L)^{-1}) via X = L (L^H L)^{-2} L^H
    let g = l.adjoint() * &l;
    let gi = g.try_inverse().unwrap();
    let expected: f64 = gi.trace().re;
    assert!((sol.objective - expected).abs() < 1e-5, "{} vs {}", sol.objective, expected);
}

#[test]
fn warm_restart_converges_immediately() {
    let mut p = ConicProblem::new();
    let x = p.add_psd(3);
    let c = HermitianMatrix::from_diagonal(&[1.0, 2.0, 3.0]);
    p.minimize(LinearExpr::new().trace(x, c));
    p.add_linear(LinearExpr::new().trace_of(x, 3, 1.0), Sense::GreaterEq, 1.0);
    let first = p.solve(&settings()).unwrap();
    assert!(first.is_optimal());
    let second = p.solve_from(&settings(), &first).unwrap();
    assert!(second.is_optimal());
    assert!(second.iterations <= 2);
    assert!((second.objective - first.objective).abs() < 1e-7);
}
