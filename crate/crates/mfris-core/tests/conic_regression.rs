//! Backend regression: the 25-problem analytic suite plus embedding,
//! feasibility-oracle, and monotone-restriction checks.

use mfris_core::conic::suite::{regression_suite, Expected};
use mfris_core::conic::{
    ConicProgram, LinExpr, LmiBlock, SolveOptions, SolveStatus,
};
use mfris_core::linalg::{C64, CMatrix, CVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

#[test]
fn analytic_suite_to_1e6() {
    let started = Instant::now();
    let opts = SolveOptions::default();
    let mut failures = Vec::new();
    for prob in regression_suite() {
        let report = prob.program.solve(&opts);
        match prob.expected {
            Expected::Optimal(want) => {
                if report.status != SolveStatus::Optimal {
                    failures.push(format!(
                        "{}: status {:?} ({})",
                        prob.name, report.status, report.diagnostics
                    ));
                } else if (report.objective - want).abs() > 1e-6 * (1.0 + want.abs()) {
                    failures.push(format!(
                        "{}: objective {} vs expected {} (err {:.2e})",
                        prob.name,
                        report.objective,
                        want,
                        (report.objective - want).abs()
                    ));
                }
            }
            Expected::Infeasible => {
                if report.status != SolveStatus::Infeasible {
                    failures.push(format!(
                        "{}: expected infeasible, got {:?}",
                        prob.name, report.status
                    ));
                }
            }
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    assert!(failures.is_empty(), "suite failures:\n{}", failures.join("\n"));
    assert!(elapsed < 60.0, "suite took {elapsed:.1}s, budget is 60s");
}

#[test]
fn embed_preserves_optimum() {
    // Complex eigenvalue SDP solved directly and through the public embedding.
    let mut p = ConicProgram::new();
    let t = p.add_var("t");
    let mut h = CMatrix::identity(2).scale(C64::new(2.0, 0.0));
    h[(0, 1)] = C64::new(0.0, 1.0);
    h[(1, 0)] = C64::new(0.0, -1.0);
    let coeff = CMatrix::identity(2).scale(C64::new(-1.0, 0.0));
    p.add_lmi(LmiBlock::new(h, vec![(t, coeff)]).unwrap());
    p.maximize(LinExpr::var(t));

    let opts = SolveOptions::default();
    let direct = p.solve(&opts);
    let embedded_prog = p.embed();
    assert!(
        embedded_prog.embed().lmis()[0].dim == embedded_prog.lmis()[0].dim,
        "real program must be an embed fixpoint"
    );
    let embedded = embedded_prog.solve(&opts);
    assert!(direct.is_optimal() && embedded.is_optimal());
    assert!(
        (direct.objective - embedded.objective).abs() < 1e-6,
        "{} vs {}",
        direct.objective,
        embedded.objective
    );
}

/// Random feasibility SDPs: build a random Hermitian-affine block that is PSD
/// at a known point, then assert the solver finds the problem feasible.
#[test]
fn random_feasibility_sdp_against_constructed_point() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for trial in 0..10 {
        let n = 3;
        let mut p = ConicProgram::new();
        let vars: Vec<_> = (0..3).map(|i| p.add_var(format!("v{i}"))).collect();
        // Random Hermitian coefficients.
        let mut rand_herm = |scale: f64| {
            let a = CMatrix::from_fn(n, n, |_, _| {
                C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5) * scale
            });
            (&a + &a.h()).scale(C64::new(0.5, 0.0))
        };
        let coeffs: Vec<CMatrix> = (0..3).map(|_| rand_herm(1.0)).collect();
        // Feasible point x0: block(x0) = I + Σ x0_i C_i - shift chosen PSD.
        let x0: Vec<f64> = (0..3).map(|_| rng.gen::<f64>() - 0.5).collect();
        let mut at_x0 = CMatrix::identity(n);
        for (c, x) in coeffs.iter().zip(&x0) {
            at_x0 = &at_x0 + &c.scale(C64::new(*x, 0.0));
        }
        // Make the constant part I - Σ x0 C_i + margin so block(x0) = I.
        let mut cst = CMatrix::identity(n);
        for (c, x) in coeffs.iter().zip(&x0) {
            cst = &cst - &c.scale(C64::new(*x, 0.0));
        }
        let terms: Vec<_> = vars.iter().copied().zip(coeffs.iter().cloned()).collect();
        p.add_lmi(LmiBlock::new(cst, terms).unwrap());
        // Keep variables bounded so the maximization is finite.
        for (v, x) in vars.iter().zip(&x0) {
            p.add_lower_bound(*v, x - 2.0);
            p.add_upper_bound(*v, x + 2.0);
        }
        p.maximize(LinExpr::var(vars[0]));
        let report = p.solve(&SolveOptions::default());
        assert!(
            report.is_optimal(),
            "trial {trial}: expected feasible/optimal, got {:?} ({})",
            report.status,
            report.diagnostics
        );
    }
}

/// Adding a constraint never improves the optimum.
#[test]
fn monotone_restriction() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for trial in 0..8 {
        let mut p = ConicProgram::new();
        let x = p.add_var("x");
        let y = p.add_var("y");
        let r = 1.0 + rng.gen::<f64>();
        p.add_soc(LinExpr::constant(r), vec![LinExpr::var(x), LinExpr::var(y)]);
        let c1 = rng.gen::<f64>() + 0.2;
        let c2 = rng.gen::<f64>() + 0.2;
        p.maximize(LinExpr::term(x, c1).plus(&LinExpr::term(y, c2)));
        let base = p.solve(&SolveOptions::default());
        assert!(base.is_optimal());
        // Restrict with a random halfspace through a feasible region.
        let cut = 0.2 + 0.5 * rng.gen::<f64>();
        p.add_upper_bound(x, cut * r);
        let restricted = p.solve(&SolveOptions::default());
        assert!(restricted.is_optimal(), "trial {trial}");
        assert!(
            restricted.objective <= base.objective + 1e-7,
            "trial {trial}: restriction improved optimum: {} > {}",
            restricted.objective,
            base.objective
        );
    }
}

/// Gram-constructed PSD oracle: X^H X is PSD, so an LMI requiring it minus a
/// small shift stays feasible; requiring more than its max eigenvalue flips
/// to infeasible.
#[test]
fn lmi_feasibility_matches_eigen_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let n = 3;
    let x = CMatrix::from_fn(n, n, |_, _| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
    let gram = x.h().matmul(&x);
    let (max_eig, _) = gram.max_eigpair().unwrap();
    // max t s.t. gram - t I ⪰ 0 → min eigenvalue; check against eigh.
    let mut p = ConicProgram::new();
    let t = p.add_var("t");
    p.add_lmi(
        LmiBlock::new(
            gram.clone(),
            vec![(t, CMatrix::identity(n).scale(C64::new(-1.0, 0.0)))],
        )
        .unwrap(),
    );
    p.maximize(LinExpr::var(t));
    let report = p.solve(&SolveOptions::default());
    let (evals, _) = gram.eigh().unwrap();
    assert!(report.is_optimal());
    assert!(
        (report.objective - evals[0]).abs() < 1e-6 * (1.0 + max_eig),
        "solver {} vs eig oracle {}",
        report.objective,
        evals[0]
    );
}

/// The sampling identity used everywhere downstream: a solved LMI evaluates
/// PSD at the returned point (within certificate tolerance).
#[test]
fn solution_certificates_hold() {
    for prob in regression_suite() {
        if matches!(prob.expected, Expected::Infeasible) {
            continue;
        }
        let report = prob.program.solve(&SolveOptions::default());
        assert!(report.is_optimal(), "{} not optimal", prob.name);
        let a = report.assignment.as_ref().unwrap();
        let violations = mfris_core::conic::verify_solution(&prob.program, a, 1e-7);
        assert!(
            violations.is_empty(),
            "{}: violations {:?}",
            prob.name,
            violations
        );
    }
}

#[test]
fn dump_round_trip_solves_identically() {
    for prob in regression_suite().into_iter().take(6) {
        let text = mfris_core::conic::dump_program(&prob.program);
        let parsed = mfris_core::conic::parse_program(&text).unwrap();
        let a = prob.program.solve(&SolveOptions::default());
        let b = parsed.solve(&SolveOptions::default());
        assert_eq!(a.status, b.status, "{}", prob.name);
        if a.is_optimal() {
            assert!((a.objective - b.objective).abs() < 1e-9);
        }
    }
}

#[test]
fn deterministic_given_identical_input() {
    let prob = &regression_suite()[24];
    let r1 = prob.program.solve(&SolveOptions::default());
    let r2 = prob.program.solve(&SolveOptions::default());
    assert_eq!(r1.objective.to_bits(), r2.objective.to_bits());
    let (a1, a2) = (r1.assignment.unwrap(), r2.assignment.unwrap());
    assert_eq!(a1.len(), a2.len());
    for (u, v) in a1.iter().zip(&a2) {
        assert_eq!(u.to_bits(), v.to_bits());
    }
}

#[test]
fn max_eigpair_residual_is_small_on_solver_matrices() {
    // Spot check used by rank-one extraction downstream.
    let v = CVector::from_vec(vec![
        C64::new(1.0, 0.5),
        C64::new(-0.3, 0.2),
        C64::new(0.0, -1.1),
    ]);
    let m = v.outer(&v);
    let (val, vec) = m.max_eigpair().unwrap();
    assert!((val - v.norm_sqr()).abs() < 1e-10);
    assert!((vec.dot(&v).norm() - v.norm()).abs() < 1e-8);
}
