//! Bundled regression suite: 25 analytic conic problems with closed-form
//! optima, spanning linear, SOC, exponential, and PSD blocks (real and
//! complex). Used by the crate's own tests and by the acceptance harness.

use super::{ConicProgram, ExpApprox, LinExpr, LmiBlock};
use crate::linalg::{C64, CMatrix};

/// Expected outcome of a suite problem.
#[derive(Debug, Clone, Copy)]
pub enum Expected {
    Optimal(f64),
    Infeasible,
}

pub struct SuiteProblem {
    pub name: &'static str,
    pub program: ConicProgram,
    pub expected: Expected,
}

fn diag_lmi_var_shift(a: &[f64]) -> (ConicProgram, f64) {
    // max t s.t. A - tI ⪰ 0 for diagonal A: optimum = min(a).
    let mut p = ConicProgram::new();
    let t = p.add_var("t");
    let n = a.len();
    let cst = CMatrix::diag_real(a);
    let coeff = CMatrix::identity(n).scale(C64::new(-1.0, 0.0));
    p.add_lmi(LmiBlock::new(cst, vec![(t, coeff)]).unwrap());
    p.maximize(LinExpr::var(t));
    let min = a.iter().copied().fold(f64::INFINITY, f64::min);
    (p, min)
}

/// Build all 25 problems.
pub fn regression_suite() -> Vec<SuiteProblem> {
    let mut suite = Vec::new();
    let mut push = |name: &'static str, program: ConicProgram, expected: Expected| {
        suite.push(SuiteProblem { name, program, expected });
    };

    // --- linear -----------------------------------------------------------
    {
        // 1. max -x s.t. x ≥ 1  →  -1
        let mut p = ConicProgram::new();
        let x = p.add_var("x");
        p.add_lower_bound(x, 1.0);
        p.maximize(LinExpr::term(x, -1.0));
        push("lp_single_bound", p, Expected::Optimal(-1.0));
    }
    {
        // 2. x ≥ 1 and x ≤ 0: infeasible
        let mut p = ConicProgram::new();
        let x = p.add_var("x");
        p.add_lower_bound(x, 1.0);
        p.add_upper_bound(x, 0.0);
        p.maximize(LinExpr::var(x));
        push("lp_infeasible_pair", p, Expected::Infeasible);
    }
    {
        // 3. max x+y, x ≤ 2, y ≤ 3 → 5
        let mut p = ConicProgram::new();
        let x = p.add_var("x");
        let y = p.add_var("y");
        p.add_upper_bound(x, 2.0);
        p.add_upper_bound(y, 3.0);
        p.maximize(LinExpr::var(x).plus(&LinExpr::var(y)));
        push("lp_box_corner", p, Expected::Optimal(5.0));
    }
    {
        // 4. max 3x+2y, x+y ≤ 4, x ≤ 2, x,y ≥ 0 → 10
        let mut p = ConicProgram::new();
        let x = p.add_var("x");
        let y = p.add_var("y");
        p.add_ineq(LinExpr::constant(4.0).minus(&LinExpr::var(x)).minus(&LinExpr::var(y)));
        p.add_upper_bound(x, 2.0);
        p.add_lower_bound(x, 0.0);
        p.add_lower_bound(y, 0.0);
        p.maximize(LinExpr::term(x, 3.0).plus(&LinExpr::term(y, 2.0)));
        push("lp_vertex", p, Expected::Optimal(10.0));
    }
    {
        // 5. max x s.t. x + y = 3, y ≥ 1 → 2
        let mut p = ConicProgram::new();
        let x = p.add_var("x");
        let y = p.add_var("y");
        p.add_eq(LinExpr::var(x).plus(&LinExpr::var(y)).shifted(-3.0));
        p.add_lower_bound(y, 1.0);
        p.maximize(LinExpr::var(x));
        push("lp_equality", p, Expected::Optimal(2.0));
    }
    {
        // 6. max -(x+y), x ≥ 1, y ≥ 2, x+y ≥ 4 → -4
        let mut p = ConicProgram::new();
        let x = p.add_var("x");
        let y = p.add_var("y");
        p.add_lower_bound(x, 1.0);
        p.add_lower_bound(y, 2.0);
        p.add_ineq(LinExpr::var(x).plus(&LinExpr::var(y)).shifted(-4.0));
        p.maximize(LinExpr::var(x).plus(&LinExpr::var(y)).scaled(-1.0));
        push("lp_redundant_active", p, Expected::Optimal(-4.0));
    }

    // --- second-order cones -------------------------------------------------
    {
        // 7. min x s.t. ‖(3,4)‖ ≤ x → 5
        let mut p = ConicProgram::new();
        let x = p.add_var("x");
        p.add_soc(LinExpr::var(x), vec![LinExpr::constant(3.0), LinExpr::constant(4.0)]);
        p.maximize(LinExpr::term(x, -1.0));
        push("soc_norm_const", p, Expected::Optimal(-5.0));
    }
    {
        // 8. distance from (0,0) to point (1,2): min t, ‖(x-1, y-2)‖ ≤ t, x=y=0 → √5
        let mut p = ConicProgram::new();
        let t = p.add_var("t");
        let x = p.add_var("x");
        let y = p.add_var("y");
        p.add_eq(LinExpr::var(x));
        p.add_eq(LinExpr::var(y));
        p.add_soc(
            LinExpr::var(t),
            vec![LinExpr::var(x).shifted(-1.0), LinExpr::var(y).shifted(-2.0)],
        );
        p.maximize(LinExpr::term(t, -1.0));
        push("soc_distance", p, Expected::Optimal(-(5.0f64.sqrt())));
    }
    {
        // 9. max x+y over unit disk → √2
        let mut p = ConicProgram::new();
        let x = p.add_var("x");
        let y = p.add_var("y");
        p.add_soc(LinExpr::constant(1.0), vec![LinExpr::var(x), LinExpr::var(y)]);
        p.maximize(LinExpr::var(x).plus(&LinExpr::var(y)));
        push("soc_disk_support", p, Expected::Optimal(std::f64::consts::SQRT_2));
    }
    {
        // 10. min q s.t. q ≥ ‖(1,2)‖² → 5
        let mut p = ConicProgram::new();
        let q = p.add_var("q");
        p.add_quad_upper(LinExpr::var(q), vec![LinExpr::constant(1.0), LinExpr::constant(2.0)]);
        p.maximize(LinExpr::term(q, -1.0));
        push("soc_rotated_quad", p, Expected::Optimal(-5.0));
    }
    {
        // 11. min t s.t. |x-3| ≤ t, x ≤ 1 → 2
        let mut p = ConicProgram::new();
        let t = p.add_var("t");
        let x = p.add_var("x");
        p.add_soc(LinExpr::var(t), vec![LinExpr::var(x).shifted(-3.0)]);
        p.add_upper_bound(x, 1.0);
        p.maximize(LinExpr::term(t, -1.0));
        push("soc_abs", p, Expected::Optimal(-2.0));
    }
    {
        // 12. max x + 2y over unit disk → √5
        let mut p = ConicProgram::new();
        let x = p.add_var("x");
        let y = p.add_var("y");
        p.add_soc(LinExpr::constant(1.0), vec![LinExpr::var(x), LinExpr::var(y)]);
        p.maximize(LinExpr::var(x).plus(&LinExpr::term(y, 2.0)));
        push("soc_support_weighted", p, Expected::Optimal(5.0f64.sqrt()));
    }

    // --- exponential (piecewise-SOC) ----------------------------------------
    {
        // 13. min x s.t. x ≥ e¹ → e
        let mut p = ConicProgram::new();
        let x = p.add_var("x");
        p.add_exp(LinExpr::var(x), LinExpr::constant(1.0), ExpApprox::centered(1.0, 1.0));
        p.maximize(LinExpr::term(x, -1.0));
        push("exp_point_e1", p, Expected::Optimal(-std::f64::consts::E));
    }
    {
        // 14. max y s.t. e^y ≤ 5 → ln 5
        let mut p = ConicProgram::new();
        let y = p.add_var("y");
        p.add_exp(LinExpr::constant(5.0), LinExpr::var(y), ExpApprox::centered(5f64.ln(), 1.0));
        p.maximize(LinExpr::var(y));
        push("exp_log_bound", p, Expected::Optimal(5f64.ln()));
    }
    {
        // 15. min x1 + x2 s.t. x1 ≥ e^1, x2 ≥ e^(-2) → e + e⁻²
        let mut p = ConicProgram::new();
        let x1 = p.add_var("x1");
        let x2 = p.add_var("x2");
        p.add_exp(LinExpr::var(x1), LinExpr::constant(1.0), ExpApprox::centered(1.0, 1.0));
        p.add_exp(LinExpr::var(x2), LinExpr::constant(-2.0), ExpApprox::centered(-2.0, 1.0));
        p.maximize(LinExpr::var(x1).plus(&LinExpr::var(x2)).scaled(-1.0));
        push(
            "exp_two_points",
            p,
            Expected::Optimal(-(std::f64::consts::E + (-2.0f64).exp())),
        );
    }
    {
        // 16. min x s.t. x ≥ e^y, y ≥ 2.5 → e^2.5
        let mut p = ConicProgram::new();
        let x = p.add_var("x");
        let y = p.add_var("y");
        p.add_lower_bound(y, 2.5);
        p.add_exp(LinExpr::var(x), LinExpr::var(y), ExpApprox::centered(2.5, 1.0));
        p.maximize(LinExpr::term(x, -1.0));
        push("exp_variable_arg", p, Expected::Optimal(-(2.5f64.exp())));
    }

    // --- PSD, real ----------------------------------------------------------
    {
        // 17. max t s.t. diag(1,2) - tI ⪰ 0 → 1
        let (p, v) = diag_lmi_var_shift(&[1.0, 2.0]);
        push("sdp_eig_diag", p, Expected::Optimal(v));
    }
    {
        // 18. max t s.t. [[2,1],[1,2]] - tI ⪰ 0 → λmin = 1
        let mut p = ConicProgram::new();
        let t = p.add_var("t");
        let a = CMatrix::from_real_rows(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let coeff = CMatrix::identity(2).scale(C64::new(-1.0, 0.0));
        p.add_lmi(LmiBlock::new(a, vec![(t, coeff)]).unwrap());
        p.maximize(LinExpr::var(t));
        push("sdp_eig_dense", p, Expected::Optimal(1.0));
    }
    {
        // 19. min x s.t. [[x,1],[1,x]] ⪰ 0 → 1
        let mut p = ConicProgram::new();
        let x = p.add_var("x");
        let mut cst = CMatrix::zeros(2, 2);
        cst[(0, 1)] = C64::new(1.0, 0.0);
        cst[(1, 0)] = C64::new(1.0, 0.0);
        p.add_lmi(LmiBlock::new(cst, vec![(x, CMatrix::identity(2))]).unwrap());
        p.maximize(LinExpr::term(x, -1.0));
        push("sdp_offdiag_floor", p, Expected::Optimal(-1.0));
    }
    {
        // 20. max x s.t. [[1,x],[x,4]] ⪰ 0 → 2
        let mut p = ConicProgram::new();
        let x = p.add_var("x");
        let cst = CMatrix::diag_real(&[1.0, 4.0]);
        let mut coeff = CMatrix::zeros(2, 2);
        coeff[(0, 1)] = C64::new(1.0, 0.0);
        coeff[(1, 0)] = C64::new(1.0, 0.0);
        p.add_lmi(LmiBlock::new(cst, vec![(x, coeff)]).unwrap());
        p.maximize(LinExpr::var(x));
        push("sdp_completion", p, Expected::Optimal(2.0));
    }
    {
        // 21. max Tr(CX), Tr(X)=1, X ⪰ 0, C=[[1,2],[2,1]] → λmax = 3
        let mut p = ConicProgram::new();
        let x11 = p.add_var("x11");
        let x22 = p.add_var("x22");
        let x12 = p.add_var("x12");
        let mut e11 = CMatrix::zeros(2, 2);
        e11[(0, 0)] = C64::new(1.0, 0.0);
        let mut e22 = CMatrix::zeros(2, 2);
        e22[(1, 1)] = C64::new(1.0, 0.0);
        let mut e12 = CMatrix::zeros(2, 2);
        e12[(0, 1)] = C64::new(1.0, 0.0);
        e12[(1, 0)] = C64::new(1.0, 0.0);
        p.add_lmi(
            LmiBlock::new(
                CMatrix::zeros(2, 2),
                vec![(x11, e11), (x22, e22), (x12, e12)],
            )
            .unwrap(),
        );
        p.add_eq(LinExpr::var(x11).plus(&LinExpr::var(x22)).shifted(-1.0));
        p.maximize(
            LinExpr::var(x11)
                .plus(&LinExpr::var(x22))
                .plus(&LinExpr::term(x12, 4.0)),
        );
        push("sdp_max_eig_variational", p, Expected::Optimal(3.0));
    }
    {
        // 22. infeasible LMI: [[-1-x]] ⪰ 0 with x ≥ 0
        let mut p = ConicProgram::new();
        let x = p.add_var("x");
        p.add_lower_bound(x, 0.0);
        let cst = CMatrix::diag_real(&[-1.0]);
        let coeff = CMatrix::diag_real(&[-1.0]);
        p.add_lmi(LmiBlock::new(cst, vec![(x, coeff)]).unwrap());
        p.maximize(LinExpr::term(x, -1.0));
        push("sdp_infeasible", p, Expected::Infeasible);
    }

    // --- PSD, complex -------------------------------------------------------
    {
        // 23. max t s.t. [[2, i],[-i, 2]] - tI ⪰ 0 → λmin = 1
        let mut p = ConicProgram::new();
        let t = p.add_var("t");
        let mut h = CMatrix::identity(2).scale(C64::new(2.0, 0.0));
        h[(0, 1)] = C64::new(0.0, 1.0);
        h[(1, 0)] = C64::new(0.0, -1.0);
        let coeff = CMatrix::identity(2).scale(C64::new(-1.0, 0.0));
        p.add_lmi(LmiBlock::new(h, vec![(t, coeff)]).unwrap());
        p.maximize(LinExpr::var(t));
        push("sdp_complex_eig", p, Expected::Optimal(1.0));
    }
    {
        // 24. max t s.t. [[1, t·i],[-t·i, 1]] ⪰ 0 → 1 (eigenvalues 1 ± t)
        let mut p = ConicProgram::new();
        let t = p.add_var("t");
        let mut coeff = CMatrix::zeros(2, 2);
        coeff[(0, 1)] = C64::new(0.0, 1.0);
        coeff[(1, 0)] = C64::new(0.0, -1.0);
        p.add_lmi(LmiBlock::new(CMatrix::identity(2), vec![(t, coeff)]).unwrap());
        p.maximize(LinExpr::var(t));
        push("sdp_complex_offdiag", p, Expected::Optimal(1.0));
    }
    {
        // 25. mixed: max x+y, ‖(x,y)‖ ≤ 2, [[3-x, 0],[0, 3-y]] ⪰ 0, y ≤ 1
        //     → x on the circle: x = √3, y = 1 gives... binding: y ≤ 1,
        //     x ≤ √(4-1) = √3 → √3 + 1.
        let mut p = ConicProgram::new();
        let x = p.add_var("x");
        let y = p.add_var("y");
        p.add_soc(LinExpr::constant(2.0), vec![LinExpr::var(x), LinExpr::var(y)]);
        let cst = CMatrix::diag_real(&[3.0, 3.0]);
        let cx = CMatrix::diag_real(&[-1.0, 0.0]);
        let cy = CMatrix::diag_real(&[0.0, -1.0]);
        p.add_lmi(LmiBlock::new(cst, vec![(x, cx), (y, cy)]).unwrap());
        p.add_upper_bound(y, 1.0);
        p.maximize(LinExpr::var(x).plus(&LinExpr::var(y)));
        push("mixed_soc_sdp_lp", p, Expected::Optimal(3.0f64.sqrt() + 1.0));
    }

    assert_eq!(suite.len(), 25);
    suite
}
