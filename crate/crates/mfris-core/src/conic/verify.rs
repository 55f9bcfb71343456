//! Independent certificate check: walks the original constraint list at a
//! candidate assignment and reports violations. Used by `solve` on every
//! optimal report.

use super::ConicProgram;

#[derive(Debug, Clone)]
pub struct Violation {
    pub what: String,
    /// Violation normalized by the constraint's own magnitude scale.
    pub amount: f64,
}

/// Returns all constraint violations exceeding `tol` (relative to a
/// per-constraint scale `1 + |terms|`).
pub fn verify_solution(p: &ConicProgram, assignment: &[f64], tol: f64) -> Vec<Violation> {
    let mut out = Vec::new();
    let scale_of = |e: &super::LinExpr| -> f64 {
        1.0 + e.constant.abs()
            + e.terms
                .iter()
                .map(|&(v, c)| (c * assignment[v.0]).abs())
                .fold(0.0f64, f64::max)
    };
    for (i, e) in p.eqs.iter().enumerate() {
        let v = e.eval(assignment).abs() / scale_of(e);
        if v > tol {
            out.push(Violation { what: format!("eq[{i}]"), amount: v });
        }
    }
    for (i, e) in p.ineqs.iter().enumerate() {
        let v = -e.eval(assignment) / scale_of(e);
        if v > tol {
            out.push(Violation { what: format!("ineq[{i}]"), amount: v });
        }
    }
    for (i, soc) in p.socs.iter().enumerate() {
        let head = soc.head.eval(assignment);
        let tail: f64 = soc
            .tail
            .iter()
            .map(|t| t.eval(assignment).powi(2))
            .sum::<f64>()
            .sqrt();
        let scale = 1.0 + head.abs() + tail;
        let v = (tail - head) / scale;
        if v > tol {
            out.push(Violation { what: format!("soc[{i}]"), amount: v });
        }
    }
    for (i, exp) in p.exps.iter().enumerate() {
        let x = exp.x.eval(assignment);
        let ey = exp.y.eval(assignment).exp();
        let v = (ey - x) / (1.0 + x.abs() + ey);
        if v > tol {
            out.push(Violation { what: format!("exp[{i}]"), amount: v });
        }
    }
    for (i, lmi) in p.lmis.iter().enumerate() {
        let m = lmi.eval(assignment);
        let scale = 1.0 + m.max_abs();
        match m.min_eigenvalue() {
            Ok(min) => {
                let v = -min / scale;
                if v > tol {
                    out.push(Violation { what: format!("lmi[{i}]"), amount: v });
                }
            }
            Err(e) => out.push(Violation {
                what: format!("lmi[{i}] eig failure: {e}"),
                amount: f64::INFINITY,
            }),
        }
    }
    out
}
