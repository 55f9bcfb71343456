//! Language-neutral conic-program container with a bundled primal-dual
//! interior-point backend.
//!
//! A [`ConicProgram`] holds real scalar variables and four constraint
//! families: linear equalities/inequalities, second-order cones, exponential
//! upper bounds `x ≥ e^y`, and Hermitian-affine LMI blocks. The objective is
//! a linear functional to maximize.
//!
//! The backend works over (linear, SOC, PSD) cones with Nesterov-Todd
//! scaling. Exponential constraints are compiled to a documented
//! piecewise-SOC chain (see [`ExpApprox`]) whose value upper-bounds `e^y`, so
//! feasibility of the compiled program implies feasibility of the original
//! constraint. Hermitian blocks are lowered through the real embedding of
//! [`crate::linalg::CMatrix::complex_to_real`].

pub mod cx;
mod dump;
mod ipm;
mod lower;
pub mod suite;
mod verify;

pub use dump::{dump_program, parse_program};
pub use verify::{verify_solution, Violation};

use crate::linalg::{CMatrix, LinalgError};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConicError {
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("variable {0:?} does not belong to this program")]
    ForeignVar(VarId),
    #[error("LMI coefficient not Hermitian: {0}")]
    NotHermitian(#[from] LinalgError),
    #[error("malformed program dump: {0}")]
    ParseError(String),
}

/// Handle to a real scalar decision variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub(crate) usize);

/// Real affine expression `constant + Σ coeff·var`.
#[derive(Debug, Clone, Default)]
pub struct LinExpr {
    pub constant: f64,
    pub terms: Vec<(VarId, f64)>,
}

impl LinExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self { constant: c, terms: Vec::new() }
    }

    pub fn var(v: VarId) -> Self {
        Self { constant: 0.0, terms: vec![(v, 1.0)] }
    }

    pub fn term(v: VarId, coeff: f64) -> Self {
        Self { constant: 0.0, terms: vec![(v, coeff)] }
    }

    pub fn push(&mut self, v: VarId, coeff: f64) -> &mut Self {
        if coeff != 0.0 {
            self.terms.push((v, coeff));
        }
        self
    }

    pub fn add_expr(&mut self, other: &LinExpr, scale: f64) -> &mut Self {
        self.constant += other.constant * scale;
        for &(v, c) in &other.terms {
            self.push(v, c * scale);
        }
        self
    }

    pub fn plus(&self, other: &LinExpr) -> LinExpr {
        let mut out = self.clone();
        out.add_expr(other, 1.0);
        out
    }

    pub fn minus(&self, other: &LinExpr) -> LinExpr {
        let mut out = self.clone();
        out.add_expr(other, -1.0);
        out
    }

    pub fn scaled(&self, s: f64) -> LinExpr {
        LinExpr {
            constant: self.constant * s,
            terms: self.terms.iter().map(|&(v, c)| (v, c * s)).collect(),
        }
    }

    pub fn shifted(&self, c: f64) -> LinExpr {
        let mut out = self.clone();
        out.constant += c;
        out
    }

    /// Merge duplicate variable terms in place.
    pub fn normalize(&mut self) {
        self.terms.sort_by_key(|&(v, _)| v);
        let mut out: Vec<(VarId, f64)> = Vec::with_capacity(self.terms.len());
        for &(v, c) in &self.terms {
            if let Some(last) = out.last_mut() {
                if last.0 == v {
                    last.1 += c;
                    continue;
                }
            }
            out.push((v, c));
        }
        out.retain(|&(_, c)| c != 0.0);
        self.terms = out;
    }

    pub fn eval(&self, assignment: &[f64]) -> f64 {
        self.constant
            + self
                .terms
                .iter()
                .map(|&(v, c)| c * assignment[v.0])
                .sum::<f64>()
    }

    fn max_var(&self) -> Option<usize> {
        self.terms.iter().map(|&(v, _)| v.0).max()
    }
}

/// Hermitian-affine matrix block `constant + Σ var·coeff` required PSD.
#[derive(Debug, Clone)]
pub struct LmiBlock {
    pub dim: usize,
    pub constant: CMatrix,
    pub terms: Vec<(VarId, CMatrix)>,
}

impl LmiBlock {
    /// Builds the block, symmetrizing each coefficient; rejects matrices with
    /// Hermitian drift beyond the kernel tolerance or mismatched dims.
    pub fn new(
        constant: CMatrix,
        terms: Vec<(VarId, CMatrix)>,
    ) -> Result<Self, ConicError> {
        let dim = constant.rows;
        let constant = constant.hermitianize()?;
        let mut out_terms = Vec::with_capacity(terms.len());
        for (v, m) in terms {
            if m.rows != dim || m.cols != dim {
                return Err(ConicError::DimMismatch(format!(
                    "LMI coefficient {}x{} in a {dim}-block",
                    m.rows, m.cols
                )));
            }
            out_terms.push((v, m.hermitianize()?));
        }
        Ok(Self { dim, constant, terms: out_terms })
    }

    /// True when every coefficient has (numerically) zero imaginary part.
    pub fn is_real(&self) -> bool {
        let real = |m: &CMatrix| {
            m.data().iter().all(|c| c.im.abs() <= 1e-14 * (1.0 + c.re.abs()))
        };
        real(&self.constant) && self.terms.iter().all(|(_, m)| real(m))
    }

    /// Evaluate the affine block at an assignment.
    pub fn eval(&self, assignment: &[f64]) -> CMatrix {
        let mut m = self.constant.clone();
        for (v, coeff) in &self.terms {
            let x = assignment[v.0];
            if x != 0.0 {
                m = &m + &coeff.scale(crate::linalg::C64::new(x, 0.0));
            }
        }
        m
    }
}

/// Second-order cone constraint `‖tail‖₂ ≤ head`.
#[derive(Debug, Clone)]
pub struct SocConstraint {
    pub head: LinExpr,
    pub tail: Vec<LinExpr>,
}

/// Piecewise compilation parameters for `x ≥ e^y`.
///
/// The lowering restricts `y` to the trust window
/// `[center−halfwidth, center+halfwidth]` and covers it with `segments`
/// chord (secant) cuts of the exponential: on each grid interval
/// `[a, a+h]` the row
///
/// ```text
/// x ≥ e^a + (e^{a+h} − e^a)/h · (y − a)
/// ```
///
/// majorizes `e^y` inside its interval (convexity) and falls below it
/// outside, so the binding cut is always the local one and the compiled
/// feasible set is contained in the true one intersected with the window.
/// Relative overestimate is at most `h²/8 ≈ (2·halfwidth/segments)²/8`;
/// the defaults keep it below ~1e-8. No auxiliary variables, no slack
/// amplification. Callers that iterate (SCA loops) should re-center the
/// window at the current expansion point each round.
#[derive(Debug, Clone, Copy)]
pub struct ExpApprox {
    pub center: f64,
    pub halfwidth: f64,
    pub segments: u32,
}

impl Default for ExpApprox {
    fn default() -> Self {
        Self::centered(0.0, 8.0)
    }
}

impl ExpApprox {
    /// Window placement with segment count sized for ~2e-9 relative error
    /// (capped at 60k rows).
    pub fn centered(center: f64, halfwidth: f64) -> Self {
        let h = (8.0 * 2e-9f64).sqrt();
        let segments = ((2.0 * halfwidth / h).ceil() as u32).clamp(8, 60_000);
        Self { center, halfwidth, segments }
    }
}

/// Exponential upper-bound constraint `x ≥ e^y`.
#[derive(Debug, Clone)]
pub struct ExpConstraint {
    pub x: LinExpr,
    pub y: LinExpr,
    pub approx: ExpApprox,
}

/// Abstract conic program: maximize a linear functional subject to linear,
/// SOC, exponential, and Hermitian-PSD constraints.
#[derive(Debug, Clone, Default)]
pub struct ConicProgram {
    pub(crate) nvars: usize,
    pub(crate) names: Vec<String>,
    pub(crate) objective: LinExpr,
    pub(crate) eqs: Vec<LinExpr>,
    pub(crate) ineqs: Vec<LinExpr>,
    pub(crate) socs: Vec<SocConstraint>,
    pub(crate) exps: Vec<ExpConstraint>,
    pub(crate) lmis: Vec<LmiBlock>,
}

impl ConicProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>) -> VarId {
        self.names.push(name.into());
        self.nvars += 1;
        VarId(self.nvars - 1)
    }

    pub fn add_vars(&mut self, prefix: &str, count: usize) -> Vec<VarId> {
        (0..count).map(|i| self.add_var(format!("{prefix}{i}"))).collect()
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn var_name(&self, v: VarId) -> &str {
        &self.names[v.0]
    }

    pub fn lmis(&self) -> &[LmiBlock] {
        &self.lmis
    }

    pub fn socs(&self) -> &[SocConstraint] {
        &self.socs
    }

    pub fn exps(&self) -> &[ExpConstraint] {
        &self.exps
    }

    pub fn constraint_counts(&self) -> (usize, usize, usize, usize, usize) {
        (self.eqs.len(), self.ineqs.len(), self.socs.len(), self.exps.len(), self.lmis.len())
    }

    /// Objective, to be maximized.
    pub fn maximize(&mut self, expr: LinExpr) {
        self.objective = expr;
    }

    /// `expr == 0`.
    pub fn add_eq(&mut self, mut expr: LinExpr) {
        expr.normalize();
        self.check(&expr);
        self.eqs.push(expr);
    }

    /// `expr >= 0`.
    pub fn add_ineq(&mut self, mut expr: LinExpr) {
        expr.normalize();
        self.check(&expr);
        self.ineqs.push(expr);
    }

    pub fn add_lower_bound(&mut self, v: VarId, lo: f64) {
        self.add_ineq(LinExpr::var(v).shifted(-lo));
    }

    pub fn add_upper_bound(&mut self, v: VarId, hi: f64) {
        self.add_ineq(LinExpr::constant(hi).minus(&LinExpr::var(v)));
    }

    /// `‖tail‖ ≤ head`.
    pub fn add_soc(&mut self, mut head: LinExpr, mut tail: Vec<LinExpr>) {
        head.normalize();
        self.check(&head);
        for t in &mut tail {
            t.normalize();
            self.check(t);
        }
        self.socs.push(SocConstraint { head, tail });
    }

    /// Rotated-cone helper: `2·u·v ≥ ‖w‖²` with `u, v ≥ 0`, encoded as the
    /// standard cone `‖(u - v, √2·w...)‖ ≤ u + v`.
    pub fn add_rotated_soc(&mut self, u: LinExpr, v: LinExpr, w: Vec<LinExpr>) {
        let head = u.plus(&v);
        let mut tail = vec![u.minus(&v)];
        let s2 = std::f64::consts::SQRT_2;
        tail.extend(w.into_iter().map(|e| e.scaled(s2)));
        self.add_soc(head, tail);
    }

    /// Convex quadratic helper: `q ≥ ‖w‖²`.
    pub fn add_quad_upper(&mut self, q: LinExpr, w: Vec<LinExpr>) {
        self.add_rotated_soc(q, LinExpr::constant(0.5), w);
    }

    /// `x ≥ e^y` through the piecewise-SOC chain.
    pub fn add_exp(&mut self, x: LinExpr, y: LinExpr, approx: ExpApprox) {
        self.check(&x);
        self.check(&y);
        self.exps.push(ExpConstraint { x, y, approx });
    }

    /// Hermitian-affine `block ⪰ 0`.
    pub fn add_lmi(&mut self, block: LmiBlock) {
        for (v, _) in &block.terms {
            assert!(v.0 < self.nvars, "LMI references undeclared variable");
        }
        self.lmis.push(block);
    }

    fn check(&self, e: &LinExpr) {
        if let Some(max) = e.max_var() {
            assert!(max < self.nvars, "expression references undeclared variable");
        }
    }

    /// Replace every complex Hermitian block by its real symmetric embedding.
    /// Blocks that are already real are left untouched, so a pure-real
    /// program is a fixpoint. The optimum is preserved exactly.
    pub fn embed(&self) -> ConicProgram {
        let mut out = self.clone();
        out.lmis = self
            .lmis
            .iter()
            .map(|blk| {
                if blk.is_real() {
                    blk.clone()
                } else {
                    let to_real = |m: &CMatrix| {
                        let arr = m.complex_to_real().expect("hermitian checked at insertion");
                        CMatrix::from_fn(2 * m.rows, 2 * m.cols, |i, j| {
                            crate::linalg::C64::new(arr[(i, j)], 0.0)
                        })
                    };
                    LmiBlock {
                        dim: 2 * blk.dim,
                        constant: to_real(&blk.constant),
                        terms: blk.terms.iter().map(|(v, m)| (*v, to_real(m))).collect(),
                    }
                }
            })
            .collect();
        out
    }

    /// Solve with the bundled interior-point backend.
    pub fn solve(&self, opts: &SolveOptions) -> SolveReport {
        let started = Instant::now();
        let lowered = lower::lower(self);
        let mut report = ipm::solve_lowered(&lowered, opts);
        report.wall_time_s = started.elapsed().as_secs_f64();
        if let Some(assignment) = &report.assignment {
            let violations = verify::verify_solution(self, assignment, opts.verify_tol);
            if !violations.is_empty() {
                let worst = violations
                    .iter()
                    .map(|v| v.amount)
                    .fold(0.0f64, f64::max);
                if worst > opts.verify_tol * 100.0 {
                    report.status = SolveStatus::NumericalFailure;
                    report.diagnostics = format!(
                        "certificate check failed: {} violations, worst {:.3e}",
                        violations.len(),
                        worst
                    );
                    report.assignment = None;
                } else {
                    report.diagnostics = format!(
                        "certificate check: {} soft violations, worst {:.3e}",
                        violations.len(),
                        worst
                    );
                }
            }
        }
        report
    }
}

/// Backend options.
#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub max_iter: usize,
    /// Relative duality-gap / residual target in the equilibrated problem.
    pub tol: f64,
    /// Infeasibility certificate tolerance.
    pub infeas_tol: f64,
    /// Post-solve certificate tolerance (per-constraint, unscaled).
    pub verify_tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { max_iter: 200, tol: 1e-9, infeas_tol: 1e-10, verify_tol: 1e-7 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    MaxIter,
    NumericalFailure,
}

/// Solver output. `assignment` is present iff the status is `Optimal`.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub status: SolveStatus,
    /// Value of the maximized objective (when optimal).
    pub objective: f64,
    pub assignment: Option<Vec<f64>>,
    pub iterations: usize,
    pub wall_time_s: f64,
    pub diagnostics: String,
}

impl SolveReport {
    pub fn value(&self, v: VarId) -> f64 {
        self.assignment
            .as_ref()
            .map(|a| a[v.0])
            .expect("value() requires an optimal report")
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}
