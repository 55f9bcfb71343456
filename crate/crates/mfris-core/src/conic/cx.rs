//! Complex-affine expression machinery over real decision variables.
//!
//! Everything here is affine: a complex scalar/vector/matrix expression is a
//! constant plus per-variable complex coefficients. Products are only allowed
//! when at most one factor carries variables, which is exactly the structure
//! of the alternating subproblems (one side of every bilinear term is frozen
//! at the current iterate).

use super::{ConicProgram, LinExpr, LmiBlock, VarId};
use crate::linalg::{C64, CMatrix, CVector, C_ONE};
use std::collections::BTreeMap;

/// Complex scalar affine expression.
#[derive(Debug, Clone)]
pub struct CxExpr {
    pub re: LinExpr,
    pub im: LinExpr,
}

impl CxExpr {
    pub fn constant(c: C64) -> Self {
        Self { re: LinExpr::constant(c.re), im: LinExpr::constant(c.im) }
    }

    pub fn zero() -> Self {
        Self::constant(C64::new(0.0, 0.0))
    }

    pub fn from_pair(re: VarId, im: VarId) -> Self {
        Self { re: LinExpr::var(re), im: LinExpr::var(im) }
    }

    pub fn from_real(e: LinExpr) -> Self {
        Self { re: e, im: LinExpr::zero() }
    }

    pub fn conj(&self) -> Self {
        Self { re: self.re.clone(), im: self.im.scaled(-1.0) }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self { re: self.re.plus(&other.re), im: self.im.plus(&other.im) }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self { re: self.re.minus(&other.re), im: self.im.minus(&other.im) }
    }

    /// Multiply by a complex constant.
    pub fn scale(&self, c: C64) -> Self {
        Self {
            re: self.re.scaled(c.re).minus(&self.im.scaled(c.im)),
            im: self.re.scaled(c.im).plus(&self.im.scaled(c.re)),
        }
    }

    pub fn eval(&self, assignment: &[f64]) -> C64 {
        C64::new(self.re.eval(assignment), self.im.eval(assignment))
    }
}

/// Complex matrix affine expression: `cst + Σ var·coeff`.
#[derive(Debug, Clone)]
pub struct AffMat {
    pub rows: usize,
    pub cols: usize,
    pub cst: CMatrix,
    pub terms: BTreeMap<usize, CMatrix>,
}

impl AffMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, cst: CMatrix::zeros(rows, cols), terms: BTreeMap::new() }
    }

    pub fn constant(m: CMatrix) -> Self {
        Self { rows: m.rows, cols: m.cols, cst: m, terms: BTreeMap::new() }
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty()
    }

    /// Column vector from complex scalar expressions.
    pub fn col_from_exprs(entries: &[CxExpr]) -> Self {
        let n = entries.len();
        let mut out = Self::zeros(n, 1);
        for (i, e) in entries.iter().enumerate() {
            out.cst[(i, 0)] = C64::new(e.re.constant, e.im.constant);
            for &(v, c) in &e.re.terms {
                out.term_mut(v.0)[(i, 0)] += C64::new(c, 0.0);
            }
            for &(v, c) in &e.im.terms {
                out.term_mut(v.0)[(i, 0)] += C64::new(0.0, c);
            }
        }
        out
    }

    fn term_mut(&mut self, var: usize) -> &mut CMatrix {
        let (rows, cols) = (self.rows, self.cols);
        self.terms.entry(var).or_insert_with(|| CMatrix::zeros(rows, cols))
    }

    pub fn entry(&self, i: usize, j: usize) -> CxExpr {
        let mut re = LinExpr::constant(self.cst[(i, j)].re);
        let mut im = LinExpr::constant(self.cst[(i, j)].im);
        for (&v, m) in &self.terms {
            let c = m[(i, j)];
            re.push(VarId(v), c.re);
            im.push(VarId(v), c.im);
        }
        CxExpr { re, im }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        out.cst = &out.cst + &other.cst;
        for (&v, m) in &other.terms {
            let t = out.term_mut(v);
            *t = &*t + m;
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, c: C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            cst: self.cst.scale(c),
            terms: self.terms.iter().map(|(&v, m)| (v, m.scale(c))).collect(),
        }
    }

    /// Conjugate transpose; valid because variables are real.
    pub fn adjoint(&self) -> Self {
        Self {
            rows: self.cols,
            cols: self.rows,
            cst: self.cst.h(),
            terms: self.terms.iter().map(|(&v, m)| (v, m.h())).collect(),
        }
    }

    pub fn conj(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            cst: self.cst.conj(),
            terms: self.terms.iter().map(|(&v, m)| (v, m.conj())).collect(),
        }
    }

    pub fn transpose(&self) -> Self {
        Self {
            rows: self.cols,
            cols: self.rows,
            cst: self.cst.transpose(),
            terms: self.terms.iter().map(|(&v, m)| (v, m.transpose())).collect(),
        }
    }

    /// Constant-matrix product from the left: `c · self`.
    pub fn lmul(&self, c: &CMatrix) -> Self {
        Self {
            rows: c.rows,
            cols: self.cols,
            cst: c.matmul(&self.cst),
            terms: self.terms.iter().map(|(&v, m)| (v, c.matmul(m))).collect(),
        }
    }

    /// Constant-matrix product from the right: `self · c`.
    pub fn rmul(&self, c: &CMatrix) -> Self {
        Self {
            rows: self.rows,
            cols: c.cols,
            cst: self.cst.matmul(c),
            terms: self.terms.iter().map(|(&v, m)| (v, m.matmul(c))).collect(),
        }
    }

    /// Affine × affine product, requiring at least one constant factor.
    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "AffMat matmul: dim mismatch");
        assert!(
            self.is_constant() || other.is_constant(),
            "AffMat matmul: both factors carry variables (bilinear)"
        );
        if self.is_constant() {
            other.lmul(&self.cst)
        } else {
            self.rmul(&other.cst)
        }
    }

    /// Kronecker product, requiring at least one constant factor.
    pub fn kron(&self, other: &Self) -> Self {
        assert!(
            self.is_constant() || other.is_constant(),
            "AffMat kron: both factors carry variables (bilinear)"
        );
        let rows = self.rows * other.rows;
        let cols = self.cols * other.cols;
        let mut out = Self::zeros(rows, cols);
        out.cst = self.cst.kron(&other.cst);
        if self.is_constant() {
            for (&v, m) in &other.terms {
                out.terms.insert(v, self.cst.kron(m));
            }
        } else {
            for (&v, m) in &self.terms {
                out.terms.insert(v, m.kron(&other.cst));
            }
        }
        out
    }

    /// Column-stacking vectorization of the expression.
    pub fn vec(&self) -> Self {
        let len = self.rows * self.cols;
        Self {
            rows: len,
            cols: 1,
            cst: self.cst.vec().unvec(len, 1),
            terms: self
                .terms
                .iter()
                .map(|(&v, m)| (v, m.vec().unvec(len, 1)))
                .collect(),
        }
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, block: &AffMat) {
        self.cst.set_block(r0, c0, &block.cst);
        for (&v, m) in &block.terms {
            let full = self.term_mut(v);
            full.set_block(r0, c0, &(&full.block(r0, c0, m.rows, m.cols) + m));
        }
    }

    /// Real part of the trace as a real affine expression (the imaginary part
    /// must vanish structurally for Hermitian-intended uses).
    pub fn re_trace(&self) -> LinExpr {
        assert_eq!(self.rows, self.cols);
        let mut e = LinExpr::constant(self.cst.trace().re);
        for (&v, m) in &self.terms {
            e.push(VarId(v), m.trace().re);
        }
        e
    }

    pub fn eval(&self, assignment: &[f64]) -> CMatrix {
        let mut m = self.cst.clone();
        for (&v, coeff) in &self.terms {
            let x = assignment[v];
            if x != 0.0 {
                m = &m + &coeff.scale(C64::new(x, 0.0));
            }
        }
        m
    }

    /// Convert a Hermitian-affine square expression into an LMI block.
    pub fn into_lmi(self) -> LmiBlock {
        assert_eq!(self.rows, self.cols, "LMI block must be square");
        LmiBlock::new(
            self.cst,
            self.terms
                .into_iter()
                .map(|(v, m)| (VarId(v), m))
                .collect(),
        )
        .expect("builder produced a non-Hermitian LMI block")
    }
}

/// Complex vector decision variable: interleaved (re, im) scalars.
#[derive(Debug, Clone)]
pub struct CxVecVar {
    pub res: Vec<VarId>,
    pub ims: Vec<VarId>,
}

impl CxVecVar {
    pub fn new(prog: &mut ConicProgram, prefix: &str, len: usize) -> Self {
        let res = (0..len).map(|i| prog.add_var(format!("{prefix}[{i}].re"))).collect();
        let ims = (0..len).map(|i| prog.add_var(format!("{prefix}[{i}].im"))).collect();
        Self { res, ims }
    }

    pub fn len(&self) -> usize {
        self.res.len()
    }

    pub fn is_empty(&self) -> bool {
        self.res.is_empty()
    }

    pub fn entry(&self, i: usize) -> CxExpr {
        CxExpr::from_pair(self.res[i], self.ims[i])
    }

    /// Column AffMat view (n×1).
    pub fn as_col(&self) -> AffMat {
        let n = self.len();
        let mut out = AffMat::zeros(n, 1);
        for i in 0..n {
            out.term_mut(self.res[i].0)[(i, 0)] = C_ONE;
            out.term_mut(self.ims[i].0)[(i, 0)] = C64::new(0.0, 1.0);
        }
        out
    }

    /// Squared-norm upper bound `‖v‖² ≤ bound` as one rotated cone.
    pub fn norm_sq_upper(&self, prog: &mut ConicProgram, bound: LinExpr) {
        let mut tail = Vec::with_capacity(2 * self.len());
        for i in 0..self.len() {
            tail.push(LinExpr::var(self.res[i]));
            tail.push(LinExpr::var(self.ims[i]));
        }
        prog.add_quad_upper(bound, tail);
    }

    pub fn value(&self, assignment: &[f64]) -> CVector {
        CVector::from_fn(self.len(), |i| {
            C64::new(assignment[self.res[i].0], assignment[self.ims[i].0])
        })
    }
}

/// Hermitian matrix decision variable: n real diagonal entries plus
/// (re, im) pairs for the strict lower triangle (column-major).
#[derive(Debug, Clone)]
pub struct HermVar {
    pub dim: usize,
    pub diag: Vec<VarId>,
    /// (i, j, re, im) with i > j.
    pub off: Vec<(usize, usize, VarId, VarId)>,
}

impl HermVar {
    pub fn new(prog: &mut ConicProgram, prefix: &str, dim: usize) -> Self {
        let diag = (0..dim).map(|i| prog.add_var(format!("{prefix}[{i},{i}]"))).collect();
        let mut off = Vec::new();
        for j in 0..dim {
            for i in (j + 1)..dim {
                let re = prog.add_var(format!("{prefix}[{i},{j}].re"));
                let im = prog.add_var(format!("{prefix}[{i},{j}].im"));
                off.push((i, j, re, im));
            }
        }
        Self { dim, diag, off }
    }

    pub fn as_mat(&self) -> AffMat {
        let mut out = AffMat::zeros(self.dim, self.dim);
        for (i, &v) in self.diag.iter().enumerate() {
            out.term_mut(v.0)[(i, i)] = C_ONE;
        }
        for &(i, j, re, im) in &self.off {
            let t = out.term_mut(re.0);
            t[(i, j)] = C_ONE;
            t[(j, i)] = C_ONE;
            let t = out.term_mut(im.0);
            t[(i, j)] = C64::new(0.0, 1.0);
            t[(j, i)] = C64::new(0.0, -1.0);
        }
        out
    }

    /// Adds the PSD constraint on this variable.
    pub fn require_psd(&self, prog: &mut ConicProgram) {
        prog.add_lmi(self.as_mat().into_lmi());
    }

    pub fn trace_expr(&self) -> LinExpr {
        let mut e = LinExpr::zero();
        for &v in &self.diag {
            e.push(v, 1.0);
        }
        e
    }

    pub fn value(&self, assignment: &[f64]) -> CMatrix {
        let mut m = CMatrix::zeros(self.dim, self.dim);
        for (i, &v) in self.diag.iter().enumerate() {
            m[(i, i)] = C64::new(assignment[v.0], 0.0);
        }
        for &(i, j, re, im) in &self.off {
            let c = C64::new(assignment[re.0], assignment[im.0]);
            m[(i, j)] = c;
            m[(j, i)] = c.conj();
        }
        m
    }
}

/// Stack AffMat blocks vertically.
pub fn vstack(blocks: &[&AffMat]) -> AffMat {
    let cols = blocks[0].cols;
    let rows = blocks.iter().map(|b| b.rows).sum();
    let mut out = AffMat::zeros(rows, cols);
    let mut r = 0;
    for b in blocks {
        assert_eq!(b.cols, cols);
        out.set_block(r, 0, b);
        r += b.rows;
    }
    out
}

/// Real-affine expression for `2·Re{a^H b}` with at most one variable factor.
pub fn two_re_inner(a: &AffMat, b: &AffMat) -> LinExpr {
    let p = a.adjoint().matmul(b);
    assert_eq!((p.rows, p.cols), (1, 1));
    let e = p.entry(0, 0);
    e.re.scaled(2.0)
}
