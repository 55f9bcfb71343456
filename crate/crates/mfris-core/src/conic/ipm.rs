//! Primal-dual interior-point solver over (NonNeg, SOC, PSD) cones with
//! Nesterov-Todd scaling, Mehrotra predictor-corrector, and the homogeneous
//! self-dual embedding for infeasibility detection.
//!
//! Standard form handled here (produced by `lower`):
//!   minimize c·x  s.t.  A_eq x = b_eq,  A_k x + s = b_k,  s ∈ K.
//!
//! The Newton systems are reduced to a dense quasi-definite saddle system
//!   [[AᵀH⁻¹A + δI, A_eqᵀ], [A_eq, -δI]]
//! factored by unpivoted LDLᵀ with iterative refinement. Per-PSD-block
//! scaling products are batched into GEMMs.

use super::lower::{svec, unsvec, Block, BlockKind, Lowered};
use super::{SolveOptions, SolveReport, SolveStatus};
use crate::linalg::sym_eig;
use ndarray::{s, Array1, Array2};

const STEP_FRACTION: f64 = 0.99;

// ---------------------------------------------------------------------------
// Per-block NT scaling state
// ---------------------------------------------------------------------------

enum Scaling {
    NonNeg {
        w2: Array1<f64>,     // w_i² = s_i/z_i
        lambda: Array1<f64>, // sqrt(s∘z)
    },
    Soc {
        /// det^(1/2) of the NT point w (so wᵀJw = β²).
        beta: f64,
        /// NT point w with P(w) z = s.
        w: Array1<f64>,
        /// Jordan square root v = w^(1/2); the scaling is W = P(v).
        v: Array1<f64>,
        lambda: Array1<f64>,
    },
    Psd {
        side: usize,
        w_half: Array2<f64>,
        w_inv_half: Array2<f64>,
        w_inv: Array2<f64>,
        // Eigendecomposition of λ for Jordan division and step length.
        lam_q: Array2<f64>,
        lam_sig: Vec<f64>,
        lambda: Array1<f64>, // svec of λ matrix
    },
}

fn soc_resid(v: &[f64]) -> f64 {
    let tail: f64 = v[1..].iter().map(|x| x * x).sum();
    (v[0] * v[0] - tail).max(0.0).sqrt()
}

/// Symmetric matrix functions via eigendecomposition.
fn mat_func(a: &Array2<f64>, f: impl Fn(f64) -> f64) -> Option<Array2<f64>> {
    let (vals, vecs) = sym_eig(a).ok()?;
    let n = vals.len();
    let mut scaled = vecs.clone();
    for j in 0..n {
        let fv = f(vals[j]);
        if !fv.is_finite() {
            return None;
        }
        for i in 0..n {
            scaled[(i, j)] *= fv;
        }
    }
    Some(scaled.dot(&vecs.t()))
}

fn compute_scaling(block: &Block, s_blk: &[f64], z_blk: &[f64]) -> Option<Scaling> {
    match block.kind {
        BlockKind::NonNeg => {
            let dim = block.dim;
            let mut w2 = Array1::zeros(dim);
            let mut lambda = Array1::zeros(dim);
            for i in 0..dim {
                if s_blk[i] <= 0.0 || z_blk[i] <= 0.0 {
                    return None;
                }
                w2[i] = s_blk[i] / z_blk[i];
                lambda[i] = (s_blk[i] * z_blk[i]).sqrt();
            }
            Some(Scaling::NonNeg { w2, lambda })
        }
        BlockKind::Soc => {
            let rs = soc_resid(s_blk);
            let rz = soc_resid(z_blk);
            if rs <= 0.0 || rz <= 0.0 {
                return None;
            }
            let d = block.dim;
            let sbar: Vec<f64> = s_blk.iter().map(|v| v / rs).collect();
            let zbar: Vec<f64> = z_blk.iter().map(|v| v / rz).collect();
            let dot: f64 = sbar.iter().zip(&zbar).map(|(a, b)| a * b).sum();
            let gamma = ((1.0 + dot) / 2.0).sqrt();
            if !gamma.is_finite() || gamma <= 0.0 {
                return None;
            }
            // NT point: w = β/(2γ) · (s̄ + J z̄) satisfies P(w) z = s, wᵀJw = β².
            let beta = (rs / rz).sqrt();
            let mut w = Array1::zeros(d);
            let f = beta / (2.0 * gamma);
            w[0] = f * (sbar[0] + zbar[0]);
            for i in 1..d {
                w[i] = f * (sbar[i] - zbar[i]);
            }
            // Jordan square root v = w^(1/2): det(v) = β, v₀ = √((w₀+β)/2).
            let v0 = ((w[0] + beta) / 2.0).sqrt();
            if !v0.is_finite() || v0 <= 0.0 {
                return None;
            }
            let mut v = Array1::zeros(d);
            v[0] = v0;
            for i in 1..d {
                v[i] = w[i] / (2.0 * v0);
            }
            // λ = W z = 2 v (vᵀz) − β J z.
            let vz: f64 = v.iter().zip(z_blk).map(|(a, b)| a * b).sum();
            let mut lambda = Array1::zeros(d);
            lambda[0] = 2.0 * v[0] * vz - beta * z_blk[0];
            for i in 1..d {
                lambda[i] = 2.0 * v[i] * vz + beta * z_blk[i];
            }
            Some(Scaling::Soc { beta, w, v, lambda })
        }
        BlockKind::Psd { side } => {
            let s_mat = unsvec(s_blk, side);
            let z_mat = unsvec(z_blk, side);
            let s_half = mat_func(&s_mat, |x| if x > 0.0 { x.sqrt() } else { f64::NAN })?;
            let t = s_half.dot(&z_mat).dot(&s_half);
            let t_inv_half = mat_func(&t, |x| if x > 0.0 { 1.0 / x.sqrt() } else { f64::NAN })?;
            let w = s_half.dot(&t_inv_half).dot(&s_half);
            let w_half = mat_func(&w, |x| if x > 0.0 { x.sqrt() } else { f64::NAN })?;
            let w_inv_half = mat_func(&w, |x| if x > 0.0 { 1.0 / x.sqrt() } else { f64::NAN })?;
            let w_inv = w_inv_half.dot(&w_inv_half);
            let lam_mat = w_half.dot(&z_mat).dot(&w_half);
            let lam_mat = 0.5 * (&lam_mat + &lam_mat.t());
            let (lam_sig, lam_q) = sym_eig(&lam_mat).ok()?;
            if lam_sig.iter().any(|&v| v <= 0.0) {
                return None;
            }
            Some(Scaling::Psd {
                side,
                w_half,
                w_inv_half,
                w_inv,
                lam_q,
                lam_sig,
                lambda: svec(&lam_mat),
            })
        }
    }
}

impl Scaling {
    fn lambda(&self) -> &Array1<f64> {
        match self {
            Scaling::NonNeg { lambda, .. } => lambda,
            Scaling::Soc { lambda, .. } => lambda,
            Scaling::Psd { lambda, .. } => lambda,
        }
    }

    /// W v (the scaling is self-adjoint for all three cones).
    fn apply_w(&self, v: &[f64]) -> Array1<f64> {
        match self {
            Scaling::NonNeg { w2, .. } => {
                Array1::from_iter(v.iter().zip(w2).map(|(x, w2)| x * w2.sqrt()))
            }
            Scaling::Soc { beta, v: nt_v, .. } => {
                // P(v) x = 2 v (vᵀx) − β J x.
                let vx: f64 = nt_v.iter().zip(v).map(|(a, b)| a * b).sum();
                let mut out = Array1::zeros(v.len());
                out[0] = 2.0 * nt_v[0] * vx - beta * v[0];
                for i in 1..v.len() {
                    out[i] = 2.0 * nt_v[i] * vx + beta * v[i];
                }
                out
            }
            Scaling::Psd { side, w_half, .. } => {
                let m = unsvec(v, *side);
                svec(&w_half.dot(&m).dot(w_half))
            }
        }
    }

    /// W⁻¹ v.
    fn apply_w_inv(&self, v: &[f64]) -> Array1<f64> {
        match self {
            Scaling::NonNeg { w2, .. } => {
                Array1::from_iter(v.iter().zip(w2).map(|(x, w2)| x / w2.sqrt()))
            }
            Scaling::Soc { beta, v: nt_v, .. } => {
                // W⁻¹ = P(v⁻¹) with v⁻¹ = J v / β:
                // x ↦ (2/β²) (Jv)((Jv)ᵀx) − (1/β) J x.
                let d = v.len();
                let mut jv = nt_v.clone();
                for i in 1..d {
                    jv[i] = -jv[i];
                }
                let dot: f64 = jv.iter().zip(v).map(|(a, b)| a * b).sum();
                let mut out = Array1::zeros(d);
                out[0] = 2.0 * jv[0] * dot / (beta * beta) - v[0] / beta;
                for i in 1..d {
                    out[i] = 2.0 * jv[i] * dot / (beta * beta) + v[i] / beta;
                }
                out
            }
            Scaling::Psd { side, w_inv_half, .. } => {
                let m = unsvec(v, *side);
                svec(&w_inv_half.dot(&m).dot(w_inv_half))
            }
        }
    }

    /// H⁻¹ v = W⁻¹(W⁻¹ v).
    fn apply_h_inv(&self, v: &[f64]) -> Array1<f64> {
        match self {
            Scaling::NonNeg { w2, .. } => {
                Array1::from_iter(v.iter().zip(w2).map(|(x, w2)| x / w2))
            }
            Scaling::Soc { beta, w, .. } => {
                // H⁻¹ = P(w⁻¹), w⁻¹ = J w / β².
                let d = v.len();
                let b2 = beta * beta;
                let mut jw = w.clone();
                for i in 1..d {
                    jw[i] = -jw[i];
                }
                let dot: f64 = jw.iter().zip(v).map(|(a, b)| a * b).sum();
                let mut out = Array1::zeros(d);
                out[0] = 2.0 * jw[0] * dot / (b2 * b2) - v[0] / b2;
                for i in 1..d {
                    out[i] = 2.0 * jw[i] * dot / (b2 * b2) + v[i] / b2;
                }
                out
            }
            Scaling::Psd { side, w_inv, .. } => {
                let m = unsvec(v, *side);
                svec(&w_inv.dot(&m).dot(w_inv))
            }
        }
    }

    /// H v = W(W v).
    fn apply_h(&self, v: &[f64]) -> Array1<f64> {
        match self {
            Scaling::NonNeg { w2, .. } => {
                Array1::from_iter(v.iter().zip(w2).map(|(x, w2)| x * w2))
            }
            Scaling::Soc { beta, w, .. } => {
                // H = P(w): x ↦ 2 w (wᵀx) − β² J x.
                let wx: f64 = w.iter().zip(v).map(|(a, b)| a * b).sum();
                let b2 = beta * beta;
                let mut out = Array1::zeros(v.len());
                out[0] = 2.0 * w[0] * wx - b2 * v[0];
                for i in 1..v.len() {
                    out[i] = 2.0 * w[i] * wx + b2 * v[i];
                }
                out
            }
            Scaling::Psd { side, w_half, .. } => {
                let m = unsvec(v, *side);
                let w = w_half.dot(w_half);
                svec(&w.dot(&m).dot(&w))
            }
        }
    }

    /// Jordan division u = λ \ d  (solves λ∘u = d).
    fn lambda_div(&self, d: &[f64]) -> Array1<f64> {
        match self {
            Scaling::NonNeg { lambda, .. } => {
                Array1::from_iter(d.iter().zip(lambda).map(|(x, l)| x / l))
            }
            Scaling::Soc { lambda, .. } => {
                let a = lambda[0];
                let b = &lambda.as_slice().unwrap()[1..];
                let bsq: f64 = b.iter().map(|x| x * x).sum();
                let btd: f64 = b.iter().zip(&d[1..]).map(|(x, y)| x * y).sum();
                let denom = a * a - bsq;
                let u0 = (a * d[0] - btd) / denom;
                let mut out = Array1::zeros(d.len());
                out[0] = u0;
                for i in 1..d.len() {
                    out[i] = (d[i] - u0 * b[i - 1]) / a;
                }
                out
            }
            Scaling::Psd { side, lam_q, lam_sig, .. } => {
                let dm = unsvec(d, *side);
                let dp = lam_q.t().dot(&dm).dot(lam_q);
                let n = *side;
                let mut up = Array2::zeros((n, n));
                for i in 0..n {
                    for j in 0..n {
                        up[(i, j)] = 2.0 * dp[(i, j)] / (lam_sig[i] + lam_sig[j]);
                    }
                }
                svec(&lam_q.dot(&up).dot(&lam_q.t()))
            }
        }
    }

    /// Jordan product u ∘ v.
    fn jordan(&self, u: &[f64], v: &[f64]) -> Array1<f64> {
        match self {
            Scaling::NonNeg { .. } => {
                Array1::from_iter(u.iter().zip(v).map(|(a, b)| a * b))
            }
            Scaling::Soc { .. } => {
                let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
                let mut out = Array1::zeros(u.len());
                out[0] = dot;
                for i in 1..u.len() {
                    out[i] = u[0] * v[i] + v[0] * u[i];
                }
                out
            }
            Scaling::Psd { side, .. } => {
                let um = unsvec(u, *side);
                let vm = unsvec(v, *side);
                let p = um.dot(&vm);
                let sym = 0.5 * (&p + &p.t());
                svec(&sym)
            }
        }
    }

    /// Largest step α so that λ + α·d stays in the cone (∞ as f64::MAX).
    fn step_to_boundary(&self, d: &[f64]) -> f64 {
        match self {
            Scaling::NonNeg { lambda, .. } => {
                let mut alpha = f64::MAX;
                for (l, di) in lambda.iter().zip(d) {
                    if *di < 0.0 {
                        alpha = alpha.min(-l / di);
                    }
                }
                alpha
            }
            Scaling::Soc { lambda, .. } => {
                let l = lambda.as_slice().unwrap();
                // Need (l0+αd0)² − ‖l1+αd1‖² ≥ 0 and l0+αd0 ≥ 0.
                let a = d[0] * d[0] - d[1..].iter().map(|x| x * x).sum::<f64>();
                let b = 2.0
                    * (l[0] * d[0]
                        - l[1..].iter().zip(&d[1..]).map(|(x, y)| x * y).sum::<f64>());
                let c = l[0] * l[0] - l[1..].iter().map(|x| x * x).sum::<f64>();
                let mut alpha = f64::MAX;
                // Roots of aα² + bα + c = 0 with c > 0.
                let disc = b * b - 4.0 * a * c;
                if a.abs() < 1e-300 {
                    if b < 0.0 {
                        alpha = alpha.min(-c / b);
                    }
                } else if disc >= 0.0 {
                    let sq = disc.sqrt();
                    for r in [(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)] {
                        if r > 0.0 {
                            alpha = alpha.min(r);
                        }
                    }
                }
                if d[0] < 0.0 {
                    alpha = alpha.min(-l[0] / d[0]);
                }
                alpha
            }
            Scaling::Psd { side, lam_q, lam_sig, .. } => {
                let dm = unsvec(d, *side);
                let dp = lam_q.t().dot(&dm).dot(lam_q);
                let n = *side;
                let mut m = Array2::zeros((n, n));
                for i in 0..n {
                    for j in 0..n {
                        m[(i, j)] = dp[(i, j)] / (lam_sig[i] * lam_sig[j]).sqrt();
                    }
                }
                match sym_eig(&m) {
                    Ok((vals, _)) => {
                        let min = vals[0];
                        if min < 0.0 {
                            -1.0 / min
                        } else {
                            f64::MAX
                        }
                    }
                    Err(_) => 0.0,
                }
            }
        }
    }

    fn identity(&self, dim: usize) -> Array1<f64> {
        match self {
            Scaling::NonNeg { .. } => Array1::ones(dim),
            Scaling::Soc { .. } => {
                let mut e = Array1::zeros(dim);
                e[0] = 1.0;
                e
            }
            Scaling::Psd { side, .. } => svec(&Array2::eye(*side)),
        }
    }
}

/// Identity NT scaling (W = I) used by the least-squares initializer.
fn identity_scaling(block: &Block) -> Scaling {
    match block.kind {
        BlockKind::NonNeg => Scaling::NonNeg {
            w2: Array1::ones(block.dim),
            lambda: Array1::ones(block.dim),
        },
        BlockKind::Soc => {
            let mut v = Array1::zeros(block.dim);
            v[0] = 1.0;
            Scaling::Soc { beta: 1.0, w: v.clone(), v: v.clone(), lambda: v }
        }
        BlockKind::Psd { side } => Scaling::Psd {
            side,
            w_half: Array2::eye(side),
            w_inv_half: Array2::eye(side),
            w_inv: Array2::eye(side),
            lam_q: Array2::eye(side),
            lam_sig: vec![1.0; side],
            lambda: svec(&Array2::eye(side)),
        },
    }
}

fn cone_identity(block: &Block) -> Array1<f64> {
    match block.kind {
        BlockKind::NonNeg => Array1::ones(block.dim),
        BlockKind::Soc => {
            let mut e = Array1::zeros(block.dim);
            e[0] = 1.0;
            e
        }
        BlockKind::Psd { side } => svec(&Array2::eye(side)),
    }
}

// ---------------------------------------------------------------------------
// Dense quasi-definite LDLᵀ with fixed expected signs
// ---------------------------------------------------------------------------

struct Ldl {
    n: usize,
    l: Array2<f64>,
    d: Vec<f64>,
}

fn ldl_factor(a: &Array2<f64>, n_pos: usize, reg: f64) -> Option<Ldl> {
    let n = a.nrows();
    let mut l = a.clone();
    let mut d = vec![0.0; n];
    for k in 0..n {
        let mut dk = l[(k, k)];
        for j in 0..k {
            dk -= l[(k, j)] * l[(k, j)] * d[j];
        }
        let expected = if k < n_pos { 1.0 } else { -1.0 };
        if dk.abs() < reg || dk.signum() != expected {
            dk = expected * reg.max(dk.abs());
        }
        d[k] = dk;
        for i in (k + 1)..n {
            let mut v = l[(i, k)];
            for j in 0..k {
                v -= l[(i, j)] * l[(k, j)] * d[j];
            }
            l[(i, k)] = v / dk;
        }
        if !d[k].is_finite() {
            return None;
        }
    }
    Some(Ldl { n, l, d })
}

impl Ldl {
    fn solve(&self, rhs: &Array1<f64>) -> Array1<f64> {
        let n = self.n;
        let mut x = rhs.clone();
        for i in 0..n {
            for j in 0..i {
                let lij = self.l[(i, j)];
                x[i] -= lij * x[j];
            }
        }
        for i in 0..n {
            x[i] /= self.d[i];
        }
        for i in (0..n).rev() {
            for j in (i + 1)..n {
                let lji = self.l[(j, i)];
                x[i] -= lji * x[j];
            }
        }
        x
    }
}

// ---------------------------------------------------------------------------
// Problem workspace
// ---------------------------------------------------------------------------

struct Work<'a> {
    l: &'a Lowered,
    m_eq: usize,
    m_cone: usize,
    offsets: Vec<usize>, // block start offsets within the cone part
    nu: f64,
    bnorm: f64,
    cnorm: f64,
    // Per-PSD-block cached flattened coefficient matrices (side² × k).
    psd_mflat: Vec<Option<Array2<f64>>>,
}

impl<'a> Work<'a> {
    fn new(l: &'a Lowered) -> Self {
        let m_eq = l.a_eq.nrows();
        let mut offsets = Vec::with_capacity(l.blocks.len());
        let mut m_cone = 0;
        let mut nu = 0.0;
        for b in &l.blocks {
            offsets.push(m_cone);
            m_cone += b.dim;
            nu += match b.kind {
                BlockKind::NonNeg => b.dim as f64,
                BlockKind::Soc => 1.0,
                BlockKind::Psd { side } => side as f64,
            };
        }
        let mut bnorm: f64 = l.b_eq.iter().map(|x| x * x).sum();
        for b in &l.blocks {
            bnorm += b.b.iter().map(|x| x * x).sum::<f64>();
        }
        let bnorm = bnorm.sqrt();
        let cnorm = l.c.iter().map(|x| x * x).sum::<f64>().sqrt();
        let psd_mflat = l
            .blocks
            .iter()
            .map(|b| {
                if let BlockKind::Psd { side } = b.kind {
                    let k = b.active.len();
                    let mut mflat = Array2::zeros((side * side, k));
                    for j in 0..k {
                        let col: Vec<f64> = (0..b.dim).map(|r| b.a_act[(r, j)]).collect();
                        let m = unsvec(&col, side);
                        for (idx, v) in m.iter().enumerate() {
                            mflat[(idx, j)] = *v;
                        }
                    }
                    Some(mflat)
                } else {
                    None
                }
            })
            .collect();
        Self { l, m_eq, m_cone, offsets, nu, bnorm, cnorm, psd_mflat }
    }

    /// A x over cone rows only (dense per block, gathered columns).
    fn apply_a_cone(&self, x: &Array1<f64>) -> Array1<f64> {
        let mut out = Array1::zeros(self.m_cone);
        for (bi, b) in self.l.blocks.iter().enumerate() {
            let xa = Array1::from_iter(b.active.iter().map(|&j| x[j]));
            let y = b.a_act.dot(&xa);
            out.slice_mut(s![self.offsets[bi]..self.offsets[bi] + b.dim])
                .assign(&y);
        }
        out
    }

    /// Aᵀ z contribution from cone rows.
    fn apply_at_cone(&self, z: &Array1<f64>) -> Array1<f64> {
        let mut out = Array1::zeros(self.l.n);
        for (bi, b) in self.l.blocks.iter().enumerate() {
            let zb = z.slice(s![self.offsets[bi]..self.offsets[bi] + b.dim]);
            let y = b.a_act.t().dot(&zb);
            for (k, &j) in b.active.iter().enumerate() {
                out[j] += y[k];
            }
        }
        out
    }

    fn b_cone(&self) -> Array1<f64> {
        let mut out = Array1::zeros(self.m_cone);
        for (bi, b) in self.l.blocks.iter().enumerate() {
            out.slice_mut(s![self.offsets[bi]..self.offsets[bi] + b.dim])
                .assign(&b.b);
        }
        out
    }

    /// Assemble S = Σ A_bᵀ H_b⁻¹ A_b (n×n) from current scalings.
    fn assemble_s(&self, scalings: &[Scaling]) -> Array2<f64> {
        let n = self.l.n;
        let mut s_mat = Array2::zeros((n, n));
        for (bi, b) in self.l.blocks.iter().enumerate() {
            let k = b.active.len();
            if k == 0 {
                continue;
            }
            // Every branch forms S_b as an explicit Gram E_bᵀE_b with
            // E_b = W^{-1}·A_b (W^{-1/2}-congruence for PSD), which keeps the
            // assembled matrix numerically PSD even when the scaling is
            // extremely ill-conditioned near convergence.
            let gram: Array2<f64> = match (&scalings[bi], &self.psd_mflat[bi]) {
                (Scaling::NonNeg { w2, .. }, _) => {
                    let mut scaled = b.a_act.clone();
                    for r in 0..b.dim {
                        let f = 1.0 / w2[r].sqrt();
                        for c in 0..k {
                            scaled[(r, c)] *= f;
                        }
                    }
                    scaled.t().dot(&scaled)
                }
                (sc @ Scaling::Soc { .. }, _) => {
                    let mut win = Array2::zeros((b.dim, k));
                    for c in 0..k {
                        let col: Vec<f64> = (0..b.dim).map(|r| b.a_act[(r, c)]).collect();
                        let h = sc.apply_w_inv(&col);
                        for r in 0..b.dim {
                            win[(r, c)] = h[r];
                        }
                    }
                    win.t().dot(&win)
                }
                (Scaling::Psd { side, w_inv_half, .. }, Some(mflat)) => {
                    let side = *side;
                    // L_j = W^{-1/2}·M_j batched, then E_j = L_j·W^{-1/2}
                    // batched, then S = EᵀE via flattened inner products.
                    let mut mcat = Array2::zeros((side, side * k));
                    for j in 0..k {
                        for col in 0..side {
                            for row in 0..side {
                                mcat[(row, j * side + col)] = mflat[(col * side + row, j)];
                            }
                        }
                    }
                    let lcat = w_inv_half.dot(&mcat);
                    let mut lstack = Array2::zeros((side * k, side));
                    for j in 0..k {
                        for row in 0..side {
                            for col in 0..side {
                                lstack[(j * side + row, col)] = lcat[(row, j * side + col)];
                            }
                        }
                    }
                    let estack = lstack.dot(w_inv_half);
                    let mut eflat = Array2::zeros((side * side, k));
                    for j in 0..k {
                        for row in 0..side {
                            for col in 0..side {
                                eflat[(row * side + col, j)] = estack[(j * side + row, col)];
                            }
                        }
                    }
                    eflat.t().dot(&eflat)
                }
                _ => unreachable!(),
            };
            for (ki, &vi) in b.active.iter().enumerate() {
                for (kj, &vj) in b.active.iter().enumerate() {
                    s_mat[(vi, vj)] += gram[(ki, kj)];
                }
            }
        }
        // Symmetrize rounding drift.
        for i in 0..n {
            for j in 0..i {
                let v = 0.5 * (s_mat[(i, j)] + s_mat[(j, i)]);
                s_mat[(i, j)] = v;
                s_mat[(j, i)] = v;
            }
        }
        s_mat
    }

    /// Apply H⁻¹ blockwise to a cone-space vector.
    fn apply_h_inv_all(&self, scalings: &[Scaling], v: &Array1<f64>) -> Array1<f64> {
        let mut out = Array1::zeros(self.m_cone);
        for (bi, b) in self.l.blocks.iter().enumerate() {
            let vb = v.slice(s![self.offsets[bi]..self.offsets[bi] + b.dim]);
            let r = scalings[bi].apply_h_inv(vb.as_slice().unwrap());
            out.slice_mut(s![self.offsets[bi]..self.offsets[bi] + b.dim])
                .assign(&r);
        }
        out
    }
}

/// KKT solve context for one iteration: factorization of the saddle system.
struct KktSolve<'w, 'a> {
    work: &'w Work<'a>,
    scalings: &'w [Scaling],
    ldl: Ldl,
    /// Dense regularized saddle matrix; refinement targets this system, so
    /// the solve is exact for the proximally perturbed Newton equations.
    kkt: Array2<f64>,
}

impl<'w, 'a> KktSolve<'w, 'a> {
    fn new(work: &'w Work<'a>, scalings: &'w [Scaling]) -> Option<Self> {
        let n = work.l.n;
        let me = work.m_eq;
        let s_mat = work.assemble_s(scalings);
        let dim = n + me;
        let mut kkt = Array2::zeros((dim, dim));
        kkt.slice_mut(s![..n, ..n]).assign(&s_mat);
        // Static regularization is absolute: the problem is equilibrated, so
        // O(1) data with tiny shifts keeps quasi-definiteness without
        // distorting directions; dynamic pivot clamping handles the rest.
        let delta = 1e-12;
        for i in 0..n {
            kkt[(i, i)] += delta;
        }
        for r in 0..me {
            for j in 0..n {
                kkt[(n + r, j)] = work.l.a_eq[(r, j)];
                kkt[(j, n + r)] = work.l.a_eq[(r, j)];
            }
            kkt[(n + r, n + r)] = -delta;
        }
        let ldl = ldl_factor(&kkt, n, delta)?;
        Some(Self { work, scalings, ldl, kkt })
    }

    /// Solve the reduced Newton system for RHS (d_x, d_z); returns
    /// (Δx, Δz_full) where Δz_full covers eq rows then cone rows.
    fn solve(&self, d_x: &Array1<f64>, d_ze: &Array1<f64>, d_zk: &Array1<f64>) -> (Array1<f64>, Array1<f64>, Array1<f64>) {
        let w = self.work;
        let n = w.l.n;
        let me = w.m_eq;
        // rhs_x = d_x + A_kᵀ H⁻¹ d_zk
        let hd = w.apply_h_inv_all(self.scalings, d_zk);
        let rhs_x = d_x + &w.apply_at_cone(&hd);
        let mut rhs = Array1::zeros(n + me);
        rhs.slice_mut(s![..n]).assign(&rhs_x);
        rhs.slice_mut(s![n..]).assign(d_ze);
        let mut sol = self.ldl.solve(&rhs);
        // Iterative refinement against the regularized dense saddle.
        for _ in 0..4 {
            let resid = &rhs - &self.kkt.dot(&sol);
            let corr = self.ldl.solve(&resid);
            let cn = corr.dot(&corr).sqrt();
            sol = sol + &corr;
            if cn < 1e-15 * (1.0 + sol.dot(&sol).sqrt()) {
                break;
            }
        }
        let dx = sol.slice(s![..n]).to_owned();
        let dy = sol.slice(s![n..]).to_owned();
        // Δz_k = H⁻¹ (A_k Δx − d_zk)
        let a_dx = w.apply_a_cone(&dx);
        let dzk = w.apply_h_inv_all(self.scalings, &(&a_dx - d_zk));
        (dx, dy, dzk)
    }
}

// ---------------------------------------------------------------------------
// Main loop
// ---------------------------------------------------------------------------

pub(crate) fn solve_lowered(l: &Lowered, opts: &SolveOptions) -> SolveReport {
    let work = Work::new(l);
    let n = l.n;
    let me = work.m_eq;
    let mc = work.m_cone;

    let fail = |msg: &str, iters: usize| SolveReport {
        status: SolveStatus::NumericalFailure,
        objective: f64::NAN,
        assignment: None,
        iterations: iters,
        wall_time_s: 0.0,
        diagnostics: msg.to_string(),
    };

    if mc == 0 {
        return fail("program has no cone constraints", 0);
    }

    // State.
    let mut x = Array1::<f64>::zeros(n);
    let mut y = Array1::<f64>::zeros(me); // eq duals
    let mut s_vec = Array1::<f64>::zeros(mc);
    let mut z_vec = Array1::<f64>::zeros(mc);
    // Least-squares initialization (cvxopt-style): with identity scalings,
    // x from min ‖Ax − b‖ gives s = b − Ax shifted into the cone, and
    // z from Aᵀz = −c shifted into the cone. This keeps the initial
    // residuals at the scale of the data rather than the row count.
    {
        let identity_scalings: Vec<Scaling> = l
            .blocks
            .iter()
            .map(|b| identity_scaling(b))
            .collect();
        if let Some(kkt) = KktSolve::new(&work, &identity_scalings) {
            let b_full = work.b_cone();
            let zero_n = Array1::zeros(n);
            let (xp, _, zp) = kkt.solve(&zero_n, &l.b_eq, &b_full);
            // s = b − A x = −(Ax − b); the returned zp equals H⁻¹(Ax − b) = Ax − b.
            let s_ls = zp.mapv(|v| -v);
            let _ = xp;
            let (xd, _, zd) = kkt.solve(&Array1::from_vec(l.c.iter().map(|v| -v).collect()), &Array1::zeros(me), &Array1::zeros(mc));
            x = xd;
            // Shift each block into its cone interior.
            for (bi, b) in l.blocks.iter().enumerate() {
                let o = work.offsets[bi];
                let e = cone_identity(b);
                let sb = s_ls.slice(s![o..o + b.dim]).to_owned();
                let zb = zd.slice(s![o..o + b.dim]).to_owned();
                let shift_into = |v: Array1<f64>| -> Array1<f64> {
                    // Distance to the cone along e.
                    let viol = match b.kind {
                        BlockKind::NonNeg => -v.iter().fold(f64::INFINITY, |a, &x| a.min(x)),
                        BlockKind::Soc => {
                            let tail: f64 =
                                v.iter().skip(1).map(|x| x * x).sum::<f64>().sqrt();
                            tail - v[0]
                        }
                        BlockKind::Psd { side } => {
                            match sym_eig(&unsvec(v.as_slice().unwrap(), side)) {
                                Ok((vals, _)) => -vals[0],
                                Err(_) => f64::INFINITY,
                            }
                        }
                    };
                    let scale = v.iter().map(|x| x.abs()).fold(0.0f64, f64::max);
                    if viol.is_finite() && viol < -1e-8 * (1.0 + scale) {
                        v
                    } else {
                        let bump = viol.max(0.0) + 1.0 + 0.1 * scale;
                        &v + &e.mapv(|t| t * bump)
                    }
                };
                s_vec
                    .slice_mut(s![o..o + b.dim])
                    .assign(&shift_into(sb));
                z_vec
                    .slice_mut(s![o..o + b.dim])
                    .assign(&shift_into(zb));
            }
        } else {
            for (bi, b) in l.blocks.iter().enumerate() {
                let e = cone_identity(b);
                s_vec
                    .slice_mut(s![work.offsets[bi]..work.offsets[bi] + b.dim])
                    .assign(&e);
                z_vec
                    .slice_mut(s![work.offsets[bi]..work.offsets[bi] + b.dim])
                    .assign(&e);
            }
            x.fill(0.0);
        }
    }
    let mut tau = 1.0f64;
    let mut kappa = 1.0f64;

    let b_k = work.b_cone();
    let c_arr = Array1::from_vec(l.c.clone());

    let mut last_status = SolveStatus::MaxIter;
    let mut iterations = 0;
    let mut diagnostics = String::new();
    // Best iterate so far (by worst-of residuals/gap), used when the central
    // path becomes numerically unusable before the strict target is met.
    let mut best_crit = f64::INFINITY;
    let mut best_x: Option<(Array1<f64>, f64)> = None;
    let mut stall = 0usize;

    for iter in 0..opts.max_iter {
        iterations = iter + 1;
        // Residuals.
        // r_x = A_eqᵀ y + A_kᵀ z + c τ
        let mut r_x = work.apply_at_cone(&z_vec) + &c_arr.clone().mapv(|v| v * tau);
        if me > 0 {
            r_x = r_x + &l.a_eq.t().dot(&y);
        }
        // r_ze = A_eq x − b_eq τ ; r_zk = s + A_k x − b_k τ
        let r_ze = if me > 0 {
            l.a_eq.dot(&x) - &l.b_eq.mapv(|v| v * tau)
        } else {
            Array1::zeros(0)
        };
        let r_zk = &s_vec + &work.apply_a_cone(&x) - &b_k.mapv(|v| v * tau);
        // r_τ = κ + cᵀx + b_eqᵀy + b_kᵀz
        let btz = l.b_eq.dot(&y) + b_k.dot(&z_vec);
        let ctx = c_arr.dot(&x);
        let r_tau = kappa + ctx + btz;

        let sz: f64 = s_vec.dot(&z_vec);
        let mu = (sz + tau * kappa) / (work.nu + 1.0);

        // Convergence checks (scaled by τ).
        let pres = (r_ze.dot(&r_ze) + r_zk.dot(&r_zk)).sqrt() / (tau * (1.0 + work.bnorm));
        let dres = r_x.dot(&r_x).sqrt() / (tau * (1.0 + work.cnorm));
        let pobj = ctx / tau;
        let dobj = -btz / tau;
        let gap = (pobj - dobj).abs() / (1.0 + pobj.abs().max(dobj.abs()));
        let crit = pres.max(dres).max(gap);
        if crit < best_crit * 0.9 {
            stall = 0;
        } else {
            stall += 1;
        }
        if crit < best_crit {
            best_crit = crit;
            best_x = Some((x.clone(), tau));
        }
        if crit <= opts.tol {
            last_status = SolveStatus::Optimal;
            break;
        }
        if (stall >= 5 && best_crit <= opts.tol * 100.0) || stall >= 10 {
            last_status = SolveStatus::MaxIter;
            diagnostics = format!("stalled for {stall} iterations at crit {best_crit:.2e}");
            break;
        }
        // Infeasibility certificates.
        let atz_norm = {
            let mut v = work.apply_at_cone(&z_vec);
            if me > 0 {
                v = v + &l.a_eq.t().dot(&y);
            }
            v.dot(&v).sqrt()
        };
        if btz < 0.0 && atz_norm * (1.0 + work.bnorm) / (-btz) <= opts.infeas_tol {
            last_status = SolveStatus::Infeasible;
            diagnostics = "primal infeasibility certificate".into();
            break;
        }
        let axs = {
            let mut v2 = (&work.apply_a_cone(&x) + &s_vec).dot(&(&work.apply_a_cone(&x) + &s_vec));
            if me > 0 {
                let ve = l.a_eq.dot(&x);
                v2 += ve.dot(&ve);
            }
            v2.sqrt()
        };
        if ctx < 0.0 && axs * (1.0 + work.cnorm) / (-ctx) <= opts.infeas_tol {
            last_status = SolveStatus::NumericalFailure;
            diagnostics = "dual infeasibility certificate (objective unbounded)".into();
            break;
        }
        if mu < 1e-16 || tau < 1e-12 {
            // Central path collapsed without matching a certificate: decide by
            // the τ/κ ratio.
            if kappa > tau * 1e3 && btz < 0.0 {
                last_status = SolveStatus::Infeasible;
            } else {
                last_status = SolveStatus::NumericalFailure;
                diagnostics = format!("central path collapse: mu={mu:.2e}, tau={tau:.2e}");
            }
            break;
        }
        if mu < 1e-13 && crit > best_crit * 10.0 {
            // Numerical floor reached and residuals are regressing; stop and
            // let the best-iterate fallback decide.
            last_status = SolveStatus::NumericalFailure;
            diagnostics = format!("stalled at mu={mu:.2e}, best crit {best_crit:.2e}");
            break;
        }

        // NT scalings.
        let mut scalings = Vec::with_capacity(l.blocks.len());
        let mut scaling_ok = true;
        for (bi, b) in l.blocks.iter().enumerate() {
            let sb = s_vec
                .slice(s![work.offsets[bi]..work.offsets[bi] + b.dim])
                .to_vec();
            let zb = z_vec
                .slice(s![work.offsets[bi]..work.offsets[bi] + b.dim])
                .to_vec();
            match compute_scaling(b, &sb, &zb) {
                Some(sc) => scalings.push(sc),
                None => {
                    scaling_ok = false;
                    break;
                }
            }
        }
        if !scaling_ok {
            last_status = SolveStatus::NumericalFailure;
            diagnostics = "NT scaling failed (iterate left the cone)".into();
            break;
        }
        let kkt = match KktSolve::new(&work, &scalings) {
            Some(k) => k,
            None => {
                last_status = SolveStatus::NumericalFailure;
                diagnostics = "KKT factorization failed".into();
                break;
            }
        };

        // λ stacked.
        let mut lambda = Array1::zeros(mc);
        for (bi, sc) in scalings.iter().enumerate() {
            lambda
                .slice_mut(s![work.offsets[bi]..work.offsets[bi] + l.blocks[bi].dim])
                .assign(sc.lambda());
        }

        // Solve (ii): constant RHS (−c, b).
        let (u2, v2e, v2k) = kkt.solve(&c_arr.mapv(|v| -v), &l.b_eq, &b_k);

        // Helper to compute a direction given targets (σ, corrector terms).
        let direction = |sigma: f64,
                         corr_s: Option<&Array1<f64>>,
                         corr_tau: f64,
                         kkt: &KktSolve|
         -> (Array1<f64>, Array1<f64>, Array1<f64>, Array1<f64>, f64, f64) {
            // d_s = σμ e − λ∘λ − corr
            let mut d_s = Array1::zeros(mc);
            for (bi, sc) in scalings.iter().enumerate() {
                let o = work.offsets[bi];
                let dim = l.blocks[bi].dim;
                let lam = sc.lambda();
                let ll = sc.jordan(lam.as_slice().unwrap(), lam.as_slice().unwrap());
                let e = sc.identity(dim);
                let mut db = e.mapv(|v| v * sigma * mu) - &ll;
                if let Some(corr) = corr_s {
                    let cb = corr.slice(s![o..o + dim]);
                    db = db - &cb;
                }
                d_s.slice_mut(s![o..o + dim]).assign(&db);
            }
            let d_kappa_target = sigma * mu - tau * kappa - corr_tau;
            // \hat d_z = −(1−σ?) r_z − Wᵀ(λ\d_s); residual weights are full
            // (1) for both predictor and corrector in this implementation.
            let mut what = Array1::zeros(mc);
            for (bi, sc) in scalings.iter().enumerate() {
                let o = work.offsets[bi];
                let dim = l.blocks[bi].dim;
                let db = d_s.slice(s![o..o + dim]).to_vec();
                let t = sc.lambda_div(&db);
                let wt = sc.apply_w(t.as_slice().unwrap());
                what.slice_mut(s![o..o + dim]).assign(&wt);
            }
            let d_zk = r_zk.mapv(|v| -v) - &what;
            let d_x = r_x.mapv(|v| -v);
            let d_ze = r_ze.mapv(|v| -v);
            let (u1, v1e, v1k) = kkt.solve(&d_x, &d_ze, &d_zk);
            // Δτ from the τ-row.
            let denom = c_arr.dot(&u2) + l.b_eq.dot(&v2e) + b_k.dot(&v2k) - kappa / tau;
            let numer =
                -r_tau - d_kappa_target / tau - c_arr.dot(&u1) - l.b_eq.dot(&v1e) - b_k.dot(&v1k);
            let d_tau = if denom.abs() > 1e-300 { numer / denom } else { 0.0 };
            let dx = &u1 + &u2.mapv(|v| v * d_tau);
            let dye = &v1e + &v2e.mapv(|v| v * d_tau);
            let dzk = &v1k + &v2k.mapv(|v| v * d_tau);
            // Δs from the exact primal row −r_z − AΔx + bΔτ rather than
            // Wᵀ(λ\d_s) − HΔz: algebraically identical, but the H-apply has
            // condition ~1/μ² and would inject its rounding error into s.
            let ds = r_zk.mapv(|v| -v) - &work.apply_a_cone(&dx) + &b_k.mapv(|v| v * d_tau);
            let d_kappa = (d_kappa_target - kappa * d_tau) / tau;
            (dx, dye, dzk, ds, d_tau, d_kappa)
        };

        // Step length in the scaled space.
        let step_len = |dzk: &Array1<f64>, ds: &Array1<f64>, d_tau: f64, d_kappa: f64| -> (f64, String) {
            let mut alpha: f64 = f64::MAX;
            let mut who = String::from("none");
            for (bi, sc) in scalings.iter().enumerate() {
                let o = work.offsets[bi];
                let dim = l.blocks[bi].dim;
                let dz = dzk.slice(s![o..o + dim]).to_vec();
                let dsb = ds.slice(s![o..o + dim]).to_vec();
                let dz_scaled = sc.apply_w(&dz);
                let ds_scaled = sc.apply_w_inv(&dsb);
                let az = sc.step_to_boundary(dz_scaled.as_slice().unwrap());
                if az < alpha {
                    alpha = az;
                    who = format!("z:{bi}:{:?}", l.blocks[bi].kind);
                }
                let a_s = sc.step_to_boundary(ds_scaled.as_slice().unwrap());
                if a_s < alpha {
                    alpha = a_s;
                    who = format!("s:{bi}:{:?}", l.blocks[bi].kind);
                }
            }
            if d_tau < 0.0 && -tau / d_tau < alpha {
                alpha = -tau / d_tau;
                who = "tau".into();
            }
            if d_kappa < 0.0 && -kappa / d_kappa < alpha {
                alpha = -kappa / d_kappa;
                who = "kappa".into();
            }
            (alpha, who)
        };

        // Predictor (affine).
        let (_dx_a, _dy_a, dz_a, ds_a, dtau_a, dkappa_a) = direction(0.0, None, 0.0, &kkt);
        let (alpha_aff, who_aff) = step_len(&dz_a, &ds_a, dtau_a, dkappa_a);
        let alpha_aff = alpha_aff.min(1.0);

        // Mehrotra σ from the affine trial point.
        let mu_aff = {
            let s_t = &s_vec + &ds_a.mapv(|v| v * alpha_aff);
            let z_t = &z_vec + &dz_a.mapv(|v| v * alpha_aff);
            let t_t = tau + alpha_aff * dtau_a;
            let k_t = kappa + alpha_aff * dkappa_a;
            (s_t.dot(&z_t) + t_t * k_t) / (work.nu + 1.0)
        };
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        // Corrector term η = (W^{−ᵀ}Δs_aff) ∘ (WΔz_aff).
        let mut corr = Array1::zeros(mc);
        for (bi, sc) in scalings.iter().enumerate() {
            let o = work.offsets[bi];
            let dim = l.blocks[bi].dim;
            let dsb = ds_a.slice(s![o..o + dim]).to_vec();
            let dzb = dz_a.slice(s![o..o + dim]).to_vec();
            let a = sc.apply_w_inv(&dsb);
            let b = sc.apply_w(&dzb);
            let j = sc.jordan(a.as_slice().unwrap(), b.as_slice().unwrap());
            corr.slice_mut(s![o..o + dim]).assign(&j);
        }
        let corr_tau = dtau_a * dkappa_a;

        let (dx, dy, dz, ds, dtau, dkappa) = direction(sigma, Some(&corr), corr_tau, &kkt);
        let (alpha_raw, who_comb) = step_len(&dz, &ds, dtau, dkappa);
        let alpha = (STEP_FRACTION * alpha_raw).min(1.0);
        if !alpha.is_finite() || alpha <= 1e-11 {
            last_status = SolveStatus::NumericalFailure;
            diagnostics = format!("step length collapsed: alpha={alpha:.2e}");
            break;
        }

        if std::env::var("MFRIS_IPM_TRACE").is_ok() {
            eprintln!(
                "iter={iter} mu={mu:.3e} sigma={sigma:.3e} a_aff={alpha_aff:.3e} a={alpha:.3e} pres={pres:.3e} dres={dres:.3e} gap={gap:.3e} tau={tau:.3e} kappa={kappa:.3e} lim_aff={who_aff} lim={who_comb}"
            );
        }
        // Step-quality guard: late in the path the assembled normal
        // equations lose accuracy and a full step can wreck the iterate.
        // Evaluate the trial residuals and back off if they regress hard.
        let eval_crit = |x_t: &Array1<f64>, y_t: &Array1<f64>, z_t: &Array1<f64>, s_t: &Array1<f64>, tau_t: f64| -> f64 {
            let mut rx = work.apply_at_cone(z_t) + &c_arr.clone().mapv(|v| v * tau_t);
            if me > 0 {
                rx = rx + &l.a_eq.t().dot(y_t);
            }
            let rze = if me > 0 {
                l.a_eq.dot(x_t) - &l.b_eq.mapv(|v| v * tau_t)
            } else {
                Array1::zeros(0)
            };
            let rzk = s_t + &work.apply_a_cone(x_t) - &b_k.mapv(|v| v * tau_t);
            let p = (rze.dot(&rze) + rzk.dot(&rzk)).sqrt() / (tau_t * (1.0 + work.bnorm));
            let d = rx.dot(&rx).sqrt() / (tau_t * (1.0 + work.cnorm));
            let po = c_arr.dot(x_t) / tau_t;
            let dobj_t = -(l.b_eq.dot(y_t) + b_k.dot(z_t)) / tau_t;
            let g = (po - dobj_t).abs() / (1.0 + po.abs().max(dobj_t.abs()));
            p.max(d).max(g)
        };
        let mut step = alpha;
        let mut committed = false;
        for _ in 0..4 {
            let x_t = &x + &dx.mapv(|v| v * step);
            let y_t = if me > 0 { &y + &dy.mapv(|v| v * step) } else { y.clone() };
            let z_t = &z_vec + &dz.mapv(|v| v * step);
            let s_t = &s_vec + &ds.mapv(|v| v * step);
            let tau_t = tau + step * dtau;
            let kappa_t = kappa + step * dkappa;
            let crit_t = eval_crit(&x_t, &y_t, &z_t, &s_t, tau_t);
            if crit_t <= (4.0 * crit).max(opts.tol) || step < 1e-4 {
                x = x_t;
                y = y_t;
                z_vec = z_t;
                s_vec = s_t;
                tau = tau_t;
                kappa = kappa_t;
                committed = true;
                break;
            }
            step *= 0.25;
        }
        if !committed {
            last_status = SolveStatus::MaxIter;
            diagnostics = format!("no acceptable step below alpha={alpha:.2e}");
            break;
        }
    }

    let accept_tol = opts.tol * 100.0;
    if last_status != SolveStatus::Optimal
        && last_status != SolveStatus::Infeasible
        && best_crit <= accept_tol
    {
        diagnostics = format!(
            "accepted best iterate at reduced accuracy {best_crit:.2e} ({diagnostics})"
        );
        last_status = SolveStatus::Optimal;
    }
    match last_status {
        SolveStatus::Optimal => {
            let (bx, btau) = best_x.expect("optimal status implies a stored iterate");
            let mut assignment = vec![0.0; l.n_orig];
            for j in 0..l.n_orig {
                assignment[j] = l.col_scale[j] * bx[j] / btau;
            }
            let cx: f64 = c_arr.dot(&bx) / btau;
            let objective = -cx / l.obj_scale + l.obj_offset;
            SolveReport {
                status: SolveStatus::Optimal,
                objective,
                assignment: Some(assignment),
                iterations,
                wall_time_s: 0.0,
                diagnostics,
            }
        }
        status => SolveReport {
            status,
            objective: f64::NAN,
            assignment: None,
            iterations,
            wall_time_s: 0.0,
            diagnostics,
        },
    }
}
