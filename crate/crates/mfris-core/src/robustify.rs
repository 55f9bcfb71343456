//! Robustification transforms: the S-procedure and sign-definiteness lemmas,
//! the worst-case LMI constructions for the bounded error model, and the
//! Bernstein-type machinery for the statistical model.
//!
//! Builders are pure functions of the current iterates. Bilinear couplings
//! are resolved by the callers: every `AffMat` argument must be constant on
//! one side of each product (the alternating structure guarantees this), and
//! multiplier-times-amplitude terms are passed in as ready-made affine
//! expressions.
//!
//! Error-vector convention used throughout (matching the column-stacking
//! `vec`): the stacked uncertainty is `x = [Δh^H; vec(ΔF^*); Δf^H]` so that
//! every quadratic form below is Hermitian in `x` with the effective channel
//! written as `h̄ = h + u^T F`.

use crate::conic::cx::{vstack, AffMat, CxExpr};
use crate::conic::{ConicProgram, LinExpr, LmiBlock, VarId};
use crate::linalg::{C64, CMatrix, CVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RobustifyError {
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("covariance factor must be PSD")]
    NonPsdCovariance,
}

// ---------------------------------------------------------------------------
// Lemma transforms
// ---------------------------------------------------------------------------

/// One premise `f_i(x) = x^H B_i x + 2Re{b_i^H x} + b_i ≥ 0` of the
/// S-procedure.
#[derive(Debug, Clone)]
pub struct Premise {
    pub b_mat: CMatrix,
    pub b_vec: CVector,
    pub b_scalar: f64,
}

impl Premise {
    /// Ball premise `‖Sel·x‖ ≤ radius` as `radius² − x^H Sel x ≥ 0` for a PSD
    /// selector (typically a block of the identity).
    pub fn ball(selector: CMatrix, radius: f64) -> Self {
        let n = selector.rows;
        Self {
            b_mat: selector.scale(C64::new(-1.0, 0.0)),
            b_vec: CVector::zeros(n),
            b_scalar: radius * radius,
        }
    }
}

/// Target quadratic form `f_0(x) = x^H B_0 x + 2Re{b_0^H x} + b_0 ≥ 0` with
/// affine coefficients.
#[derive(Debug, Clone)]
pub struct QuadraticUncertainForm {
    pub b0_mat: AffMat,
    pub b0_vec: AffMat,
    pub b0_scalar: LinExpr,
    pub premises: Vec<Premise>,
}

/// General S-procedure: `{f_i(x) ≥ 0}ᵢ → f_0(x) ≥ 0` holds whenever the
/// returned block is PSD for some multipliers `ω_i ≥ 0` (one per premise).
pub fn s_procedure(form: &QuadraticUncertainForm, multipliers: &[VarId]) -> LmiBlock {
    let n = form.b0_mat.rows;
    assert_eq!(form.b0_mat.cols, n, "B0 must be square");
    assert_eq!(form.b0_vec.rows, n, "b0 length mismatch");
    assert_eq!(
        form.premises.len(),
        multipliers.len(),
        "one multiplier per premise"
    );
    let mut block = AffMat::zeros(n + 1, n + 1);
    block.set_block(0, 0, &form.b0_mat);
    block.set_block(0, n, &form.b0_vec);
    block.set_block(n, 0, &form.b0_vec.adjoint());
    block.set_block(n, n, &AffMat::from_scalar(&CxExpr::from_real(form.b0_scalar.clone())));
    for (p, &omega) in form.premises.iter().zip(multipliers) {
        assert_eq!(p.b_mat.rows, n, "premise dimension mismatch");
        let mut corr = AffMat::zeros(n + 1, n + 1);
        let mut coeff = CMatrix::zeros(n + 1, n + 1);
        coeff.set_block(0, 0, &p.b_mat.scale(C64::new(-1.0, 0.0)));
        for i in 0..n {
            coeff[(i, n)] = -p.b_vec[i];
            coeff[(n, i)] = -p.b_vec[i].conj();
        }
        coeff[(n, n)] = C64::new(-p.b_scalar, 0.0);
        corr.terms.insert(omega.0, coeff);
        block = block.add(&corr);
    }
    block.into_lmi()
}

impl AffMat {
    /// 1×1 matrix expression from a complex scalar expression.
    pub fn from_scalar(e: &CxExpr) -> AffMat {
        AffMat::col_from_exprs(std::slice::from_ref(e))
    }

    /// Diagonal matrix expression from a column expression.
    pub fn diag_from_col(col: &AffMat) -> AffMat {
        assert_eq!(col.cols, 1);
        let n = col.rows;
        let mut out = AffMat::zeros(n, n);
        out.cst = CMatrix::from_fn(n, n, |i, j| {
            if i == j {
                col.cst[(i, 0)]
            } else {
                C64::new(0.0, 0.0)
            }
        });
        for (&v, m) in &col.terms {
            let d = CMatrix::from_fn(n, n, |i, j| {
                if i == j {
                    m[(i, 0)]
                } else {
                    C64::new(0.0, 0.0)
                }
            });
            out.terms.insert(v, d);
        }
        out
    }
}

/// General sign-definiteness (norm-bounded matrix uncertainty): the implication
/// `B ⪰ Σᵢ (Aᵢ^H Xᵢ Dᵢ + Dᵢ^H Xᵢ^H Aᵢ)` for all `‖Xᵢ‖_F ≤ ζᵢ` holds iff the
/// returned block is PSD for some `υᵢ ≥ 0` (with constant `Aᵢ (pᵢ×n)`,
/// `Dᵢ (qᵢ×n)` and `Xᵢ (pᵢ×qᵢ)`).
pub fn sign_definiteness(
    b: &AffMat,
    pairs: &[(CMatrix, CMatrix)],
    bounds: &[f64],
    multipliers: &[VarId],
) -> LmiBlock {
    let n = b.rows;
    assert_eq!(b.cols, n);
    assert_eq!(pairs.len(), bounds.len());
    assert_eq!(pairs.len(), multipliers.len());
    let total: usize = n + pairs.iter().map(|(a, _)| a.rows).sum::<usize>();
    let mut block = AffMat::zeros(total, total);
    // Top-left: B − Σ υᵢ Dᵢ^H Dᵢ.
    let mut tl = b.clone();
    for ((_, d), &ups) in pairs.iter().zip(multipliers) {
        assert_eq!(d.cols, n, "D must have n columns");
        let dd = d.h().matmul(d);
        let mut corr = AffMat::zeros(n, n);
        corr.terms.insert(ups.0, dd.scale(C64::new(-1.0, 0.0)));
        tl = tl.add(&corr);
    }
    block.set_block(0, 0, &tl);
    let mut row = n;
    for (((a, _), &zeta), &ups) in pairs.iter().zip(bounds).zip(multipliers) {
        assert_eq!(a.cols, n, "A must have n columns");
        let p = a.rows;
        let neg_za = AffMat::constant(a.scale(C64::new(-zeta, 0.0)));
        block.set_block(row, 0, &neg_za);
        block.set_block(0, row, &neg_za.adjoint());
        let mut diag = AffMat::zeros(p, p);
        diag.terms.insert(ups.0, CMatrix::identity(p));
        block.set_block(row, row, &diag);
        row += p;
    }
    block.into_lmi()
}

// ---------------------------------------------------------------------------
// Bounded-model LMI builders
// ---------------------------------------------------------------------------

/// Effective-channel row `(h + u^T F)` as a 1×N expression (affine whenever
/// one of the parts is frozen).
pub fn effective_row_expr(h_hat: &CVector, cascade_hat: &CMatrix, u_expr: &AffMat) -> AffMat {
    let n = cascade_hat.cols;
    let h_row = AffMat::constant(h_hat.unvec(h_hat.len(), 1).transpose());
    let through = u_expr.transpose().matmul(&AffMat::constant(cascade_hat.clone()));
    assert_eq!(through.cols, n);
    h_row.add(&through)
}

pub struct SignalLmiInputs<'a> {
    /// Beam variable/constant (N×1) and its expansion point.
    pub w_expr: &'a AffMat,
    pub w_hat: &'a CVector,
    /// Surface variable/constant (M×1) and its expansion point.
    pub u_expr: &'a AffMat,
    pub u_hat: &'a CVector,
    pub h_hat: &'a CVector,
    pub cascade_hat: &'a CMatrix,
    pub xi_h: f64,
    pub xi_cascade: f64,
    /// Slack lower-bounding the robust signal power.
    pub alpha: VarId,
    pub omega_h: VarId,
    pub omega_cascade: VarId,
}

/// Robust signal-power LMI: certifies `|h̄ w|² ≥ α` over both error balls via
/// the SCA tangent of the bilinear product and the two-ball S-procedure. The
/// uncertainty stack is `x = [Δh^H; vec(ΔF^*)]` of length `N + MN`.
pub fn build_signal_lmi(inp: &SignalLmiInputs) -> LmiBlock {
    let n = inp.h_hat.len();
    let m = inp.u_hat.len();
    let dim = n + m * n;
    // g(w, u) = [w; w ⊗ u]: the error-facing linear map.
    let ghat = {
        let mut v = CVector::zeros(dim);
        for i in 0..n {
            v[i] = inp.w_hat[i];
        }
        let kron = inp.w_hat.kron(inp.u_hat);
        for i in 0..(m * n) {
            v[n + i] = kron[i];
        }
        v.unvec(dim, 1)
    };
    let g_expr = vstack(&[inp.w_expr, &inp.w_expr.kron(inp.u_expr)]);
    // Nominal signal amplitudes q0 = h̄ w (affine) and its expansion value.
    let hbar_expr = effective_row_expr(inp.h_hat, inp.cascade_hat, inp.u_expr);
    let hbar_hat = {
        let through = inp.u_hat.row_times_mat(inp.cascade_hat);
        &through + inp.h_hat
    };
    let q0_expr = hbar_expr.matmul(inp.w_expr);
    let q0_hat = hbar_hat.row_dot(inp.w_hat);
    // A = ĝ g^H + g ĝ^H − ĝ ĝ^H.
    let ghat_aff = AffMat::constant(ghat.clone());
    let a_mat = ghat_aff
        .matmul(&g_expr.adjoint())
        .add(&g_expr.matmul(&ghat_aff.adjoint()))
        .sub(&AffMat::constant(ghat.matmul(&ghat.h())));
    // a = g·q̂0^* + ĝ·q0^* − ĝ·q̂0^*.
    let q0_conj = AffMat::from_scalar(&q0_expr.entry(0, 0).conj());
    let a_vec = g_expr
        .scale(q0_hat.conj())
        .add(&ghat_aff.matmul(&q0_conj))
        .sub(&AffMat::constant(ghat.scale(q0_hat.conj())));
    // a_s = 2Re{q̂0^* q0} − |q̂0|² − α.
    let mut a_scalar = q0_expr.entry(0, 0).scale(q0_hat.conj()).re.scaled(2.0);
    a_scalar.constant -= q0_hat.norm_sqr();
    a_scalar.push(inp.alpha, -1.0);

    let mut sel_h = CMatrix::zeros(dim, dim);
    for i in 0..n {
        sel_h[(i, i)] = C64::new(1.0, 0.0);
    }
    let mut sel_f = CMatrix::zeros(dim, dim);
    for i in n..dim {
        sel_f[(i, i)] = C64::new(1.0, 0.0);
    }
    let form = QuadraticUncertainForm {
        b0_mat: a_mat,
        b0_vec: a_vec,
        b0_scalar: a_scalar,
        premises: vec![
            Premise::ball(sel_h, inp.xi_h),
            Premise::ball(sel_f, inp.xi_cascade),
        ],
    };
    s_procedure(&form, &[inp.omega_h, inp.omega_cascade])
}

pub struct InterferenceLmiInputs<'a> {
    /// Other users' beams stacked as N×(K−1) (affine or constant).
    pub w_others: &'a AffMat,
    pub u_expr: &'a AffMat,
    pub h_hat: &'a CVector,
    pub cascade_hat: &'a CMatrix,
    pub xi_h: f64,
    pub xi_cascade: f64,
    pub eta: VarId,
    pub noise_slack: VarId,
    /// υ_h, υ_F as expressions (frozen to constants in the surface step).
    pub ups_h: LinExpr,
    pub ups_cascade: LinExpr,
    /// Affine representation of υ_F·Σ_m β_m^c.
    pub ups_cascade_beta: LinExpr,
    pub sigma2_sq: f64,
}

/// Robust interference bound: `‖h̄ W₋‖² + 𝒜 + σ₂² ≤ η` over the h/F error
/// balls, as the 4-block sign-definiteness LMI of size `K + 2N`.
pub fn build_interference_lmi(inp: &InterferenceLmiInputs) -> LmiBlock {
    let n = inp.h_hat.len();
    let k1 = inp.w_others.cols; // K − 1
    let dim = 1 + k1 + 2 * n;
    let mut block = AffMat::zeros(dim, dim);
    // (0,0): η − 𝒜 − σ2² − υ_h − υ_F Σβ.
    let mut t = LinExpr::var(inp.eta);
    t.push(inp.noise_slack, -1.0);
    t.constant -= inp.sigma2_sq;
    t.add_expr(&inp.ups_h, -1.0);
    t.add_expr(&inp.ups_cascade_beta, -1.0);
    block.set_block(0, 0, &AffMat::from_scalar(&CxExpr::from_real(t)));
    // (0,1): t = h̄ W₋.
    let hbar_expr = effective_row_expr(inp.h_hat, inp.cascade_hat, inp.u_expr);
    let t_row = hbar_expr.matmul(inp.w_others);
    block.set_block(0, 1, &t_row);
    block.set_block(1, 0, &t_row.adjoint());
    // (1,1): I_{K−1}.
    block.set_block(1, 1, &AffMat::constant(CMatrix::identity(k1)));
    // (1,2): ξ_F W₋^H ; (1,3): ξ_h W₋^H.
    let wh = inp.w_others.adjoint();
    block.set_block(1, 1 + k1, &wh.scale(C64::new(inp.xi_cascade, 0.0)));
    block.set_block(1 + k1, 1, &inp.w_others.scale(C64::new(inp.xi_cascade, 0.0)));
    block.set_block(1, 1 + k1 + n, &wh.scale(C64::new(inp.xi_h, 0.0)));
    block.set_block(1 + k1 + n, 1, &inp.w_others.scale(C64::new(inp.xi_h, 0.0)));
    // (2,2): υ_F I_N ; (3,3): υ_h I_N.
    let scaled_eye = |e: &LinExpr, d: usize| {
        let mut m = AffMat::zeros(d, d);
        m.cst = CMatrix::identity(d).scale(C64::new(e.constant, 0.0));
        for &(v, c) in &e.terms {
            m.terms
                .insert(v.0, CMatrix::identity(d).scale(C64::new(c, 0.0)));
        }
        m
    };
    block.set_block(1 + k1, 1 + k1, &scaled_eye(&inp.ups_cascade, n));
    block.set_block(1 + k1 + n, 1 + k1 + n, &scaled_eye(&inp.ups_h, n));
    block.into_lmi()
}

pub struct NoiseLmiInputs<'a> {
    pub f_hat: &'a CVector,
    pub u_expr: &'a AffMat,
    pub xi_f: f64,
    pub noise_slack: VarId,
    pub ups_f: VarId,
    pub sigma1: f64,
}

/// Robust amplified-noise bound: `𝒜 ≥ σ1²‖f Θ_c‖²` over the f error ball,
/// as the 3-block LMI of size `2M + 1`.
pub fn build_noise_lmi(inp: &NoiseLmiInputs) -> LmiBlock {
    let m = inp.f_hat.len();
    let dim = 1 + 2 * m;
    let mut block = AffMat::zeros(dim, dim);
    let mut corner = LinExpr::var(inp.noise_slack);
    corner.push(inp.ups_f, -1.0);
    block.set_block(0, 0, &AffMat::from_scalar(&CxExpr::from_real(corner)));
    // (0,1): σ1 · fΘ = σ1 · (f̂ ∘ u)^T.
    let f_theta = AffMat::diag_from_col(&AffMat::constant(inp.f_hat.unvec(m, 1)))
        .matmul(inp.u_expr)
        .transpose()
        .scale(C64::new(inp.sigma1, 0.0));
    block.set_block(0, 1, &f_theta);
    block.set_block(1, 0, &f_theta.adjoint());
    block.set_block(1, 1, &AffMat::constant(CMatrix::identity(m)));
    // (1,2): ξ_f σ1 Θ^H.
    let theta_h = AffMat::diag_from_col(&inp.u_expr.conj())
        .scale(C64::new(inp.xi_f * inp.sigma1, 0.0));
    block.set_block(1, 1 + m, &theta_h);
    block.set_block(1 + m, 1, &theta_h.adjoint());
    let mut ups_eye = AffMat::zeros(m, m);
    ups_eye.terms.insert(inp.ups_f.0, CMatrix::identity(m));
    block.set_block(1 + m, 1 + m, &ups_eye);
    block.into_lmi()
}

pub struct RobustPowerInputs<'a> {
    /// Stacked beams N×K (affine or constant).
    pub w_mat: &'a AffMat,
    /// Surface columns per space (affine or constant), reflection first.
    pub u_exprs: [&'a AffMat; 2],
    pub g_hat: &'a CMatrix,
    /// Per-space slack receiving the robust amplification-power bound
    /// `sup ‖Θ_c(Ĝ+ΔG)W‖_F² ≤ q_c`.
    pub q: [VarId; 2],
    /// S-procedure multipliers ς_c.
    pub mult: [VarId; 2],
    /// Affine expression of `ς_c · r_c²` with `r_c` the premise radius on
    /// `‖vec(Θ_c ΔG)‖` (supplied by the caller: a plain `ς·r²` term when the
    /// surface is frozen, a convex upper bound otherwise).
    pub mult_radius_sq: [LinExpr; 2],
}

/// Worst-case amplification power over the G error ball, per space, as a
/// Schur-lifted S-procedure block of size `MN + 1 + MK`. The corresponding
/// budget rows (`Σ_c q_c + σ1²Σ_c‖Θ_c‖² ≤ P` and the total-power version)
/// are linear and added by the caller.
pub fn build_robust_power_blocks(inp: &RobustPowerInputs) -> Vec<LmiBlock> {
    let m = inp.g_hat.rows;
    let n = inp.g_hat.cols;
    let k = inp.w_mat.cols;
    assert_eq!(inp.w_mat.rows, n);
    // L = conj(W) ⊗ I_M so that B = LL^H reproduces ‖Θ G W‖_F².
    let l_expr = inp
        .w_mat
        .conj()
        .kron(&AffMat::constant(CMatrix::identity(m)));
    let mut blocks = Vec::new();
    for c in 0..2 {
        let u = inp.u_exprs[c];
        assert_eq!(u.rows, m);
        let ybar = AffMat::diag_from_col(u)
            .matmul(&AffMat::constant(inp.g_hat.clone()))
            .vec();
        let ytl = ybar.adjoint().matmul(&l_expr);
        let dim = m * n + 1 + m * k;
        let mut block = AffMat::zeros(dim, dim);
        let mut mult_eye = AffMat::zeros(m * n, m * n);
        mult_eye.terms.insert(inp.mult[c].0, CMatrix::identity(m * n));
        block.set_block(0, 0, &mult_eye);
        block.set_block(0, m * n + 1, &l_expr);
        block.set_block(m * n + 1, 0, &l_expr.adjoint());
        let mut corner = LinExpr::var(inp.q[c]);
        corner.add_expr(&inp.mult_radius_sq[c], -1.0);
        block.set_block(
            m * n,
            m * n,
            &AffMat::from_scalar(&CxExpr::from_real(corner)),
        );
        block.set_block(m * n, m * n + 1, &ytl);
        block.set_block(m * n + 1, m * n, &ytl.adjoint());
        block.set_block(
            m * n + 1,
            m * n + 1,
            &AffMat::constant(CMatrix::identity(m * k)),
        );
        blocks.push(block.into_lmi());
    }
    blocks
}

/// Sound premise radius for `‖vec(Θ_c ΔG)‖` given `‖ΔG‖_F ≤ ξ_G`:
/// `ξ_G · √(max_m β_m^c)` (the spectral norm of Θ_c). Coincides with the
/// `ξ_G‖Θ_c‖_F/√M` form when the amplitude profile is uniform.
pub fn power_premise_radius(xi_g: f64, u_hat: &CVector) -> f64 {
    let beta_max = (0..u_hat.len())
        .map(|i| u_hat[i].norm_sqr())
        .fold(0.0f64, f64::max);
    xi_g * beta_max.sqrt()
}

// ---------------------------------------------------------------------------
// Statistical machinery
// ---------------------------------------------------------------------------

/// Mean of `G X G^H` for `G = Ĝ + A^(1/2) G_w B^(T/2)` with row/column
/// covariances `A`, `B`: `Ĝ X Ĝ^H + Tr(X Bᵀ)·A`.
pub fn expected_quadratic(
    g_hat: &CMatrix,
    x: &CMatrix,
    row_cov: &CMatrix,
    col_cov: &CMatrix,
) -> Result<CMatrix, RobustifyError> {
    if !row_cov.is_psd(1e-9).map_err(|_| RobustifyError::NonPsdCovariance)?
        || !col_cov.is_psd(1e-9).map_err(|_| RobustifyError::NonPsdCovariance)?
    {
        return Err(RobustifyError::NonPsdCovariance);
    }
    if g_hat.cols != x.rows || x.rows != x.cols {
        return Err(RobustifyError::DimMismatch(format!(
            "expected_quadratic: G is {}x{}, X is {}x{}",
            g_hat.rows, g_hat.cols, x.rows, x.cols
        )));
    }
    let mean = g_hat.matmul(x).matmul(&g_hat.h());
    let tr = x.matmul(&col_cov.transpose()).trace();
    Ok(&mean + &row_cov.scale(tr))
}

/// Expected surface power `Tr{Ψ Q} + Tr(Ψ)σ1²` with
/// `Q = Ĝ W̃ Ĝ^H + ϖ_G²·Tr(W̃)·I_M`, affine in whichever of `Ψ`, `W̃` carries
/// variables (the other must be constant).
pub fn expected_ris_power(
    psi: &AffMat,
    g_hat: &CMatrix,
    w_tilde: &AffMat,
    var_g: f64,
    sigma1_sq: f64,
) -> LinExpr {
    let m = g_hat.rows;
    assert!(psi.is_constant() || w_tilde.is_constant());
    // Q = Ĝ W̃ Ĝ^H + ϖ_G² Tr(W̃) I_M (affine in W̃).
    let q = {
        let gwg = w_tilde
            .lmul(g_hat)
            .rmul(&g_hat.h());
        let tr = w_tilde.re_trace();
        let mut eye_term = AffMat::zeros(m, m);
        eye_term.cst = CMatrix::identity(m).scale(C64::new(var_g * tr.constant, 0.0));
        for &(v, c) in &tr.terms {
            eye_term
                .terms
                .insert(v.0, CMatrix::identity(m).scale(C64::new(var_g * c, 0.0)));
        }
        gwg.add(&eye_term)
    };
    let trace_psi_q = if psi.is_constant() {
        q.lmul(&psi.cst).re_trace()
    } else {
        psi.rmul(&q.cst).re_trace()
    };
    trace_psi_q.plus(&psi.re_trace().scaled(sigma1_sq))
}

/// How the squared-norm bound of a Bernstein block is expressed.
pub enum NormSqExpr {
    /// `Σ‖argᵢ‖²` of weighted affine complex entries (beamforming side);
    /// `neg_const` records the clamped negative contribution.
    Quadratic { weighted_args: Vec<CxExpr>, neg_const: f64 },
    /// Taylor-linearized affine expression (surface side).
    Affine(LinExpr),
}

/// The deterministic pieces feeding the Bernstein-type conditions.
pub struct BernsteinBlock {
    /// Affine `Tr{E}`.
    pub trace_expr: LinExpr,
    /// Affine constant term `e` of the quadratic form.
    pub e_scalar_expr: LinExpr,
    /// `‖E‖_F² + 2‖e‖²` (or its linearization).
    pub norm_sq: NormSqExpr,
    /// Reduced spectral block `B` with `ỹI + B ⪰ 0` (dimension M+N).
    pub spectral: AffMat,
}

pub struct BernsteinWInputs<'a> {
    /// C = W_k/(2^r−1) − Σ_{j≠k} W_j, Hermitian-affine N×N.
    pub c_expr: &'a AffMat,
    pub u_hat: &'a CVector,
    pub h_hat: &'a CVector,
    pub f_hat: &'a CVector,
    pub cascade_hat: &'a CMatrix,
    pub var_h: f64,
    pub var_cascade: f64,
    pub var_f: f64,
    pub sigma1_sq: f64,
    pub sigma2_sq: f64,
}

/// Bernstein block for the beamforming subproblem (surface frozen):
/// trace/norm/spectral reductions of the error quadratic form with
/// `k₁ = ϖ_h² + ϖ_F²Σβ`.
pub fn bernstein_blocks_w(inp: &BernsteinWInputs) -> BernsteinBlock {
    let n = inp.h_hat.len();
    let m = inp.u_hat.len();
    let beta_sum = inp.u_hat.norm_sqr();
    let phi: Vec<f64> = (0..m).map(|i| inp.u_hat[i].norm_sqr()).collect();
    let phi_mat = CMatrix::diag_real(&phi);
    let k1 = inp.var_h + inp.var_cascade * beta_sum;
    let trace_phi = beta_sum;

    let trace_expr = inp
        .c_expr
        .re_trace()
        .scaled(k1)
        .shifted(-inp.sigma1_sq * inp.var_f * trace_phi);

    // e = h̄ C h̄^H − σ1² f̂ Φ f̂^H − σ2².
    let hbar = {
        let through = inp.u_hat.row_times_mat(inp.cascade_hat);
        &through + inp.h_hat
    };
    let hbar_row = AffMat::constant(hbar.unvec(n, 1).transpose());
    let quad = hbar_row
        .matmul(inp.c_expr)
        .matmul(&AffMat::constant(hbar.conj().unvec(n, 1)));
    let f_phi_f: f64 = (0..m)
        .map(|i| inp.f_hat[i].norm_sqr() * phi[i])
        .sum();
    let e_scalar_expr = quad
        .entry(0, 0)
        .re
        .shifted(-inp.sigma1_sq * f_phi_f - inp.sigma2_sq);

    // ‖E‖² + 2‖e‖² = k₁²‖C‖² + 2k₁‖h̄C‖² − (σ1⁴ϖ_f⁴‖Φ‖² + 2σ1⁴ϖ_f²‖f̂Φ‖²).
    let mut weighted_args = Vec::new();
    let wc = k1; // √(k₁²)
    for i in 0..n {
        for j in 0..n {
            weighted_args.push(inp.c_expr.entry(i, j).scale(C64::new(wc, 0.0)));
        }
    }
    let row_c = hbar_row.matmul(inp.c_expr);
    let we = (2.0 * k1).sqrt();
    for j in 0..n {
        weighted_args.push(row_c.entry(0, j).scale(C64::new(we, 0.0)));
    }
    let s14 = inp.sigma1_sq * inp.sigma1_sq;
    let f_phi_norm_sq: f64 = (0..m)
        .map(|i| (inp.f_hat[i].conj() * phi[i]).norm_sqr())
        .sum();
    let neg_const = s14 * inp.var_f * inp.var_f * phi_mat.frob_norm_sqr()
        + 2.0 * s14 * inp.var_f * f_phi_norm_sq;

    // Spectral block blkdiag(k₁·C, −σ1²ϖ_f²·Φ).
    let mut spectral = AffMat::zeros(n + m, n + m);
    spectral.set_block(0, 0, &inp.c_expr.scale(C64::new(k1, 0.0)));
    spectral.set_block(
        n,
        n,
        &AffMat::constant(phi_mat.scale(C64::new(-inp.sigma1_sq * inp.var_f, 0.0))),
    );

    BernsteinBlock {
        trace_expr,
        e_scalar_expr,
        norm_sq: NormSqExpr::Quadratic { weighted_args, neg_const },
        spectral,
    }
}

pub struct BernsteinVInputs<'a> {
    /// Lifted surface variable V_c ((M+1)×(M+1), Hermitian-affine); its
    /// principal M×M block is Φ_c.
    pub v_expr: &'a AffMat,
    /// Expansion point Φ^(τ) for the Taylor terms.
    pub phi_hat: &'a CMatrix,
    /// Frozen Σβ for the ẽ coefficient (previous iterate).
    pub beta_sum_hat: f64,
    /// C matrix, constant in this subproblem.
    pub c_mat: &'a CMatrix,
    pub h_hat: &'a CVector,
    pub f_hat: &'a CVector,
    pub cascade_hat: &'a CMatrix,
    pub var_h: f64,
    pub var_cascade: f64,
    pub var_f: f64,
    pub sigma1_sq: f64,
    pub sigma2_sq: f64,
}

/// Bernstein block for the surface subproblem (beams frozen): the lifted
/// `Tr(Ĥ C Ĥ^H V)` form with Taylor-linearized `‖Φ‖_F²` and `‖f̂Φ‖²`.
pub fn bernstein_blocks_v(inp: &BernsteinVInputs) -> BernsteinBlock {
    let n = inp.h_hat.len();
    let m = inp.f_hat.len();
    let phi_expr = principal_block(inp.v_expr, m);
    let trace_phi = phi_expr.re_trace();
    let c_trace = inp.c_mat.trace().re;

    // Tr{E} = (ϖ_h² + ϖ_F² TrΦ)TrC − σ1²ϖ_f²TrΦ.
    let trace_expr = trace_phi
        .scaled(inp.var_cascade * c_trace - inp.sigma1_sq * inp.var_f)
        .shifted(inp.var_h * c_trace);

    // ē = Tr(Ĥ C Ĥ^H V) − σ1² f̂ Φ f̂^H − σ2².
    let hmat = stack_cascade(inp.cascade_hat, inp.h_hat);
    let hch = hmat.matmul(inp.c_mat).matmul(&hmat.h());
    let e_quad = inp.v_expr.lmul(&hch).re_trace();
    let f_row = AffMat::constant(inp.f_hat.unvec(m, 1).transpose());
    let f_phi_f = f_row
        .matmul(&phi_expr)
        .matmul(&AffMat::constant(inp.f_hat.conj().unvec(m, 1)))
        .entry(0, 0)
        .re;
    let e_scalar_expr = e_quad
        .plus(&f_phi_f.scaled(-inp.sigma1_sq))
        .shifted(-inp.sigma2_sq);

    // Taylor linearizations at Φ^(τ): ‖Φ‖² ≈ Tr(2Re(Φ̂^H Φ) − Φ̂^H Φ̂) and
    // ‖f̂Φ‖² ≈ 2Re{(f̂Φ̂)(f̂Φ)^H} − ‖f̂Φ̂‖².
    let phi_lin = {
        let cross = phi_expr.lmul(&inp.phi_hat.h()).re_trace().scaled(2.0);
        cross.shifted(-inp.phi_hat.frob_norm_sqr())
    };
    let f_phi_lin = {
        let f_phi_hat = {
            let mut v = CVector::zeros(m);
            for j in 0..m {
                let mut acc = C64::new(0.0, 0.0);
                for i in 0..m {
                    acc += inp.f_hat[i] * inp.phi_hat[(i, j)];
                }
                v[j] = acc;
            }
            v
        };
        let f_phi_expr = f_row.matmul(&phi_expr);
        let mut cross = LinExpr::zero();
        for j in 0..m {
            let e = f_phi_expr.entry(0, j).scale(f_phi_hat[j].conj());
            cross.add_expr(&e.re, 2.0);
        }
        cross.shifted(-f_phi_hat.norm_sqr())
    };
    // Ẽ + 2ẽ as one affine expression.
    let s14 = inp.sigma1_sq * inp.sigma1_sq;
    let c_frob_sq = inp.c_mat.frob_norm_sqr();
    let mut norm_sq = LinExpr::constant(inp.var_h * inp.var_h * c_frob_sq);
    norm_sq.add_expr(
        &trace_phi,
        2.0 * inp.var_h * inp.var_cascade * c_frob_sq,
    );
    norm_sq.add_expr(
        &phi_lin,
        inp.var_cascade * inp.var_cascade * c_frob_sq - s14 * inp.var_f * inp.var_f,
    );
    // 2ẽ.
    let hcc = hmat
        .matmul(&inp.c_mat.matmul(&inp.c_mat.h()))
        .matmul(&hmat.h());
    let e_tilde_quad = inp.v_expr.lmul(&hcc).re_trace();
    norm_sq.add_expr(&f_phi_lin, -2.0 * s14 * inp.var_f);
    norm_sq.add_expr(
        &e_tilde_quad,
        2.0 * (inp.var_h + inp.var_cascade * inp.beta_sum_hat),
    );

    // Spectral block blkdiag((ϖ_h² + ϖ_F²TrΦ)·C, −σ1²ϖ_f²·Φ).
    let mut spectral = AffMat::zeros(n + m, n + m);
    let mut kc = AffMat::constant(inp.c_mat.scale(C64::new(
        inp.var_h + inp.var_cascade * trace_phi.constant,
        0.0,
    )));
    for &(v, coeff) in &trace_phi.terms {
        kc.terms
            .insert(v.0, inp.c_mat.scale(C64::new(inp.var_cascade * coeff, 0.0)));
    }
    spectral.set_block(0, 0, &kc);
    spectral.set_block(
        n,
        n,
        &phi_expr.scale(C64::new(-inp.sigma1_sq * inp.var_f, 0.0)),
    );

    BernsteinBlock {
        trace_expr,
        e_scalar_expr,
        norm_sq: NormSqExpr::Affine(norm_sq),
        spectral,
    }
}

/// Principal m×m block of a matrix expression.
pub fn principal_block(v: &AffMat, m: usize) -> AffMat {
    let mut out = AffMat::zeros(m, m);
    out.cst = v.cst.block(0, 0, m, m);
    for (&var, mat) in &v.terms {
        let b = mat.block(0, 0, m, m);
        if b.max_abs() > 0.0 {
            out.terms.insert(var, b);
        }
    }
    out
}

/// Stacked channel `Ĥ = [F̂; ĥ]` of size (M+1)×N.
pub fn stack_cascade(cascade: &CMatrix, h: &CVector) -> CMatrix {
    let m = cascade.rows;
    let n = cascade.cols;
    CMatrix::from_fn(m + 1, n, |i, j| {
        if i < m {
            cascade[(i, j)]
        } else {
            h[j]
        }
    })
}

/// Emit the three Lemma-3 conditions for one user:
/// `Tr{E} − √(2 ln(1/ρ))·x̃ + ln(ρ)·ỹ + e ≥ 0`, the squared-norm bound
/// `‖E‖² + 2‖e‖² ≤ x_sq_upper`, and the spectral `ỹI + B ⪰ 0`, `ỹ ≥ 0`.
pub fn bernstein_constraints(
    prog: &mut ConicProgram,
    block: &BernsteinBlock,
    x_tilde: VarId,
    y_tilde: VarId,
    rho: f64,
    x_sq_upper: LinExpr,
) {
    assert!(rho > 0.0 && rho < 1.0, "outage level must be in (0,1)");
    let sqrt_term = (2.0 * (1.0 / rho).ln()).sqrt();
    let mut lin = block.trace_expr.plus(&block.e_scalar_expr);
    lin.push(x_tilde, -sqrt_term);
    lin.push(y_tilde, rho.ln());
    prog.add_ineq(lin);
    prog.add_lower_bound(x_tilde, 0.0);
    prog.add_lower_bound(y_tilde, 0.0);
    match &block.norm_sq {
        NormSqExpr::Quadratic { weighted_args, neg_const } => {
            if *neg_const > 0.0 {
                log::debug!(
                    "bernstein: clamped negative norm contribution {neg_const:.3e} to 0"
                );
            }
            let mut tail = Vec::with_capacity(2 * weighted_args.len());
            for a in weighted_args {
                tail.push(a.re.clone());
                tail.push(a.im.clone());
            }
            prog.add_quad_upper(x_sq_upper, tail);
        }
        NormSqExpr::Affine(e) => {
            prog.add_ineq(x_sq_upper.minus(e));
        }
    }
    // ỹ I + B ⪰ 0.
    let dim = block.spectral.rows;
    let mut eye = AffMat::zeros(dim, dim);
    eye.terms.insert(y_tilde.0, CMatrix::identity(dim));
    prog.add_lmi(block.spectral.add(&eye).into_lmi());
}

// ---------------------------------------------------------------------------
// Reference (explicit) error-quadratic assembly
// ---------------------------------------------------------------------------

/// Explicitly assembled `(E, e, e_s)` of the outage quadratic form
/// `x^H E x + 2Re{e^H x} + e_s` in the stacked standard-normal error
/// `x = [Δh^H/ϖ_h; vec(ΔF^*)/ϖ_F; Δf^H/ϖ_f]`. Reference construction used by
/// the oracle tests; the solvers use the scalarized reductions above.
pub fn explicit_error_quadratic(
    c: &CMatrix,
    u: &CVector,
    h_hat: &CVector,
    f_hat: &CVector,
    cascade_hat: &CMatrix,
    var_h: f64,
    var_cascade: f64,
    var_f: f64,
    sigma1_sq: f64,
    sigma2_sq: f64,
) -> (CMatrix, CVector, f64) {
    let n = h_hat.len();
    let m = u.len();
    let dim = n + m * n + m;
    let (sh, sf) = (var_h.sqrt(), var_cascade.sqrt());
    let sff = var_f.sqrt();
    let phi = CMatrix::diag_real(
        &(0..m).map(|i| u[i].norm_sqr()).collect::<Vec<_>>(),
    );
    let hbar = {
        let through = u.row_times_mat(cascade_hat);
        &through + h_hat
    };
    // E blocks.
    let mut e_mat = CMatrix::zeros(dim, dim);
    e_mat.set_block(0, 0, &c.scale(C64::new(var_h, 0.0)));
    let u_row = u.unvec(m, 1).transpose(); // 1×M, entries u_m
    let c_kron_uh = c.kron(&u_row.conj()); // C ⊗ u^H (N × MN)
    e_mat.set_block(0, n, &c_kron_uh.scale(C64::new(sh * sf, 0.0)));
    e_mat.set_block(n, 0, &c_kron_uh.h().scale(C64::new(sh * sf, 0.0)));
    let uu = u.outer(u); // u u^H
    e_mat.set_block(n, n, &c.kron(&uu).scale(C64::new(var_cascade, 0.0)));
    e_mat.set_block(
        n + m * n,
        n + m * n,
        &phi.scale(C64::new(-sigma1_sq * var_f, 0.0)),
    );
    // e blocks.
    let mut e_vec = CVector::zeros(dim);
    let chb = c.mul_vec(&hbar.conj()); // C h̄^H
    for i in 0..n {
        e_vec[i] = chb[i] * sh;
    }
    for i in 0..n {
        for j in 0..m {
            e_vec[n + i * m + j] = chb[i] * u[j] * sf;
        }
    }
    let phi_f = phi.mul_vec(&f_hat.conj()); // Φ f̂^H
    for j in 0..m {
        e_vec[n + m * n + j] = phi_f[j] * (-sigma1_sq * sff);
    }
    // Constant.
    let f_phi_f: f64 = (0..m).map(|i| f_hat[i].norm_sqr() * phi[(i, i)].re).sum();
    let quad = hbar.row_dot(&c.mul_vec(&hbar.conj())).re;
    let e_s = quad - sigma1_sq * f_phi_f - sigma2_sq;
    (e_mat, e_vec, e_s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conic::{SolveOptions, SolveStatus};
    use crate::linalg::C_ONE;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_cvec(rng: &mut ChaCha8Rng, n: usize) -> CVector {
        CVector::from_fn(n, |_| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
    }

    fn rand_hermitian(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
        let a = CMatrix::from_fn(n, n, |_, _| {
            C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        });
        (&a + &a.h()).scale(C64::new(0.5, 0.0))
    }

    fn ball_sample(rng: &mut ChaCha8Rng, dim: usize, radius: f64) -> CVector {
        let v = rand_cvec(rng, dim);
        let u: f64 = rng.gen();
        let s = radius * u.powf(1.0 / (2.0 * dim as f64)) / v.norm();
        v.scale(C64::new(s, 0.0))
    }

    /// Nested-ball implication: f1 = ξ²−‖x‖² ≥ 0 ⟹ f0 = c−‖x‖² ≥ 0 iff c ≥ ξ².
    #[test]
    fn s_procedure_nested_balls() {
        let n = 3;
        let xi = 0.8;
        for (c, feasible) in [(xi * xi + 0.05, true), (xi * xi - 0.05, false)] {
            let mut prog = ConicProgram::new();
            let omega = prog.add_var("omega");
            prog.add_lower_bound(omega, 0.0);
            let form = QuadraticUncertainForm {
                b0_mat: AffMat::constant(
                    CMatrix::identity(n).scale(C64::new(-1.0, 0.0)),
                ),
                b0_vec: AffMat::zeros(n, 1),
                b0_scalar: LinExpr::constant(c),
                premises: vec![Premise::ball(CMatrix::identity(n), xi)],
            };
            prog.add_lmi(s_procedure(&form, &[omega]));
            prog.maximize(LinExpr::term(omega, -1.0));
            let rep = prog.solve(&SolveOptions::default());
            if feasible {
                assert!(rep.is_optimal(), "c={c}: expected feasible, got {:?}", rep.status);
            } else {
                assert_eq!(rep.status, SolveStatus::Infeasible, "c={c}");
            }
        }
    }

    /// Zero-radius ball degenerates to the constraint at the center.
    #[test]
    fn s_procedure_zero_radius() {
        let n = 2;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b0 = rand_hermitian(&mut rng, n);
        let b0v = rand_cvec(&mut rng, n);
        for (c0, feasible) in [(0.4, true), (-0.4, false)] {
            let mut prog = ConicProgram::new();
            let omega = prog.add_var("omega");
            prog.add_lower_bound(omega, 0.0);
            let form = QuadraticUncertainForm {
                b0_mat: AffMat::constant(b0.scale(C64::new(0.02, 0.0))),
                b0_vec: AffMat::constant(b0v.scale(C64::new(0.02, 0.0)).unvec(n, 1)),
                b0_scalar: LinExpr::constant(c0),
                premises: vec![Premise::ball(CMatrix::identity(n), 0.0)],
            };
            prog.add_lmi(s_procedure(&form, &[omega]));
            prog.maximize(LinExpr::term(omega, -1.0));
            let rep = prog.solve(&SolveOptions::default());
            // f0(0) = c0: the LMI is feasible iff c0 ≥ 0 (ω can absorb the
            // rest when the radius is zero).
            assert_eq!(rep.is_optimal(), feasible, "c0={c0} status {:?}", rep.status);
        }
    }

    /// Random instance: if the LMI is feasible, then f0 ≥ −1e−7 on sampled
    /// in-ball errors.
    #[test]
    fn s_procedure_sampling_soundness() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 3;
        let xi = 0.5;
        for trial in 0..5 {
            let b0 = rand_hermitian(&mut rng, n);
            let b0v = rand_cvec(&mut rng, n).scale(C64::new(0.3, 0.0));
            let mut prog = ConicProgram::new();
            let omega = prog.add_var("omega");
            let c0 = prog.add_var("c0");
            prog.add_lower_bound(omega, 0.0);
            let mut scalar = LinExpr::var(c0);
            scalar.constant = 0.0;
            let form = QuadraticUncertainForm {
                b0_mat: AffMat::constant(b0.clone()),
                b0_vec: AffMat::constant(b0v.unvec(n, 1)),
                b0_scalar: scalar,
                premises: vec![Premise::ball(CMatrix::identity(n), xi)],
            };
            prog.add_lmi(s_procedure(&form, &[omega]));
            // Smallest certified constant.
            prog.maximize(LinExpr::term(c0, -1.0));
            let rep = prog.solve(&SolveOptions::default());
            assert!(rep.is_optimal(), "trial {trial}");
            let c0_val = rep.value(c0);
            for s in 0..10_000 {
                let x = if s % 2 == 0 {
                    ball_sample(&mut rng, n, xi)
                } else {
                    let v = rand_cvec(&mut rng, n);
                    v.scale(C64::new(xi / v.norm(), 0.0))
                };
                let f0 = x.dot(&b0.mul_vec(&x)).re + 2.0 * b0v.dot(&x).re + c0_val;
                assert!(f0 >= -1e-7, "trial {trial}: f0 = {f0} at sample {s}");
            }
        }
    }

    /// Degenerate sign-definiteness: no uncertainty reduces to B ⪰ 0.
    #[test]
    fn sign_definiteness_degenerate() {
        let n = 2;
        // B = diag(b, 1) with variable b: feasibility of the lemma block with
        // A = D = 0 must match b ≥ 0.
        for (bval, feasible) in [(0.5, true), (-0.5, false)] {
            let mut prog = ConicProgram::new();
            let b = prog.add_var("b");
            let ups = prog.add_var("ups");
            prog.add_lower_bound(ups, 0.0);
            prog.add_eq(LinExpr::var(b).shifted(-bval));
            let mut bmat = AffMat::constant(CMatrix::diag_real(&[0.0, 1.0]));
            let mut coeff = CMatrix::zeros(n, n);
            coeff[(0, 0)] = C_ONE;
            bmat.terms.insert(b.0, coeff);
            let block = sign_definiteness(
                &bmat,
                &[(CMatrix::zeros(1, n), CMatrix::zeros(1, n))],
                &[0.7],
                &[ups],
            );
            prog.add_lmi(block);
            prog.maximize(LinExpr::term(ups, -1.0));
            let rep = prog.solve(&SolveOptions::default());
            assert_eq!(rep.is_optimal(), feasible, "bval={bval}");
        }
    }

    /// Random sign-definiteness instance: feasible block ⟹ the perturbed
    /// matrix stays PSD (within slack) for sampled ‖X‖_F ≤ ζ.
    #[test]
    fn sign_definiteness_sampling_soundness() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 3;
        let zeta = 0.4;
        let a = CMatrix::from_fn(1, n, |_, j| C64::new(0.3 + j as f64 * 0.1, -0.2));
        let d = CMatrix::from_fn(1, n, |_, j| C64::new(0.1, 0.2 * j as f64));
        // B = s·I with variable s: find the smallest certified s.
        let mut prog = ConicProgram::new();
        let s_var = prog.add_var("s");
        let ups = prog.add_var("ups");
        prog.add_lower_bound(ups, 0.0);
        let mut bmat = AffMat::zeros(n, n);
        bmat.terms.insert(s_var.0, CMatrix::identity(n));
        let block = sign_definiteness(&bmat, &[(a.clone(), d.clone())], &[zeta], &[ups]);
        prog.add_lmi(block);
        prog.maximize(LinExpr::term(s_var, -1.0));
        let rep = prog.solve(&SolveOptions::default());
        assert!(rep.is_optimal());
        let s_val = rep.value(s_var);
        let b = CMatrix::identity(n).scale(C64::new(s_val, 0.0));
        for _ in 0..1000 {
            // X is 1×1 here.
            let x_entry = {
                let raw = C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
                raw * (zeta * rng.gen::<f64>() / raw.norm())
            };
            let x = CMatrix::from_fn(1, 1, |_, _| x_entry);
            let perturb = &a.h().matmul(&x).matmul(&d) + &d.h().matmul(&x.h()).matmul(&a);
            let diff = &b - &perturb;
            let min = diff.min_eigenvalue().unwrap();
            assert!(min >= -1e-7, "min eig {min}");
        }
    }

    /// Lemma 5 closed form: degenerate cases and Monte Carlo mean.
    #[test]
    fn expected_quadratic_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let m = 3;
        let n = 2;
        let g = CMatrix::from_fn(m, n, |_, _| {
            C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        });
        let x_raw = rand_hermitian(&mut rng, n);
        let x = &x_raw.matmul(&x_raw) + &CMatrix::identity(n); // PSD-ish, any Hermitian works
        // A = B = 0 → Ĝ X Ĝ^H.
        let zero_m = CMatrix::zeros(m, m);
        let zero_n = CMatrix::zeros(n, n);
        let got = expected_quadratic(&g, &x, &zero_m, &zero_n).unwrap();
        let want = g.matmul(&x).matmul(&g.h());
        assert!((&got - &want).max_abs() < 1e-12);
        // Ĝ = 0, A = I, B = I → Tr(X)·I.
        let got = expected_quadratic(
            &CMatrix::zeros(m, n),
            &x,
            &CMatrix::identity(m),
            &CMatrix::identity(n),
        )
        .unwrap();
        let want = CMatrix::identity(m).scale(x.trace());
        assert!((&got - &want).max_abs() < 1e-12);
        // Rejects non-PSD covariance.
        let neg = CMatrix::identity(m).scale(C64::new(-1.0, 0.0));
        assert!(expected_quadratic(&g, &x, &neg, &zero_n).is_err());
    }

    #[test]
    fn expected_quadratic_monte_carlo() {
        // E[G X G^H] with isotropic covariance ϖ² I_MN should match the
        // closed form within 1% relative over 1e5 draws.
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let m = 3;
        let n = 3;
        let g_hat = CMatrix::from_fn(m, n, |_, _| {
            C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        });
        let x_raw = CMatrix::from_fn(n, n, |_, _| {
            C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        });
        let x = x_raw.h().matmul(&x_raw);
        let omega = 0.3;
        let closed = expected_quadratic(
            &g_hat,
            &x,
            &CMatrix::identity(m).scale(C64::new(omega, 0.0)),
            &CMatrix::identity(n).scale(C64::new(omega, 0.0)),
        )
        .unwrap();
        let mut acc = CMatrix::zeros(m, m);
        let draws = 100_000;
        use rand_distr::StandardNormal;
        for _ in 0..draws {
            let dg = CMatrix::from_fn(m, n, |_, _| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2 * omega
            });
            let g = &g_hat + &dg;
            acc = &acc + &g.matmul(&x).matmul(&g.h());
        }
        let mean = acc.scale(C64::new(1.0 / draws as f64, 0.0));
        let rel = (&mean - &closed).frob_norm() / closed.frob_norm();
        assert!(rel < 0.01, "Monte Carlo relative error {rel}");
    }

    /// The assembled explicit quadratic form reproduces the directly expanded
    /// outage inequality for sampled error draws, and the scalarized trace
    /// matches the explicit matrix trace.
    #[test]
    fn appendix_identity_and_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let n = 2;
        let m = 2;
        let k = 2;
        for _ in 0..20 {
            let h_hat = rand_cvec(&mut rng, n);
            let f_hat = rand_cvec(&mut rng, m);
            let g_hat = CMatrix::from_fn(m, n, |_, _| {
                C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
            });
            let cascade = CMatrix::diag(&f_hat).matmul(&g_hat);
            let u = rand_cvec(&mut rng, m);
            let w: Vec<CVector> = (0..k).map(|_| rand_cvec(&mut rng, n)).collect();
            let r = 0.9;
            let gamma = 2f64.powf(r) - 1.0;
            // C = w0 w0^H/γ − w1 w1^H.
            let c = &w[0].outer(&w[0]).scale(C64::new(1.0 / gamma, 0.0))
                - &w[1].outer(&w[1]);
            let (var_h, var_cascade, var_f) = (0.02, 0.01, 0.015);
            let (s1, s2) = (0.3, 0.2);
            let (e_mat, e_vec, e_s) = explicit_error_quadratic(
                &c, &u, &h_hat, &f_hat, &cascade, var_h, var_cascade, var_f, s1, s2,
            );
            for _ in 0..100 {
                // Standard-normal slots and the implied physical errors.
                let i_h = rand_cvec(&mut rng, n);
                let i_fc = rand_cvec(&mut rng, m * n);
                let i_f = rand_cvec(&mut rng, m);
                let dh = i_h.conj().scale(C64::new(var_h.sqrt(), 0.0)); // row Δh = ϖ_h i_h^H
                let dcascade = i_fc
                    .conj()
                    .scale(C64::new(var_cascade.sqrt(), 0.0))
                    .unvec(m, n); // vec(ΔF^*) = ϖ_F i_F ⇒ ΔF = conj(unvec(i_F))·ϖ_F
                let df = i_f.conj().scale(C64::new(var_f.sqrt(), 0.0));
                // Direct expansion of the outage LHS.
                let h_true = &h_hat + &dh;
                let cascade_true = &cascade + &dcascade;
                let f_true = &f_hat + &df;
                let hbar = {
                    let through = u.row_times_mat(&cascade_true);
                    &through + &h_true
                };
                let phi_f: f64 = (0..m)
                    .map(|i| f_true[i].norm_sqr() * u[i].norm_sqr())
                    .sum();
                let direct = hbar.row_dot(&c.mul_vec(&hbar.conj())).re - s1 * phi_f - s2;
                // Quadratic-form route.
                let mut stacked = CVector::zeros(n + m * n + m);
                for i in 0..n {
                    stacked[i] = i_h[i];
                }
                for i in 0..(m * n) {
                    stacked[n + i] = i_fc[i];
                }
                for i in 0..m {
                    stacked[n + m * n + i] = i_f[i];
                }
                let form = stacked.dot(&e_mat.mul_vec(&stacked)).re
                    + 2.0 * e_vec.dot(&stacked).re
                    + e_s;
                assert!(
                    (form - direct).abs() <= 1e-9 * (1.0 + direct.abs()),
                    "identity violated: {form} vs {direct}"
                );
            }
            // (45a): scalarized trace equals the explicit matrix trace.
            let beta_sum = u.norm_sqr();
            let k1 = var_h + var_cascade * beta_sum;
            let tr_scalar = k1 * c.trace().re - s1 * var_f * beta_sum;
            assert!(
                (tr_scalar - e_mat.trace().re).abs() < 1e-10 * (1.0 + e_mat.trace().re.abs()),
                "trace reduction mismatch"
            );
            // Spectral reduction: min eig of blkdiag(k1 C, −s1 ϖ_f² Φ) equals
            // the min eig of the explicit E (zeros aside).
            let phi = CMatrix::diag_real(
                &(0..m).map(|i| u[i].norm_sqr()).collect::<Vec<_>>(),
            );
            let mut reduced = CMatrix::zeros(n + m, n + m);
            reduced.set_block(0, 0, &c.scale(C64::new(k1, 0.0)));
            reduced.set_block(n, n, &phi.scale(C64::new(-s1 * var_f, 0.0)));
            let min_full = e_mat.min_eigenvalue().unwrap().min(0.0);
            let min_reduced = reduced.min_eigenvalue().unwrap().min(0.0);
            assert!(
                (min_full - min_reduced).abs() < 1e-9 * (1.0 + min_full.abs()),
                "spectral reduction mismatch: {min_full} vs {min_reduced}"
            );
        }
    }

    /// ρ → 1⁻ degenerates the Bernstein conditions to Tr{E} + e ≥ 0.
    #[test]
    fn bernstein_rho_limit_coefficients() {
        let rho = 1.0 - 1e-12;
        let sqrt_term = (2.0 * (1.0f64 / rho).ln()).sqrt();
        assert!(sqrt_term < 2e-6);
        assert!(rho.ln().abs() < 2e-12);
    }

    /// SCA tangency of the signal LMI: at the expansion point with zero
    /// error the certified lower bound equals |h̄ ŵ|² exactly.
    #[test]
    fn signal_lmi_tangency_at_expansion() {
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        let n = 2;
        let m = 2;
        let h_hat = rand_cvec(&mut rng, n);
        let f_hat = rand_cvec(&mut rng, m);
        let g_hat = CMatrix::from_fn(m, n, |_, _| {
            C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        });
        let cascade = CMatrix::diag(&f_hat).matmul(&g_hat);
        let w_hat = rand_cvec(&mut rng, n);
        let u_hat = rand_cvec(&mut rng, m);

        let mut prog = ConicProgram::new();
        let w_var = crate::conic::cx::CxVecVar::new(&mut prog, "w", n);
        let alpha = prog.add_var("alpha");
        let omega_h = prog.add_var("omega_h");
        let omega_f = prog.add_var("omega_f");
        let w_expr = w_var.as_col();
        let u_expr = AffMat::constant(u_hat.unvec(m, 1));
        let lmi = build_signal_lmi(&SignalLmiInputs {
            w_expr: &w_expr,
            w_hat: &w_hat,
            u_expr: &u_expr,
            u_hat: &u_hat,
            h_hat: &h_hat,
            cascade_hat: &cascade,
            xi_h: 0.1,
            xi_cascade: 0.1,
            alpha,
            omega_h,
            omega_cascade: omega_f,
        });
        // Assignment: w = ŵ, α chosen so the (dim,dim) corner equals
        // |q̂0|² − α − 0·ξ² with ω = 0: tangency means corner = 0 at
        // α = |h̄ŵ|².
        let mut assignment = vec![0.0; prog.nvars()];
        for i in 0..n {
            assignment[w_var.res[i].0] = w_hat[i].re;
            assignment[w_var.ims[i].0] = w_hat[i].im;
        }
        let hbar = {
            let through = u_hat.row_times_mat(&cascade);
            &through + &h_hat
        };
        let q0 = hbar.row_dot(&w_hat);
        assignment[alpha.0] = q0.norm_sqr();
        let val = lmi.eval(&assignment);
        let corner = val[(val.rows - 1, val.cols - 1)].re;
        assert!(corner.abs() < 1e-12 * (1.0 + q0.norm_sqr()), "corner {corner}");
    }
}
