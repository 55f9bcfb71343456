//! Alternating optimization for the bounded CSI error model: an SCA
//! beamforming subproblem and a penalty-CCP surface subproblem, both built
//! from the worst-case LMI constructions in [`crate::robustify`].
//!
//! Each subproblem maximizes the slack ψ that lower-bounds the nominal
//! energy efficiency through `Σr ≥ g(ψ,ϱ)`, `P_total ≤ ϱ`, and the
//! exponential-cone chain tying the per-user SINR slacks to the rate slacks.

use crate::conic::cx::{AffMat, CxVecVar};
use crate::conic::{ConicProgram, ExpApprox, LinExpr, SolveOptions, SolveStatus, VarId};
use crate::linalg::{C64, CMatrix, CVector};
use crate::robustify::{
    build_interference_lmi, build_noise_lmi, build_robust_power_blocks, build_signal_lmi,
    power_premise_radius, InterferenceLmiInputs, NoiseLmiInputs, RobustPowerInputs,
    SignalLmiInputs,
};
use crate::scenario::{ScenarioInstance, Space, UncertaintyModel};
use crate::system::{
    effective_channel, rate_bits, snr_from_rate, static_power, BeamformerSet, EvalChannels,
    RisProfile, SolutionReport,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("initialization failed: {0}")]
    InitInfeasible(String),
    #[error("scenario does not carry the bounded uncertainty model")]
    WrongModel,
    #[error("subproblem failed: {0}")]
    Subproblem(String),
}

/// Which surface functions the scheme allows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurfaceMode {
    /// Reflection and refraction (MF-RIS / STAR-RIS).
    Full,
    /// Reflection only (active RIS / single-function RIS).
    ReflectOnly,
    /// No surface at all.
    None,
}

impl SurfaceMode {
    pub fn has_surface(self) -> bool {
        !matches!(self, SurfaceMode::None)
    }

    fn spaces(self) -> &'static [Space] {
        match self {
            SurfaceMode::Full => &[Space::Reflection, Space::Refraction],
            SurfaceMode::ReflectOnly => &[Space::Reflection],
            SurfaceMode::None => &[],
        }
    }
}

#[derive(Debug, Clone)]
pub struct BoundedOptions {
    /// PCCP stop: ‖u⁽τ⁾ − u⁽τ⁻¹⁾‖₁ tolerance.
    pub eps1: f64,
    /// PCCP stop: penalty sum tolerance.
    pub eps2: f64,
    /// PCCP inner-iteration cap before a restart.
    pub t_max: usize,
    pub lambda0: f64,
    pub lambda_max: f64,
    /// Penalty growth factor ε.
    pub lambda_scale: f64,
    /// AO stop: |ψ⁽τ⁾ − ψ⁽τ⁻¹⁾| tolerance.
    pub ao_tol: f64,
    pub ao_max_iters: usize,
    pub restart_budget: usize,
    pub init_retries: usize,
    pub solve: SolveOptions,
}

impl Default for BoundedOptions {
    fn default() -> Self {
        Self {
            eps1: 1e-4,
            eps2: 1e-6,
            t_max: 30,
            lambda0: 1e-3,
            lambda_max: 1e4,
            lambda_scale: 10.0,
            ao_tol: 1e-4,
            ao_max_iters: 30,
            restart_budget: 3,
            init_retries: 10,
            solve: SolveOptions { tol: 1e-8, ..SolveOptions::default() },
        }
    }
}

/// Full iterate state of the bounded pipeline.
#[derive(Debug, Clone)]
pub struct BoundedIterate {
    pub beams: Vec<CVector>,
    pub ris: RisProfile,
    pub psi: f64,
    pub varrho: f64,
    pub t: f64,
    pub r: Vec<f64>,
    pub alpha: Vec<f64>,
    pub eta: Vec<f64>,
    pub noise_slack: Vec<f64>,
    /// Exponential-chain expansion points (x̄1 window center, x̄2, x̄3).
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub x3: Vec<f64>,
    /// υ_F values from the last beam step, frozen during the surface step.
    pub ups_cascade_frozen: Vec<f64>,
    pub lambda: f64,
    pub penalty: f64,
    /// Count of surface-dependent LMI blocks built so far (structural audit
    /// for the no-surface path).
    pub ris_lmi_count: usize,
}

#[derive(Debug, Clone)]
pub struct TraceRow {
    pub iteration: usize,
    pub half: &'static str,
    pub psi: f64,
    pub ee: f64,
    pub penalty: f64,
    pub lambda: f64,
    pub status: String,
    /// Statistical-pipeline extras (unused here, kept for one CSV schema).
    pub ratio_w: f64,
    pub ratio_v: f64,
    pub zeta_step: f64,
}

pub fn trace_csv_header() -> &'static str {
    "iteration,half,psi,ee,penalty,lambda,status,ratio_w,ratio_v,zeta_step"
}

pub fn trace_csv_row(t: &TraceRow) -> String {
    format!(
        "{},{},{:.9e},{:.9e},{:.9e},{:.9e},{},{:.6},{:.6},{:.6}",
        t.iteration, t.half, t.psi, t.ee, t.penalty, t.lambda, t.status, t.ratio_w, t.ratio_v,
        t.zeta_step
    )
}

#[derive(Debug, Clone)]
pub struct AoOutcome {
    pub beams: BeamformerSet,
    pub ris: RisProfile,
    pub psi: f64,
    pub nominal: SolutionReport,
    pub r_targets: Vec<f64>,
    pub trace: Vec<TraceRow>,
    pub converged: bool,
    pub iterations: usize,
    pub flags: Vec<String>,
    pub ris_lmi_count: usize,
}

fn radii_of(sc: &ScenarioInstance) -> Result<&crate::scenario::BoundedRadii, SolverError> {
    match &sc.uncertainty {
        UncertaintyModel::Bounded(r) => Ok(r),
        UncertaintyModel::Statistical(_) => Err(SolverError::WrongModel),
    }
}

fn effective_m(mode: SurfaceMode, m: usize) -> usize {
    if mode.has_surface() {
        m
    } else {
        0
    }
}

/// Nominal per-user SINR pieces for a candidate solution.
fn nominal_pieces(
    sc: &ScenarioInstance,
    beams: &[CVector],
    ris: &RisProfile,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let k = sc.params.k_total();
    let mut signal = Vec::with_capacity(k);
    let mut interference = Vec::with_capacity(k);
    let mut amplified = Vec::with_capacity(k);
    for kk in 0..k {
        let space = sc.params.space_of(kk);
        let u = ris.u(space);
        let hbar = if u.is_empty() {
            sc.channels.h[kk].clone()
        } else {
            effective_channel(&sc.channels.h[kk], &sc.channels.cascade[kk], u)
        };
        signal.push(hbar.row_dot(&beams[kk]).norm_sqr());
        let mut intf = 0.0;
        for (j, w) in beams.iter().enumerate() {
            if j != kk {
                intf += hbar.row_dot(w).norm_sqr();
            }
        }
        interference.push(intf);
        let amp: f64 = (0..u.len())
            .map(|m| (sc.channels.f[kk][m] * u[m]).norm_sqr())
            .sum();
        amplified.push(amp * sc.params.sigma1_sq);
    }
    (signal, interference, amplified)
}

/// Maximum-ratio initialization: beams toward the estimated effective
/// channels at full BS power, β = β_max/2 per allowed space with phases
/// aligned to the strongest user's cascade, slacks from achieved nominal
/// rates minus a 5% margin.
pub fn init(
    sc: &ScenarioInstance,
    mode: SurfaceMode,
    opts: &BoundedOptions,
) -> Result<BoundedIterate, SolverError> {
    let params = &sc.params;
    let k = params.k_total();
    let n = params.n_antennas;
    let m = effective_m(mode, params.m_elements);
    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed ^ 0x696e6974);
    let mut flagged = String::new();
    for attempt in 0..opts.init_retries {
        // Surface profile.
        let mut u_r = CVector::zeros(m);
        let mut u_t = CVector::zeros(m);
        if mode.has_surface() {
            // Temporary MRT beams at u = 0 fix the alignment phases.
            let w0: Vec<CVector> = (0..k)
                .map(|kk| {
                    let h = &sc.channels.h[kk];
                    h.conj().scale(C64::new(
                        (params.p_bs_max / k as f64).sqrt() / h.norm(),
                        0.0,
                    ))
                })
                .collect();
            let amp = (params.beta_max / 2.0).sqrt();
            for space in mode.spaces() {
                let users: Vec<usize> = (0..k)
                    .filter(|&kk| params.space_of(kk) == *space)
                    .collect();
                let target = match space {
                    Space::Reflection => &mut u_r,
                    Space::Refraction => &mut u_t,
                };
                if users.is_empty() {
                    continue;
                }
                let strongest = *users
                    .iter()
                    .max_by(|&&a, &&b| {
                        sc.channels.h[a]
                            .norm()
                            .partial_cmp(&sc.channels.h[b].norm())
                            .unwrap()
                    })
                    .unwrap();
                let gw = sc.channels.g.mul_vec(&w0[strongest]);
                let hw = sc.channels.h[strongest].row_dot(&w0[strongest]);
                for mm in 0..m {
                    let cascade_phase = (sc.channels.f[strongest][mm] * gw[mm]).arg();
                    let mut phase = hw.arg() - cascade_phase;
                    if attempt > 0 {
                        phase += rng.gen::<f64>() * std::f64::consts::TAU;
                    }
                    target[mm] = C64::new(amp * phase.cos(), amp * phase.sin());
                }
            }
        }
        let mut ris = RisProfile { u_r, u_t };
        // MRT beams toward the effective channels at full power.
        let mut beams: Vec<CVector> = (0..k)
            .map(|kk| {
                let space = params.space_of(kk);
                let u = ris.u(space);
                let hbar = if u.is_empty() {
                    sc.channels.h[kk].clone()
                } else {
                    effective_channel(&sc.channels.h[kk], &sc.channels.cascade[kk], u)
                };
                hbar.conj().scale(C64::new(1.0 / hbar.norm(), 0.0))
            })
            .collect();
        let total: f64 = beams.iter().map(|w| w.norm_sqr()).sum();
        let scale = (params.p_bs_max / total).sqrt();
        for w in &mut beams {
            *w = w.scale(C64::new(scale, 0.0));
        }
        // Respect the amplification budget with a 5% margin.
        if mode.has_surface() {
            let beam_set = BeamformerSet::new(beams.clone());
            let p_ris = crate::system::ris_amplification_power(
                &beam_set,
                &ris,
                &sc.channels.g,
                params.sigma1_sq,
            );
            if p_ris > 0.95 * params.p_ris_max {
                let shrink = (0.95 * params.p_ris_max / p_ris).sqrt();
                ris.u_r = ris.u_r.scale(C64::new(shrink, 0.0));
                ris.u_t = ris.u_t.scale(C64::new(shrink, 0.0));
            }
        }
        // Achieved nominal rates with a 5% margin.
        let (signal, interference, amplified) = nominal_pieces(sc, &beams, &ris);
        let rates: Vec<f64> = (0..k)
            .map(|kk| {
                rate_bits(signal[kk] / (interference[kk] + amplified[kk] + params.sigma2_sq))
            })
            .collect();
        let r: Vec<f64> = rates.iter().map(|x| (x * 0.95).max(1e-3)).collect();
        if r.iter().any(|&x| x < params.r_min) {
            flagged = format!(
                "attempt {attempt}: nominal rates {rates:?} below R_min {}",
                params.r_min
            );
            continue;
        }
        let eta: Vec<f64> = (0..k)
            .map(|kk| interference[kk] + amplified[kk] + params.sigma2_sq)
            .collect();
        let alpha: Vec<f64> = (0..k)
            .map(|kk| snr_from_rate(r[kk]) * eta[kk])
            .collect();
        let beam_set = BeamformerSet::new(beams.clone());
        let p_total = crate::system::total_power(&beam_set, &ris, &sc.channels.g, params);
        let sum_r: f64 = r.iter().sum();
        let varrho = p_total * 1.05;
        let psi = sum_r / varrho;
        let x1: Vec<f64> = alpha.iter().map(|a| a.ln()).collect();
        let x2: Vec<f64> = eta.iter().map(|e| e.ln()).collect();
        let x3: Vec<f64> = r.iter().map(|rr| snr_from_rate(*rr).ln()).collect();
        return Ok(BoundedIterate {
            beams,
            ris,
            psi,
            varrho,
            t: varrho / psi,
            r,
            alpha,
            eta,
            noise_slack: amplified.iter().map(|a| a.max(1e-30)).collect(),
            x1,
            x2,
            x3,
            ups_cascade_frozen: vec![0.0; k],
            lambda: opts.lambda0,
            penalty: 0.0,
            ris_lmi_count: 0,
        });
    }
    Err(SolverError::InitInfeasible(flagged))
}

/// Handles to the shared slack structure of one subproblem program.
struct SlackVars {
    psi: VarId,
    varrho: VarId,
    r: Vec<VarId>,
    alpha: Vec<VarId>,
    eta: Vec<VarId>,
    noise: Vec<VarId>,
    x1: Vec<VarId>,
    x2: Vec<VarId>,
    x3: Vec<VarId>,
    ups_h: Vec<VarId>,
    ups_f: Vec<VarId>,
    omega_h: Vec<VarId>,
    omega_cascade: Vec<VarId>,
}

fn add_slack_vars(prog: &mut ConicProgram, k: usize) -> SlackVars {
    SlackVars {
        psi: prog.add_var("psi"),
        varrho: prog.add_var("varrho"),
        r: prog.add_vars("r", k),
        alpha: prog.add_vars("alpha", k),
        eta: prog.add_vars("eta", k),
        noise: prog.add_vars("A", k),
        x1: prog.add_vars("x1", k),
        x2: prog.add_vars("x2", k),
        x3: prog.add_vars("x3", k),
        ups_h: prog.add_vars("ups_h", k),
        ups_f: prog.add_vars("ups_f", k),
        omega_h: prog.add_vars("omega_h", k),
        omega_cascade: prog.add_vars("omega_F", k),
    }
}

/// Adds the rate machinery shared by both subproblems: the fractional bound
/// `Σr ≥ g(ψ,ϱ)` at `t̄`, rate floors, and the exponential chain linking
/// (α, η, r) through the slacks x1, x2, x3.
fn add_rate_chain(
    prog: &mut ConicProgram,
    sv: &SlackVars,
    it: &BoundedIterate,
    r_min: f64,
    k: usize,
) {
    // Σr ≥ (t̄/2)ψ² + ϱ²/(2t̄).
    let s_psi = prog.add_var("psi_sq");
    let s_rho = prog.add_var("rho_sq");
    prog.add_quad_upper(LinExpr::var(s_psi), vec![LinExpr::var(sv.psi)]);
    prog.add_quad_upper(LinExpr::var(s_rho), vec![LinExpr::var(sv.varrho)]);
    let mut sum_r = LinExpr::zero();
    for &r in &sv.r {
        sum_r.push(r, 1.0);
    }
    sum_r.push(s_psi, -it.t / 2.0);
    sum_r.push(s_rho, -1.0 / (2.0 * it.t));
    prog.add_ineq(sum_r);
    for kk in 0..k {
        prog.add_lower_bound(sv.r[kk], r_min.max(1e-3));
        prog.add_lower_bound(sv.eta[kk], 0.0);
        prog.add_lower_bound(sv.noise[kk], 0.0);
        prog.add_lower_bound(sv.ups_h[kk], 0.0);
        prog.add_lower_bound(sv.ups_f[kk], 0.0);
        prog.add_lower_bound(sv.omega_h[kk], 0.0);
        prog.add_lower_bound(sv.omega_cascade[kk], 0.0);
        // α ≥ e^{x1} around the expansion window.
        prog.add_exp(
            LinExpr::var(sv.alpha[kk]),
            LinExpr::var(sv.x1[kk]),
            ExpApprox { center: it.x1[kk], halfwidth: 1.5, segments: 3400 },
        );
        // x1 − x2 ≥ x3.
        let mut chain = LinExpr::var(sv.x1[kk]);
        chain.push(sv.x2[kk], -1.0);
        chain.push(sv.x3[kk], -1.0);
        prog.add_ineq(chain);
        // η ≤ e^{x̄2}(x2 − x̄2 + 1).
        let e2 = it.x2[kk].exp();
        let mut eta_bound = LinExpr::term(sv.x2[kk], e2);
        eta_bound.constant += e2 * (1.0 - it.x2[kk]);
        eta_bound.push(sv.eta[kk], -1.0);
        prog.add_ineq(eta_bound);
        // z ≥ 2^r and z − 1 ≤ e^{x̄3}(x3 − x̄3 + 1).
        let z = prog.add_var(format!("z{kk}"));
        prog.add_exp(
            LinExpr::var(z),
            LinExpr::term(sv.r[kk], std::f64::consts::LN_2),
            ExpApprox {
                center: it.r[kk] * std::f64::consts::LN_2,
                halfwidth: 1.5,
                segments: 3400,
            },
        );
        let e3 = it.x3[kk].exp();
        let mut z_bound = LinExpr::term(sv.x3[kk], e3);
        z_bound.constant += e3 * (1.0 - it.x3[kk]) + 1.0;
        z_bound.push(z, -1.0);
        prog.add_ineq(z_bound);
    }
}

struct PowerBlockVars {
    q_amp: [VarId; 2],
    q_total: [VarId; 2],
}

/// Worst-case amplification-power blocks for both the surface budget and the
/// total-power budget; returns the per-space slacks. `mult_radius_sq` terms
/// are passed through per constraint family.
#[allow(clippy::too_many_arguments)]
fn add_power_blocks(
    prog: &mut ConicProgram,
    w_mat: &AffMat,
    u_exprs: [&AffMat; 2],
    g_hat: &CMatrix,
    amp_radius_terms: [LinExpr; 2],
    total_radius_terms: [LinExpr; 2],
    mult_amp: [VarId; 2],
    mult_total: [VarId; 2],
    ris_lmi_count: &mut usize,
) -> PowerBlockVars {
    let q_amp = [prog.add_var("q_amp_r"), prog.add_var("q_amp_t")];
    let q_total = [prog.add_var("q_tot_r"), prog.add_var("q_tot_t")];
    for c in 0..2 {
        prog.add_lower_bound(mult_amp[c], 0.0);
        prog.add_lower_bound(mult_total[c], 0.0);
    }
    let blocks = build_robust_power_blocks(&RobustPowerInputs {
        w_mat,
        u_exprs,
        g_hat,
        q: q_amp,
        mult: mult_amp,
        mult_radius_sq: amp_radius_terms,
    });
    for b in blocks {
        prog.add_lmi(b);
        *ris_lmi_count += 1;
    }
    let blocks = build_robust_power_blocks(&RobustPowerInputs {
        w_mat,
        u_exprs,
        g_hat,
        q: q_total,
        mult: mult_total,
        mult_radius_sq: total_radius_terms,
    });
    for b in blocks {
        prog.add_lmi(b);
        *ris_lmi_count += 1;
    }
    PowerBlockVars { q_amp, q_total }
}

fn stack_beams_expr(vars: &[CxVecVar]) -> AffMat {
    let n = vars[0].len();
    let k = vars.len();
    let mut out = AffMat::zeros(n, k);
    for (j, v) in vars.iter().enumerate() {
        out.set_block(0, j, &v.as_col());
    }
    out
}

fn stack_beams_const(beams: &[CVector]) -> AffMat {
    let n = beams[0].len();
    let k = beams.len();
    AffMat::constant(CMatrix::from_fn(n, k, |i, j| beams[j][i]))
}

fn others_expr(all: &AffMat, skip: usize) -> AffMat {
    let n = all.rows;
    let k = all.cols;
    let mut out = AffMat::zeros(n, k - 1);
    let mut col = 0;
    for j in 0..k {
        if j == skip {
            continue;
        }
        let mut block = AffMat::zeros(n, 1);
        block.cst = all.cst.block(0, j, n, 1);
        for (&v, m) in &all.terms {
            let b = m.block(0, j, n, 1);
            if b.max_abs() > 0.0 {
                out.terms.entry(v).or_insert_with(|| CMatrix::zeros(n, k - 1));
            }
            block.terms.insert(v, b);
        }
        out.set_block(0, col, &block);
        col += 1;
    }
    out
}

/// One beamforming step: all robust blocks with the surface frozen.
pub fn solve_w(
    sc: &ScenarioInstance,
    mode: SurfaceMode,
    it: &BoundedIterate,
    opts: &BoundedOptions,
) -> (BoundedIterate, SolveStatus) {
    let params = &sc.params;
    let radii = match radii_of(sc) {
        Ok(r) => r,
        Err(_) => return (it.clone(), SolveStatus::NumericalFailure),
    };
    let k = params.k_total();
    let n = params.n_antennas;
    let m = effective_m(mode, params.m_elements);
    let mut ris_lmi_count = it.ris_lmi_count;

    let mut prog = ConicProgram::new();
    let w_vars: Vec<CxVecVar> = (0..k)
        .map(|kk| CxVecVar::new(&mut prog, &format!("w{kk}"), n))
        .collect();
    let sv = add_slack_vars(&mut prog, k);
    add_rate_chain(&mut prog, &sv, it, params.r_min, k);

    // Transmit power: p_tx ≥ Σ‖w‖², p_tx ≤ P_BS.
    let p_tx = prog.add_var("p_tx");
    let mut tx_tail = Vec::new();
    for wv in &w_vars {
        for i in 0..n {
            tx_tail.push(LinExpr::var(wv.res[i]));
            tx_tail.push(LinExpr::var(wv.ims[i]));
        }
    }
    prog.add_quad_upper(LinExpr::var(p_tx), tx_tail);
    prog.add_upper_bound(p_tx, params.p_bs_max);

    let u_hats: [CVector; 2] = if m > 0 {
        [it.ris.u_r.clone(), it.ris.u_t.clone()]
    } else {
        [CVector::zeros(0), CVector::zeros(0)]
    };
    let u_exprs: [AffMat; 2] = [
        AffMat::constant(CMatrix::from_fn(m, 1, |i, _| u_hats[0][i])),
        AffMat::constant(CMatrix::from_fn(m, 1, |i, _| u_hats[1][i])),
    ];

    // Per-user robust blocks.
    let wmat_expr = stack_beams_expr(&w_vars);
    let mut ups_cascade_vars = Vec::with_capacity(k);
    for kk in 0..k {
        let space = params.space_of(kk);
        let cspace = if space == Space::Reflection { 0 } else { 1 };
        let cascade = if m > 0 {
            sc.channels.cascade[kk].clone()
        } else {
            CMatrix::zeros(0, n)
        };
        let u_hat = if m > 0 { u_hats[cspace].clone() } else { CVector::zeros(0) };
        let xi_h = radii.xi_h[kk];
        let xi_cascade = if m > 0 { radii.xi_cascade[kk] } else { 0.0 };
        // Signal LMI.
        let lmi = build_signal_lmi(&SignalLmiInputs {
            w_expr: &w_vars[kk].as_col(),
            w_hat: &it.beams[kk],
            u_expr: &u_exprs[cspace],
            u_hat: &u_hat,
            h_hat: &sc.channels.h[kk],
            cascade_hat: &cascade,
            xi_h,
            xi_cascade,
            alpha: sv.alpha[kk],
            omega_h: sv.omega_h[kk],
            omega_cascade: sv.omega_cascade[kk],
        });
        prog.add_lmi(lmi);
        // Interference LMI.
        let ups_cascade = prog.add_var(format!("ups_F{kk}"));
        ups_cascade_vars.push(ups_cascade);
        prog.add_lower_bound(ups_cascade, 0.0);
        let beta_sum = u_hat.norm_sqr();
        let lmi = build_interference_lmi(&InterferenceLmiInputs {
            w_others: &others_expr(&wmat_expr, kk),
            u_expr: &u_exprs[cspace],
            h_hat: &sc.channels.h[kk],
            cascade_hat: &cascade,
            xi_h,
            xi_cascade,
            eta: sv.eta[kk],
            noise_slack: sv.noise[kk],
            ups_h: LinExpr::var(sv.ups_h[kk]),
            ups_cascade: LinExpr::var(ups_cascade),
            ups_cascade_beta: LinExpr::term(ups_cascade, beta_sum),
            sigma2_sq: params.sigma2_sq,
        });
        prog.add_lmi(lmi);
        // Amplified-noise LMI (surface schemes only).
        if m > 0 {
            let lmi = build_noise_lmi(&NoiseLmiInputs {
                f_hat: &sc.channels.f[kk],
                u_expr: &u_exprs[cspace],
                xi_f: radii.xi_f[kk],
                noise_slack: sv.noise[kk],
                ups_f: sv.ups_f[kk],
                sigma1: params.sigma1_sq.sqrt(),
            });
            prog.add_lmi(lmi);
            ris_lmi_count += 1;
        } else {
            // Without a surface the amplified noise is exactly zero.
            prog.add_upper_bound(sv.noise[kk], 0.0);
        }
    }

    // Power budgets.
    let static_p = static_power(params);
    if m > 0 {
        let mult_amp = [prog.add_var("sig_r"), prog.add_var("sig_t")];
        let mult_total = [prog.add_var("theta_r"), prog.add_var("theta_t")];
        let amp_terms = [
            LinExpr::term(mult_amp[0], power_premise_radius(radii.xi_g, &u_hats[0]).powi(2)),
            LinExpr::term(mult_amp[1], power_premise_radius(radii.xi_g, &u_hats[1]).powi(2)),
        ];
        let tot_terms = [
            LinExpr::term(mult_total[0], power_premise_radius(radii.xi_g, &u_hats[0]).powi(2)),
            LinExpr::term(mult_total[1], power_premise_radius(radii.xi_g, &u_hats[1]).powi(2)),
        ];
        let pv = add_power_blocks(
            &mut prog,
            &wmat_expr,
            [&u_exprs[0], &u_exprs[1]],
            &sc.channels.g,
            amp_terms,
            tot_terms,
            mult_amp,
            mult_total,
            &mut ris_lmi_count,
        );
        let sigma_beta =
            params.sigma1_sq * (u_hats[0].norm_sqr() + u_hats[1].norm_sqr());
        // Amplification budget: q_r + q_t + σ1²Σβ ≤ P_RIS.
        let mut amp = LinExpr::constant(params.p_ris_max - sigma_beta);
        amp.push(pv.q_amp[0], -1.0);
        amp.push(pv.q_amp[1], -1.0);
        prog.add_ineq(amp);
        // Total power: ξ p_tx + ζ(q'_r + q'_t + σ1²Σβ) + static ≤ ϱ.
        let mut tot = LinExpr::var(sv.varrho);
        tot.push(p_tx, -params.xi);
        tot.push(pv.q_total[0], -params.zeta);
        tot.push(pv.q_total[1], -params.zeta);
        tot.constant -= params.zeta * sigma_beta + static_p;
        prog.add_ineq(tot);
    } else {
        let mut tot = LinExpr::var(sv.varrho);
        tot.push(p_tx, -params.xi);
        tot.constant -= static_p;
        prog.add_ineq(tot);
    }

    prog.maximize(LinExpr::var(sv.psi));
    let report = prog.solve(&opts.solve);
    if !report.is_optimal() {
        return (it.clone(), report.status);
    }
    // ψ must not decrease across beam steps (within solver slack).
    if report.objective < it.psi - 1e-8 && it.ris_lmi_count > 0 {
        let mut out = it.clone();
        out.ris_lmi_count = ris_lmi_count;
        return (out, SolveStatus::Optimal);
    }
    let a = report.assignment.as_ref().unwrap();
    let mut out = it.clone();
    out.beams = w_vars.iter().map(|wv| wv.value(a)).collect();
    out.psi = report.objective;
    out.varrho = report.value(sv.varrho);
    out.r = sv.r.iter().map(|&v| a[v.0]).collect();
    out.alpha = sv.alpha.iter().map(|&v| a[v.0]).collect();
    out.eta = sv.eta.iter().map(|&v| a[v.0]).collect();
    out.noise_slack = sv.noise.iter().map(|&v| a[v.0]).collect();
    out.x1 = sv.x1.iter().map(|&v| a[v.0]).collect();
    out.x2 = sv.x2.iter().map(|&v| a[v.0]).collect();
    out.x3 = sv.x3.iter().map(|&v| a[v.0]).collect();
    out.ups_cascade_frozen = ups_cascade_vars.iter().map(|&v| a[v.0].max(0.0)).collect();
    out.t = out.varrho / out.psi;
    out.ris_lmi_count = ris_lmi_count;
    (out, SolveStatus::Optimal)
}

/// One PCCP surface step: iterates the penalized subproblem with the
/// amplitude-coupling slacks until the surface profile stabilizes and the
/// penalty is negligible; restarts from a fresh seeded profile when the
/// inner cap is hit.
pub fn solve_theta_pccp(
    sc: &ScenarioInstance,
    mode: SurfaceMode,
    it: &BoundedIterate,
    opts: &BoundedOptions,
) -> (BoundedIterate, SolveStatus, Vec<String>) {
    let params = &sc.params;
    let radii = match radii_of(sc) {
        Ok(r) => r,
        Err(_) => return (it.clone(), SolveStatus::NumericalFailure, vec![]),
    };
    let k = params.k_total();
    let m = params.m_elements;
    assert!(mode.has_surface() && m > 0, "surface step requires a surface");
    let n = params.n_antennas;
    let both_spaces = mode == SurfaceMode::Full;
    let mut flags = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed ^ 0x70636370);

    let mut inner = it.clone();
    inner.lambda = opts.lambda0;
    let mut best: Option<BoundedIterate> = None;
    let mut restarts = 0usize;
    let mut tau = 0usize;
    let mut last_status = SolveStatus::Optimal;
    loop {
        if tau >= opts.t_max {
            if restarts >= opts.restart_budget {
                flags.push("pccp restart budget exhausted".into());
                let out = best.unwrap_or_else(|| it.clone());
                return (out, last_status, flags);
            }
            restarts += 1;
            tau = 0;
            inner = it.clone();
            inner.lambda = opts.lambda0;
            let amp = (params.beta_max / 2.0).sqrt();
            let fresh = |rng: &mut ChaCha8Rng| {
                CVector::from_fn(m, |_| {
                    let phase = rng.gen::<f64>() * std::f64::consts::TAU;
                    C64::new(amp * phase.cos(), amp * phase.sin())
                })
            };
            inner.ris.u_r = fresh(&mut rng);
            inner.ris.u_t = if both_spaces { fresh(&mut rng) } else { CVector::zeros(m) };
            flags.push(format!("pccp restart {restarts}"));
        }
        let mut prog = ConicProgram::new();
        let u_r = CxVecVar::new(&mut prog, "u_r", m);
        let u_t = if both_spaces {
            Some(CxVecVar::new(&mut prog, "u_t", m))
        } else {
            None
        };
        let sv = add_slack_vars(&mut prog, k);
        add_rate_chain(&mut prog, &sv, &inner, params.r_min, k);

        // Amplitude-coupling machinery: b, d, d̂ per (space, element).
        let b_r = prog.add_vars("b_r", m);
        let b_t = prog.add_vars("b_t", m);
        let d_r = prog.add_vars("d_r", m);
        let d_t = prog.add_vars("d_t", m);
        let dh_r = prog.add_vars("dh_r", m);
        let dh_t = prog.add_vars("dh_t", m);
        let mut penalty_expr = LinExpr::zero();
        let u_hat_of = |space: usize| -> &CVector {
            if space == 0 {
                &inner.ris.u_r
            } else {
                &inner.ris.u_t
            }
        };
        for space in 0..2 {
            let active = space == 0 || both_spaces;
            let (b, d, dh) = if space == 0 { (&b_r, &d_r, &dh_r) } else { (&b_t, &d_t, &dh_t) };
            let uvar = if space == 0 {
                Some(&u_r)
            } else {
                u_t.as_ref()
            };
            for mm in 0..m {
                prog.add_lower_bound(b[mm], 0.0);
                prog.add_upper_bound(b[mm], params.beta_max);
                prog.add_lower_bound(d[mm], 0.0);
                prog.add_lower_bound(dh[mm], 0.0);
                penalty_expr.push(d[mm], 1.0);
                penalty_expr.push(dh[mm], 1.0);
                if active {
                    let uv = uvar.unwrap();
                    // |u_m|² ≤ b + d.
                    let mut cap = LinExpr::var(b[mm]);
                    cap.push(d[mm], 1.0);
                    prog.add_quad_upper(
                        cap,
                        vec![LinExpr::var(uv.res[mm]), LinExpr::var(uv.ims[mm])],
                    );
                    // 2Re{u_m^* û_m} − |û_m|² ≥ b − d̂.
                    let uh = u_hat_of(space)[mm];
                    let mut lin = LinExpr::term(uv.res[mm], 2.0 * uh.re);
                    lin.push(uv.ims[mm], 2.0 * uh.im);
                    lin.constant -= uh.norm_sqr();
                    lin.push(b[mm], -1.0);
                    lin.push(dh[mm], -1.0);
                    prog.add_ineq(lin);
                } else {
                    prog.add_upper_bound(b[mm], 0.0);
                    prog.add_upper_bound(d[mm], 0.0);
                    prog.add_upper_bound(dh[mm], 0.0);
                }
            }
        }
        // Per-element budget coupling Σ_c b_{c,m} ≤ β_max.
        for mm in 0..m {
            let mut e = LinExpr::constant(params.beta_max);
            e.push(b_r[mm], -1.0);
            e.push(b_t[mm], -1.0);
            prog.add_ineq(e);
        }

        let u_r_expr = u_r.as_col();
        let u_t_expr = match &u_t {
            Some(v) => v.as_col(),
            None => AffMat::zeros(m, 1),
        };
        let u_exprs = [&u_r_expr, &u_t_expr];
        let wmat = stack_beams_const(&inner.beams);
        let mut ris_lmi_count = inner.ris_lmi_count;

        for kk in 0..k {
            let space = params.space_of(kk);
            let cspace = if space == Space::Reflection { 0 } else { 1 };
            let xi_h = radii.xi_h[kk];
            let xi_cascade = radii.xi_cascade[kk];
            let lmi = build_signal_lmi(&SignalLmiInputs {
                w_expr: &AffMat::constant(CMatrix::from_fn(n, 1, |i, _| inner.beams[kk][i])),
                w_hat: &inner.beams[kk],
                u_expr: u_exprs[cspace],
                u_hat: u_hat_of(cspace),
                h_hat: &sc.channels.h[kk],
                cascade_hat: &sc.channels.cascade[kk],
                xi_h,
                xi_cascade,
                alpha: sv.alpha[kk],
                omega_h: sv.omega_h[kk],
                omega_cascade: sv.omega_cascade[kk],
            });
            prog.add_lmi(lmi);
            ris_lmi_count += 1;
            // Interference LMI with the cascade multiplier frozen.
            let ups_f_frozen = inner.ups_cascade_frozen[kk].max(0.0);
            let beta_vars = if cspace == 0 { &b_r } else { &b_t };
            let mut ups_beta = LinExpr::zero();
            for &bm in beta_vars.iter() {
                ups_beta.push(bm, ups_f_frozen);
            }
            let lmi = build_interference_lmi(&InterferenceLmiInputs {
                w_others: &others_expr(&wmat, kk),
                u_expr: u_exprs[cspace],
                h_hat: &sc.channels.h[kk],
                cascade_hat: &sc.channels.cascade[kk],
                xi_h,
                xi_cascade,
                eta: sv.eta[kk],
                noise_slack: sv.noise[kk],
                ups_h: LinExpr::var(sv.ups_h[kk]),
                ups_cascade: LinExpr::constant(ups_f_frozen),
                ups_cascade_beta: ups_beta,
                sigma2_sq: params.sigma2_sq,
            });
            prog.add_lmi(lmi);
            ris_lmi_count += 1;
            let lmi = build_noise_lmi(&NoiseLmiInputs {
                f_hat: &sc.channels.f[kk],
                u_expr: u_exprs[cspace],
                xi_f: radii.xi_f[kk],
                noise_slack: sv.noise[kk],
                ups_f: sv.ups_f[kk],
                sigma1: params.sigma1_sq.sqrt(),
            });
            prog.add_lmi(lmi);
            ris_lmi_count += 1;
        }

        // Power blocks with the constant premise radius ξ_G·√β_max.
        let premise_sq = (radii.xi_g * params.beta_max.sqrt()).powi(2);
        let mult_amp = [prog.add_var("sig_r"), prog.add_var("sig_t")];
        let mult_total = [prog.add_var("theta_r"), prog.add_var("theta_t")];
        let pv = add_power_blocks(
            &mut prog,
            &wmat,
            u_exprs,
            &sc.channels.g,
            [
                LinExpr::term(mult_amp[0], premise_sq),
                LinExpr::term(mult_amp[1], premise_sq),
            ],
            [
                LinExpr::term(mult_total[0], premise_sq),
                LinExpr::term(mult_total[1], premise_sq),
            ],
            mult_amp,
            mult_total,
            &mut ris_lmi_count,
        );
        // Budgets with σ1²Σ_c Σ_m b_{c,m}.
        let mut sigma_beta = LinExpr::zero();
        for mm in 0..m {
            sigma_beta.push(b_r[mm], params.sigma1_sq);
            sigma_beta.push(b_t[mm], params.sigma1_sq);
        }
        let mut amp = LinExpr::constant(params.p_ris_max);
        amp.push(pv.q_amp[0], -1.0);
        amp.push(pv.q_amp[1], -1.0);
        amp.add_expr(&sigma_beta, -1.0);
        prog.add_ineq(amp);
        let p_tx: f64 = inner.beams.iter().map(|w| w.norm_sqr()).sum();
        let mut tot = LinExpr::var(sv.varrho);
        tot.constant -= params.xi * p_tx + static_power(params);
        tot.push(pv.q_total[0], -params.zeta);
        tot.push(pv.q_total[1], -params.zeta);
        tot.add_expr(&sigma_beta, -params.zeta);
        prog.add_ineq(tot);

        // Objective ψ − λ·D.
        let mut obj = LinExpr::var(sv.psi);
        obj.add_expr(&penalty_expr, -inner.lambda);
        prog.maximize(obj);

        let report = prog.solve(&opts.solve);
        last_status = report.status;
        if !report.is_optimal() {
            flags.push(format!("pccp solve failed at tau={tau}: {:?}", report.status));
            tau = opts.t_max; // force restart path
            continue;
        }
        let a = report.assignment.as_ref().unwrap();
        let u_r_new = u_r.value(a);
        let u_t_new = match &u_t {
            Some(v) => v.value(a),
            None => CVector::zeros(m),
        };
        let delta_u: f64 = (0..m)
            .map(|i| {
                (u_r_new[i] - inner.ris.u_r[i]).norm() + (u_t_new[i] - inner.ris.u_t[i]).norm()
            })
            .sum();
        let penalty = penalty_expr.eval(a);
        inner.ris = RisProfile { u_r: u_r_new, u_t: u_t_new };
        inner.psi = report.value(sv.psi);
        inner.varrho = report.value(sv.varrho);
        inner.t = inner.varrho / inner.psi;
        inner.r = sv.r.iter().map(|&v| a[v.0]).collect();
        inner.alpha = sv.alpha.iter().map(|&v| a[v.0]).collect();
        inner.eta = sv.eta.iter().map(|&v| a[v.0]).collect();
        inner.noise_slack = sv.noise.iter().map(|&v| a[v.0]).collect();
        inner.x1 = sv.x1.iter().map(|&v| a[v.0]).collect();
        inner.x2 = sv.x2.iter().map(|&v| a[v.0]).collect();
        inner.x3 = sv.x3.iter().map(|&v| a[v.0]).collect();
        inner.penalty = penalty;
        inner.ris_lmi_count = ris_lmi_count;
        if best.as_ref().map(|b| inner.psi > b.psi).unwrap_or(true) && penalty <= opts.eps2 * 10.0
        {
            best = Some(inner.clone());
        }
        inner.lambda = (inner.lambda * opts.lambda_scale).min(opts.lambda_max);
        tau += 1;
        if delta_u <= opts.eps1 && penalty <= opts.eps2 {
            return (inner, SolveStatus::Optimal, flags);
        }
    }
}

/// Full alternating optimization: beam and surface half-steps until the ψ
/// objective stabilizes; records a trace row per half-step.
pub fn alternate(
    sc: &ScenarioInstance,
    mode: SurfaceMode,
    opts: &BoundedOptions,
) -> Result<AoOutcome, SolverError> {
    radii_of(sc)?;
    if mode == SurfaceMode::None {
        assert_eq!(
            sc.params.m_elements, 0,
            "no-surface mode requires a scenario with zero elements"
        );
    }
    let mut it = init(sc, mode, opts)?;
    let mut trace = Vec::new();
    let mut flags = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let nominal_ee = |state: &BoundedIterate| -> f64 {
        let est = EvalChannels::estimated(sc);
        crate::system::energy_efficiency(
            &est,
            &BeamformerSet::new(state.beams.clone()),
            &state.ris,
        )
    };
    let mut psi_prev = it.psi;
    for ao_iter in 0..opts.ao_max_iters {
        iterations = ao_iter + 1;
        let (next, status) = solve_w(sc, mode, &it, opts);
        if status != SolveStatus::Optimal {
            flags.push(format!("beam step {ao_iter}: {status:?}, kept previous iterate"));
        } else {
            it = next;
        }
        trace.push(TraceRow {
            iteration: ao_iter,
            half: "w",
            psi: it.psi,
            ee: nominal_ee(&it),
            penalty: it.penalty,
            lambda: it.lambda,
            status: format!("{status:?}"),
            ratio_w: f64::NAN,
            ratio_v: f64::NAN,
            zeta_step: f64::NAN,
        });
        if mode.has_surface() {
            let (next, status, mut fl) = solve_theta_pccp(sc, mode, &it, opts);
            flags.append(&mut fl);
            if status == SolveStatus::Optimal && next.psi >= it.psi - 1e-6 {
                it = next;
            } else if status != SolveStatus::Optimal {
                flags.push(format!("surface step {ao_iter}: {status:?}, kept previous"));
            } else {
                flags.push(format!(
                    "surface step {ao_iter}: psi regressed ({} -> {}), kept previous",
                    it.psi, next.psi
                ));
            }
            trace.push(TraceRow {
                iteration: ao_iter,
                half: "theta",
                psi: it.psi,
                ee: nominal_ee(&it),
                penalty: it.penalty,
                lambda: it.lambda,
                status: format!("{status:?}"),
                ratio_w: f64::NAN,
                ratio_v: f64::NAN,
                zeta_step: f64::NAN,
            });
        }
        if (it.psi - psi_prev).abs() <= opts.ao_tol && ao_iter > 0 {
            converged = true;
            break;
        }
        psi_prev = it.psi;
    }
    let beams = BeamformerSet::new(it.beams.clone());
    let est = EvalChannels::estimated(sc);
    let nominal = SolutionReport::evaluate(&est, &beams, &it.ris);
    Ok(AoOutcome {
        beams,
        ris: it.ris.clone(),
        psi: it.psi,
        nominal,
        r_targets: it.r.clone(),
        trace,
        converged,
        iterations,
        flags,
        ris_lmi_count: it.ris_lmi_count,
    })
}
