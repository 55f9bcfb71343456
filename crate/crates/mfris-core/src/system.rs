//! Evaluation of candidate solutions on true or estimated channels:
//! effective channels, SINR, rates, total power, energy efficiency, and the
//! empirical robustness probes (outage frequency, worst-case margins).
//!
//! Rates are bits/s/Hz (log base 2) everywhere; the nat/bit conversions live
//! in [`rate_bits`] and [`snr_from_rate`] only.

use crate::linalg::{C64, CMatrix, CVector};
use crate::scenario::{
    sample_error, ErrorSample, SampleMode, ScenarioInstance, Space, SystemParams,
    UncertaintyModel,
};

/// Absolute slack used when auditing rate constraints (bits/s/Hz).
pub const RATE_MARGIN_TOL: f64 = 1e-4;
/// Absolute slack used when auditing power constraints (watts).
pub const POWER_MARGIN_TOL: f64 = 1e-6;

/// `log2(1 + sinr)`.
pub fn rate_bits(sinr: f64) -> f64 {
    (1.0 + sinr).log2()
}

/// `2^r − 1`.
pub fn snr_from_rate(r: f64) -> f64 {
    2f64.powf(r) - 1.0
}

/// Per-element amplitude/phase profile for both spaces; `u_c` carries
/// `[u_c]_m = √β_m^c · e^{jθ_m^c}`.
#[derive(Debug, Clone, PartialEq)]
pub struct RisProfile {
    pub u_r: CVector,
    pub u_t: CVector,
}

impl RisProfile {
    pub fn off(m: usize) -> Self {
        Self { u_r: CVector::zeros(m), u_t: CVector::zeros(m) }
    }

    pub fn from_amp_phase(beta: [&[f64]; 2], theta: [&[f64]; 2]) -> Self {
        let build = |b: &[f64], t: &[f64]| {
            CVector::from_fn(b.len(), |i| {
                let a = b[i].max(0.0).sqrt();
                C64::new(a * t[i].cos(), a * t[i].sin())
            })
        };
        Self { u_r: build(beta[0], theta[0]), u_t: build(beta[1], theta[1]) }
    }

    pub fn u(&self, space: Space) -> &CVector {
        match space {
            Space::Reflection => &self.u_r,
            Space::Refraction => &self.u_t,
        }
    }

    pub fn elements(&self) -> usize {
        self.u_r.len()
    }

    /// Amplitude β_m^c = |[u_c]_m|².
    pub fn beta(&self, space: Space, m: usize) -> f64 {
        self.u(space)[m].norm_sqr()
    }

    pub fn beta_sum(&self, space: Space) -> f64 {
        self.u(space).norm_sqr()
    }

    /// Per-element coupling audit: max over m of β_m^r + β_m^t − β_max.
    pub fn budget_violation(&self, beta_max: f64) -> f64 {
        (0..self.elements())
            .map(|m| self.beta(Space::Reflection, m) + self.beta(Space::Refraction, m) - beta_max)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Transmit vectors, one per user; the statistical pipeline additionally
/// carries lifted Gram matrices.
#[derive(Debug, Clone)]
pub struct BeamformerSet {
    pub w: Vec<CVector>,
    pub lifted: Option<Vec<CMatrix>>,
}

impl BeamformerSet {
    pub fn new(w: Vec<CVector>) -> Self {
        Self { w, lifted: None }
    }

    pub fn zeros(n: usize, k: usize) -> Self {
        Self { w: vec![CVector::zeros(n); k], lifted: None }
    }

    pub fn transmit_power(&self) -> f64 {
        self.w.iter().map(|w| w.norm_sqr()).sum()
    }
}

/// Channels used for one evaluation: either the estimates or estimate+error.
#[derive(Debug, Clone)]
pub struct EvalChannels<'a> {
    pub h: Vec<CVector>,
    pub f: Vec<CVector>,
    pub cascade: Vec<CMatrix>,
    pub g: CMatrix,
    pub params: &'a SystemParams,
}

impl<'a> EvalChannels<'a> {
    pub fn estimated(sc: &'a ScenarioInstance) -> Self {
        Self {
            h: sc.channels.h.clone(),
            f: sc.channels.f.clone(),
            cascade: sc.channels.cascade.clone(),
            g: sc.channels.g.clone(),
            params: &sc.params,
        }
    }

    /// Estimate plus a drawn error on every modeled link (the per-link error
    /// structure of the uncertainty models, not a re-composed cascade).
    pub fn perturbed(sc: &'a ScenarioInstance, err: &ErrorSample) -> Self {
        Self {
            h: sc
                .channels
                .h
                .iter()
                .zip(&err.dh)
                .map(|(a, d)| a + d)
                .collect(),
            f: sc
                .channels
                .f
                .iter()
                .zip(&err.df)
                .map(|(a, d)| a + d)
                .collect(),
            cascade: sc
                .channels
                .cascade
                .iter()
                .zip(&err.dcascade)
                .map(|(a, d)| a + d)
                .collect(),
            g: &sc.channels.g + &err.dg,
            params: &sc.params,
        }
    }
}

/// Effective downlink row `h̄ = h + u_c^T F` (equivalently `h + f Θ_c G`).
pub fn effective_channel(h: &CVector, cascade: &CMatrix, u: &CVector) -> CVector {
    assert_eq!(u.len(), cascade.rows, "effective_channel: element count mismatch");
    assert_eq!(h.len(), cascade.cols, "effective_channel: antenna count mismatch");
    let through = u.row_times_mat(cascade);
    &through + h
}

/// SINR of user `k`: `|h̄w_k|² / (Σ_{j≠k}|h̄w_j|² + ‖f_kΘ_c‖²σ₁² + σ₂²)`.
pub fn sinr(k: usize, ch: &EvalChannels, beams: &BeamformerSet, ris: &RisProfile) -> f64 {
    let space = ch.params.space_of(k);
    let u = ris.u(space);
    let hbar = effective_channel(&ch.h[k], &ch.cascade[k], u);
    let signal = hbar.row_dot(&beams.w[k]).norm_sqr();
    let mut interference = 0.0;
    for (j, w) in beams.w.iter().enumerate() {
        if j != k {
            interference += hbar.row_dot(w).norm_sqr();
        }
    }
    // Amplified thermal noise: ‖f_k Θ_c‖² σ1².
    let f = &ch.f[k];
    let amplified: f64 = (0..f.len()).map(|m| (f[m] * u[m]).norm_sqr()).sum();
    signal / (interference + amplified * ch.params.sigma1_sq + ch.params.sigma2_sq)
}

pub fn user_rates(ch: &EvalChannels, beams: &BeamformerSet, ris: &RisProfile) -> Vec<f64> {
    (0..ch.params.k_total())
        .map(|k| rate_bits(sinr(k, ch, beams, ris)))
        .collect()
}

/// Amplification power drawn by the surface:
/// `Σ_c (‖Θ_c G W‖_F² + ‖Θ_c‖_F² σ1²)`.
pub fn ris_amplification_power(
    beams: &BeamformerSet,
    ris: &RisProfile,
    g: &CMatrix,
    sigma1_sq: f64,
) -> f64 {
    let mut total = 0.0;
    for space in Space::BOTH {
        let u = ris.u(space);
        let theta_g = CMatrix::diag(u).matmul(g);
        let signal: f64 = beams
            .w
            .iter()
            .map(|w| theta_g.mul_vec(w).norm_sqr())
            .sum();
        total += signal + u.norm_sqr() * sigma1_sq;
    }
    total
}

/// Total consumed power:
/// `ξΣ‖w‖² + ζ·P_RIS + K·P_U + (P_S + N·P_RF) + 2M(P_PS + P_PA)`.
pub fn total_power(
    beams: &BeamformerSet,
    ris: &RisProfile,
    g: &CMatrix,
    params: &SystemParams,
) -> f64 {
    params.xi * beams.transmit_power()
        + params.zeta * ris_amplification_power(beams, ris, g, params.sigma1_sq)
        + static_power(params)
}

/// The load-independent part of the power model.
pub fn static_power(params: &SystemParams) -> f64 {
    params.k_total() as f64 * params.p_u
        + params.p_s
        + params.n_antennas as f64 * params.p_rf
        + 2.0 * params.m_elements as f64 * (params.p_ps + params.p_pa)
}

/// Sum rate over total power, bits/Hz/Joule.
pub fn energy_efficiency(
    ch: &EvalChannels,
    beams: &BeamformerSet,
    ris: &RisProfile,
) -> f64 {
    let sum_rate: f64 = user_rates(ch, beams, ris).iter().sum();
    sum_rate / total_power(beams, ris, &ch.g, ch.params)
}

/// Summary of one evaluated solution.
#[derive(Debug, Clone)]
pub struct SolutionReport {
    pub rates: Vec<f64>,
    pub sum_rate: f64,
    pub total_power: f64,
    pub energy_efficiency: f64,
    pub transmit_power: f64,
    pub ris_power: f64,
    /// min_k (rate_k − R_min).
    pub rate_margin: f64,
    /// P_BS^max − Σ‖w‖².
    pub bs_power_margin: f64,
    /// P_RIS^max − realized amplification power.
    pub ris_power_margin: f64,
}

impl SolutionReport {
    pub fn evaluate(ch: &EvalChannels, beams: &BeamformerSet, ris: &RisProfile) -> Self {
        let rates = user_rates(ch, beams, ris);
        let sum_rate: f64 = rates.iter().sum();
        let ris_power = ris_amplification_power(beams, ris, &ch.g, ch.params.sigma1_sq);
        let total = params_total(ch.params, beams, ris_power);
        let transmit_power = beams.transmit_power();
        let rate_margin = rates
            .iter()
            .map(|r| r - ch.params.r_min)
            .fold(f64::INFINITY, f64::min);
        Self {
            sum_rate,
            energy_efficiency: sum_rate / total,
            total_power: total,
            transmit_power,
            ris_power,
            rate_margin,
            bs_power_margin: ch.params.p_bs_max - transmit_power,
            ris_power_margin: ch.params.p_ris_max - ris_power,
            rates,
        }
    }

    /// Documented CSV column order; per-user rates appended last so fixed
    /// columns stay aligned across K.
    pub fn csv_header(k: usize) -> String {
        let mut cols = vec![
            "ee".to_string(),
            "sum_rate".into(),
            "total_power_w".into(),
            "transmit_power_w".into(),
            "ris_power_w".into(),
            "rate_margin".into(),
            "bs_power_margin_w".into(),
            "ris_power_margin_w".into(),
        ];
        for i in 0..k {
            cols.push(format!("rate_{i}"));
        }
        cols.join(",")
    }

    pub fn csv_row(&self) -> String {
        let mut cols = vec![
            format!("{:.9e}", self.energy_efficiency),
            format!("{:.9e}", self.sum_rate),
            format!("{:.9e}", self.total_power),
            format!("{:.9e}", self.transmit_power),
            format!("{:.9e}", self.ris_power),
            format!("{:.9e}", self.rate_margin),
            format!("{:.9e}", self.bs_power_margin),
            format!("{:.9e}", self.ris_power_margin),
        ];
        for r in &self.rates {
            cols.push(format!("{r:.9e}"));
        }
        cols.join(",")
    }
}

fn params_total(params: &SystemParams, beams: &BeamformerSet, ris_power: f64) -> f64 {
    params.xi * beams.transmit_power() + params.zeta * ris_power + static_power(params)
}

/// Fraction of sampled true channels where the achieved rate falls below its
/// target, per user. Statistical model only.
pub fn empirical_outage(
    sc: &ScenarioInstance,
    beams: &BeamformerSet,
    ris: &RisProfile,
    r_targets: &[f64],
    samples: usize,
    seed: u64,
) -> Vec<f64> {
    assert!(
        sc.uncertainty.is_statistical(),
        "empirical_outage requires the statistical model"
    );
    let k = sc.params.k_total();
    let mut misses = vec![0usize; k];
    for i in 0..samples {
        let err = sample_error(
            &sc.uncertainty,
            &sc.params,
            seed.wrapping_add(i as u64),
            SampleMode::Interior,
        );
        let ch = EvalChannels::perturbed(sc, &err);
        for (u, miss) in misses.iter_mut().enumerate().take(k) {
            let r = rate_bits(sinr(u, &ch, beams, ris));
            if r < r_targets[u] {
                *miss += 1;
            }
        }
    }
    misses.into_iter().map(|m| m as f64 / samples as f64).collect()
}

/// Worst-case audit for the bounded model: over `samples` drawn errors
/// (alternating interior and boundary modes), the minimum over samples and
/// users of `rate − target` and the minimum of `P_RIS^max − realized power`.
pub fn worst_case_margin_bounded(
    sc: &ScenarioInstance,
    beams: &BeamformerSet,
    ris: &RisProfile,
    r_targets: &[f64],
    samples: usize,
    seed: u64,
) -> (f64, f64) {
    assert!(
        !sc.uncertainty.is_statistical(),
        "worst_case_margin_bounded requires the bounded model"
    );
    let k = sc.params.k_total();
    let mut rate_margin = f64::INFINITY;
    let mut power_margin = f64::INFINITY;
    for i in 0..samples {
        let mode = if i % 2 == 0 { SampleMode::Boundary } else { SampleMode::Interior };
        let err = sample_error(&sc.uncertainty, &sc.params, seed.wrapping_add(i as u64), mode);
        let ch = EvalChannels::perturbed(sc, &err);
        for u in 0..k {
            let r = rate_bits(sinr(u, &ch, beams, ris));
            rate_margin = rate_margin.min(r - r_targets[u]);
        }
        let p = ris_amplification_power(beams, ris, &ch.g, sc.params.sigma1_sq);
        power_margin = power_margin.min(sc.params.p_ris_max - p);
    }
    (rate_margin, power_margin)
}

/// Nominal (estimate-channel) report plus the robustness probe appropriate to
/// the model.
pub fn audit_solution(
    sc: &ScenarioInstance,
    beams: &BeamformerSet,
    ris: &RisProfile,
    r_targets: &[f64],
    samples: usize,
    seed: u64,
) -> (SolutionReport, Option<(f64, f64)>, Option<Vec<f64>>) {
    let est = EvalChannels::estimated(sc);
    let report = SolutionReport::evaluate(&est, beams, ris);
    match &sc.uncertainty {
        UncertaintyModel::Bounded(_) => {
            let m = worst_case_margin_bounded(sc, beams, ris, r_targets, samples, seed);
            (report, Some(m), None)
        }
        UncertaintyModel::Statistical(_) => {
            let o = empirical_outage(sc, beams, ris, r_targets, samples, seed);
            (report, None, Some(o))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{ScenarioInstance, SystemParams, UncertaintyScales};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_scenario(bounded: bool, seed: u64) -> ScenarioInstance {
        let mut params = SystemParams::desk_scale();
        params.n_antennas = 2;
        params.m_elements = 2;
        ScenarioInstance::generate(
            &params,
            &UncertaintyScales::default(),
            bounded,
            0.05,
            0.0,
            seed,
        )
        .unwrap()
    }

    fn rand_cvec(rng: &mut ChaCha8Rng, n: usize) -> CVector {
        CVector::from_fn(n, |_| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
    }

    fn rand_profile(rng: &mut ChaCha8Rng, m: usize, beta_max: f64) -> RisProfile {
        let beta_r: Vec<f64> = (0..m).map(|_| rng.gen::<f64>() * beta_max / 2.0).collect();
        let beta_t: Vec<f64> = (0..m).map(|_| rng.gen::<f64>() * beta_max / 2.0).collect();
        let th_r: Vec<f64> = (0..m).map(|_| rng.gen::<f64>() * 6.28).collect();
        let th_t: Vec<f64> = (0..m).map(|_| rng.gen::<f64>() * 6.28).collect();
        RisProfile::from_amp_phase([&beta_r, &beta_t], [&th_r, &th_t])
    }

    #[test]
    fn effective_channel_identities() {
        let sc = small_scenario(false, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ris = rand_profile(&mut rng, 2, 4.0);
        // RIS off: h̄ = h.
        let off = RisProfile::off(2);
        let hbar = effective_channel(&sc.channels.h[0], &sc.channels.cascade[0], off.u(Space::Reflection));
        assert!((&hbar - &sc.channels.h[0]).norm() < 1e-15);
        // fΘG = u^T diag(f) G on a random instance.
        let u = ris.u(Space::Reflection);
        let f_theta: CVector = CVector::from_fn(2, |m| sc.channels.f[0][m] * u[m]);
        let lhs = f_theta.row_times_mat(&sc.channels.g);
        let rhs = u.row_times_mat(&sc.channels.cascade[0]);
        assert!((&lhs - &rhs).norm() < 1e-12 * (1.0 + lhs.norm()));
        // M=1 scalar cascade: h̄ = h + √β e^{jθ}·f1·G_row.
        let mut p1 = SystemParams::desk_scale();
        p1.m_elements = 1;
        p1.n_antennas = 2;
        let sc1 = ScenarioInstance::generate(&p1, &UncertaintyScales::default(), false, 0.05, 0.0, 4).unwrap();
        let beta = 1.7;
        let theta = 0.9;
        let prof = RisProfile::from_amp_phase([&[beta], &[0.0]], [&[theta], &[0.0]]);
        let hbar1 = effective_channel(&sc1.channels.h[0], &sc1.channels.cascade[0], prof.u(Space::Reflection));
        let scale = C64::new(beta.sqrt() * theta.cos(), beta.sqrt() * theta.sin());
        let hand = CVector::from_fn(2, |j| {
            sc1.channels.h[0][j] + scale * sc1.channels.f[0][0] * sc1.channels.g[(0, j)]
        });
        assert!((&hbar1 - &hand).norm() < 1e-14 * (1.0 + hand.norm()));
    }

    #[test]
    fn sinr_trivial_and_bruteforce() {
        let sc = small_scenario(false, 5);
        let ch = EvalChannels::estimated(&sc);
        let n = sc.params.n_antennas;
        // Single-user, RIS off: γ = |h·w|²/σ2².
        let mut beams = BeamformerSet::zeros(n, sc.params.k_total());
        beams.w[0] = sc.channels.h[0].conj().scale(C64::new(10.0, 0.0));
        let off = RisProfile::off(sc.params.m_elements);
        let got = sinr(0, &ch, &beams, &off);
        let want = sc.channels.h[0].row_dot(&beams.w[0]).norm_sqr() / sc.params.sigma2_sq;
        assert!((got - want).abs() < 1e-9 * want);
        // Zero beam ⇒ zero SINR.
        beams.w[0] = CVector::zeros(n);
        assert_eq!(sinr(0, &ch, &beams, &off), 0.0);

        // K=2, M=2, N=2 vs term-by-term expansion.
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let ris = rand_profile(&mut rng, 2, 4.0);
        let beams = BeamformerSet::new(vec![rand_cvec(&mut rng, n), rand_cvec(&mut rng, n)]);
        for k in 0..2 {
            let space = sc.params.space_of(k);
            let u = ris.u(space);
            let mut hbar = sc.channels.h[k].clone();
            for j in 0..n {
                let mut acc = C64::new(0.0, 0.0);
                for m in 0..2 {
                    acc += u[m] * sc.channels.cascade[k][(m, j)];
                }
                hbar[j] += acc;
            }
            let sig = hbar.row_dot(&beams.w[k]).norm_sqr();
            let intf = hbar.row_dot(&beams.w[1 - k]).norm_sqr();
            let amp: f64 = (0..2).map(|m| (sc.channels.f[k][m] * u[m]).norm_sqr()).sum();
            let want = sig / (intf + amp * sc.params.sigma1_sq + sc.params.sigma2_sq);
            let got = sinr(k, &ch, &beams, &ris);
            assert!((got - want).abs() < 1e-12 * want.max(1.0));
        }
    }

    #[test]
    fn total_power_static_floor_and_scaling() {
        let sc = small_scenario(false, 7);
        let off = RisProfile::off(sc.params.m_elements);
        let zero = BeamformerSet::zeros(sc.params.n_antennas, sc.params.k_total());
        let floor = total_power(&zero, &off, &sc.channels.g, &sc.params);
        assert!((floor - static_power(&sc.params)).abs() < 1e-15);

        // Doubling W quadruples the ξ-term.
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let beams = BeamformerSet::new(vec![
            rand_cvec(&mut rng, sc.params.n_antennas),
            rand_cvec(&mut rng, sc.params.n_antennas),
        ]);
        let doubled = BeamformerSet::new(
            beams.w.iter().map(|w| w.scale(C64::new(2.0, 0.0))).collect(),
        );
        let p1 = total_power(&beams, &off, &sc.channels.g, &sc.params) - floor;
        let p2 = total_power(&doubled, &off, &sc.channels.g, &sc.params) - floor;
        assert!((p2 - 4.0 * p1).abs() < 1e-9 * p2.max(1e-30));
    }

    #[test]
    fn amplification_power_quadratic_form_identity() {
        // Σ_c(‖Θ_c G W‖_F² + ‖Θ_c‖²σ1²) equals the Kronecker quadratic form
        // ȳ^H (W^T⊗I)^H (W^T⊗I) ȳ + Σβ σ1² with ȳ = vec(Θ_c G).
        let sc = small_scenario(false, 9);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let ris = rand_profile(&mut rng, sc.params.m_elements, 4.0);
        let beams = BeamformerSet::new(vec![
            rand_cvec(&mut rng, sc.params.n_antennas),
            rand_cvec(&mut rng, sc.params.n_antennas),
        ]);
        let direct = ris_amplification_power(&beams, &ris, &sc.channels.g, sc.params.sigma1_sq);
        // Quadratic-form route.
        let n = sc.params.n_antennas;
        let k = sc.params.k_total();
        let mut wmat = CMatrix::zeros(n, k);
        for (j, w) in beams.w.iter().enumerate() {
            for i in 0..n {
                wmat[(i, j)] = w[i];
            }
        }
        let lift = wmat.transpose().kron(&CMatrix::identity(sc.params.m_elements));
        let mut form = 0.0;
        for space in Space::BOTH {
            let u = ris.u(space);
            let ybar = CMatrix::diag(u).matmul(&sc.channels.g).vec();
            form += lift.mul_vec(&ybar).norm_sqr() + u.norm_sqr() * sc.params.sigma1_sq;
        }
        assert!(
            (direct - form).abs() < 1e-10 * direct.max(1e-30),
            "two expansions disagree: {direct} vs {form}"
        );
    }

    #[test]
    fn ee_and_rotation_invariance() {
        let sc = small_scenario(false, 12);
        let ch = EvalChannels::estimated(&sc);
        let off = RisProfile::off(sc.params.m_elements);
        // All-zero beams: EE = 0.
        let zero = BeamformerSet::zeros(sc.params.n_antennas, sc.params.k_total());
        assert_eq!(energy_efficiency(&ch, &zero, &off), 0.0);
        // Single-user closed form at u = 0.
        let mut beams = BeamformerSet::zeros(sc.params.n_antennas, sc.params.k_total());
        beams.w[0] = sc.channels.h[0].conj().scale(C64::new(300.0, 0.0));
        let snr = sc.channels.h[0].row_dot(&beams.w[0]).norm_sqr() / sc.params.sigma2_sq;
        let hand = rate_bits(snr)
            / (sc.params.xi * beams.transmit_power() + static_power(&sc.params));
        let got = energy_efficiency(&ch, &beams, &off);
        assert!((got - hand).abs() < 1e-10 * hand);
        // Common phase rotation leaves EE unchanged.
        let rot = C64::new(0.6, 0.8); // unit modulus
        let rotated = BeamformerSet::new(beams.w.iter().map(|w| w.scale(rot)).collect());
        let got_rot = energy_efficiency(&ch, &rotated, &off);
        assert!((got - got_rot).abs() < 1e-12 * got.max(1e-30));
    }

    #[test]
    fn empirical_outage_trivial_cases() {
        let sc = small_scenario(false, 14);
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let ris = rand_profile(&mut rng, sc.params.m_elements, 4.0);
        let mut beams = BeamformerSet::zeros(sc.params.n_antennas, sc.params.k_total());
        for w in &mut beams.w {
            *w = rand_cvec(&mut rng, sc.params.n_antennas).scale(C64::new(0.3, 0.0));
        }
        // Zero target: rates are nonnegative, outage 0.
        let zero_t = vec![0.0; sc.params.k_total()];
        let out = empirical_outage(&sc, &beams, &ris, &zero_t, 200, 3);
        assert!(out.iter().all(|&p| p == 0.0));
        // Perfect-CSI model with targets below nominal rates: outage 0.
        let mut perfect = sc.clone();
        perfect.uncertainty = UncertaintyModel::perfect(sc.params.k_total());
        let est = EvalChannels::estimated(&perfect);
        let nominal = user_rates(&est, &beams, &ris);
        let targets: Vec<f64> = nominal.iter().map(|r| r * 0.9).collect();
        let out = empirical_outage(&perfect, &beams, &ris, &targets, 100, 4);
        assert!(out.iter().all(|&p| p == 0.0));
    }

    #[test]
    fn empirical_outage_matches_direct_recount() {
        let sc = small_scenario(false, 16);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let ris = rand_profile(&mut rng, sc.params.m_elements, 4.0);
        let beams = BeamformerSet::new(vec![
            rand_cvec(&mut rng, sc.params.n_antennas).scale(C64::new(0.4, 0.0)),
            rand_cvec(&mut rng, sc.params.n_antennas).scale(C64::new(0.4, 0.0)),
        ]);
        let est = EvalChannels::estimated(&sc);
        let targets = user_rates(&est, &beams, &ris);
        let samples = 100;
        let seed = 21;
        let got = empirical_outage(&sc, &beams, &ris, &targets, samples, seed);
        // Independent recount, sample by sample.
        let k = sc.params.k_total();
        let mut miss = vec![0usize; k];
        for i in 0..samples {
            let err = sample_error(&sc.uncertainty, &sc.params, seed + i as u64, SampleMode::Interior);
            let ch = EvalChannels::perturbed(&sc, &err);
            for u in 0..k {
                if rate_bits(sinr(u, &ch, &beams, &ris)) < targets[u] {
                    miss[u] += 1;
                }
            }
        }
        for u in 0..k {
            assert_eq!(got[u], miss[u] as f64 / samples as f64);
        }
    }

    #[test]
    fn worst_case_margins_zero_radius_and_nesting() {
        // Zero radii: margins equal the nominal margins.
        let mut sc = small_scenario(true, 18);
        if let UncertaintyModel::Bounded(radii) = &mut sc.uncertainty {
            radii.xi_h.iter_mut().for_each(|x| *x = 0.0);
            radii.xi_f.iter_mut().for_each(|x| *x = 0.0);
            radii.xi_cascade.iter_mut().for_each(|x| *x = 0.0);
            radii.xi_g = 0.0;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let ris = rand_profile(&mut rng, sc.params.m_elements, 4.0);
        let beams = BeamformerSet::new(vec![
            rand_cvec(&mut rng, sc.params.n_antennas).scale(C64::new(0.4, 0.0)),
            rand_cvec(&mut rng, sc.params.n_antennas).scale(C64::new(0.4, 0.0)),
        ]);
        let est = EvalChannels::estimated(&sc);
        let nominal = user_rates(&est, &beams, &ris);
        let targets: Vec<f64> = nominal.iter().map(|r| r - 0.1).collect();
        let (rm, pm) = worst_case_margin_bounded(&sc, &beams, &ris, &targets, 50, 23);
        assert!((rm - 0.1).abs() < 1e-9);
        let nominal_pm = sc.params.p_ris_max
            - ris_amplification_power(&beams, &ris, &sc.channels.g, sc.params.sigma1_sq);
        assert!((pm - nominal_pm).abs() < 1e-12 * nominal_pm.abs().max(1e-30));

        // More samples can only shrink the empirical minimum.
        let sc2 = small_scenario(true, 18);
        let (rm_small, pm_small) = worst_case_margin_bounded(&sc2, &beams, &ris, &targets, 50, 23);
        let (rm_large, pm_large) = worst_case_margin_bounded(&sc2, &beams, &ris, &targets, 200, 23);
        assert!(rm_large <= rm_small + 1e-12);
        assert!(pm_large <= pm_small + 1e-12);
    }

    #[test]
    fn profile_budget_audit() {
        let prof = RisProfile::from_amp_phase(
            [&[1.0, 3.0], &[1.0, 2.0]],
            [&[0.0, 0.0], &[0.0, 0.0]],
        );
        assert!((prof.budget_violation(4.0) - 1.0).abs() < 1e-12);
        assert!(prof.budget_violation(6.0) < 0.0);
        assert!((prof.beta(Space::Reflection, 1) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn csv_round_numbers() {
        let sc = small_scenario(false, 30);
        let ch = EvalChannels::estimated(&sc);
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let beams = BeamformerSet::new(vec![
            rand_cvec(&mut rng, sc.params.n_antennas),
            rand_cvec(&mut rng, sc.params.n_antennas),
        ]);
        let off = RisProfile::off(sc.params.m_elements);
        let rep = SolutionReport::evaluate(&ch, &beams, &off);
        assert!((rep.energy_efficiency - rep.sum_rate / rep.total_power).abs() < 1e-15);
        let header = SolutionReport::csv_header(2);
        let row = rep.csv_row();
        assert_eq!(header.split(',').count(), row.split(',').count());
    }
}
