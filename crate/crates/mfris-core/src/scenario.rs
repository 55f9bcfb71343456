//! Reproducible scenario drops: node geometry, Rician channels with path
//! loss, and the bounded/statistical CSI-uncertainty parameterizations.
//!
//! All powers are stored in watts; dBm fields are converted at config
//! ingest. Channel generation is deterministic under a seed (ChaCha8 with a
//! fixed draw order).

use crate::linalg::{C64, CMatrix, CVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("config parse error: {0}")]
    Config(#[from] toml::de::Error),
}

/// Reflection (`r`) or refraction (`t`) half-space served by the surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Space {
    Reflection,
    Refraction,
}

impl Space {
    pub const BOTH: [Space; 2] = [Space::Reflection, Space::Refraction];

    pub fn tag(self) -> &'static str {
        match self {
            Space::Reflection => "r",
            Space::Refraction => "t",
        }
    }
}

pub fn dbm_to_watt(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Path loss in dB: `-PL0 - 10·alpha·log10(d)` with `PL0 = 30` dB at 1 m.
pub fn path_loss_db(d: f64, alpha: f64) -> Result<f64, ScenarioError> {
    if d <= 0.0 {
        return Err(ScenarioError::InvalidParameter(format!(
            "path_loss_db: distance must be positive, got {d}"
        )));
    }
    Ok(-30.0 - 10.0 * alpha * d.log10())
}

#[derive(Debug, Clone)]
pub struct UserPosition {
    pub pos: [f64; 3],
    pub space: Space,
}

#[derive(Debug, Clone)]
pub struct Geometry {
    pub bs_pos: [f64; 3],
    pub ris_pos: [f64; 3],
    pub users: Vec<UserPosition>,
}

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

impl Geometry {
    /// Users uniformly placed (seeded) on the radius-3 m circles centered at
    /// (0,30,0) for reflection and (0,40,0) for refraction users; BS at
    /// (0,0,10) and surface at (ris_x,35,20).
    pub fn standard(k_r: usize, k_t: usize, ris_x: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x67656f6d);
        let mut users = Vec::with_capacity(k_r + k_t);
        let mut place = |count: usize, center_y: f64, space: Space, rng: &mut ChaCha8Rng| {
            for _ in 0..count {
                let phi = 2.0 * std::f64::consts::PI * rng.gen::<f64>();
                users.push(UserPosition {
                    pos: [3.0 * phi.cos(), center_y + 3.0 * phi.sin(), 0.0],
                    space,
                });
            }
        };
        place(k_r, 30.0, Space::Reflection, &mut rng);
        place(k_t, 40.0, Space::Refraction, &mut rng);
        Self { bs_pos: [0.0, 0.0, 10.0], ris_pos: [ris_x, 35.0, 20.0], users }
    }
}

/// System-level constants for one drop (all powers in watts).
#[derive(Debug, Clone)]
pub struct SystemParams {
    pub n_antennas: usize,
    pub m_elements: usize,
    pub k_r: usize,
    pub k_t: usize,
    pub sigma1_sq: f64,
    pub sigma2_sq: f64,
    pub p_t_max: f64,
    pub p_bs_max: f64,
    pub p_ris_max: f64,
    pub p_ps: f64,
    pub p_pa: f64,
    pub p_u: f64,
    pub p_s: f64,
    pub p_rf: f64,
    pub xi: f64,
    pub zeta: f64,
    pub beta_max: f64,
    /// Minimum rate per user, bits/s/Hz.
    pub r_min: f64,
    /// Maximum rate-outage probability per user.
    pub rho_outage: f64,
    /// Rician factor, linear.
    pub kappa: f64,
    /// Path-loss exponents: BS-RIS, RIS-user, BS-user.
    pub alpha_g: f64,
    pub alpha_f: f64,
    pub alpha_h: f64,
}

impl SystemParams {
    /// Full-scale defaults (N=6, M=32, K_r=K_t=3) with the standard power
    /// constants: total budget 30 dBm split evenly between BS and surface,
    /// -80 dBm noise, P_PS=-10 dBm, P_PA=-5 dBm, P_U=10 dBm, P_S=40 dBm,
    /// P_RF=30 dBm, conversion inefficiency 1.1, 3 dB Rician factor.
    pub fn paper_scale() -> Self {
        let p_t_max = dbm_to_watt(30.0);
        Self {
            n_antennas: 6,
            m_elements: 32,
            k_r: 3,
            k_t: 3,
            sigma1_sq: dbm_to_watt(-80.0),
            sigma2_sq: dbm_to_watt(-80.0),
            p_t_max,
            p_bs_max: p_t_max / 2.0,
            p_ris_max: p_t_max / 2.0,
            p_ps: dbm_to_watt(-10.0),
            p_pa: dbm_to_watt(-5.0),
            p_u: dbm_to_watt(10.0),
            p_s: dbm_to_watt(40.0),
            p_rf: dbm_to_watt(30.0),
            xi: 1.1,
            zeta: 1.1,
            beta_max: 4.0,
            r_min: 1.0,
            rho_outage: 0.05,
            kappa: db_to_linear(3.0),
            alpha_g: 2.2,
            alpha_f: 2.6,
            alpha_h: 2.8,
        }
    }

    /// Desk-scale defaults used by the harness: N=4, M=8, one user per space.
    pub fn desk_scale() -> Self {
        let mut p = Self::paper_scale();
        p.n_antennas = 4;
        p.m_elements = 8;
        p.k_r = 1;
        p.k_t = 1;
        p
    }

    pub fn k_total(&self) -> usize {
        self.k_r + self.k_t
    }

    /// Space of the `k`-th user in the global ordering (reflection block
    /// first).
    pub fn space_of(&self, k: usize) -> Space {
        if k < self.k_r {
            Space::Reflection
        } else {
            Space::Refraction
        }
    }

    /// Default budget split: half/half with a surface, everything to the BS
    /// without one.
    pub fn apply_power_split(&mut self, has_ris: bool) {
        if has_ris {
            self.p_bs_max = self.p_t_max / 2.0;
            self.p_ris_max = self.p_t_max / 2.0;
        } else {
            self.p_bs_max = self.p_t_max;
            self.p_ris_max = 0.0;
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let positive = [
            ("sigma1_sq", self.sigma1_sq),
            ("sigma2_sq", self.sigma2_sq),
            ("p_t_max", self.p_t_max),
            ("p_bs_max", self.p_bs_max),
            ("p_ps", self.p_ps),
            ("p_pa", self.p_pa),
            ("p_u", self.p_u),
            ("p_s", self.p_s),
            ("p_rf", self.p_rf),
        ];
        for (name, v) in positive {
            if v <= 0.0 {
                return Err(ScenarioError::InvalidParameter(format!("{name} must be > 0")));
            }
        }
        if self.xi < 1.0 || self.zeta < 1.0 {
            return Err(ScenarioError::InvalidParameter("xi, zeta must be >= 1".into()));
        }
        if self.beta_max < 1.0 {
            return Err(ScenarioError::InvalidParameter("beta_max must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.rho_outage) || self.rho_outage == 0.0 {
            return Err(ScenarioError::InvalidParameter("rho_outage must be in (0,1)".into()));
        }
        Ok(())
    }
}

/// Estimated channels of one drop. `cascade[k] = diag(f[k]) · g` always.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// BS → surface, M×N.
    pub g: CMatrix,
    /// BS → user k, length N (row convention).
    pub h: Vec<CVector>,
    /// Surface → user k, length M (row convention).
    pub f: Vec<CVector>,
    /// Cascaded diag(f_k)·G, M×N.
    pub cascade: Vec<CMatrix>,
}

fn steering(len: usize, unit_axis_component: f64) -> CVector {
    CVector::from_fn(len, |i| {
        let phase = std::f64::consts::PI * i as f64 * unit_axis_component;
        C64::new(phase.cos(), phase.sin())
    })
}

fn unit_x_component(from: [f64; 3], to: [f64; 3]) -> f64 {
    (to[0] - from[0]) / dist(from, to)
}

fn cscg(rng: &mut ChaCha8Rng) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Rician channel draw: `√PL·(√(κ/(1+κ))·LOS + √(1/(1+κ))·NLOS)` per link,
/// with unit-modulus ULA steering-vector LOS components and i.i.d. standard
/// CSCG NLOS entries. Deterministic under the seed.
pub fn gen_channels(
    geometry: &Geometry,
    params: &SystemParams,
    kappa: f64,
    seed: u64,
) -> ChannelSet {
    assert!(kappa >= 0.0, "Rician factor must be nonnegative");
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6368616e);
    let n = params.n_antennas;
    let m = params.m_elements;
    let w_los = (kappa / (1.0 + kappa)).sqrt();
    let w_nlos = (1.0 / (1.0 + kappa)).sqrt();

    // BS -> RIS.
    let pl_g = db_to_linear(
        path_loss_db(dist(geometry.bs_pos, geometry.ris_pos), params.alpha_g).unwrap(),
    )
    .sqrt();
    let a_ris = steering(m, unit_x_component(geometry.ris_pos, geometry.bs_pos));
    let a_bs = steering(n, unit_x_component(geometry.bs_pos, geometry.ris_pos));
    let mut g = CMatrix::from_fn(m, n, |i, j| a_ris[i] * a_bs[j]);
    for i in 0..m {
        for j in 0..n {
            g[(i, j)] = (g[(i, j)] * w_los + cscg(&mut rng) * w_nlos) * pl_g;
        }
    }

    let mut h = Vec::with_capacity(geometry.users.len());
    let mut f = Vec::with_capacity(geometry.users.len());
    for user in &geometry.users {
        let pl_h = db_to_linear(
            path_loss_db(dist(geometry.bs_pos, user.pos), params.alpha_h).unwrap(),
        )
        .sqrt();
        let los_h = steering(n, unit_x_component(geometry.bs_pos, user.pos));
        h.push(CVector::from_fn(n, |i| {
            (los_h[i] * w_los + cscg(&mut rng) * w_nlos) * pl_h
        }));
        let pl_f = db_to_linear(
            path_loss_db(dist(geometry.ris_pos, user.pos), params.alpha_f).unwrap(),
        )
        .sqrt();
        let los_f = steering(m, unit_x_component(geometry.ris_pos, user.pos));
        f.push(CVector::from_fn(m, |i| {
            (los_f[i] * w_los + cscg(&mut rng) * w_nlos) * pl_f
        }));
    }
    let cascade = f.iter().map(|fk| CMatrix::diag(fk).matmul(&g)).collect();
    ChannelSet { g, h, f, cascade }
}

/// Per-link uncertainty scale factors (δ², dimensionless).
#[derive(Debug, Clone, Copy)]
pub struct UncertaintyScales {
    pub delta_h_sq: f64,
    pub delta_f_sq: f64,
    pub delta_g_sq: f64,
}

impl Default for UncertaintyScales {
    /// Standard setting: direct-link uncertainty above the cascade links
    /// (δ_h² = 0.02, δ_f² = δ_G² = 0.01).
    fn default() -> Self {
        Self { delta_h_sq: 0.02, delta_f_sq: 0.01, delta_g_sq: 0.01 }
    }
}

impl UncertaintyScales {
    pub fn uniform(delta_sq: f64) -> Self {
        Self { delta_h_sq: delta_sq, delta_f_sq: delta_sq, delta_g_sq: delta_sq }
    }
}

/// Statistical error model: per-entry variances of the CSCG errors.
#[derive(Debug, Clone)]
pub struct StatVariances {
    pub var_h: Vec<f64>,
    pub var_f: Vec<f64>,
    pub var_cascade: Vec<f64>,
    pub var_g: f64,
}

/// Bounded error model: uncertainty-region radii.
#[derive(Debug, Clone)]
pub struct BoundedRadii {
    pub xi_h: Vec<f64>,
    pub xi_f: Vec<f64>,
    pub xi_cascade: Vec<f64>,
    pub xi_g: f64,
    pub rho_q: f64,
}

#[derive(Debug, Clone)]
pub enum UncertaintyModel {
    Bounded(BoundedRadii),
    Statistical(StatVariances),
}

impl UncertaintyModel {
    pub fn is_statistical(&self) -> bool {
        matches!(self, UncertaintyModel::Statistical(_))
    }

    /// A model with no uncertainty at all (perfect CSI).
    pub fn perfect(k: usize) -> Self {
        UncertaintyModel::Statistical(StatVariances {
            var_h: vec![0.0; k],
            var_f: vec![0.0; k],
            var_cascade: vec![0.0; k],
            var_g: 0.0,
        })
    }
}

/// Statistical variances scaled by the estimated channel energies:
/// `ϖ_h² = δ_h²‖ĥ‖²`, `ϖ_f² = δ_f²‖f̂‖²`, `ϖ_G² = δ_G²‖vec(Ĝ)‖²`, and the
/// cascade composition `ϖ_F = ϖ_G‖diag(f̂^H)‖_F + ϖ_f‖Ĝ‖_F + ϖ_G·ϖ_f`.
pub fn statistical_variances(
    channels: &ChannelSet,
    scales: &UncertaintyScales,
) -> StatVariances {
    let var_g = scales.delta_g_sq * channels.g.frob_norm_sqr();
    let omega_g = var_g.sqrt();
    let g_frob = channels.g.frob_norm();
    let mut var_h = Vec::new();
    let mut var_f = Vec::new();
    let mut var_cascade = Vec::new();
    for k in 0..channels.h.len() {
        var_h.push(scales.delta_h_sq * channels.h[k].norm_sqr());
        let vf = scales.delta_f_sq * channels.f[k].norm_sqr();
        var_f.push(vf);
        let omega_f = vf.sqrt();
        let omega_cascade =
            omega_g * channels.f[k].norm() + omega_f * g_frob + omega_g * omega_f;
        var_cascade.push(omega_cascade * omega_cascade);
    }
    StatVariances { var_h, var_f, var_cascade, var_g }
}

/// Radii calibrated so each Gaussian error stays inside its ball with
/// probability `1 − ρ_q`: `ξ = √( (ϖ²/2)·F⁻¹_dof(1−ρ_q) )` with chi-square
/// dofs 2N (h), 2M (f), 2MN (F and G).
pub fn bounded_radii(
    vars: &StatVariances,
    params: &SystemParams,
    rho_q: f64,
) -> Result<BoundedRadii, ScenarioError> {
    if !(0.0..1.0).contains(&rho_q) || rho_q == 0.0 {
        return Err(ScenarioError::InvalidParameter("rho_q must be in (0,1)".into()));
    }
    let n = params.n_antennas as f64;
    let m = params.m_elements as f64;
    let q = |dof: f64| chi_square_quantile(dof, 1.0 - rho_q);
    let q_h = q(2.0 * n);
    let q_f = q(2.0 * m);
    let q_mn = q(2.0 * m * n);
    let radius = |var: f64, quant: f64| (var / 2.0 * quant).sqrt();
    Ok(BoundedRadii {
        xi_h: vars.var_h.iter().map(|&v| radius(v, q_h)).collect(),
        xi_f: vars.var_f.iter().map(|&v| radius(v, q_f)).collect(),
        xi_cascade: vars.var_cascade.iter().map(|&v| radius(v, q_mn)).collect(),
        xi_g: radius(vars.var_g, q_mn),
        rho_q,
    })
}

/// One realization of the per-link CSI errors.
#[derive(Debug, Clone)]
pub struct ErrorSample {
    pub dh: Vec<CVector>,
    pub df: Vec<CVector>,
    pub dcascade: Vec<CMatrix>,
    pub dg: CMatrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleMode {
    /// Fill the ball: radius scaled by `U^(1/dim)` (real dimension).
    Interior,
    /// Worst-case probing on the ball boundary.
    Boundary,
}

fn sample_ball_vector(
    rng: &mut ChaCha8Rng,
    len: usize,
    radius: f64,
    mode: SampleMode,
) -> CVector {
    if radius == 0.0 {
        return CVector::zeros(len);
    }
    let v = CVector::from_fn(len, |_| cscg(rng));
    let norm = v.norm();
    if norm == 0.0 {
        return CVector::zeros(len);
    }
    let scale = match mode {
        SampleMode::Interior => {
            let u: f64 = rng.gen();
            radius * u.powf(1.0 / (2.0 * len as f64)) / norm
        }
        SampleMode::Boundary => radius / norm,
    };
    v.scale(C64::new(scale, 0.0))
}

fn sample_gaussian_vector(rng: &mut ChaCha8Rng, len: usize, var: f64) -> CVector {
    let sd = var.sqrt();
    CVector::from_fn(len, |_| cscg(rng) * sd)
}

/// Draw per-link errors: CSCG with the model variances (statistical), or
/// uniform-in-ball / on-boundary (bounded). The bounded sampler never exceeds
/// its radius by construction.
pub fn sample_error(
    model: &UncertaintyModel,
    params: &SystemParams,
    seed: u64,
    mode: SampleMode,
) -> ErrorSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x65727273);
    let n = params.n_antennas;
    let m = params.m_elements;
    let k = params.k_total();
    match model {
        UncertaintyModel::Bounded(radii) => {
            let dh = (0..k)
                .map(|i| sample_ball_vector(&mut rng, n, radii.xi_h[i], mode))
                .collect();
            let df = (0..k)
                .map(|i| sample_ball_vector(&mut rng, m, radii.xi_f[i], mode))
                .collect();
            let dcascade = (0..k)
                .map(|i| {
                    sample_ball_vector(&mut rng, m * n, radii.xi_cascade[i], mode).unvec(m, n)
                })
                .collect();
            let dg = sample_ball_vector(&mut rng, m * n, radii.xi_g, mode).unvec(m, n);
            ErrorSample { dh, df, dcascade, dg }
        }
        UncertaintyModel::Statistical(vars) => {
            let dh = (0..k)
                .map(|i| sample_gaussian_vector(&mut rng, n, vars.var_h[i]))
                .collect();
            let df = (0..k)
                .map(|i| sample_gaussian_vector(&mut rng, m, vars.var_f[i]))
                .collect();
            let dcascade = (0..k)
                .map(|i| sample_gaussian_vector(&mut rng, m * n, vars.var_cascade[i]).unvec(m, n))
                .collect();
            let dg = sample_gaussian_vector(&mut rng, m * n, vars.var_g).unvec(m, n);
            ErrorSample { dh, df, dcascade, dg }
        }
    }
}

/// Everything one drop needs: constants, node placement, estimated channels,
/// and the uncertainty description.
#[derive(Debug, Clone)]
pub struct ScenarioInstance {
    pub params: SystemParams,
    pub geometry: Geometry,
    pub channels: ChannelSet,
    pub uncertainty: UncertaintyModel,
    pub seed: u64,
}

impl ScenarioInstance {
    pub fn generate(
        params: &SystemParams,
        scales: &UncertaintyScales,
        bounded: bool,
        rho_q: f64,
        ris_x: f64,
        seed: u64,
    ) -> Result<Self, ScenarioError> {
        params.validate()?;
        let geometry = Geometry::standard(params.k_r, params.k_t, ris_x, seed);
        let channels = gen_channels(&geometry, params, params.kappa, seed);
        let vars = statistical_variances(&channels, scales);
        let uncertainty = if bounded {
            UncertaintyModel::Bounded(bounded_radii(&vars, params, rho_q)?)
        } else {
            UncertaintyModel::Statistical(vars)
        };
        Ok(Self { params: params.clone(), geometry, channels, uncertainty, seed })
    }
}

// ---------------------------------------------------------------------------
// Chi-square quantile via regularized incomplete gamma + bisection
// ---------------------------------------------------------------------------

fn ln_gamma(x: f64) -> f64 {
    // Lanczos approximation (g = 7, n = 9).
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        return (std::f64::consts::PI / (std::f64::consts::PI * x).sin()).ln()
            - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + 7.5;
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Lower regularized incomplete gamma `P(a, x)` by series (x < a+1) or
/// continued fraction (otherwise).
fn reg_lower_gamma(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x < a + 1.0 {
        let mut ap = a;
        let mut sum = 1.0 / a;
        let mut del = sum;
        for _ in 0..500 {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if del.abs() < sum.abs() * 1e-16 {
                break;
            }
        }
        sum * (-x + a * x.ln() - ln_gamma(a)).exp()
    } else {
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..500 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        let q = (-x + a * x.ln() - ln_gamma(a)).exp() * h;
        1.0 - q
    }
}

/// Chi-square CDF with `dof` degrees of freedom.
pub fn chi_square_cdf(dof: f64, x: f64) -> f64 {
    reg_lower_gamma(dof / 2.0, x / 2.0)
}

/// Inverse chi-square CDF by bisection to 1e-10 relative.
pub fn chi_square_quantile(dof: f64, p: f64) -> f64 {
    assert!((0.0..1.0).contains(&p), "quantile level must be in [0,1)");
    if p == 0.0 {
        return 0.0;
    }
    let mut hi = dof.max(1.0);
    while chi_square_cdf(dof, hi) < p {
        hi *= 2.0;
        if hi > 1e12 {
            break;
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if chi_square_cdf(dof, mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) <= 1e-12 * hi + 1e-300 {
            break;
        }
    }
    0.5 * (lo + hi)
}

// ---------------------------------------------------------------------------
// Config ingestion
// ---------------------------------------------------------------------------

/// On-disk scenario configuration (TOML, sectioned key-value). Every field is
/// optional; omitted values take the full-scale defaults. Powers are given in
/// dBm and converted to watts at ingest.
///
/// ```toml
/// [system]
/// n_antennas = 4
/// m_elements = 8
/// k_r = 1
/// k_t = 1
/// p_t_max_dbm = 30.0
/// noise_dbm = -80.0
/// beta_max = 4.0
/// r_min = 1.0
/// rho_outage = 0.05
/// rician_db = 3.0
///
/// [geometry]
/// ris_x = 0.0
///
/// [uncertainty]
/// model = "bounded"        # or "statistical"
/// delta_h_sq = 0.02
/// delta_f_sq = 0.01
/// delta_g_sq = 0.01
/// rho_q = 0.05
/// ```
#[derive(Debug, Clone, Default, Deserialize)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub system: SystemSection,
    #[serde(default)]
    pub geometry: GeometrySection,
    #[serde(default)]
    pub uncertainty: UncertaintySection,
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct SystemSection {
    pub n_antennas: Option<usize>,
    pub m_elements: Option<usize>,
    pub k_r: Option<usize>,
    pub k_t: Option<usize>,
    pub p_t_max_dbm: Option<f64>,
    pub noise_dbm: Option<f64>,
    pub p_ps_dbm: Option<f64>,
    pub p_pa_dbm: Option<f64>,
    pub p_u_dbm: Option<f64>,
    pub p_s_dbm: Option<f64>,
    pub p_rf_dbm: Option<f64>,
    pub xi: Option<f64>,
    pub zeta: Option<f64>,
    pub beta_max: Option<f64>,
    pub r_min: Option<f64>,
    pub rho_outage: Option<f64>,
    pub rician_db: Option<f64>,
    pub alpha_g: Option<f64>,
    pub alpha_f: Option<f64>,
    pub alpha_h: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct GeometrySection {
    pub ris_x: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct UncertaintySection {
    pub model: Option<String>,
    pub delta_h_sq: Option<f64>,
    pub delta_f_sq: Option<f64>,
    pub delta_g_sq: Option<f64>,
    pub rho_q: Option<f64>,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        Ok(toml::from_str(text)?)
    }

    pub fn params(&self, base: &SystemParams) -> SystemParams {
        let s = &self.system;
        let mut p = base.clone();
        if let Some(v) = s.n_antennas {
            p.n_antennas = v;
        }
        if let Some(v) = s.m_elements {
            p.m_elements = v;
        }
        if let Some(v) = s.k_r {
            p.k_r = v;
        }
        if let Some(v) = s.k_t {
            p.k_t = v;
        }
        if let Some(v) = s.p_t_max_dbm {
            p.p_t_max = dbm_to_watt(v);
            p.p_bs_max = p.p_t_max / 2.0;
            p.p_ris_max = p.p_t_max / 2.0;
        }
        if let Some(v) = s.noise_dbm {
            p.sigma1_sq = dbm_to_watt(v);
            p.sigma2_sq = dbm_to_watt(v);
        }
        if let Some(v) = s.p_ps_dbm {
            p.p_ps = dbm_to_watt(v);
        }
        if let Some(v) = s.p_pa_dbm {
            p.p_pa = dbm_to_watt(v);
        }
        if let Some(v) = s.p_u_dbm {
            p.p_u = dbm_to_watt(v);
        }
        if let Some(v) = s.p_s_dbm {
            p.p_s = dbm_to_watt(v);
        }
        if let Some(v) = s.p_rf_dbm {
            p.p_rf = dbm_to_watt(v);
        }
        if let Some(v) = s.xi {
            p.xi = v;
        }
        if let Some(v) = s.zeta {
            p.zeta = v;
        }
        if let Some(v) = s.beta_max {
            p.beta_max = v;
        }
        if let Some(v) = s.r_min {
            p.r_min = v;
        }
        if let Some(v) = s.rho_outage {
            p.rho_outage = v;
        }
        if let Some(v) = s.rician_db {
            p.kappa = db_to_linear(v);
        }
        if let Some(v) = s.alpha_g {
            p.alpha_g = v;
        }
        if let Some(v) = s.alpha_f {
            p.alpha_f = v;
        }
        if let Some(v) = s.alpha_h {
            p.alpha_h = v;
        }
        p
    }

    pub fn scales(&self) -> UncertaintyScales {
        let u = &self.uncertainty;
        let d = UncertaintyScales::default();
        UncertaintyScales {
            delta_h_sq: u.delta_h_sq.unwrap_or(d.delta_h_sq),
            delta_f_sq: u.delta_f_sq.unwrap_or(d.delta_f_sq),
            delta_g_sq: u.delta_g_sq.unwrap_or(d.delta_g_sq),
        }
    }

    pub fn bounded(&self) -> bool {
        self.uncertainty.model.as_deref() == Some("bounded")
    }

    pub fn rho_q(&self) -> f64 {
        self.uncertainty.rho_q.unwrap_or(0.05)
    }

    pub fn ris_x(&self) -> f64 {
        self.geometry.ris_x.unwrap_or(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_loss_reference_points() {
        assert!((path_loss_db(1.0, 2.2).unwrap() - -30.0).abs() < 1e-12);
        assert!((path_loss_db(10.0, 2.2).unwrap() - -52.0).abs() < 1e-12);
        assert!((path_loss_db(100.0, 2.8).unwrap() - -86.0).abs() < 1e-12);
        assert!(path_loss_db(0.0, 2.0).is_err());
        assert!(path_loss_db(-1.0, 2.0).is_err());
    }

    #[test]
    fn rician_extremes_and_weights() {
        let mut params = SystemParams::desk_scale();
        params.m_elements = 2;
        params.n_antennas = 2;
        params.k_r = 1;
        params.k_t = 0;
        let geo = Geometry::standard(1, 0, 0.0, 3);
        // kappa -> infinity: channel approaches the deterministic LOS part.
        let big = gen_channels(&geo, &params, 1e12, 5);
        let pl = db_to_linear(
            path_loss_db(dist(geo.bs_pos, geo.ris_pos), params.alpha_g).unwrap(),
        )
        .sqrt();
        for e in big.g.data() {
            assert!((e.norm() - pl).abs() < 1e-5 * pl, "LOS is unit-modulus scaled by sqrt(PL)");
        }
        // 3 dB factor: LOS weight squared = kappa/(1+kappa) ≈ 0.666.
        let kappa = db_to_linear(3.0);
        let w2 = kappa / (1.0 + kappa);
        assert!((w2 - 0.666).abs() < 1e-3);
    }

    #[test]
    fn rayleigh_unit_variance_oracle() {
        // kappa = 0: per-entry sample variance of h/sqrt(PL) approaches 1.
        let mut params = SystemParams::desk_scale();
        params.m_elements = 1;
        params.n_antennas = 2;
        params.k_r = 1;
        params.k_t = 0;
        let geo = Geometry::standard(1, 0, 0.0, 3);
        let pl = db_to_linear(
            path_loss_db(dist(geo.bs_pos, geo.users[0].pos), params.alpha_h).unwrap(),
        );
        let trials = 100_000;
        let mut acc = 0.0;
        for seed in 0..trials {
            let ch = gen_channels(&geo, &params, 0.0, seed as u64);
            acc += ch.h[0][0].norm_sqr() / pl;
        }
        let var = acc / trials as f64;
        assert!((var - 1.0).abs() < 0.02, "sample variance {var}");
    }

    #[test]
    fn cascade_consistency_invariant() {
        let params = SystemParams::desk_scale();
        let geo = Geometry::standard(params.k_r, params.k_t, 0.0, 11);
        let ch = gen_channels(&geo, &params, params.kappa, 11);
        for k in 0..params.k_total() {
            let expect = CMatrix::diag(&ch.f[k]).matmul(&ch.g);
            let err = (&expect - &ch.cascade[k]).max_abs();
            assert!(err < 1e-12 * (1.0 + expect.max_abs()));
        }
    }

    #[test]
    fn determinism_under_seed() {
        let params = SystemParams::desk_scale();
        let geo = Geometry::standard(params.k_r, params.k_t, 0.0, 7);
        let a = gen_channels(&geo, &params, params.kappa, 99);
        let b = gen_channels(&geo, &params, params.kappa, 99);
        assert_eq!(a, b, "identical seed must give bit-identical channels");
    }

    #[test]
    fn statistical_variance_scaling() {
        let params = SystemParams::desk_scale();
        let geo = Geometry::standard(params.k_r, params.k_t, 0.0, 21);
        let ch = gen_channels(&geo, &params, params.kappa, 21);
        let zero = statistical_variances(&ch, &UncertaintyScales::uniform(0.0));
        assert!(zero.var_h.iter().all(|&v| v == 0.0));
        assert!(zero.var_g == 0.0 && zero.var_cascade.iter().all(|&v| v == 0.0));

        let defaults = UncertaintyScales::default();
        assert_eq!(defaults.delta_h_sq, 0.02);
        assert_eq!(defaults.delta_f_sq, 0.01);
        assert_eq!(defaults.delta_g_sq, 0.01);
        let v = statistical_variances(&ch, &defaults);
        assert!((v.var_h[0] - 0.02 * ch.h[0].norm_sqr()).abs() < 1e-15);
    }

    #[test]
    fn cascade_composition_bound_by_sampling() {
        // ‖diag(f+Δf)(G+ΔG) − diag(f)G‖_F ≤ ϖ_G‖f‖ + ϖ_f‖G‖_F + ϖ_G·ϖ_f
        // whenever ‖Δf‖ ≤ ϖ_f and ‖ΔG‖_F ≤ ϖ_G.
        let mut params = SystemParams::desk_scale();
        params.m_elements = 3;
        params.n_antennas = 2;
        let geo = Geometry::standard(params.k_r, params.k_t, 0.0, 5);
        let ch = gen_channels(&geo, &params, params.kappa, 5);
        let scales = UncertaintyScales::default();
        let v = statistical_variances(&ch, &scales);
        let omega_f = v.var_f[0].sqrt();
        let omega_g = v.var_g.sqrt();
        let bound = v.var_cascade[0].sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..1000 {
            let df = {
                let raw = CVector::from_fn(params.m_elements, |_| cscg(&mut rng));
                let s = omega_f * rng.gen::<f64>() / raw.norm();
                raw.scale(C64::new(s, 0.0))
            };
            let dg = {
                let raw =
                    CVector::from_fn(params.m_elements * params.n_antennas, |_| cscg(&mut rng));
                let s = omega_g * rng.gen::<f64>() / raw.norm();
                raw.scale(C64::new(s, 0.0))
                    .unvec(params.m_elements, params.n_antennas)
            };
            let f_true = &ch.f[0] + &df;
            let g_true = &ch.g + &dg;
            let cascade_err =
                (&CMatrix::diag(&f_true).matmul(&g_true) - &ch.cascade[0]).frob_norm();
            assert!(
                cascade_err <= bound + 1e-12,
                "composition bound violated: {cascade_err} > {bound}"
            );
        }
    }

    #[test]
    fn chi_square_quantile_reference() {
        // dof=2: quantile has the closed form -2 ln(1-p).
        let q = chi_square_quantile(2.0, 0.95);
        assert!((q - 5.991464547107979).abs() < 1e-8, "got {q}");
        let xi = (1.0f64 / 2.0 * q).sqrt();
        assert!((xi - (2.9957322735539909f64).sqrt()).abs() < 1e-8);
    }

    #[test]
    fn chi_square_quantile_against_statrs_cdf() {
        // Feed the computed quantile through an independent CDF: it must land
        // back on the requested level.
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        for dof in [1.0, 2.0, 4.0, 8.0, 16.0, 64.0, 120.0] {
            let oracle = ChiSquared::new(dof).unwrap();
            for p in [0.01, 0.5, 0.9, 0.95, 0.999] {
                let mine = chi_square_quantile(dof, p);
                let back = oracle.cdf(mine);
                assert!(
                    (back - p).abs() < 1e-9,
                    "dof={dof} p={p}: quantile {mine} maps back to {back}"
                );
            }
        }
    }

    #[test]
    fn radius_monotone_in_dof_and_vanishing() {
        let mut params = SystemParams::desk_scale();
        let geo = Geometry::standard(params.k_r, params.k_t, 0.0, 2);
        let ch = gen_channels(&geo, &params, params.kappa, 2);
        let vars = statistical_variances(&ch, &UncertaintyScales::default());
        // rho_q -> 1⁻ drives the quantile level to 0 and radii toward 0; at
        // dof=2 the closed form is -2·ln(1-p).
        assert!(chi_square_quantile(2.0, 1e-12) < 3e-12);
        let loose = bounded_radii(&vars, &params, 0.05).unwrap();
        let tiny = bounded_radii(&vars, &params, 1.0 - 1e-12).unwrap();
        // Shrinkage is fastest at low dof (h: dof 2N) and slower at dof 2MN.
        assert!(tiny.xi_g < 0.5 * loose.xi_g, "radii shrink as rho_q -> 1");
        assert!(tiny.xi_h[0] < 0.05 * loose.xi_h[0]);
        // Quantile is monotone nondecreasing in dof at fixed level.
        let mut last = 0.0;
        for dof in [2.0, 4.0, 8.0, 32.0, 128.0] {
            let q = chi_square_quantile(dof, 0.95);
            assert!(q >= last);
            last = q;
        }
        // Larger antenna count -> larger h-radius at equal variance.
        params.n_antennas = 4;
        let r4 = bounded_radii(&vars, &params, 0.05).unwrap();
        params.n_antennas = 8;
        let r8 = bounded_radii(&vars, &params, 0.05).unwrap();
        assert!(r8.xi_h[0] >= r4.xi_h[0]);
    }

    #[test]
    fn bounded_sampler_respects_radius() {
        let params = SystemParams::desk_scale();
        let geo = Geometry::standard(params.k_r, params.k_t, 0.0, 4);
        let ch = gen_channels(&geo, &params, params.kappa, 4);
        let vars = statistical_variances(&ch, &UncertaintyScales::default());
        let radii = bounded_radii(&vars, &params, 0.05).unwrap();
        let model = UncertaintyModel::Bounded(radii.clone());
        for seed in 0..100_000u64 {
            let s = sample_error(&model, &params, seed, SampleMode::Interior);
            assert!(s.dh[0].norm() <= radii.xi_h[0] * (1.0 + 1e-12));
            if seed < 100 {
                let b = sample_error(&model, &params, seed, SampleMode::Boundary);
                assert!((b.dh[0].norm() - radii.xi_h[0]).abs() < 1e-9 * radii.xi_h[0]);
                assert!((b.dg.frob_norm() - radii.xi_g).abs() < 1e-9 * radii.xi_g);
            }
        }
    }

    #[test]
    fn zero_model_gives_zero_errors() {
        let params = SystemParams::desk_scale();
        let model = UncertaintyModel::perfect(params.k_total());
        let s = sample_error(&model, &params, 1, SampleMode::Interior);
        assert!(s.dh.iter().all(|v| v.norm() == 0.0));
        assert!(s.dg.frob_norm() == 0.0);
    }

    #[test]
    fn statistical_sampler_covariance_oracle() {
        let mut params = SystemParams::desk_scale();
        params.n_antennas = 2;
        let geo = Geometry::standard(params.k_r, params.k_t, 0.0, 6);
        let ch = gen_channels(&geo, &params, params.kappa, 6);
        let vars = statistical_variances(&ch, &UncertaintyScales::default());
        let var0 = vars.var_h[0];
        let model = UncertaintyModel::Statistical(vars);
        let trials = 100_000;
        let mut diag = [0.0f64; 2];
        let mut cross = C64::new(0.0, 0.0);
        for seed in 0..trials {
            let s = sample_error(&model, &params, seed as u64, SampleMode::Interior);
            diag[0] += s.dh[0][0].norm_sqr();
            diag[1] += s.dh[0][1].norm_sqr();
            cross += s.dh[0][0].conj() * s.dh[0][1];
        }
        for d in diag {
            let est = d / trials as f64;
            assert!(
                (est - var0).abs() < 0.03 * var0,
                "diagonal covariance {est} vs {var0}"
            );
        }
        assert!((cross.norm() / trials as f64) < 0.03 * var0, "off-diagonal should vanish");
    }

    #[test]
    fn config_defaults_and_overrides() {
        let cfg = ScenarioConfig::from_toml(
            r#"
            [system]
            n_antennas = 3
            p_t_max_dbm = 20.0
            [uncertainty]
            model = "bounded"
            rho_q = 0.1
            "#,
        )
        .unwrap();
        let p = cfg.params(&SystemParams::paper_scale());
        assert_eq!(p.n_antennas, 3);
        assert_eq!(p.m_elements, 32, "unset fields keep defaults");
        assert!((p.p_t_max - 0.1).abs() < 1e-12, "20 dBm = 0.1 W");
        assert!((p.p_bs_max - 0.05).abs() < 1e-12, "even split");
        assert!(cfg.bounded());
        assert_eq!(cfg.rho_q(), 0.1);
        // Power-split default for schemes without a surface.
        let mut q = p.clone();
        q.apply_power_split(false);
        assert_eq!(q.p_bs_max, q.p_t_max);
    }

    #[test]
    fn static_power_floor_from_table_constants() {
        // K=6, N=6, M=32 floor from the dBm constants.
        let p = SystemParams::paper_scale();
        let floor = p.k_total() as f64 * p.p_u
            + p.p_s
            + p.n_antennas as f64 * p.p_rf
            + 2.0 * p.m_elements as f64 * (p.p_ps + p.p_pa);
        let expect = 6.0 * 0.01 + 10.0 + 6.0 * 1.0 + 64.0 * (1e-4 + 10f64.powf(-3.5));
        assert!((floor - expect).abs() < 1e-12);
        assert!((floor - 16.086638).abs() < 1e-3, "floor = {floor}");
    }
}
