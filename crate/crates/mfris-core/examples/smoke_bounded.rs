use mfris_core::scenario::{ScenarioInstance, SystemParams, UncertaintyScales};
use mfris_core::solver_bounded::{init, solve_w, BoundedOptions, SurfaceMode};

fn main() {
    let mut params = SystemParams::desk_scale();
    params.n_antennas = 3;
    params.m_elements = 4;
    params.k_r = 1;
    params.k_t = 1;
    let sc = ScenarioInstance::generate(&params, &UncertaintyScales::default(), true, 0.05, 0.0, 7)
        .unwrap();
    let opts = BoundedOptions::default();
    let it = init(&sc, SurfaceMode::Full, &opts).unwrap();
    eprintln!("init psi={:.5} r={:?} alpha={:?}", it.psi, it.r, it.alpha);
    let (out, status) = solve_w(&sc, SurfaceMode::Full, &it, &opts);
    eprintln!("solve_w status {status:?} psi {}", out.psi);
}
