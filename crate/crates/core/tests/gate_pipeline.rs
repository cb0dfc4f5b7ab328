use chiralqed::model::build_grid;
use chiralqed::single_photon::{chain_g1, TMatrix};
use chiralqed::two_photon::{apply_chain, apply_product_map, build_input, gaussian_pulse, propagate_gate, TwoPhotonState};
use chiralqed::{GateConfig, ModelParams};
use num_complex::Complex64;
use proptest::prelude::*;

fn params(delta_k_d: f64, delta_gamma: f64, gamma_loss: f64, n: usize) -> ModelParams {
    ModelParams {
        gamma_loss,
        ..ModelParams::symmetric(delta_k_d, n).with_asymmetry(delta_gamma)
    }
    .validate()
    .unwrap()
}

fn max_diff(a: &TwoPhotonState, b: &TwoPhotonState) -> f64 {
    a.amplitudes.iter().zip(&b.amplitudes).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

#[test]
fn linear_gate_factorizes_into_single_photon_maps() {
    let p = params(1.5 * std::f64::consts::PI, 0.1, 0.0, 4);
    let cfg = GateConfig::default().with_sigma(0.3).validate().unwrap();
    let grid = build_grid(2.0, 41).unwrap();
    let input = build_input(&cfg, &p, &grid).unwrap();

    let gate = propagate_gate(&input, &p, &cfg, false);
    let mats: Vec<TMatrix> = grid.points.iter().map(|&x| chain_g1(x, &p, &cfg)).collect();
    let oracle = apply_product_map(&input, &mats);
    assert!(max_diff(&gate, &oracle) < 1e-12);
}

#[test]
fn nonlinear_term_stays_on_its_energy_slice() {
    let p = params(1.5 * std::f64::consts::PI, 0.0, 0.01, 3);
    let grid = build_grid(2.0, 41).unwrap();
    let phi = gaussian_pulse(&grid, 0.5, 0.0);
    let k = 41;
    let input = TwoPhotonState::product(&grid, 0, &phi, 1, &phi).restrict_to_slice(k);
    let out = apply_chain(&input, &p, true);
    assert!(out.off_slice_weight(k) < 1e-28);
    assert!(out.norm_sqr() > 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn lossless_linear_chain_preserves_norm(
        dk in 0.1f64..6.2,
        dg in -0.9f64..0.9,
        n in 1usize..6,
        seed in 0u64..1000,
    ) {
        let p = params(dk, dg, 0.0, n);
        let grid = build_grid(2.0, 21).unwrap();
        let mut state = TwoPhotonState::zeros(&grid);
        for (idx, z) in state.amplitudes.iter_mut().enumerate() {
            let x = ((idx as u64 + 1) * (seed + 7)) as f64;
            *z = Complex64::new(x.sin(), (1.3 * x).cos());
        }
        let out = apply_chain(&state, &p, false);
        prop_assert!((out.norm_sqr() / state.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn loss_never_adds_weight(gamma in 0.0f64..0.2, n in 1usize..5) {
        let p = params(1.5 * std::f64::consts::PI, 0.0, gamma, n);
        let grid = build_grid(2.0, 31).unwrap();
        let phi = gaussian_pulse(&grid, 0.4, 0.0);
        let input = TwoPhotonState::product(&grid, 0, &phi, 1, &phi);
        let lossless = apply_chain(&input, &params(1.5 * std::f64::consts::PI, 0.0, 0.0, n), true);
        let lossy = apply_chain(&input, &p, true);
        prop_assert!(lossy.norm_sqr() <= lossless.norm_sqr() + 1e-12);
    }
}
