//! Browser bindings: band structure, two-polariton elastic scattering and a
//! small-grid two-photon wavepacket run.

use chiralqed::model::build_grid;
use chiralqed::polariton::{band_samples, Band};
use chiralqed::two_photon::{build_input, ideal_outputs_with_phase, product_weight, propagate_gate, ChannelPair};
use chiralqed::two_polariton::{scatter, TwoPolaritonInput};
use chiralqed::{GateConfig, ModelParams};
use wasm_bindgen::prelude::*;

fn params(delta_k_d: f64, gamma_a: f64, n_emitters: usize) -> Result<ModelParams, String> {
    ModelParams {
        gamma_a,
        gamma_b: 1.0 - gamma_a,
        delta_k_d,
        n_emitters,
        ..ModelParams::default()
    }
    .validate()
    .map_err(|e| e.to_string())
}

/// Polariton bands; `band` holds 0 for the minus band and 1 for the plus band.
#[wasm_bindgen]
#[derive(Debug, Clone, Default)]
pub struct Dispersion {
    q_d: Vec<f64>,
    omega: Vec<f64>,
    band: Vec<f64>,
}

#[wasm_bindgen]
impl Dispersion {
    #[wasm_bindgen(getter)]
    pub fn q_d(&self) -> Vec<f64> {
        self.q_d.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn omega(&self) -> Vec<f64> {
        self.omega.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn band(&self) -> Vec<f64> {
        self.band.clone()
    }
}

pub fn dispersion_curve(delta_k_d: f64, gamma_a: f64, points: usize) -> Result<Dispersion, String> {
    let p = params(delta_k_d, gamma_a, 1)?;
    let mut out = Dispersion::default();
    for (tag, band) in [(0.0, Band::Minus), (1.0, Band::Plus)] {
        for bp in band_samples(band, &p, points, 0.02) {
            out.q_d.push(bp.q_d);
            out.omega.push(bp.omega);
            out.band.push(tag);
        }
    }
    Ok(out)
}

#[wasm_bindgen]
pub fn dispersion(delta_k_d: f64, gamma_a: f64, points: usize) -> Result<Dispersion, JsError> {
    dispersion_curve(delta_k_d, gamma_a, points).map_err(|e| JsError::new(&e))
}

/// |t_el|² and arg t_el of a resonant polariton pair versus detuning; NaN where undefined.
#[wasm_bindgen]
#[derive(Debug, Clone, Default)]
pub struct ElasticScan {
    delta: Vec<f64>,
    probability: Vec<f64>,
    phase: Vec<f64>,
}

#[wasm_bindgen]
impl ElasticScan {
    #[wasm_bindgen(getter)]
    pub fn delta(&self) -> Vec<f64> {
        self.delta.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn probability(&self) -> Vec<f64> {
        self.probability.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn phase(&self) -> Vec<f64> {
        self.phase.clone()
    }
}

pub fn elastic_scan_values(
    delta_k_d: f64,
    gamma_a: f64,
    delta_min: f64,
    delta_max: f64,
    count: usize,
) -> Result<ElasticScan, String> {
    let p = params(delta_k_d, gamma_a, 1)?;
    if count < 2 || !(delta_max > delta_min) {
        return Err("need count >= 2 and delta_max > delta_min".into());
    }
    let mut out = ElasticScan::default();
    for k in 0..count {
        let delta = delta_min + (delta_max - delta_min) * k as f64 / (count - 1) as f64;
        let r = TwoPolaritonInput::resonant_pair(delta, &p).and_then(|input| scatter(&input, &p));
        out.delta.push(delta);
        match r {
            Ok(r) => {
                out.probability.push(r.t_el.norm_sqr());
                out.phase.push(r.elastic_phase());
            }
            Err(_) => {
                out.probability.push(f64::NAN);
                out.phase.push(f64::NAN);
            }
        }
    }
    Ok(out)
}

#[wasm_bindgen]
pub fn elastic_scan(
    delta_k_d: f64,
    gamma_a: f64,
    delta_min: f64,
    delta_max: f64,
    count: usize,
) -> Result<ElasticScan, JsError> {
    elastic_scan_values(delta_k_d, gamma_a, delta_min, delta_max, count).map_err(|e| JsError::new(&e))
}

/// Gate output of the crossing pair: ab-sector density on an n×n grid, row-major.
#[wasm_bindgen]
#[derive(Debug, Clone, Default)]
pub struct Wavepacket {
    points: Vec<f64>,
    density: Vec<f64>,
    overlap_abs: f64,
    overlap_arg: f64,
    non_product: f64,
}

#[wasm_bindgen]
impl Wavepacket {
    #[wasm_bindgen(getter)]
    pub fn points(&self) -> Vec<f64> {
        self.points.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn density(&self) -> Vec<f64> {
        self.density.clone()
    }
    /// |⟨linear ideal|output⟩| in the ab sector.
    #[wasm_bindgen(getter)]
    pub fn overlap_abs(&self) -> f64 {
        self.overlap_abs
    }
    #[wasm_bindgen(getter)]
    pub fn overlap_arg(&self) -> f64 {
        self.overlap_arg
    }
    #[wasm_bindgen(getter)]
    pub fn non_product(&self) -> f64 {
        self.non_product
    }
}

pub fn wavepacket_run(n_emitters: usize, sigma: f64, delta_k_d: f64, grid_points: usize) -> Result<Wavepacket, String> {
    let p = params(delta_k_d, 0.5, n_emitters)?;
    if !(3..=301).contains(&grid_points) {
        return Err("grid_points must lie in 3..=301".into());
    }
    let cfg = GateConfig::default().with_sigma(sigma).validate().map_err(|e| e.to_string())?;
    let grid = build_grid((6.0 * sigma).max(2.0), grid_points).map_err(|e| e.to_string())?;
    let input = build_input(&cfg, &p, &grid).map_err(|e| e.to_string())?;
    let out = propagate_gate(&input, &p, &cfg, true);
    let reference = ideal_outputs_with_phase(&cfg, &p, &grid, 0.0).map_err(|e| e.to_string())?;
    let overlap = reference.psi_ab.inner(&out);
    Ok(Wavepacket {
        points: grid.points.clone(),
        density: out.sector(ChannelPair::Ab).iter().map(|z| z.norm_sqr()).collect(),
        overlap_abs: overlap.norm(),
        overlap_arg: overlap.arg(),
        non_product: 1.0 - product_weight(&out),
    })
}

#[wasm_bindgen]
pub fn wavepacket(n_emitters: usize, sigma: f64, delta_k_d: f64, grid_points: usize) -> Result<Wavepacket, JsError> {
    wavepacket_run(n_emitters, sigma, delta_k_d, grid_points).map_err(|e| JsError::new(&e))
}
