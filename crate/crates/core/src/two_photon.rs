//! Two-photon wavepackets on a square frequency grid and their propagation
//! through the emitter array and the beam splitters.
//!
//! The state is stored on the full (δ1, δ2) plane with four channel pairs
//! (aa, ab, ba, bb); photon 1 sits at `points[i]` in the first channel,
//! photon 2 at `points[j]` in the second. Bosonic symmetry reads
//! ψ_{αλ}(i, j) = ψ_{λα}(j, i). Anti-diagonals i + j = const are the exact
//! energy slices on which the correlated part of the emitter response acts.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FrequencyGrid, GateConfig, ModelParams};
use crate::polariton::resonant_delays;
use crate::single_photon::{beam_splitter_t, half_cell_phases, unit_cell_s1, TMatrix};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelPair {
    Aa = 0,
    Ab = 1,
    Ba = 2,
    Bb = 3,
}

impl ChannelPair {
    pub const ALL: [ChannelPair; 4] = [ChannelPair::Aa, ChannelPair::Ab, ChannelPair::Ba, ChannelPair::Bb];

    pub fn label(&self) -> &'static str {
        match self {
            ChannelPair::Aa => "aa",
            ChannelPair::Ab => "ab",
            ChannelPair::Ba => "ba",
            ChannelPair::Bb => "bb",
        }
    }

    /// (first photon channel, second photon channel), 0 = a, 1 = b.
    pub fn channels(&self) -> (usize, usize) {
        let c = *self as usize;
        (c >> 1, c & 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoPhotonState {
    pub grid: FrequencyGrid,
    /// Layout `(i * n + j) * 4 + pair`.
    pub amplitudes: Vec<Complex64>,
}

impl TwoPhotonState {
    pub fn zeros(grid: &FrequencyGrid) -> Self {
        let n = grid.len();
        Self {
            grid: grid.clone(),
            amplitudes: vec![ZERO; n * n * 4],
        }
    }

    pub fn n(&self) -> usize {
        self.grid.len()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, pair: ChannelPair) -> usize {
        (i * self.n() + j) * 4 + pair as usize
    }

    pub fn get(&self, i: usize, j: usize, pair: ChannelPair) -> Complex64 {
        self.amplitudes[self.index(i, j, pair)]
    }

    pub fn set(&mut self, i: usize, j: usize, pair: ChannelPair, value: Complex64) {
        let k = self.index(i, j, pair);
        self.amplitudes[k] = value;
    }

    /// Symmetrised product state (φ1 in channel c1) ⊗ (φ2 in channel c2).
    pub fn product(grid: &FrequencyGrid, c1: usize, phi1: &[Complex64], c2: usize, phi2: &[Complex64]) -> Self {
        let n = grid.len();
        let mut s = Self::zeros(grid);
        let p12 = c1 * 2 + c2;
        let p21 = c2 * 2 + c1;
        for i in 0..n {
            for j in 0..n {
                let base = (i * n + j) * 4;
                s.amplitudes[base + p12] += phi1[i] * phi2[j] * FRAC_1_SQRT_2;
                s.amplitudes[base + p21] += phi2[i] * phi1[j] * FRAC_1_SQRT_2;
            }
        }
        s
    }

    pub fn norm_sqr(&self) -> f64 {
        let n = self.n();
        let w = &self.grid.weights;
        self.amplitudes
            .par_chunks(n * 4)
            .enumerate()
            .map(|(i, row)| {
                let s: f64 = row
                    .chunks(4)
                    .zip(w)
                    .map(|(c, wj)| wj * c.iter().map(|z| z.norm_sqr()).sum::<f64>())
                    .sum();
                w[i] * s
            })
            .collect::<Vec<_>>()
            .iter()
            .sum()
    }

    /// ⟨self|other⟩ on the grid.
    pub fn inner(&self, other: &TwoPhotonState) -> Complex64 {
        let n = self.n();
        let w = &self.grid.weights;
        self.amplitudes
            .par_chunks(n * 4)
            .zip(other.amplitudes.par_chunks(n * 4))
            .enumerate()
            .map(|(i, (ra, rb))| {
                let mut s = ZERO;
                for (j, (ca, cb)) in ra.chunks(4).zip(rb.chunks(4)).enumerate() {
                    let mut t = ZERO;
                    for p in 0..4 {
                        t += ca[p].conj() * cb[p];
                    }
                    s += t * w[j];
                }
                s * w[i]
            })
            .collect::<Vec<_>>()
            .iter()
            .sum()
    }

    /// Largest |ψ_{αλ}(i, j) − ψ_{λα}(j, i)|.
    pub fn bosonic_asymmetry(&self) -> f64 {
        let n = self.n();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                for pair in ChannelPair::ALL {
                    let (a, b) = pair.channels();
                    let swapped = b * 2 + a;
                    let x = self.amplitudes[(i * n + j) * 4 + pair as usize];
                    let y = self.amplitudes[(j * n + i) * 4 + swapped];
                    worst = worst.max((x - y).norm());
                }
            }
        }
        worst
    }

    /// Row-major n×n field of one channel pair.
    pub fn sector(&self, pair: ChannelPair) -> Vec<Complex64> {
        self.amplitudes.iter().skip(pair as usize).step_by(4).copied().collect()
    }

    /// Keep only anti-diagonal `k` (all channel pairs), zero elsewhere.
    pub fn restrict_to_slice(&self, k: usize) -> Self {
        let n = self.n();
        let mut out = Self::zeros(&self.grid);
        for i in 0..n {
            if k >= i && k - i < n {
                let base = (i * n + k - i) * 4;
                out.amplitudes[base..base + 4].copy_from_slice(&self.amplitudes[base..base + 4]);
            }
        }
        out
    }

    /// Weight carried by anti-diagonals other than `k`.
    pub fn off_slice_weight(&self, k: usize) -> f64 {
        let n = self.n();
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i + j != k {
                    let base = (i * n + j) * 4;
                    s += self.amplitudes[base..base + 4].iter().map(|z| z.norm_sqr()).sum::<f64>();
                }
            }
        }
        s
    }
}

/// One fixed-energy line of the grid with its line-measure weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceView {
    pub energy: f64,
    pub nodes: Vec<(usize, usize)>,
    pub weights: Vec<f64>,
}

/// Anti-diagonal `k` (i + j = k) of a grid; trapezoid weights along the line,
/// a single-node slice carries zero measure.
pub fn slice_view(grid: &FrequencyGrid, k: usize) -> SliceView {
    let n = grid.len();
    let lo = k.saturating_sub(n - 1);
    let hi = k.min(n - 1);
    let nodes: Vec<(usize, usize)> = (lo..=hi).map(|i| (i, k - i)).collect();
    let m = nodes.len();
    let weights = (0..m)
        .map(|idx| {
            if m == 1 {
                0.0
            } else if idx == 0 || idx == m - 1 {
                0.5 * grid.spacing
            } else {
                grid.spacing
            }
        })
        .collect();
    SliceView {
        energy: grid.points[lo] + grid.points[k - lo],
        nodes,
        weights,
    }
}

#[inline]
fn slice_weight(i: usize, j: usize, n: usize, h: f64) -> f64 {
    let mut w = h;
    if i == 0 || j == n - 1 {
        w -= 0.5 * h;
    }
    if i == n - 1 || j == 0 {
        w -= 0.5 * h;
    }
    w
}

/// Gaussian pulse of bandwidth σ with delay phase e^{iδτ}, normalised on the grid.
pub fn gaussian_pulse(grid: &FrequencyGrid, sigma: f64, delay: f64) -> Vec<Complex64> {
    let raw: Vec<f64> = grid
        .points
        .iter()
        .map(|&x| (-x * x / (4.0 * sigma * sigma)).exp())
        .collect();
    let norm: f64 = raw.iter().zip(&grid.weights).map(|(g, w)| w * g * g).sum::<f64>().sqrt();
    raw.iter()
        .zip(&grid.points)
        .map(|(g, &x)| (I * x * delay).exp() * (g / norm))
        .collect()
}

/// Fraction of a normalised Gaussian pulse's weight that falls on the grid.
pub fn captured_fraction(grid: &FrequencyGrid, sigma: f64) -> f64 {
    let amp = 1.0 / (sigma * (2.0 * PI).sqrt()).sqrt();
    grid.points
        .iter()
        .zip(&grid.weights)
        .map(|(&x, w)| {
            let g = amp * (-x * x / (4.0 * sigma * sigma)).exp();
            w * g * g
        })
        .sum()
}

/// Delay put on the a photon: the configured value or the mid-array crossing delay.
pub fn input_delay(config: &GateConfig, params: &ModelParams) -> Result<f64> {
    match config.tau {
        Some(t) => Ok(t),
        None => Ok(resonant_delays(params)?.initial_delay),
    }
}

/// Product of a delayed Gaussian in channel a and a Gaussian in channel b.
pub fn build_input(config: &GateConfig, params: &ModelParams, grid: &FrequencyGrid) -> Result<TwoPhotonState> {
    let sigma = config.sigma;
    let w = grid.half_width();
    if w < 6.0 * sigma || w < 1.5 * params.total_linewidth() {
        return Err(Error::InsufficientCoverage {
            captured: captured_fraction(grid, sigma),
        });
    }
    let tau = input_delay(config, params)?;
    let phi_a = gaussian_pulse(grid, sigma, tau);
    let phi_b = gaussian_pulse(grid, sigma, 0.0);
    let mut state = TwoPhotonState::product(grid, 0, &phi_a, 1, &phi_b);
    let norm = state.norm_sqr().sqrt();
    state.amplitudes.iter_mut().for_each(|z| *z /= norm);
    Ok(state)
}

/// Lorentzian two-pole profile of the bound state at total detuning `energy`.
pub fn bound_state_profile(energy: f64, delta1: f64, params: &ModelParams) -> Complex64 {
    let half = 0.5 * params.total_linewidth();
    let delta2 = energy - delta1;
    Complex64::new(half, -delta1).inv() + Complex64::new(half, -delta2).inv()
}

/// Unit-cell action precomputed on a grid.
#[derive(Debug, Clone)]
pub struct UnitCell {
    s1: Vec<TMatrix>,
    /// e^{ikα d/2}·uα at each node: projector leg of the correlated term.
    leg: Vec<[Complex64; 2]>,
    tc_minus_one: Vec<Complex64>,
    lorentz: Vec<Complex64>,
    nonlinear: bool,
}

impl UnitCell {
    pub fn new(params: &ModelParams, grid: &FrequencyGrid, nonlinear: bool) -> Self {
        let total = params.gamma_a + params.gamma_b;
        let u = [(params.gamma_a / total).sqrt(), (params.gamma_b / total).sqrt()];
        let half = 0.5 * params.total_linewidth();
        let mut s1 = Vec::with_capacity(grid.len());
        let mut leg = Vec::with_capacity(grid.len());
        let mut tc = Vec::with_capacity(grid.len());
        let mut lorentz = Vec::with_capacity(grid.len());
        for &x in &grid.points {
            s1.push(unit_cell_s1(x, params));
            let [pa, pb] = half_cell_phases(x, params);
            leg.push([pa * u[0], pb * u[1]]);
            tc.push(Complex64::new(-2.0 * total, 0.0) / Complex64::new(params.gamma_loss + total, -2.0 * x));
            lorentz.push(Complex64::new(half, -x).inv());
        }
        Self {
            s1,
            leg,
            tc_minus_one: tc,
            lorentz,
            nonlinear,
        }
    }

    pub fn apply(&self, state: &TwoPhotonState) -> TwoPhotonState {
        let n = state.n();
        let h = state.grid.spacing;
        let mut out = TwoPhotonState::zeros(&state.grid);

        let slices = if self.nonlinear {
            // Weighted projections onto the coupled channel pair, one per node.
            let proj: Vec<Complex64> = state
                .amplitudes
                .par_chunks(n * 4)
                .enumerate()
                .flat_map_iter(|(i, row)| {
                    let li = self.leg[i];
                    let ti = self.tc_minus_one[i];
                    row.chunks(4).enumerate().map(move |(j, c)| {
                        let lj = self.leg[j];
                        let cc = li[0] * lj[0] * c[0] + li[0] * lj[1] * c[1] + li[1] * lj[0] * c[2] + li[1] * lj[1] * c[3];
                        ti * self.tc_minus_one[j] * cc * slice_weight(i, j, n, h)
                    })
                })
                .collect();
            (0..2 * n - 1)
                .into_par_iter()
                .map(|k| {
                    let lo = k.saturating_sub(n - 1);
                    let hi = k.min(n - 1);
                    (lo..=hi).map(|i| proj[i * n + k - i]).sum::<Complex64>()
                })
                .collect::<Vec<_>>()
        } else {
            Vec::new()
        };
        let pref = 1.0 / (2.0 * PI);

        out.amplitudes
            .par_chunks_mut(n * 4)
            .zip(state.amplitudes.par_chunks(n * 4))
            .enumerate()
            .for_each(|(i, (orow, irow))| {
                let si = self.s1[i].m;
                for j in 0..n {
                    let sj = self.s1[j].m;
                    let c = &irow[j * 4..j * 4 + 4];
                    let o = &mut orow[j * 4..j * 4 + 4];
                    for b in 0..2 {
                        // Apply photon 2's matrix first, then photon 1's.
                        let r0 = sj[0][0] * c[0] + sj[0][1] * c[1];
                        let r1 = sj[1][0] * c[0] + sj[1][1] * c[1];
                        let r2 = sj[0][0] * c[2] + sj[0][1] * c[3];
                        let r3 = sj[1][0] * c[2] + sj[1][1] * c[3];
                        o[b * 2] = si[b][0] * r0 + si[b][1] * r2;
                        o[b * 2 + 1] = si[b][0] * r1 + si[b][1] * r3;
                    }
                    if self.nonlinear {
                        let z = slices[i + j] * (self.lorentz[i] + self.lorentz[j]) * pref;
                        let li = self.leg[i];
                        let lj = self.leg[j];
                        o[0] -= z * li[0] * lj[0];
                        o[1] -= z * li[0] * lj[1];
                        o[2] -= z * li[1] * lj[0];
                        o[3] -= z * li[1] * lj[1];
                    }
                }
            });
        out
    }
}

pub fn apply_unit_cell(state: &TwoPhotonState, params: &ModelParams, nonlinear: bool) -> TwoPhotonState {
    UnitCell::new(params, &state.grid, nonlinear).apply(state)
}

/// `params.n_emitters` unit cells in sequence.
pub fn apply_chain(state: &TwoPhotonState, params: &ModelParams, nonlinear: bool) -> TwoPhotonState {
    let cell = UnitCell::new(params, &state.grid, nonlinear);
    let mut s = state.clone();
    for _ in 0..params.n_emitters {
        s = cell.apply(&s);
    }
    s
}

/// Independent frequency-dependent 2×2 map on each photon.
pub fn apply_product_map(state: &TwoPhotonState, mats: &[TMatrix]) -> TwoPhotonState {
    let n = state.n();
    let mut out = TwoPhotonState::zeros(&state.grid);
    out.amplitudes
        .par_chunks_mut(n * 4)
        .zip(state.amplitudes.par_chunks(n * 4))
        .enumerate()
        .for_each(|(i, (orow, irow))| {
            let mi = mats[i].m;
            for j in 0..n {
                let mj = mats[j].m;
                let c = &irow[j * 4..j * 4 + 4];
                for b in 0..2 {
                    for nu in 0..2 {
                        let mut acc = ZERO;
                        for a in 0..2 {
                            for l in 0..2 {
                                acc += mi[b][a] * mj[nu][l] * c[a * 2 + l];
                            }
                        }
                        orow[j * 4 + b * 2 + nu] = acc;
                    }
                }
            }
        });
    out
}

pub fn apply_beam_splitter2(state: &TwoPhotonState, config: &GateConfig) -> TwoPhotonState {
    let mats: Vec<TMatrix> = state.grid.points.iter().map(|&x| beam_splitter_t(x, config)).collect();
    apply_product_map(state, &mats)
}

/// Group delays picked up on the a → + → a and b → − → b paths through the
/// two splitters (first-order phase slopes at resonance).
pub fn splitter_delays(config: &GateConfig) -> (f64, f64) {
    let h = 1e-4;
    let plus = [Complex64::from(FRAC_1_SQRT_2), Complex64::from(FRAC_1_SQRT_2)];
    let minus = [Complex64::from(FRAC_1_SQRT_2), Complex64::from(-FRAC_1_SQRT_2)];
    let path = |d: f64, input: [Complex64; 2], target: [Complex64; 2]| {
        let out = beam_splitter_t(d, config).apply(input);
        let amp = target[0] * out[0] + target[1] * out[1];
        amp * amp
    };
    let slope = |input, target| (path(h, input, target) / path(-h, input, target)).arg() / (2.0 * h);
    (
        slope([Complex64::from(1.0), ZERO], plus),
        slope([ZERO, Complex64::from(1.0)], minus),
    )
}

/// Target outputs of the ideal gate.
#[derive(Debug, Clone)]
pub struct IdealOutputs {
    pub psi_a: Vec<Complex64>,
    pub psi_b: Vec<Complex64>,
    pub psi_ab: TwoPhotonState,
}

/// Ideal single-photon outputs and the ideal two-photon output with phase `phi`.
pub fn ideal_outputs_with_phase(
    config: &GateConfig,
    params: &ModelParams,
    grid: &FrequencyGrid,
    phi: f64,
) -> Result<IdealOutputs> {
    let delays = resonant_delays(params)?;
    let n = params.n_emitters as f64;
    let (bs_a, bs_b) = if config.compensate_splitter_delay {
        splitter_delays(config)
    } else {
        (0.0, 0.0)
    };
    let tau = input_delay(config, params)?;
    let sign = if params.n_emitters % 2 == 0 { 1.0 } else { -1.0 };
    let k0 = (I * params.k0_d * n).exp();
    let psi_a: Vec<Complex64> = gaussian_pulse(grid, config.sigma, n * delays.tau_plus + bs_a)
        .into_iter()
        .map(|z| z * sign * k0)
        .collect();
    let psi_b: Vec<Complex64> = gaussian_pulse(grid, config.sigma, n * delays.tau_minus + bs_b)
        .into_iter()
        .map(|z| z * k0)
        .collect();
    let delayed_a: Vec<Complex64> = gaussian_pulse(grid, config.sigma, n * delays.tau_plus + tau + bs_a)
        .into_iter()
        .map(|z| z * sign * k0 * (I * phi).exp())
        .collect();
    let psi_ab = TwoPhotonState::product(grid, 0, &delayed_a, 1, &psi_b);
    Ok(IdealOutputs { psi_a, psi_b, psi_ab })
}

pub fn ideal_outputs(config: &GateConfig, params: &ModelParams, grid: &FrequencyGrid) -> Result<IdealOutputs> {
    ideal_outputs_with_phase(config, params, grid, config.phi_ideal)
}

/// Full gate on the two-photon input: splitter, array, splitter.
pub fn propagate_gate(
    input: &TwoPhotonState,
    params: &ModelParams,
    config: &GateConfig,
    nonlinear: bool,
) -> TwoPhotonState {
    let s = apply_beam_splitter2(input, config);
    let s = apply_chain(&s, params, nonlinear);
    apply_beam_splitter2(&s, config)
}

/// Plotting fields of a state and its overlap with a reference.
#[derive(Debug, Clone)]
pub struct SpectralDensity {
    /// |ψ|² per channel pair, row-major n×n.
    pub densities: Vec<Vec<f64>>,
    pub real_parts: Vec<Vec<f64>>,
    pub imag_parts: Vec<Vec<f64>>,
    pub norm_sqr: f64,
    /// ⟨reference|state⟩.
    pub elastic_overlap: Complex64,
}

pub fn joint_spectral_density(state: &TwoPhotonState, reference: &TwoPhotonState) -> SpectralDensity {
    let mut densities = Vec::new();
    let mut real_parts = Vec::new();
    let mut imag_parts = Vec::new();
    for pair in ChannelPair::ALL {
        let s = state.sector(pair);
        densities.push(s.iter().map(|z| z.norm_sqr()).collect());
        real_parts.push(s.iter().map(|z| z.re).collect());
        imag_parts.push(s.iter().map(|z| z.im).collect());
    }
    SpectralDensity {
        densities,
        real_parts,
        imag_parts,
        norm_sqr: state.norm_sqr(),
        elastic_overlap: reference.inner(state),
    }
}

/// Σ weights·density over all sectors.
pub fn integrated_density(d: &SpectralDensity, grid: &FrequencyGrid) -> f64 {
    let n = grid.len();
    d.densities
        .iter()
        .map(|field| {
            (0..n)
                .map(|i| (0..n).map(|j| grid.weights[i] * grid.weights[j] * field[i * n + j]).sum::<f64>())
                .sum::<f64>()
        })
        .sum()
}

/// 1 − |⟨a|b⟩|²/(‖a‖²‖b‖²): weight of `b` outside the direction of `a`.
pub fn reference_mismatch(reference: &TwoPhotonState, state: &TwoPhotonState) -> f64 {
    let o = reference.inner(state).norm_sqr();
    1.0 - o / (reference.norm_sqr() * state.norm_sqr())
}

/// Largest Schmidt weight of the ab sector (a photon ⊗ b photon) times the
/// fraction of the norm held in the ab/ba sectors; one minus this is the
/// part of the state that is not a single a-photon ⊗ b-photon product.
pub fn product_weight(state: &TwoPhotonState) -> f64 {
    let n = state.n();
    let w = &state.grid.weights;
    let total = state.norm_sqr();
    if total == 0.0 {
        return 0.0;
    }
    // A(i, j) = ψ_ab(i, j)·√(w_i w_j); the ba sector mirrors it.
    let a: Vec<Complex64> = (0..n * n)
        .map(|k| {
            let (i, j) = (k / n, k % n);
            state.amplitudes[k * 4 + ChannelPair::Ab as usize] * (w[i] * w[j]).sqrt()
        })
        .collect();
    let frob: f64 = a.iter().map(|z| z.norm_sqr()).sum();
    if frob == 0.0 {
        return 0.0;
    }
    // Power iteration on A†A for the top singular value.
    let mut v: Vec<Complex64> = (0..n)
        .map(|j| Complex64::from((0..n).map(|i| a[i * n + j].norm()).sum::<f64>()))
        .collect();
    let mut lambda = 0.0;
    for _ in 0..400 {
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            break;
        }
        v.iter_mut().for_each(|z| *z /= norm);
        let av: Vec<Complex64> = a
            .par_chunks(n)
            .map(|row| row.iter().zip(&v).map(|(x, y)| x * y).sum())
            .collect();
        lambda = av.iter().map(|z| z.norm_sqr()).sum::<f64>();
        let mut next = vec![ZERO; n];
        for (i, row) in a.chunks(n).enumerate() {
            let c = av[i];
            for (slot, x) in next.iter_mut().zip(row) {
                *slot += x.conj() * c;
            }
        }
        v = next;
    }
    2.0 * lambda / total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_grid;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn small_grid(n: usize) -> FrequencyGrid {
        build_grid(2.0, n).unwrap()
    }

    fn test_config(sigma: f64) -> GateConfig {
        GateConfig::default().with_sigma(sigma)
    }

    #[test]
    fn slices_have_trapezoid_weights() {
        let g = small_grid(5);
        let s = slice_view(&g, 0);
        assert_eq!(s.nodes, vec![(0, 0)]);
        assert_eq!(s.weights, vec![0.0]);
        let s = slice_view(&g, 4);
        assert_eq!(s.nodes.len(), 5);
        assert_abs_diff_eq!(s.energy, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.weights.iter().sum::<f64>(), 4.0, epsilon = 1e-12);
        for k in 0..9 {
            let s = slice_view(&g, k);
            for (&(i, j), &w) in s.nodes.iter().zip(&s.weights) {
                assert_abs_diff_eq!(w, slice_weight(i, j, 5, g.spacing), epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn profile_examples() {
        let p = ModelParams::default();
        assert_abs_diff_eq!(bound_state_profile(0.0, 0.0, &p).re, 4.0, epsilon = 1e-14);
        for x in [0.3, 1.7] {
            let v = bound_state_profile(0.0, x, &p);
            assert_abs_diff_eq!(v.re, 1.0 / (0.25 + x * x), epsilon = 1e-14);
            assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-14);
            assert_abs_diff_eq!(bound_state_profile(0.0, -x, &p).re, v.re, epsilon = 1e-14);
        }
        assert!(bound_state_profile(0.2, 1e6, &p).norm() < 1e-5);
    }

    #[test]
    fn input_is_normalised_product() {
        let g = build_grid(2.0, 401).unwrap();
        let cfg = test_config(0.05);
        let p = ModelParams::symmetric(1.5 * PI, 30);
        let s = build_input(&cfg, &p, &g).unwrap();
        assert_abs_diff_eq!(s.norm_sqr(), 1.0, epsilon = 1e-6);
        assert!(s.bosonic_asymmetry() < 1e-15);
        assert_eq!(s.get(200, 200, ChannelPair::Aa), ZERO);
        let c = s.get(200, 200, ChannelPair::Ab).norm();
        for i in 0..401 {
            assert!(s.get(i, 200, ChannelPair::Ab).norm() <= c + 1e-15);
        }
        // Delay stripes along δ1 with period 2π/τ.
        let tau = input_delay(&cfg, &p).unwrap();
        assert_abs_diff_eq!(2.0 * PI / tau, 0.148, epsilon = 1e-3);
        let phase = |i: usize| s.get(i, 200, ChannelPair::Ab).arg();
        let step = (phase(201) - phase(200)).rem_euclid(2.0 * PI);
        assert_abs_diff_eq!(step, tau * g.spacing, epsilon = 1e-9);
    }

    #[test]
    fn narrow_grid_is_rejected() {
        let g = build_grid(0.2, 41).unwrap();
        let err = build_input(&test_config(0.05), &ModelParams::default(), &g).unwrap_err();
        assert!(matches!(err, Error::InsufficientCoverage { .. }));
    }

    #[test]
    fn linear_chain_factorises() {
        let g = small_grid(41);
        let p = ModelParams::symmetric(1.5 * PI, 5);
        let cfg = test_config(0.3);
        let input = build_input(&cfg, &p, &g).unwrap();
        let out = apply_chain(&input, &p, false);
        let tau = input_delay(&cfg, &p).unwrap();
        let phi_a = gaussian_pulse(&g, 0.3, tau);
        let phi_b = gaussian_pulse(&g, 0.3, 0.0);
        let norm = TwoPhotonState::product(&g, 0, &phi_a, 1, &phi_b).norm_sqr().sqrt();
        for (i, &x1) in g.points.iter().enumerate() {
            let s1 = unit_cell_s1(x1, &p).pow(5);
            for (j, &x2) in g.points.iter().enumerate() {
                let s2 = unit_cell_s1(x2, &p).pow(5);
                for b in 0..2 {
                    for nu in 0..2 {
                        let want = (s1.m[b][0] * s2.m[nu][1] * phi_a[i] * phi_b[j]
                            + s1.m[b][1] * s2.m[nu][0] * phi_b[i] * phi_a[j])
                            * FRAC_1_SQRT_2
                            / norm;
                        let got = out.amplitudes[(i * 41 + j) * 4 + b * 2 + nu];
                        assert!((got - want).norm() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn energy_slices_are_invariant() {
        let g = small_grid(31);
        let p = ModelParams::symmetric(1.5 * PI, 1);
        let input = build_input(&test_config(0.3), &p, &g).unwrap();
        for k in [3, 30, 47] {
            let restricted = input.restrict_to_slice(k);
            let out = apply_unit_cell(&restricted, &p, true);
            assert_eq!(out.off_slice_weight(k), 0.0);
        }
    }

    #[test]
    fn splitter_squared_restores_channels() {
        let g = small_grid(21);
        let cfg = test_config(0.3);
        let p = ModelParams::default();
        let input = build_input(&cfg, &p, &g).unwrap();
        let twice = apply_beam_splitter2(&apply_beam_splitter2(&input, &cfg), &cfg);
        let c = g.center();
        for pair in ChannelPair::ALL {
            assert!((twice.get(c, c, pair) - input.get(c, c, pair)).norm() < 1e-12);
        }
        assert_abs_diff_eq!(twice.norm_sqr(), input.norm_sqr(), epsilon = 1e-12);
    }

    #[test]
    fn splitter_maps_ab_to_polariton_pair() {
        let g = small_grid(21);
        let cfg = test_config(0.3);
        let input = build_input(&cfg, &ModelParams::default(), &g).unwrap();
        let out = apply_beam_splitter2(&input, &cfg);
        let c = g.center();
        // (−|+⟩)⊗(−|−⟩) with |±⟩ = (a ± b)/√2, symmetrised over both photon
        // orderings: the ab and ba pieces cancel, leaving aa − bb.
        let amp = input.get(c, c, ChannelPair::Ab);
        assert!((out.get(c, c, ChannelPair::Aa) - amp).norm() < 1e-12);
        assert!(out.get(c, c, ChannelPair::Ab).norm() < 1e-12);
        assert!(out.get(c, c, ChannelPair::Ba).norm() < 1e-12);
        assert!((out.get(c, c, ChannelPair::Bb) + amp).norm() < 1e-12);
    }

    #[test]
    fn splitter_delays_match_closed_form() {
        let (a, b) = splitter_delays(&GateConfig::default());
        assert_abs_diff_eq!(a, 4.0 + 2.0 * 2f64.sqrt(), epsilon = 1e-6);
        assert_abs_diff_eq!(b, 4.0 - 2.0 * 2f64.sqrt(), epsilon = 1e-6);
    }

    #[test]
    fn ideal_outputs_are_normalised_products() {
        let g = build_grid(2.0, 201).unwrap();
        let cfg = test_config(0.1);
        let p = ModelParams::symmetric(1.5 * PI, 30);
        let ideal = ideal_outputs(&cfg, &p, &g).unwrap();
        let na: f64 = ideal.psi_a.iter().zip(&g.weights).map(|(z, w)| w * z.norm_sqr()).sum();
        assert_abs_diff_eq!(na, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ideal.psi_ab.norm_sqr(), 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(ideal.psi_ab.inner(&ideal.psi_ab).re, 1.0, epsilon = 1e-9);
        let lin = ideal_outputs_with_phase(&cfg, &p, &g, 0.0).unwrap();
        let o = lin.psi_ab.inner(&ideal.psi_ab);
        assert_abs_diff_eq!(o.re, -1.0, epsilon = 1e-9);
    }

    #[test]
    fn density_integrates_to_norm() {
        let g = small_grid(31);
        let cfg = test_config(0.3);
        let p = ModelParams::symmetric(1.5 * PI, 2);
        let s = apply_chain(&build_input(&cfg, &p, &g).unwrap(), &p, true);
        let d = joint_spectral_density(&s, &s);
        assert_abs_diff_eq!(integrated_density(&d, &g), d.norm_sqr, epsilon = 1e-12);
        assert_abs_diff_eq!(d.elastic_overlap.re, d.norm_sqr, epsilon = 1e-12);
    }

    #[test]
    fn loss_reduces_norm() {
        let g = small_grid(41);
        let p = ModelParams {
            gamma_loss: 0.05,
            ..ModelParams::symmetric(1.5 * PI, 4)
        };
        let cfg = test_config(0.3);
        let s = apply_chain(&build_input(&cfg, &p, &g).unwrap(), &p, true);
        assert!(s.norm_sqr() < 0.9);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn operations_keep_bosonic_symmetry(dk in 0.2f64..6.0, ga in 0.1f64..0.9, loss in 0.0f64..0.1, n in 1usize..4) {
            let g = small_grid(21);
            let p = ModelParams { gamma_a: ga, gamma_b: 1.0 - ga, gamma_loss: loss, delta_k_d: dk, n_emitters: n, ..Default::default() };
            let cfg = GateConfig { tau: Some(1.3), ..test_config(0.3) };
            let input = build_input(&cfg, &p, &g).unwrap();
            let out = propagate_gate(&input, &p, &cfg, true);
            prop_assert!(out.bosonic_asymmetry() < 1e-12);
        }
    }
}
