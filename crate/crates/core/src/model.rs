//! Physical parameters, frequency grids and run manifests.
//!
//! Units throughout the crate: the total guided decay rate Γ = Γa + Γb is 1,
//! the emitter spacing d is 1 and the emitter frequency ω0 is 0. Frequencies
//! are detunings in units of Γ, times are in 1/Γ and momenta are phases per
//! unit cell.

use std::f64::consts::{PI, SQRT_2, TAU};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Error, Result};

const NORMALIZATION_TOL: f64 = 1e-9;

/// Emitter array and waveguide parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelParams {
    /// Decay rate into channel a.
    pub gamma_a: f64,
    /// Decay rate into channel b.
    pub gamma_b: f64,
    /// Decay rate into non-guided modes.
    pub gamma_loss: f64,
    /// Phase mismatch Δk·d between the resonant momenta of the two channels, in [0, 2π).
    pub delta_k_d: f64,
    /// Mean resonant momentum phase k0·d. Pure gauge for every observable computed here.
    pub k0_d: f64,
    /// Number of unit cells N.
    pub n_emitters: usize,
    /// Retardation Γd/c. Zero is the Markovian limit.
    pub inv_c: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            gamma_a: 0.5,
            gamma_b: 0.5,
            gamma_loss: 0.0,
            delta_k_d: 1.5 * PI,
            k0_d: 0.0,
            n_emitters: 30,
            inv_c: 0.0,
        }
    }
}

impl ModelParams {
    /// Symmetric coupling Γa = Γb = 1/2 with the given phase mismatch and size.
    pub fn symmetric(delta_k_d: f64, n_emitters: usize) -> Self {
        Self {
            delta_k_d,
            n_emitters,
            ..Self::default()
        }
    }

    /// Couplings parametrised by the asymmetry ΔΓ = (Γa − Γb)/Γ.
    pub fn with_asymmetry(mut self, delta_gamma: f64) -> Self {
        self.gamma_a = 0.5 * (1.0 + delta_gamma);
        self.gamma_b = 0.5 * (1.0 - delta_gamma);
        self
    }

    /// Returns the parameters unchanged if every invariant holds, otherwise the
    /// first violated invariant.
    pub fn validate(self) -> Result<Self> {
        let finite = [
            ("gamma_a", self.gamma_a),
            ("gamma_b", self.gamma_b),
            ("gamma_loss", self.gamma_loss),
            ("delta_k_d", self.delta_k_d),
            ("k0_d", self.k0_d),
            ("inv_c", self.inv_c),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(invalid(name, format!("{v} is not finite")));
            }
        }
        if self.gamma_a < 0.0 {
            return Err(invalid("gamma_a", format!("negative rate {}", self.gamma_a)));
        }
        if self.gamma_b < 0.0 {
            return Err(invalid("gamma_b", format!("negative rate {}", self.gamma_b)));
        }
        if (self.gamma_a + self.gamma_b - 1.0).abs() > NORMALIZATION_TOL {
            return Err(invalid(
                "normalization",
                format!(
                    "gamma_a + gamma_b = {} but the unit convention requires 1",
                    self.gamma_a + self.gamma_b
                ),
            ));
        }
        if self.gamma_loss < 0.0 {
            return Err(invalid(
                "gamma_loss",
                format!("negative rate {}", self.gamma_loss),
            ));
        }
        if !(0.0..TAU).contains(&self.delta_k_d) {
            return Err(invalid(
                "delta_k_d",
                format!("{} is outside [0, 2π)", self.delta_k_d),
            ));
        }
        if self.n_emitters == 0 {
            return Err(invalid("n_emitters", "at least one unit cell is required"));
        }
        if self.inv_c < 0.0 {
            return Err(invalid("inv_c", format!("negative retardation {}", self.inv_c)));
        }
        Ok(self)
    }

    /// Γa + Γb + γ, the total emitter linewidth.
    pub fn total_linewidth(&self) -> f64 {
        self.gamma_a + self.gamma_b + self.gamma_loss
    }

    pub fn delta_gamma(&self) -> f64 {
        (self.gamma_a - self.gamma_b) / (self.gamma_a + self.gamma_b)
    }
}

/// Uniform grid settings used for two-photon propagation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    /// Minimum half-width of the detuning window. Widened to 6σ when needed.
    pub half_width: f64,
    /// Node spacing h. Refined to σ when the pulse is narrower than that.
    pub spacing: f64,
    /// Largest node count per axis the builder accepts.
    pub max_points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            half_width: 8.0,
            spacing: 0.02,
            max_points: 2001,
        }
    }
}

impl GridSpec {
    /// Smallest bandwidth whose grid fits within `max_points`.
    pub fn min_resolved_sigma(&self) -> f64 {
        let half = (self.max_points.saturating_sub(1) / 2).max(1) as f64;
        (self.half_width / half).min(self.spacing)
    }

    pub fn build(&self, sigma: f64) -> Result<FrequencyGrid> {
        if !(self.spacing > 0.0) {
            return Err(Error::Grid(format!("spacing {} must be positive", self.spacing)));
        }
        let half_width = self.half_width.max(6.0 * sigma);
        let spacing = self.spacing.min(sigma);
        // Round the node count so the spacing is at most the requested one.
        let half = (half_width / spacing).ceil();
        let n = 2.0 * half + 1.0;
        if n > self.max_points as f64 {
            return Err(Error::Grid(format!(
                "bandwidth {sigma} needs {n} points per axis (limit {})",
                self.max_points
            )));
        }
        build_grid(half * spacing, 2 * half as usize + 1)
    }
}

/// Beam-splitter coupling into channel a that maps a → −|+⟩ on resonance.
pub fn splitter_gamma_a() -> f64 {
    (2.0 + SQRT_2) / 4.0
}

/// Beam-splitter coupling into channel b that maps b → −|−⟩ on resonance.
pub fn splitter_gamma_b() -> f64 {
    (2.0 - SQRT_2) / 4.0
}

/// Pulse, delay, splitter and grid settings of the gate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GateConfig {
    /// Pulse bandwidth σ.
    pub sigma: f64,
    /// Initial delay of the a-channel photon. `None` uses the mid-array crossing delay.
    pub tau: Option<f64>,
    pub bs_gamma_a: f64,
    pub bs_gamma_b: f64,
    /// Target two-photon nonlinear phase of the ideal output.
    pub phi_ideal: f64,
    /// Add the first-order beam-splitter group delays to the ideal references.
    pub compensate_splitter_delay: bool,
    pub grid: GridSpec,
}

impl Default for GateConfig {
    fn default() -> Self {
        Self {
            sigma: 0.05,
            tau: None,
            bs_gamma_a: splitter_gamma_a(),
            bs_gamma_b: splitter_gamma_b(),
            phi_ideal: PI,
            compensate_splitter_delay: true,
            grid: GridSpec::default(),
        }
    }
}

impl GateConfig {
    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn validate(self) -> Result<Self> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(invalid("sigma", format!("bandwidth {} must be positive", self.sigma)));
        }
        if self.bs_gamma_a < 0.0 || self.bs_gamma_b < 0.0 {
            return Err(invalid("bs_gamma", "beam-splitter couplings must be non-negative"));
        }
        if self.bs_gamma_a + self.bs_gamma_b <= 0.0 {
            return Err(invalid("bs_gamma", "beam splitter must couple to the waveguide"));
        }
        if let Some(tau) = self.tau {
            if !tau.is_finite() {
                return Err(invalid("tau", "delay must be finite"));
            }
        }
        if !(self.grid.spacing > 0.0 && self.grid.half_width > 0.0) {
            return Err(invalid("grid", "half-width and spacing must be positive"));
        }
        Ok(self)
    }

    /// The splitter as an emitter record (lossless, Γ = bs_gamma_a + bs_gamma_b).
    pub fn splitter_params(&self) -> ModelParams {
        ModelParams {
            gamma_a: self.bs_gamma_a,
            gamma_b: self.bs_gamma_b,
            gamma_loss: 0.0,
            delta_k_d: 0.0,
            k0_d: 0.0,
            n_emitters: 1,
            inv_c: 0.0,
        }
    }
}

/// Uniform detuning grid symmetric about zero with composite trapezoid weights.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    pub spacing: f64,
}

/// Builds the uniform grid on [−half_width, half_width]; `n_points` must be odd
/// so that resonance is a node.
pub fn build_grid(half_width: f64, n_points: usize) -> Result<FrequencyGrid> {
    if !(half_width > 0.0 && half_width.is_finite()) {
        return Err(Error::Grid(format!("half-width {half_width} must be positive")));
    }
    if n_points < 3 {
        return Err(Error::Grid(format!("{n_points} points, need at least 3")));
    }
    if n_points % 2 == 0 {
        return Err(Error::Grid(format!(
            "{n_points} points is even; resonance must be a grid node"
        )));
    }
    let mid = (n_points - 1) / 2;
    let spacing = half_width / mid as f64;
    let points = (0..n_points)
        .map(|i| (i as f64 - mid as f64) * spacing)
        .collect();
    let mut weights = vec![spacing; n_points];
    weights[0] *= 0.5;
    weights[n_points - 1] *= 0.5;
    Ok(FrequencyGrid {
        points,
        weights,
        spacing,
    })
}

impl FrequencyGrid {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn half_width(&self) -> f64 {
        self.points[self.len() - 1]
    }

    /// Index of δ = 0.
    pub fn center(&self) -> usize {
        self.len() / 2
    }

    pub fn describe(&self) -> String {
        format!(
            "uniform trapezoid grid: {} points on [-{w}, {w}], h = {h}",
            self.len(),
            w = self.half_width(),
            h = self.spacing
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub name: String,
    pub sha256: String,
}

/// Record of one run: inputs, grid, code version, timing and output digests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub parameters: serde_json::Value,
    pub grid: String,
    pub version: String,
    pub wall_seconds: f64,
    pub files: Vec<FileDigest>,
}

impl RunManifest {
    pub fn new(parameters: serde_json::Value, grid: impl Into<String>) -> Self {
        Self {
            parameters,
            grid: grid.into(),
            version: concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION")).to_string(),
            wall_seconds: 0.0,
            files: Vec::new(),
        }
    }

    pub fn record_file(&mut self, name: impl Into<String>, contents: &[u8]) {
        self.files.push(FileDigest {
            name: name.into(),
            sha256: sha256_hex(contents),
        });
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
