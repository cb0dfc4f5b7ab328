//! Controlled-phase gate fidelity, bandwidth optimisation, sweeps and
//! power-law fits.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FrequencyGrid, GateConfig, ModelParams};
use crate::single_photon::chain_g1;
use crate::two_photon::{build_input, gaussian_pulse, ideal_outputs, propagate_gate};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub fidelity: f64,
    pub infidelity: f64,
    pub overlap_a: Complex64,
    pub overlap_b: Complex64,
    pub overlap_ab: Complex64,
    pub params: ModelParams,
    pub config: GateConfig,
    pub grid: String,
    pub grid_points: usize,
    /// Set when the fidelity was recomputed with half the spacing.
    pub converged: Option<bool>,
    pub convergence_shift: Option<f64>,
}

/// Single-photon overlaps ⟨ideal|out⟩ for an a and a b input photon.
fn single_photon_overlaps(
    params: &ModelParams,
    config: &GateConfig,
    grid: &FrequencyGrid,
    ideal_a: &[Complex64],
    ideal_b: &[Complex64],
) -> (Complex64, Complex64) {
    let g0 = gaussian_pulse(grid, config.sigma, 0.0);
    let mut oa = Complex64::new(0.0, 0.0);
    let mut ob = Complex64::new(0.0, 0.0);
    for (k, &x) in grid.points.iter().enumerate() {
        let g = chain_g1(x, params, config);
        let w = grid.weights[k];
        oa += ideal_a[k].conj() * g.aa() * g0[k] * w;
        ob += ideal_b[k].conj() * g.bb() * g0[k] * w;
    }
    (oa, ob)
}

/// Fidelity on a given grid; `nonlinear = false` treats the emitters as linear scatterers.
pub fn fidelity_on_grid(
    params: &ModelParams,
    config: &GateConfig,
    grid: &FrequencyGrid,
    nonlinear: bool,
) -> Result<FidelityReport> {
    let ideal = ideal_outputs(config, params, grid)?;
    let (oa, ob) = single_photon_overlaps(params, config, grid, &ideal.psi_a, &ideal.psi_b);
    let input = build_input(config, params, grid)?;
    let out = propagate_gate(&input, params, config, nonlinear);
    let oab = ideal.psi_ab.inner(&out);
    let fidelity = (Complex64::new(1.0, 0.0) + oa + ob + oab).norm_sqr() / 16.0;
    Ok(FidelityReport {
        fidelity,
        infidelity: 1.0 - fidelity,
        overlap_a: oa,
        overlap_b: ob,
        overlap_ab: oab,
        params: *params,
        config: *config,
        grid: grid.describe(),
        grid_points: grid.len(),
        converged: None,
        convergence_shift: None,
    })
}

pub fn gate_fidelity(params: &ModelParams, config: &GateConfig) -> Result<FidelityReport> {
    let params = params.validate()?;
    let config = config.validate()?;
    let grid = config.grid.build(config.sigma)?;
    fidelity_on_grid(&params, &config, &grid, true)
}

/// Shift in F above which a grid counts as unconverged.
pub const CONVERGENCE_TOL: f64 = 1e-4;

/// [`gate_fidelity`] plus a rerun at half the spacing.
pub fn gate_fidelity_checked(params: &ModelParams, config: &GateConfig) -> Result<FidelityReport> {
    let mut report = gate_fidelity(params, config)?;
    let mut fine = *config;
    fine.grid.spacing = config.grid.spacing.min(config.sigma) / 2.0;
    fine.grid.max_points = 2 * config.grid.max_points + 1;
    let fine_report = gate_fidelity(params, &fine)?;
    let shift = (fine_report.fidelity - report.fidelity).abs();
    report.converged = Some(shift <= CONVERGENCE_TOL);
    report.convergence_shift = Some(shift);
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizeOptions {
    pub sigma_min: f64,
    pub sigma_max: f64,
    /// Log-spaced samples used to locate the optimum before refinement.
    pub coarse_points: usize,
    /// Relative width in σ at which the golden-section search stops.
    pub rel_tol: f64,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self {
            sigma_min: 1e-3,
            sigma_max: 0.5,
            coarse_points: 7,
            rel_tol: 1e-2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaOptimum {
    pub sigma: f64,
    pub fidelity: f64,
    pub infidelity: f64,
    /// Every (σ, 1 − F) evaluated, in evaluation order.
    pub samples: Vec<(f64, f64)>,
    /// Coarse samples skipped because the grid could not resolve them.
    pub unresolved: Vec<f64>,
}

/// Maximise F over σ: a log-spaced scan locates the peak, golden-section
/// search in log σ refines it.
pub fn optimize_sigma(params: &ModelParams, template: &GateConfig, opts: &OptimizeOptions) -> Result<SigmaOptimum> {
    let params = params.validate()?;
    template.validate()?;
    if !(opts.sigma_min > 0.0 && opts.sigma_max > opts.sigma_min) || opts.coarse_points < 3 {
        return Err(crate::error::invalid(
            "sigma_bracket",
            "need 0 < sigma_min < sigma_max and at least 3 coarse points",
        ));
    }
    let mut samples = Vec::new();
    let mut unresolved = Vec::new();
    let eval = |sigma: f64, samples: &mut Vec<(f64, f64)>| -> Result<Option<f64>> {
        let cfg = template.with_sigma(sigma);
        match gate_fidelity(&params, &cfg) {
            Ok(r) => {
                samples.push((sigma, r.infidelity));
                Ok(Some(r.infidelity))
            }
            Err(Error::Grid(_)) => Ok(None),
            Err(e) => Err(e),
        }
    };

    // Bandwidths below the grid's resolution limit cannot be evaluated; start the scan there.
    let floor = template.grid.min_resolved_sigma() * (1.0 + 1e-9);
    if opts.sigma_min < floor {
        unresolved.push(opts.sigma_min);
    }
    let lo_sigma = opts.sigma_min.max(floor);
    if !(opts.sigma_max > lo_sigma) {
        return Err(crate::error::invalid(
            "sigma_bracket",
            format!("sigma_max {} is below the grid resolution limit {lo_sigma}", opts.sigma_max),
        ));
    }
    let (lo, hi) = (lo_sigma.ln(), opts.sigma_max.ln());
    let m = opts.coarse_points;
    let mut coarse = Vec::new();
    for k in 0..m {
        let s = (lo + (hi - lo) * k as f64 / (m - 1) as f64).exp();
        match eval(s, &mut samples)? {
            Some(v) => coarse.push((s, v)),
            None => unresolved.push(s),
        }
    }
    let not_unimodal = |samples: &Vec<(f64, f64)>| Error::NonUnimodal {
        samples: samples.clone(),
    };
    if coarse.len() < 3 {
        return Err(not_unimodal(&samples));
    }
    let best = coarse
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .map(|(k, _)| k)
        .unwrap();
    let descending = coarse[..=best].windows(2).all(|w| w[1].1 < w[0].1);
    let ascending = coarse[best..].windows(2).all(|w| w[1].1 > w[0].1);
    if best == 0 || best == coarse.len() - 1 || !descending || !ascending {
        return Err(not_unimodal(&samples));
    }

    // Golden-section search on log σ.
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = coarse[best - 1].0.ln();
    let mut b = coarse[best + 1].0.ln();
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let mut fc = eval(c.exp(), &mut samples)?.ok_or_else(|| not_unimodal(&samples))?;
    let mut fd = eval(d.exp(), &mut samples)?.ok_or_else(|| not_unimodal(&samples))?;
    while (b - a).exp() - 1.0 > opts.rel_tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = eval(c.exp(), &mut samples)?.ok_or_else(|| not_unimodal(&samples))?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = eval(d.exp(), &mut samples)?.ok_or_else(|| not_unimodal(&samples))?;
        }
    }
    let (sigma, infidelity) = samples
        .iter()
        .copied()
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .unwrap();
    Ok(SigmaOptimum {
        sigma,
        fidelity: 1.0 - infidelity,
        infidelity,
        samples,
        unresolved,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    #[serde(rename = "N")]
    NEmitters,
    Sigma,
    DeltaKD,
    GammaLoss,
    DeltaGamma,
}

impl SweepParam {
    pub fn name(&self) -> &'static str {
        match self {
            SweepParam::NEmitters => "N",
            SweepParam::Sigma => "sigma",
            SweepParam::DeltaKD => "delta_k_d",
            SweepParam::GammaLoss => "gamma_loss",
            SweepParam::DeltaGamma => "delta_gamma",
        }
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "N" | "n" | "n_emitters" => Ok(SweepParam::NEmitters),
            "sigma" => Ok(SweepParam::Sigma),
            "dk" | "delta_k_d" => Ok(SweepParam::DeltaKD),
            "gamma" | "gamma_loss" => Ok(SweepParam::GammaLoss),
            "dgamma" | "delta_gamma" => Ok(SweepParam::DeltaGamma),
            other => Err(crate::error::invalid("axis", format!("unknown sweep parameter `{other}`"))),
        }
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepAxis {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

impl FromStr for SweepAxis {
    type Err = Error;

    /// `name=start:stop:count` (inclusive, evenly spaced) or `name=v1,v2,...`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = |why: &str| crate::error::invalid("axis", format!("`{s}`: {why}"));
        let (name, spec) = s.split_once('=').ok_or_else(|| bad("expected name=values"))?;
        let param: SweepParam = name.trim().parse()?;
        let values = if spec.contains(':') {
            let parts: Vec<&str> = spec.split(':').collect();
            if parts.len() != 3 {
                return Err(bad("range must be start:stop:count"));
            }
            let start: f64 = parts[0].trim().parse().map_err(|_| bad("bad start"))?;
            let stop: f64 = parts[1].trim().parse().map_err(|_| bad("bad stop"))?;
            let count: usize = parts[2].trim().parse().map_err(|_| bad("bad count"))?;
            linspace(start, stop, count)
        } else {
            spec.split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|_| bad("bad value")))
                .collect::<Result<Vec<_>>>()?
        };
        if values.is_empty() {
            return Err(bad("no values"));
        }
        Ok(SweepAxis { param, values })
    }
}

/// `count` evenly spaced values from `start` to `stop` inclusive.
pub fn linspace(start: f64, stop: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..count)
            .map(|k| start + (stop - start) * k as f64 / (count - 1) as f64)
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaMode {
    /// Use the configured σ everywhere.
    #[default]
    Fixed,
    /// Optimise σ once per N at γ = 0, ΔΓ = 0 and reuse it along the other axes.
    PerEmitterCount,
    /// Optimise σ at every point.
    PerPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub axes: Vec<SweepAxis>,
    pub params: ModelParams,
    pub config: GateConfig,
    #[serde(default)]
    pub sigma_mode: SigmaMode,
    #[serde(default)]
    pub optimize: OptimizeOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub index: usize,
    pub values: Vec<f64>,
    pub sigma: f64,
    pub fidelity: Option<f64>,
    pub infidelity: Option<f64>,
    pub overlap_ab_phase: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub columns: Vec<String>,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["index".to_string()];
        h.extend(self.columns.iter().cloned());
        h.extend(["sigma", "fidelity", "infidelity", "overlap_ab_phase", "error"].map(String::from));
        h
    }
}

fn apply_axis(params: &mut ModelParams, config: &mut GateConfig, param: SweepParam, v: f64) -> Result<()> {
    match param {
        SweepParam::NEmitters => {
            if !(v >= 1.0 && v.fract() == 0.0) {
                return Err(crate::error::invalid("n_emitters", format!("{v} is not a positive integer")));
            }
            params.n_emitters = v as usize;
        }
        SweepParam::Sigma => config.sigma = v,
        SweepParam::DeltaKD => params.delta_k_d = v,
        SweepParam::GammaLoss => params.gamma_loss = v,
        SweepParam::DeltaGamma => *params = params.with_asymmetry(v),
    }
    Ok(())
}

/// Cartesian product of the axes, first axis varying slowest.
fn grid_points(axes: &[SweepAxis]) -> Vec<Vec<f64>> {
    let mut points = vec![Vec::new()];
    for axis in axes {
        points = points
            .into_iter()
            .flat_map(|p| {
                axis.values.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    points
}

pub fn sweep(spec: &SweepSpec) -> Result<SweepTable> {
    let points = grid_points(&spec.axes);
    let columns: Vec<String> = spec.axes.iter().map(|a| a.param.name().to_string()).collect();

    let setup = |values: &[f64]| -> Result<(ModelParams, GateConfig)> {
        let mut p = spec.params;
        let mut c = spec.config;
        for (axis, &v) in spec.axes.iter().zip(values) {
            apply_axis(&mut p, &mut c, axis.param, v)?;
        }
        Ok((p.validate()?, c.validate()?))
    };

    // Reference bandwidths per N for the per-N mode.
    let mut sigma_by_n: BTreeMap<usize, std::result::Result<f64, String>> = BTreeMap::new();
    if spec.sigma_mode == SigmaMode::PerEmitterCount {
        for values in &points {
            if let Ok((p, _)) = setup(values) {
                sigma_by_n.entry(p.n_emitters).or_insert_with(|| {
                    let reference = ModelParams {
                        gamma_loss: 0.0,
                        ..p.with_asymmetry(0.0)
                    };
                    optimize_sigma(&reference, &spec.config, &spec.optimize)
                        .map(|o| o.sigma)
                        .map_err(|e| e.to_string())
                });
            }
        }
    }

    let rows = points
        .par_iter()
        .enumerate()
        .map(|(index, values)| {
            let result = setup(values).and_then(|(p, mut c)| {
                match spec.sigma_mode {
                    SigmaMode::Fixed => {}
                    SigmaMode::PerEmitterCount => match &sigma_by_n[&p.n_emitters] {
                        Ok(s) => c.sigma = *s,
                        Err(e) => return Err(Error::Fit(format!("reference bandwidth: {e}"))),
                    },
                    SigmaMode::PerPoint => c.sigma = optimize_sigma(&p, &c, &spec.optimize)?.sigma,
                }
                let r = gate_fidelity(&p, &c)?;
                Ok((c.sigma, r))
            });
            match result {
                Ok((sigma, r)) => SweepRow {
                    index,
                    values: values.clone(),
                    sigma,
                    fidelity: Some(r.fidelity),
                    infidelity: Some(r.infidelity),
                    overlap_ab_phase: Some(r.overlap_ab.arg()),
                    error: None,
                },
                Err(e) => SweepRow {
                    index,
                    values: values.clone(),
                    sigma: spec.config.sigma,
                    fidelity: None,
                    infidelity: None,
                    overlap_ab_phase: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    Ok(SweepTable { columns, rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub prefactor: f64,
    pub r_squared: f64,
}

/// Least-squares line through (ln x, ln y): y ≈ prefactor · x^exponent.
pub fn fit_power_law(xs: &[f64], ys: &[f64]) -> Result<PowerLawFit> {
    if xs.len() != ys.len() {
        return Err(Error::Fit(format!("{} abscissae but {} ordinates", xs.len(), ys.len())));
    }
    if xs.len() < 4 {
        return Err(Error::Fit(format!("need at least 4 points, got {}", xs.len())));
    }
    if let Some(v) = xs.iter().chain(ys).find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::Fit(format!("non-positive value {v}")));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("all abscissae are equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(PowerLawFit {
        exponent: slope,
        prefactor: intercept.exp(),
        r_squared,
    })
}
