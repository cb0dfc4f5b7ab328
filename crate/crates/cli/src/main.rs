use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::OnceLock;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use chiralqed::acceptance::{run_criterion, CRITERIA};
use chiralqed::gate::{
    fit_power_law, gate_fidelity, gate_fidelity_checked, optimize_sigma, sweep, OptimizeOptions, SigmaMode,
    SweepAxis, SweepParam, SweepSpec,
};
use chiralqed::io::{fmt_num, fmt_opt, matrix_csv, table_csv};
use chiralqed::polariton::{band_samples, exact_omega, resonant_delays, Band};
use chiralqed::single_photon::{chain_g1, eigenphases, unit_cell_s1};
use chiralqed::two_photon::{
    build_input, ideal_outputs_with_phase, joint_spectral_density, product_weight,
    propagate_gate, ChannelPair,
};
use chiralqed::two_polariton::resonance_scan;
use chiralqed::{GateConfig, ModelParams, RunManifest};

const THREADS_ENV: &str = "CHIRALQED_THREADS";

static STARTED: OnceLock<Instant> = OnceLock::new();

#[derive(Parser, Debug)]
#[command(name = "chiralqed", version, about = "Chiral two-mode waveguide QED and passive CZ gate simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Polariton band structure (qd, band, ω, v_g).
    Dispersion {
        #[command(flatten)]
        common: Common,
        /// Samples per band.
        #[arg(long, default_value_t = 256)]
        points: usize,
        /// Fraction of each band cut off next to its poles.
        #[arg(long, default_value_t = 0.01)]
        margin: f64,
        /// Also solve the retarded dispersion (needs --inv-c > 0).
        #[arg(long)]
        exact: bool,
    },
    /// Unit-cell S-matrix, its eigenphases and the full gate transmission vs detuning.
    S1 {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true, default_value = "-3:3:601", value_name = "START:STOP:COUNT")]
        delta_range: String,
    },
    /// Two-polariton elastic probability, phase and decay maps over (δ, Δkd).
    TwoPolaritonMap {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true, default_value = "-1:1:201", value_name = "START:STOP:COUNT")]
        delta_range: String,
        #[arg(long, allow_hyphen_values = true, default_value = "0:6.283185307179586:201", value_name = "START:STOP:COUNT")]
        dk_range: String,
    },
    /// Propagate the two-photon wavepacket and write the output spectral densities.
    Propagate {
        #[command(flatten)]
        common: Common,
        /// Drop the nonlinear bound-state term.
        #[arg(long)]
        linear: bool,
    },
    /// CZ gate fidelity at fixed σ.
    Fidelity {
        #[command(flatten)]
        common: Common,
        /// Repeat on a grid with half the spacing and report the shift.
        #[arg(long)]
        check_convergence: bool,
    },
    /// Optimise the pulse bandwidth σ.
    Optimize {
        #[command(flatten)]
        common: Common,
    },
    /// Fidelity over a Cartesian product of parameter axes.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// `name=start:stop:count` or `name=v1,v2,...`; names: N, sigma, dk, gamma, dgamma.
        #[arg(long = "axis", required = true, allow_hyphen_values = true)]
        axes: Vec<String>,
        /// Optimise σ at every point.
        #[arg(long, conflicts_with = "sigma_mode")]
        optimize_sigma: bool,
        /// fixed, per-emitter-count or per-point.
        #[arg(long)]
        sigma_mode: Option<String>,
    },
    /// Run the acceptance suite.
    Selftest {
        #[command(flatten)]
        common: Common,
        /// Comma-separated criterion numbers; all when omitted.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
    },
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// JSON job document; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    gamma_a: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    gamma_b: Option<f64>,
    /// Non-guided loss rate γ.
    #[arg(long, allow_hyphen_values = true)]
    gamma_loss: Option<f64>,
    /// Coupling asymmetry ΔΓ; sets Γa, Γb = (1 ± ΔΓ)/2.
    #[arg(long, allow_hyphen_values = true)]
    delta_gamma: Option<f64>,
    /// Phase mismatch Δk·d.
    #[arg(long, allow_hyphen_values = true)]
    dk: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    k0: Option<f64>,
    /// Number of emitters N.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    inv_c: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    sigma: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    tau: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    phi: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    half_width: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    spacing: Option<f64>,
    #[arg(long)]
    max_points: Option<usize>,
    #[arg(long)]
    no_splitter_compensation: bool,
}

/// Validated job: everything a run depends on, written verbatim to the manifest.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct JobSpec {
    subcommand: String,
    params: ModelParams,
    gate: GateConfig,
    optimize: OptimizeOptions,
    axes: Vec<String>,
    sigma_mode: SigmaMode,
    options: Value,
}

impl Common {
    fn job(&self, subcommand: &str) -> Result<JobSpec> {
        let mut job = match &self.config {
            Some(path) => {
                let text =
                    std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
                serde_json::from_str::<JobSpec>(&text).with_context(|| format!("parsing config {}", path.display()))?
            }
            None => JobSpec::default(),
        };
        job.subcommand = subcommand.to_string();
        let p = &mut job.params;
        if let Some(v) = self.gamma_a {
            p.gamma_a = v;
        }
        if let Some(v) = self.gamma_b {
            p.gamma_b = v;
        }
        if let Some(v) = self.delta_gamma {
            *p = p.with_asymmetry(v);
        }
        if let Some(v) = self.gamma_loss {
            p.gamma_loss = v;
        }
        if let Some(v) = self.dk {
            p.delta_k_d = v;
        }
        if let Some(v) = self.k0 {
            p.k0_d = v;
        }
        if let Some(v) = self.n {
            p.n_emitters = v;
        }
        if let Some(v) = self.inv_c {
            p.inv_c = v;
        }
        let g = &mut job.gate;
        if let Some(v) = self.sigma {
            g.sigma = v;
        }
        if self.tau.is_some() {
            g.tau = self.tau;
        }
        if let Some(v) = self.phi {
            g.phi_ideal = v;
        }
        if let Some(v) = self.half_width {
            g.grid.half_width = v;
        }
        if let Some(v) = self.spacing {
            g.grid.spacing = v;
        }
        if let Some(v) = self.max_points {
            g.grid.max_points = v;
        }
        if self.no_splitter_compensation {
            g.compensate_splitter_delay = false;
        }
        job.params = job.params.validate()?;
        job.gate = job.gate.validate()?;
        Ok(job)
    }
}

fn parse_range(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        bail!("range `{s}` must be START:STOP:COUNT");
    }
    let start: f64 = parts[0].trim().parse().with_context(|| format!("range `{s}`: bad start"))?;
    let stop: f64 = parts[1].trim().parse().with_context(|| format!("range `{s}`: bad stop"))?;
    let count: usize = parts[2].trim().parse().with_context(|| format!("range `{s}`: bad count"))?;
    if count == 0 {
        bail!("range `{s}` has no points");
    }
    Ok(chiralqed::gate::linspace(start, stop, count))
}

/// Collects output files and writes them together with the manifest.
struct Output {
    dir: PathBuf,
    manifest: RunManifest,
}

impl Output {
    fn new(dir: &Path, job: &JobSpec, grid: impl Into<String>) -> Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            manifest: RunManifest::new(serde_json::to_value(job)?, grid),
        })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        self.manifest.record_file(name, contents.as_bytes());
        Ok(())
    }

    fn finish(mut self, summary: Value) -> Result<()> {
        let text = serde_json::to_string_pretty(&summary)? + "\n";
        self.write("summary.json", &text)?;
        self.manifest.wall_seconds = STARTED.get_or_init(Instant::now).elapsed().as_secs_f64();
        let path = self.dir.join("manifest.json");
        std::fs::write(&path, serde_json::to_string_pretty(&self.manifest)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        let _ = writeln!(std::io::stdout().lock(), "{}", text.trim_end());
        Ok(())
    }
}

fn complex_json(z: num_complex::Complex64) -> Value {
    json!({ "re": z.re, "im": z.im, "abs": z.norm(), "arg": z.arg() })
}

fn run_dispersion(common: &Common, points: usize, margin: f64, exact: bool) -> Result<()> {
    let mut job = common.job("dispersion")?;
    job.options = json!({ "points": points, "margin": margin, "exact": exact });
    let p = job.params;
    if exact && !(p.inv_c > 0.0) {
        bail!("--exact needs --inv-c > 0");
    }
    let mut header = vec!["q_d", "band", "omega", "v_g"];
    if exact {
        header.push("omega_exact");
    }
    let mut rows = Vec::new();
    for band in [Band::Minus, Band::Plus] {
        for bp in band_samples(band, &p, points, margin) {
            let mut row = vec![fmt_num(bp.q_d), bp.band.to_string(), fmt_num(bp.omega), fmt_num(bp.v_g)];
            if exact {
                row.push(fmt_opt(exact_omega(bp.q_d, &p).ok()));
            }
            rows.push(row);
        }
    }
    let mut out = Output::new(&common.out, &job, format!("{} band samples", rows.len()))?;
    out.write("dispersion.csv", &table_csv(&header, &rows))?;
    let delays = resonant_delays(&p).ok();
    out.finish(json!({
        "rows": rows.len(),
        "resonant_delays": delays.map(|d| json!({
            "tau_plus": d.tau_plus, "tau_minus": d.tau_minus, "initial_delay": d.initial_delay
        })),
    }))
}

fn run_s1(common: &Common, delta_range: &str) -> Result<()> {
    let mut job = common.job("s1")?;
    job.options = json!({ "delta_range": delta_range });
    let (p, cfg) = (job.params, job.gate);
    let deltas = parse_range(delta_range)?;
    let header = [
        "delta", "s_aa_re", "s_aa_im", "s_ab_re", "s_ab_im", "s_ba_re", "s_ba_im", "s_bb_re", "s_bb_im", "phase_1",
        "phase_2", "g_aa_re", "g_aa_im", "g_ab_re", "g_ab_im", "g_ba_re", "g_ba_im", "g_bb_re", "g_bb_im",
    ];
    let mut rows = Vec::new();
    for &d in &deltas {
        let s = unit_cell_s1(d, &p);
        let mut ph = eigenphases(&s);
        ph.sort_by(f64::total_cmp);
        let g = chain_g1(d, &p, &cfg);
        let entries = |m: &chiralqed::single_photon::TMatrix| {
            [m.aa(), m.ab(), m.ba(), m.bb()]
                .into_iter()
                .flat_map(|z| [fmt_num(z.re), fmt_num(z.im)])
                .collect::<Vec<_>>()
        };
        let mut row = vec![fmt_num(d)];
        row.extend(entries(&s));
        row.extend(ph.iter().map(|v| fmt_num(*v)));
        row.extend(entries(&g));
        rows.push(row);
    }
    let mut out = Output::new(&common.out, &job, format!("{} detunings", deltas.len()))?;
    out.write("s1.csv", &table_csv(&header, &rows))?;
    out.finish(json!({ "rows": rows.len() }))
}

fn run_two_polariton_map(common: &Common, delta_range: &str, dk_range: &str) -> Result<()> {
    let mut job = common.job("two-polariton-map")?;
    job.options = json!({ "delta_range": delta_range, "dk_range": dk_range });
    let deltas = parse_range(delta_range)?;
    let dks = parse_range(dk_range)?;
    let maps = resonance_scan(&deltas, &dks, &job.params);
    let mut out = Output::new(&common.out, &job, format!("{}x{} (delta, delta_k_d)", deltas.len(), dks.len()))?;
    let corner = "delta\\delta_k_d";
    out.write("elastic_probability.csv", &matrix_csv(corner, &deltas, &dks, &maps.elastic_probability))?;
    out.write("elastic_phase.csv", &matrix_csv(corner, &deltas, &dks, &maps.elastic_phase))?;
    out.write("decay.csv", &matrix_csv(corner, &deltas, &dks, &maps.decay))?;
    let failures: Vec<Value> = maps
        .failures
        .iter()
        .map(|f| json!({ "delta": f.delta, "delta_k_d": f.delta_k_d, "reason": f.reason }))
        .collect();
    out.finish(json!({ "cells": deltas.len() * dks.len(), "failed_cells": failures.len(), "failures": failures }))
}

fn run_propagate(common: &Common, linear: bool) -> Result<()> {
    let mut job = common.job("propagate")?;
    job.options = json!({ "linear": linear });
    let (p, cfg) = (job.params, job.gate);
    let grid = cfg.grid.build(cfg.sigma)?;
    let input = build_input(&cfg, &p, &grid)?;
    let state = propagate_gate(&input, &p, &cfg, !linear);
    // Linear reference: the ideal ab output without the nonlinear phase.
    let reference = ideal_outputs_with_phase(&cfg, &p, &grid, 0.0)?.psi_ab;
    let density = joint_spectral_density(&state, &reference);
    let mut out = Output::new(&common.out, &job, grid.describe())?;
    for (k, pair) in ChannelPair::ALL.iter().enumerate() {
        for (kind, field) in [
            ("density", &density.densities[k]),
            ("real", &density.real_parts[k]),
            ("imag", &density.imag_parts[k]),
        ] {
            let csv = chiralqed::io::field_csv("x1\\x2", &grid.points, field);
            out.write(&format!("{kind}_{}.csv", pair.label()), &csv)?;
        }
    }
    let sectors: Vec<Value> = ChannelPair::ALL
        .iter()
        .map(|&pair| {
            let weight: f64 = state
                .sector(pair)
                .iter()
                .enumerate()
                .map(|(k, z)| grid.weights[k / grid.len()] * grid.weights[k % grid.len()] * z.norm_sqr())
                .sum();
            json!({ "pair": pair.label(), "weight": weight })
        })
        .collect();
    out.finish(json!({
        "grid": grid.describe(),
        "input_norm": input.norm_sqr(),
        "output_norm": density.norm_sqr,
        "elastic_overlap_vs_linear": complex_json(density.elastic_overlap),
        "nonlinear_phase": density.elastic_overlap.arg().rem_euclid(std::f64::consts::TAU),
        "non_product_weight": 1.0 - product_weight(&state),
        "sectors": sectors,
    }))
}

fn fidelity_json(r: &chiralqed::gate::FidelityReport) -> Value {
    json!({
        "fidelity": r.fidelity,
        "infidelity": r.infidelity,
        "overlap_a": complex_json(r.overlap_a),
        "overlap_b": complex_json(r.overlap_b),
        "overlap_ab": complex_json(r.overlap_ab),
        "grid": r.grid,
        "grid_points": r.grid_points,
        "converged": r.converged,
        "convergence_shift": r.convergence_shift,
    })
}

fn run_fidelity(common: &Common, check: bool) -> Result<()> {
    let mut job = common.job("fidelity")?;
    job.options = json!({ "check_convergence": check });
    let (p, cfg) = (job.params, job.gate);
    let report = if check { gate_fidelity_checked(&p, &cfg)? } else { gate_fidelity(&p, &cfg)? };
    let mut out = Output::new(&common.out, &job, report.grid.clone())?;
    let header = ["sigma", "fidelity", "infidelity", "overlap_ab_abs", "overlap_ab_arg"];
    let row = vec![
        fmt_num(cfg.sigma),
        fmt_num(report.fidelity),
        fmt_num(report.infidelity),
        fmt_num(report.overlap_ab.norm()),
        fmt_num(report.overlap_ab.arg()),
    ];
    out.write("fidelity.csv", &table_csv(&header, &[row]))?;
    out.finish(fidelity_json(&report))
}

fn run_optimize(common: &Common) -> Result<()> {
    let job = common.job("optimize")?;
    let opt = optimize_sigma(&job.params, &job.gate, &job.optimize)?;
    let mut out = Output::new(&common.out, &job, "per-sample grids")?;
    let rows: Vec<Vec<String>> = opt.samples.iter().map(|(s, i)| vec![fmt_num(*s), fmt_num(*i)]).collect();
    out.write("samples.csv", &table_csv(&["sigma", "infidelity"], &rows))?;
    out.finish(json!({
        "sigma": opt.sigma,
        "fidelity": opt.fidelity,
        "infidelity": opt.infidelity,
        "evaluations": opt.samples.len(),
        "unresolved_sigmas": opt.unresolved,
    }))
}

fn parse_sigma_mode(s: &str) -> Result<SigmaMode> {
    Ok(match s {
        "fixed" => SigmaMode::Fixed,
        "per-emitter-count" | "per_emitter_count" => SigmaMode::PerEmitterCount,
        "per-point" | "per_point" => SigmaMode::PerPoint,
        other => bail!("unknown sigma mode `{other}` (fixed, per-emitter-count, per-point)"),
    })
}

fn run_sweep(common: &Common, axes: &[String], optimize: bool, sigma_mode: Option<&str>) -> Result<()> {
    let mut job = common.job("sweep")?;
    job.axes = axes.to_vec();
    if optimize {
        job.sigma_mode = SigmaMode::PerPoint;
    } else if let Some(m) = sigma_mode {
        job.sigma_mode = parse_sigma_mode(m)?;
    }
    let parsed: Vec<SweepAxis> = job.axes.iter().map(|a| a.parse()).collect::<chiralqed::Result<_>>()?;
    let spec = SweepSpec {
        axes: parsed.clone(),
        params: job.params,
        config: job.gate,
        sigma_mode: job.sigma_mode,
        optimize: job.optimize,
    };
    let table = sweep(&spec)?;
    let rows: Vec<Vec<String>> = table
        .rows
        .iter()
        .map(|r| {
            let mut row = vec![r.index.to_string()];
            row.extend(r.values.iter().map(|v| fmt_num(*v)));
            row.extend([
                fmt_num(r.sigma),
                fmt_opt(r.fidelity),
                fmt_opt(r.infidelity),
                fmt_opt(r.overlap_ab_phase),
                r.error.clone().unwrap_or_default(),
            ]);
            row
        })
        .collect();
    let mut out = Output::new(&common.out, &job, "per-point grids")?;
    out.write("sweep.csv", &table_csv(&table.header(), &rows))?;

    // Power-law fits against N for a single N axis.
    let mut fits = Value::Null;
    if parsed.len() == 1 && parsed[0].param == SweepParam::NEmitters {
        let ok: Vec<_> = table.rows.iter().filter(|r| r.infidelity.is_some()).collect();
        let ns: Vec<f64> = ok.iter().map(|r| r.values[0]).collect();
        let sig: Vec<f64> = ok.iter().map(|r| r.sigma).collect();
        let inf: Vec<f64> = ok.iter().filter_map(|r| r.infidelity).collect();
        if ns.len() >= 2 {
            let f_inf = fit_power_law(&ns, &inf).ok();
            let f_sig = if job.sigma_mode == SigmaMode::Fixed { None } else { fit_power_law(&ns, &sig).ok() };
            fits = json!({
                "infidelity": f_inf.map(|f| json!({ "exponent": f.exponent, "prefactor": f.prefactor, "r_squared": f.r_squared })),
                "sigma": f_sig.map(|f| json!({ "exponent": f.exponent, "prefactor": f.prefactor, "r_squared": f.r_squared })),
            });
        }
    }
    let failed = table.rows.iter().filter(|r| r.error.is_some()).count();
    out.finish(json!({ "points": table.rows.len(), "failed_points": failed, "power_law_fits": fits }))
}

fn run_selftest(common: &Common, only: &[u8]) -> Result<bool> {
    let mut job = common.job("selftest")?;
    job.options = json!({ "only": only });
    let ids: Vec<u8> = CRITERIA
        .iter()
        .map(|c| c.0)
        .filter(|id| only.is_empty() || only.contains(id))
        .collect();
    if ids.is_empty() {
        bail!("no criteria selected");
    }
    let mut out = Output::new(&common.out, &job, "per-criterion grids")?;
    let mut rows = Vec::new();
    let mut outcomes = Vec::new();
    for id in ids {
        let o = run_criterion(id);
        eprintln!("{}", o.line());
        rows.push(vec![
            o.id.to_string(),
            o.name.clone(),
            if o.passed { "pass" } else { "fail" }.to_string(),
            format!("{:.3}", o.seconds),
            o.detail.clone(),
        ]);
        outcomes.push(o);
    }
    out.write("selftest.csv", &table_csv(&["id", "name", "result", "seconds", "detail"], &rows))?;
    let all = outcomes.iter().all(|o| o.passed);
    out.finish(json!({ "passed": all, "criteria": outcomes }))?;
    Ok(all)
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v.trim().parse().with_context(|| format!("{THREADS_ENV}={v} is not a count"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    configure_threads()?;
    match &cli.command {
        Command::Dispersion { common, points, margin, exact } => run_dispersion(common, *points, *margin, *exact)?,
        Command::S1 { common, delta_range } => run_s1(common, delta_range)?,
        Command::TwoPolaritonMap { common, delta_range, dk_range } => run_two_polariton_map(common, delta_range, dk_range)?,
        Command::Propagate { common, linear } => run_propagate(common, *linear)?,
        Command::Fidelity { common, check_convergence } => run_fidelity(common, *check_convergence)?,
        Command::Optimize { common } => run_optimize(common)?,
        Command::Sweep { common, axes, optimize_sigma, sigma_mode } => {
            run_sweep(common, axes, *optimize_sigma, sigma_mode.as_deref())?
        }
        Command::Selftest { common, only } => return run_selftest(common, only),
    }
    Ok(true)
}

fn main() -> ExitCode {
    STARTED.get_or_init(Instant::now);
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            let kind = if err.downcast_ref::<chiralqed::Error>().is_some() {
                "model"
            } else if err.downcast_ref::<serde_json::Error>().is_some() {
                "config"
            } else {
                "runtime"
            };
            let chain: Vec<String> = err.chain().map(|c| c.to_string()).collect();
            let record = json!({ "error": { "kind": kind, "message": chain.join(": ") } });
            eprintln!("{record}");
            ExitCode::from(2)
        }
    }
}
