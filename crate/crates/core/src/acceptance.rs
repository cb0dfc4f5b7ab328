//! Acceptance suite: one check per criterion, each returning an outcome
//! instead of panicking so that callers can print the whole report.

use std::f64::consts::{PI, TAU};
use std::time::Instant;

use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::gate::{fit_power_law, gate_fidelity, optimize_sigma, OptimizeOptions};
use crate::model::{build_grid, FrequencyGrid, GateConfig, ModelParams};
use crate::polariton::{band_bracket, band_invert, exact_omega, group_velocity, markov_omega, Band};
use crate::single_photon::{beam_splitter_t, eigenphases, unit_cell_s1, TMatrix};
use crate::two_photon::{
    apply_chain, apply_unit_cell, build_input, ideal_outputs_with_phase, product_weight, propagate_gate,
    TwoPhotonState,
};
use crate::two_polariton::{energy_defect, mirror_asymmetry, resonance_scan, scatter, TwoPolaritonInput};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionOutcome {
    pub id: u8,
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
    pub budget_seconds: f64,
}

impl CriterionOutcome {
    pub fn line(&self) -> String {
        format!(
            "[{}] criterion {:>2} {} ({:.1} s of {:.0} s): {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.seconds,
            self.budget_seconds,
            self.detail
        )
    }
}

pub const CRITERIA: [(u8, &str, f64); 10] = [
    (1, "single-photon unitarity", 1.0),
    (2, "resonant eigenphases", 1.0),
    (3, "dispersion consistency", 5.0),
    (4, "two-polariton resonance", 30.0),
    (5, "two-photon dense oracle", 60.0),
    (6, "two-photon unitarity and convergence", 600.0),
    (7, "wavepacket propagation snapshots", 900.0),
    (8, "fidelity scaling with N", 2700.0),
    (9, "loss and asymmetry monotonicity", 1200.0),
    (10, "beam-splitter identity", 1.0),
];

type Check = std::result::Result<String, String>;

fn require(cond: bool, msg: String) -> Check {
    if cond {
        Ok(msg)
    } else {
        Err(msg)
    }
}

pub fn run_criterion(id: u8) -> CriterionOutcome {
    let (_, name, budget) = CRITERIA
        .iter()
        .copied()
        .find(|c| c.0 == id)
        .unwrap_or((id, "unknown", 0.0));
    let start = Instant::now();
    let result = match id {
        1 => unitarity(),
        2 => resonant_eigenphases(),
        3 => dispersion(),
        4 => two_polariton_resonance(),
        5 => dense_oracle(),
        6 => two_photon_norm(),
        7 => propagation_snapshots(),
        8 => fidelity_scaling(),
        9 => loss_and_asymmetry(),
        10 => splitter_identity(),
        _ => Err(format!("no criterion {id}")),
    };
    let seconds = start.elapsed().as_secs_f64();
    let (ok, mut detail) = match result {
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    let in_time = seconds <= budget;
    if !in_time {
        detail.push_str("; over the runtime budget");
    }
    CriterionOutcome {
        id,
        name: name.to_string(),
        passed: ok && in_time,
        detail,
        seconds,
        budget_seconds: budget,
    }
}

pub fn run_all() -> Vec<CriterionOutcome> {
    CRITERIA.iter().map(|c| run_criterion(c.0)).collect()
}

fn frobenius_defect(m: &TMatrix) -> f64 {
    let p = m.adjoint() * *m;
    let mut s = 0.0;
    for r in 0..2 {
        for c in 0..2 {
            let target = if r == c { 1.0 } else { 0.0 };
            s += (p.m[r][c] - target).norm_sqr();
        }
    }
    s.sqrt()
}

fn unitarity() -> Check {
    let mut rng = StdRng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let ga: f64 = rng.gen_range(0.0..=1.0);
        let p = ModelParams {
            gamma_a: ga,
            gamma_b: 1.0 - ga,
            delta_k_d: rng.gen_range(0.0..TAU),
            k0_d: rng.gen_range(-PI..PI),
            ..Default::default()
        };
        let delta = rng.gen_range(-20.0..20.0);
        worst = worst.max(frobenius_defect(&unit_cell_s1(delta, &p)));
    }
    require(worst < 1e-12, format!("max ||S†S − I|| = {worst:.2e} over 1000 samples"))
}

fn resonant_eigenphases() -> Check {
    let mut worst = 0.0f64;
    for k in 0..50 {
        let dk = (k as f64 + 0.5) * TAU / 50.0;
        let mut ph = eigenphases(&unit_cell_s1(0.0, &ModelParams::symmetric(dk, 1)));
        ph.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
        let d0 = crate::single_photon::angle_distance(ph[0], 0.0);
        let dpi = crate::single_photon::angle_distance(ph[1], PI);
        worst = worst.max(d0).max(dpi);
    }
    require(worst < 1e-10, format!("max eigenphase error {worst:.2e} over 50 values of Δk·d"))
}

fn dispersion() -> Check {
    let mut rng = StdRng::seed_from_u64(3);
    let mut worst_fd = 0.0f64;
    for _ in 0..100 {
        let ga = rng.gen_range(0.1..0.9);
        let p = ModelParams {
            gamma_a: ga,
            gamma_b: 1.0 - ga,
            delta_k_d: rng.gen_range(0.2..TAU - 0.2),
            ..Default::default()
        };
        let band = if rng.gen_bool(0.5) { Band::Plus } else { Band::Minus };
        let (lo, hi) = band_bracket(band, &p);
        let q = lo + (hi - lo) * rng.gen_range(0.05..0.95);
        let h = 1e-5;
        let fd = (markov_omega(q + h, &p).map_err(|e| e.to_string())?
            - markov_omega(q - h, &p).map_err(|e| e.to_string())?)
            / (2.0 * h);
        let v = group_velocity(q, &p).map_err(|e| e.to_string())?;
        worst_fd = worst_fd.max((fd - v).abs() / v.abs().max(1.0));
    }

    // Interior set: the part of each band within one linewidth of resonance.
    let mut worst_gap = 0.0f64;
    let mut monotone = true;
    for dk in [0.5 * PI, 1.5 * PI] {
        let p = ModelParams::symmetric(dk, 1);
        for band in [Band::Minus, Band::Plus] {
            for k in 0..21 {
                let delta = -1.0 + 0.1 * k as f64;
                let q = band_invert(delta, band, &p).map_err(|e| e.to_string())?;
                let markov = markov_omega(q, &p).map_err(|e| e.to_string())?;
                let mut last = f64::INFINITY;
                for inv_c in [1e-1, 1e-2, 1e-3, 1e-4] {
                    let w = exact_omega(q, &ModelParams { inv_c, ..p }).map_err(|e| e.to_string())?;
                    let gap = (w - markov).abs();
                    if gap > last && gap > 1e-12 {
                        monotone = false;
                    }
                    if inv_c == 1e-3 {
                        worst_gap = worst_gap.max(gap);
                    }
                    last = gap;
                }
            }
        }
    }
    require(
        worst_fd < 1e-6 && worst_gap < 1e-2 && monotone,
        format!(
            "max |v_g − FD|/max(1,|v_g|) = {worst_fd:.2e}; max |exact − markov| for |δ| ≤ Γ at inv_c=1e-3 = {worst_gap:.2e}; monotone in inv_c: {monotone}"
        ),
    )
}

fn two_polariton_resonance() -> Check {
    let mut msgs = Vec::new();
    let mut ok = true;
    for dk in [PI / 2.0, 1.5 * PI] {
        let p = ModelParams::symmetric(dk, 1);
        let input = TwoPolaritonInput::resonant_pair(0.0, &p).map_err(|e| e.to_string())?;
        let r = scatter(&input, &p).map_err(|e| e.to_string())?;
        let mod_err = (r.t_el.norm() - 1.0).abs();
        let arg_err = (r.elastic_phase() - PI).abs();
        ok &= mod_err < 1e-9 && arg_err < 1e-9 && r.q_prime_d.im < 0.0 && r.residual < 1e-10;
        msgs.push(format!(
            "dk={dk:.4}: ||t_el|−1|={mod_err:.1e}, |arg−π|={arg_err:.1e}, Im Q'={:.2e}, residual={:.1e}",
            r.q_prime_d.im, r.residual
        ));
    }

    let deltas: Vec<f64> = (0..201).map(|k| -1.0 + 2.0 * k as f64 / 200.0).collect();
    let dks: Vec<f64> = (0..201).map(|k| TAU * k as f64 / 200.0).collect();
    let base = ModelParams::default();
    let maps = resonance_scan(&deltas, &dks, &base);
    let asym = [
        mirror_asymmetry(&maps.elastic_probability, &dks),
        mirror_asymmetry(&maps.elastic_phase, &dks),
        mirror_asymmetry(&maps.decay, &dks),
    ]
    .into_iter()
    .fold(0.0, f64::max);

    let mut worst_energy = 0.0f64;
    let mut worst_residual = 0.0f64;
    for &delta in deltas.iter().step_by(4) {
        for &dk in dks.iter().step_by(4) {
            if [0.0, PI, TAU].iter().any(|x| (dk - x).abs() < 1e-12) {
                continue;
            }
            let p = ModelParams { delta_k_d: dk, ..base };
            let Ok(input) = TwoPolaritonInput::resonant_pair(delta, &p) else { continue };
            let Ok(r) = scatter(&input, &p) else { continue };
            worst_residual = worst_residual.max(r.residual);
            if let Some(e) = energy_defect(&input, &r, &p) {
                worst_energy = worst_energy.max(e);
            }
        }
    }
    let excluded = maps.failures.len();
    ok &= asym < 1e-8 && worst_energy < 1e-8 && worst_residual < 1e-10;
    msgs.push(format!(
        "201x201 map mirror asymmetry {asym:.1e}, energy defect {worst_energy:.1e}, residual {worst_residual:.1e}, excluded cells {excluded}"
    ));
    require(ok, msgs.join("; "))
}

/// Dense reference for one unit cell: every matrix element of P₂·s₂·P₂ on the
/// grid is evaluated from closed forms and applied row by row.
pub fn dense_unit_cell(state: &TwoPhotonState, p: &ModelParams) -> TwoPhotonState {
    let g = &state.grid;
    let n = g.len();
    let gsum = p.gamma_a + p.gamma_b;
    let u = [(p.gamma_a / gsum).sqrt(), (p.gamma_b / gsum).sqrt()];
    let t = |x: f64, out: usize, inp: usize| -> Complex64 {
        let d = Complex64::new(p.gamma_loss + gsum, -2.0 * x);
        if out == inp {
            let own = if out == 0 { p.gamma_a } else { p.gamma_b };
            Complex64::new(p.gamma_loss + gsum - 2.0 * own, -2.0 * x) / d
        } else {
            Complex64::new(-2.0 * (p.gamma_a * p.gamma_b).sqrt(), 0.0) / d
        }
    };
    let phase = |x: f64, ch: usize| -> Complex64 {
        let k = p.k0_d + if ch == 0 { -0.5 } else { 0.5 } * p.delta_k_d + x * p.inv_c;
        Complex64::from_polar(1.0, 0.5 * k)
    };
    let tc1 = |x: f64| Complex64::new(-2.0 * gsum, 0.0) / Complex64::new(p.gamma_loss + gsum, -2.0 * x);
    let lor = |x: f64| Complex64::new(0.5 * (gsum + p.gamma_loss), -x).inv();
    // Line-measure weight of node (i', j') on its energy slice.
    let slice_w = |ip: usize, jp: usize| -> f64 {
        let k = ip + jp;
        let members: Vec<usize> = (0..n).filter(|&a| k >= a && k - a < n).collect();
        if members.len() < 2 {
            return 0.0;
        }
        if ip == members[0] || ip == *members.last().unwrap() {
            0.5 * g.spacing
        } else {
            g.spacing
        }
    };
    let slice_weights: Vec<f64> = (0..n * n).map(|k| slice_w(k / n, k % n)).collect();

    let dim = 4 * n * n;
    let mut out = TwoPhotonState::zeros(g);
    for row in 0..dim {
        let (cell, pair) = (row / 4, row % 4);
        let (i, j) = (cell / n, cell % n);
        let (b, nu) = (pair / 2, pair % 2);
        let (xi, xj) = (g.points[i], g.points[j]);
        let left = phase(xi, b) * phase(xj, nu);
        let bound = (lor(xi) + lor(xj)) * u[b] * u[nu] / (2.0 * PI);
        let mut acc = Complex64::new(0.0, 0.0);
        for col in 0..dim {
            let (cell2, pair2) = (col / 4, col % 4);
            let (ip, jp) = (cell2 / n, cell2 % n);
            let (a, l) = (pair2 / 2, pair2 % 2);
            let (xip, xjp) = (g.points[ip], g.points[jp]);
            let mut m = Complex64::new(0.0, 0.0);
            if ip == i && jp == j {
                m += t(xi, b, a) * t(xj, nu, l);
            }
            if ip + jp == i + j {
                m -= bound * slice_weights[cell2] * tc1(xip) * tc1(xjp) * u[a] * u[l];
            }
            let elem = left * m * phase(xip, a) * phase(xjp, l);
            acc += elem * state.amplitudes[col];
        }
        out.amplitudes[row] = acc;
    }
    out
}

fn max_diff(a: &TwoPhotonState, b: &TwoPhotonState) -> f64 {
    a.amplitudes
        .iter()
        .zip(&b.amplitudes)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

fn oracle_input(grid: &FrequencyGrid, p: &ModelParams) -> std::result::Result<TwoPhotonState, String> {
    let cfg = GateConfig {
        tau: Some(2.0),
        ..GateConfig::default().with_sigma(0.3)
    };
    let mut s = build_input(&cfg, p, grid).map_err(|e| e.to_string())?;
    // Seeded perturbation populating all channel pairs, kept bosonic.
    let n = grid.len();
    let mut rng = StdRng::seed_from_u64(5);
    for i in 0..n {
        for j in 0..=i {
            for a in 0..2 {
                for l in 0..2 {
                    let z = Complex64::new(rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1));
                    s.amplitudes[(i * n + j) * 4 + a * 2 + l] += z;
                    if i != j {
                        s.amplitudes[(j * n + i) * 4 + l * 2 + a] += z;
                    } else if a != l {
                        // Diagonal node: ab and ba are mirror images of each other.
                        s.amplitudes[(i * n + i) * 4 + l * 2 + a] += z;
                    }
                }
            }
        }
    }
    Ok(s)
}

fn dense_oracle() -> Check {
    let grid = build_grid(2.0, 61).map_err(|e| e.to_string())?;
    let cases = [
        ModelParams::symmetric(1.5 * PI, 1),
        ModelParams {
            gamma_a: 0.35,
            gamma_b: 0.65,
            gamma_loss: 0.05,
            delta_k_d: 2.1,
            k0_d: 0.4,
            n_emitters: 1,
            inv_c: 0.3,
        },
    ];
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for p in cases {
        let input = oracle_input(&grid, &p)?;
        let dense1 = dense_unit_cell(&input, &p);
        let fast1 = apply_unit_cell(&input, &p, true);
        let dense2 = dense_unit_cell(&dense1, &p);
        let fast2 = apply_chain(&input, &ModelParams { n_emitters: 2, ..p }, true);
        worst = worst.max(max_diff(&dense1, &fast1)).max(max_diff(&dense2, &fast2));
        scale = scale.max(dense2.amplitudes.iter().map(|z| z.norm()).fold(0.0, f64::max));
    }
    require(
        worst < 1e-10,
        format!("max |dense − structured| = {worst:.2e} for N = 1, 2 (largest amplitude {scale:.2})"),
    )
}

fn chain_norm_deviation(half_width: f64, n: usize) -> std::result::Result<f64, String> {
    let p = ModelParams::symmetric(1.5 * PI, 30);
    let grid = build_grid(half_width, n).map_err(|e| e.to_string())?;
    let cfg = GateConfig::default().with_sigma(0.05);
    let input = build_input(&cfg, &p, &grid).map_err(|e| e.to_string())?;
    let out = apply_chain(&input, &p, true);
    Ok(out.norm_sqr() / input.norm_sqr() - 1.0)
}

fn two_photon_norm() -> Check {
    let wide = chain_norm_deviation(8.0, 1601)?;
    let d1 = chain_norm_deviation(2.0, 201)?;
    let d2 = chain_norm_deviation(2.0, 401)?;
    let d3 = chain_norm_deviation(2.0, 801)?;
    let ratio = (d1 - d2) / (d2 - d3);
    require(
        wide.abs() < 1e-3 && (3.0..=5.0).contains(&ratio),
        format!(
            "N=30 norm deviation {wide:.2e} at h=0.01 (half-width 8); spacing-dependent part shrinks by {ratio:.2} per halving (deviations {d1:.6e}, {d2:.6e}, {d3:.6e} at h=0.02, 0.01, 0.005, half-width 2)"
        ),
    )
}

/// Non-product weights at N = 2, 16, 30 frozen from the converged default-grid run.
pub const FROZEN_NON_PRODUCT: [(usize, f64); 3] = [(2, 0.5333), (16, 0.3330), (30, 0.0392)];

fn propagation_snapshots() -> Check {
    let cfg = GateConfig::default().with_sigma(0.05);
    let grid = cfg.grid.build(cfg.sigma).map_err(|e| e.to_string())?;
    let mut weights = Vec::new();
    let mut overlap = Complex64::new(0.0, 0.0);
    for (n, _) in FROZEN_NON_PRODUCT {
        let p = ModelParams::symmetric(1.5 * PI, n);
        let input = build_input(&cfg, &p, &grid).map_err(|e| e.to_string())?;
        let out = propagate_gate(&input, &p, &cfg, true);
        weights.push(1.0 - product_weight(&out));
        if n == 30 {
            let reference = ideal_outputs_with_phase(&cfg, &p, &grid, 0.0).map_err(|e| e.to_string())?;
            overlap = reference.psi_ab.inner(&out);
        }
    }
    let decreasing = weights.windows(2).all(|w| w[1] < w[0]);
    let frozen = weights
        .iter()
        .zip(FROZEN_NON_PRODUCT)
        .all(|(w, (_, f))| (w - f).abs() < 5e-3);
    let phase_err = crate::single_photon::angle_distance(overlap.arg(), PI);
    require(
        decreasing && frozen && overlap.norm() > 0.9 && phase_err < 0.2,
        format!(
            "non-product weight at N=2,16,30: {:.4}, {:.4}, {:.4}; N=30 elastic overlap |{:.4}| at phase π{:+.4}",
            weights[0],
            weights[1],
            weights[2],
            overlap.norm(),
            overlap.arg().rem_euclid(TAU) - PI
        ),
    )
}

fn fidelity_scaling() -> Check {
    let ns = [10usize, 20, 30, 40, 50, 60];
    let cfg = GateConfig::default();
    let mut sigmas = Vec::new();
    let mut infids = Vec::new();
    for &n in &ns {
        let opt = optimize_sigma(&ModelParams::symmetric(1.5 * PI, n), &cfg, &OptimizeOptions::default())
            .map_err(|e| format!("N={n}: {e}"))?;
        sigmas.push(opt.sigma);
        infids.push(opt.infidelity);
    }
    let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let fs = fit_power_law(&xs, &sigmas).map_err(|e| e.to_string())?;
    let fi = fit_power_law(&xs, &infids).map_err(|e| e.to_string())?;
    let table: Vec<String> = ns
        .iter()
        .zip(sigmas.iter().zip(&infids))
        .map(|(n, (s, i))| format!("N={n}: σ={s:.4}, 1−F={i:.4e}"))
        .collect();
    require(
        (fs.exponent + 0.77).abs() <= 0.15 && (fi.exponent + 1.73).abs() <= 0.2,
        format!(
            "σ_N exponent {:.3} (r²={:.4}), 1−F exponent {:.3} (r²={:.4}); {}",
            fs.exponent,
            fs.r_squared,
            fi.exponent,
            fi.r_squared,
            table.join(", ")
        ),
    )
}

fn loss_and_asymmetry() -> Check {
    let cfg = GateConfig::default();
    let mut msgs = Vec::new();
    let mut ok = true;
    let mut loss_penalty = Vec::new();
    let mut broken = Vec::new();
    for n in [10usize, 30] {
        let base = ModelParams::symmetric(1.5 * PI, n);
        let sigma = optimize_sigma(&base, &cfg, &OptimizeOptions::default())
            .map_err(|e| format!("N={n}: {e}"))?
            .sigma;
        let c = cfg.with_sigma(sigma);
        let eval = |p: ModelParams| gate_fidelity(&p, &c).map(|r| r.infidelity).map_err(|e| e.to_string());
        let losses: Vec<f64> = [0.0, 0.005, 0.01, 0.02]
            .iter()
            .map(|&g| eval(ModelParams { gamma_loss: g, ..base }))
            .collect::<std::result::Result<_, _>>()?;
        let plus: Vec<f64> = [0.0, 0.1, 0.2]
            .iter()
            .map(|&d| eval(base.with_asymmetry(d)))
            .collect::<std::result::Result<_, _>>()?;
        let minus: Vec<f64> = [0.0, -0.1, -0.2]
            .iter()
            .map(|&d| eval(base.with_asymmetry(d)))
            .collect::<std::result::Result<_, _>>()?;
        let inc = |v: &[f64]| v.windows(2).all(|w| w[1] > w[0]);
        for (label, series) in [("γ", &losses), ("+ΔΓ", &plus), ("−ΔΓ", &minus)] {
            if !inc(series) {
                ok = false;
                broken.push(format!("N={n} {label}"));
            }
        }
        loss_penalty.push(losses[3] - losses[0]);
        msgs.push(format!(
            "N={n} (σ={sigma:.4}): 1−F vs γ {:?}, vs +ΔΓ {:?}, vs −ΔΓ {:?}",
            losses.iter().map(|v| format!("{v:.4e}")).collect::<Vec<_>>(),
            plus.iter().map(|v| format!("{v:.4e}")).collect::<Vec<_>>(),
            minus.iter().map(|v| format!("{v:.4e}")).collect::<Vec<_>>()
        ));
    }
    if loss_penalty[1] <= loss_penalty[0] {
        ok = false;
        broken.push("loss penalty not larger at N=30".into());
    }
    if !broken.is_empty() {
        msgs.insert(0, format!("not strictly increasing: {}", broken.join(", ")));
    }
    msgs.push(format!(
        "loss penalty at γ=0.02: N=10 {:.4e}, N=30 {:.4e}",
        loss_penalty[0], loss_penalty[1]
    ));
    require(ok, msgs.join("; "))
}

fn splitter_identity() -> Check {
    let t = beam_splitter_t(0.0, &GateConfig::default());
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let err = [
        (t.aa() + s).norm(),
        (t.ba() + s).norm(),
        (t.bb() - s).norm(),
        (t.ab() + s).norm(),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    let sq = t * t;
    let id_err = (sq.aa() - 1.0).norm().max((sq.bb() - 1.0).norm()).max(sq.ab().norm()).max(sq.ba().norm());
    require(
        err < 1e-12 && id_err < 1e-12,
        format!("entry error {err:.1e}, |t² − I| = {id_err:.1e}"),
    )
}
