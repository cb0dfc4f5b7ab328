//! Plane-wave scattering of two polaritons in the infinite array.
//!
//! The outgoing relative momentum Q′ is carried as w = e^{−iQ′d}. On the
//! scattering resonance (δ = 0, Γa = Γb) the closed form for cos Q′ has a
//! vanishing denominator, Q′ → −i∞ and w → 0; in terms of w every quantity
//! stays finite, so the linear system is solved for (t_el, t_in·w).

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::polariton::{band_invert, Band};

const I: Complex64 = Complex64::new(0.0, 1.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Tolerance separating real from complex Q′ and unit from sub-unit |t_el|².
pub const CLASS_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoPolaritonInput {
    pub q1_d: f64,
    pub q2_d: f64,
    /// Total quasimomentum 2k0d + q1d + q2d.
    pub k_total_d: f64,
    /// Relative quasimomentum (q1d − q2d)/2.
    pub q_rel_d: f64,
    pub delta: f64,
    /// Total energy ω(q1) + ω(q2).
    pub energy: f64,
}

impl TwoPolaritonInput {
    pub fn new(q1_d: f64, q2_d: f64, params: &ModelParams) -> Result<Self> {
        let w1 = crate::polariton::markov_omega(q1_d, params)?;
        let w2 = crate::polariton::markov_omega(q2_d, params)?;
        Ok(Self {
            q1_d,
            q2_d,
            k_total_d: 2.0 * params.k0_d + q1_d + q2_d,
            q_rel_d: 0.5 * (q1_d - q2_d),
            delta: 0.5 * (w1 + w2),
            energy: w1 + w2,
        })
    }

    /// One polariton from each band at common detuning `delta`. The slower
    /// polariton is placed in front: q1 = q− for Δkd > π, q1 = q+ otherwise.
    pub fn resonant_pair(delta: f64, params: &ModelParams) -> Result<Self> {
        let qm = band_invert(delta, Band::Minus, params)?;
        let qp = band_invert(delta, Band::Plus, params)?;
        let (q1, q2) = if params.delta_k_d.rem_euclid(TAU) > PI {
            (qm, qp)
        } else {
            (qp, qm)
        };
        let mut input = Self::new(q1, q2, params)?;
        input.delta = delta;
        Ok(input)
    }

    /// Centre-of-mass quasimomentum κ = K/2 − k0 (phase per cell).
    pub fn kappa(&self, params: &ModelParams) -> f64 {
        0.5 * self.k_total_d - params.k0_d
    }
}

/// Outgoing relative momentum in the form w = e^{−iQ′d}, with |w| ≤ 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegenerateQ {
    pub w: Complex64,
}

impl DegenerateQ {
    /// Q′d = i ln w. Equals −i∞ when w = 0.
    pub fn q_prime_d(&self) -> Complex64 {
        if self.w == Complex64::new(0.0, 0.0) {
            return Complex64::new(0.0, f64::NEG_INFINITY);
        }
        let q = I * self.w.ln();
        Complex64::new(q.re, q.im.min(0.0))
    }

    pub fn is_real(&self) -> bool {
        (self.w.norm() - 1.0).abs() <= CLASS_TOL
    }
}

fn closed_form_parts(kappa: f64, q_rel: f64, params: &ModelParams) -> (f64, f64) {
    // Ratio num/den = cos Q′d; both sides multiplied through by Γa so that
    // r = −Γb/Γa never has to be formed.
    let (ga, gb) = (params.gamma_a, params.gamma_b);
    let h = 0.5 * params.delta_k_d;
    let cq = q_rel.cos();
    let num = -2.0 * gb * (h + kappa).cos().powi(2) * (h - kappa).sin()
        + cq * ((-gb - ga) * (2.0 * kappa).sin() - (ga - gb) * (2.0 * h).sin())
        + 2.0 * ga * (h - kappa).cos().powi(2) * (h + kappa).sin();
    let den = 2.0 * (-gb - ga) * kappa.sin() * (cq * h.cos() - kappa.cos())
        + 2.0 * (ga - gb) * h.sin() * (h.cos() - cq * kappa.cos());
    (num, den)
}

fn velocity(q: f64, params: &ModelParams) -> f64 {
    let half = 0.5 * params.delta_k_d;
    let sa = (0.5 * (q + half)).sin();
    let sb = (0.5 * (q - half)).sin();
    0.25 * params.gamma_a / (sa * sa) + 0.25 * params.gamma_b / (sb * sb)
}

/// Relative momentum of the outgoing pair with the same K and E.
///
/// Complex solutions take the decaying branch Im Q′ ≤ 0. For real Q′ the
/// sign is chosen so the faster of the two outgoing polaritons is in front.
pub fn degenerate_q(k_total_d: f64, q_rel_d: f64, params: &ModelParams) -> Result<DegenerateQ> {
    let kappa = 0.5 * k_total_d - params.k0_d;
    let (num, mut den) = closed_form_parts(kappa, q_rel_d, params);
    let scale = params.gamma_a.max(params.gamma_b).max(f64::MIN_POSITIVE);
    // Round-off level denominators are the exact resonance (w = 0); without
    // this −Im Q′ = −ln|w| would report noise of order 30–40.
    if den.abs() < 1e-13 * scale {
        den = 0.0;
    }
    if num.abs().max(den.abs()) < 1e-12 * scale {
        return Err(Error::DegenerateDenominator {
            numerator: num,
            denominator: den,
        });
    }
    // w + 1/w = 2 num/den; take the root of smaller modulus.
    let disc = num * num - den * den;
    let near_branch = den != 0.0 && ((num / den).abs() - 1.0).abs() < 1e-12;
    let root = if near_branch {
        Complex64::new(0.0, 0.0)
    } else {
        Complex64::new(disc, 0.0).sqrt()
    };
    let a1 = num + root;
    let a2 = num - root;
    let big = if a1.norm() >= a2.norm() { a1 } else { a2 };
    let mut w = Complex64::new(den, 0.0) / big;
    if (w.norm() - 1.0).abs() < 1e-12 {
        w /= w.norm();
        let q = (I * w.ln()).re;
        if velocity(kappa - q, params) < velocity(kappa + q, params) {
            w = w.inv();
        }
    }
    Ok(DegenerateQ { w })
}

fn kernel(x: f64, y: f64) -> f64 {
    x.sin() / (x.cos() - y.cos())
}

/// 1 − i f(Q′, y) divided by w, written in w so that it stays finite at w = 0.
fn outgoing_column(w: Complex64, y: f64) -> Complex64 {
    let cy = y.cos();
    2.0 * (w - cy) / (ONE + w * w - 2.0 * w * cy)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Amplitudes {
    pub t_el: Complex64,
    /// Inelastic amplitude; diverges when w = 0.
    pub t_in: Complex64,
    /// t_in·e^{−iQ′d}, finite everywhere.
    pub t_in_scaled: Complex64,
    /// Largest residual of the two equations at the returned solution.
    pub residual: f64,
}

/// Elastic and inelastic amplitudes from the 2×2 matching conditions.
pub fn amplitudes(k_total_d: f64, q_rel_d: f64, qp: &DegenerateQ, params: &ModelParams) -> Result<Amplitudes> {
    let kappa = 0.5 * k_total_d - params.k0_d;
    let half = 0.5 * params.delta_k_d;
    let ys = [-half - kappa, half - kappa];
    let mut a = [[Complex64::new(0.0, 0.0); 2]; 2];
    let mut rhs = [Complex64::new(0.0, 0.0); 2];
    for (row, &y) in ys.iter().enumerate() {
        let f = kernel(q_rel_d, y);
        a[row][0] = ONE - I * f;
        a[row][1] = outgoing_column(qp.w, y);
        rhs[row] = -(ONE + I * f);
    }
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    let scale = a.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max);
    if !det.is_finite() || !(det.norm() > 1e-12 * scale * scale) {
        return Err(Error::SingularSystem {
            determinant: det.norm(),
        });
    }
    let t_el = (rhs[0] * a[1][1] - a[0][1] * rhs[1]) / det;
    let t_in_scaled = (a[0][0] * rhs[1] - a[1][0] * rhs[0]) / det;
    let residual = (0..2)
        .map(|r| (a[r][0] * t_el + a[r][1] * t_in_scaled - rhs[r]).norm())
        .fold(0.0, f64::max);
    let t_in = if qp.w == Complex64::new(0.0, 0.0) {
        Complex64::new(f64::INFINITY, 0.0)
    } else {
        t_in_scaled / qp.w
    };
    Ok(Amplitudes {
        t_el,
        t_in,
        t_in_scaled,
        residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScatteringClass {
    /// Real Q′, |t_el| = 1.
    Elastic,
    /// Real Q′, |t_el| < 1: a pair with new momenta is emitted.
    Inelastic,
    /// Complex Q′ with |t_el| = 1: the polaritons bind for a finite time.
    Resonance,
}

pub fn classify(t_el: Complex64, q_prime_d: Complex64) -> ScatteringClass {
    let p = t_el.norm_sqr();
    let im = q_prime_d.im.abs();
    if im > CLASS_TOL && (p - 1.0).abs() <= CLASS_TOL {
        ScatteringClass::Resonance
    } else if im <= CLASS_TOL && p < 1.0 - CLASS_TOL {
        ScatteringClass::Inelastic
    } else {
        ScatteringClass::Elastic
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScatteringResult {
    pub q_prime_d: Complex64,
    pub w: Complex64,
    pub t_el: Complex64,
    pub t_in: Complex64,
    pub t_in_scaled: Complex64,
    pub class: ScatteringClass,
    pub residual: f64,
}

impl ScatteringResult {
    /// arg(t_el) in [0, 2π), so the resonant value π is interior.
    pub fn elastic_phase(&self) -> f64 {
        self.t_el.arg().rem_euclid(TAU)
    }
}

pub fn scatter(input: &TwoPolaritonInput, params: &ModelParams) -> Result<ScatteringResult> {
    let qp = degenerate_q(input.k_total_d, input.q_rel_d, params)?;
    let amp = amplitudes(input.k_total_d, input.q_rel_d, &qp, params)?;
    let q_prime_d = qp.q_prime_d();
    Ok(ScatteringResult {
        q_prime_d,
        w: qp.w,
        t_el: amp.t_el,
        t_in: amp.t_in,
        t_in_scaled: amp.t_in_scaled,
        class: classify(amp.t_el, q_prime_d),
        residual: amp.residual,
    })
}

/// Energy mismatch of the outgoing pair κ ± Q′ for real Q′; `None` otherwise.
pub fn energy_defect(input: &TwoPolaritonInput, result: &ScatteringResult, params: &ModelParams) -> Option<f64> {
    if !(DegenerateQ { w: result.w }).is_real() {
        return None;
    }
    let kappa = input.kappa(params);
    let q = result.q_prime_d.re;
    let e1 = crate::polariton::markov_omega(kappa + q, params).ok()?;
    let e2 = crate::polariton::markov_omega(kappa - q, params).ok()?;
    Some((e1 + e2 - input.energy).abs())
}

/// Resonance maps; rows follow `deltas`, columns follow `delta_k_ds`.
/// Cells that could not be computed hold `None` and an entry in `failures`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResonanceMaps {
    pub deltas: Vec<f64>,
    pub delta_k_ds: Vec<f64>,
    pub elastic_probability: Vec<Vec<Option<f64>>>,
    pub elastic_phase: Vec<Vec<Option<f64>>>,
    pub decay: Vec<Vec<Option<f64>>>,
    pub classes: Vec<Vec<Option<ScatteringClass>>>,
    pub failures: Vec<ScanFailure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanFailure {
    pub delta: f64,
    pub delta_k_d: f64,
    pub reason: String,
}

fn excluded_mismatch(dk: f64) -> bool {
    [0.0, PI, TAU].iter().any(|&x| (dk - x).abs() < 1e-12)
}

pub fn resonance_scan(deltas: &[f64], delta_k_ds: &[f64], params: &ModelParams) -> ResonanceMaps {
    type Cell = std::result::Result<ScatteringResult, String>;
    let rows: Vec<Vec<Cell>> = deltas
        .par_iter()
        .map(|&delta| {
            delta_k_ds
                .iter()
                .map(|&dk| {
                    if excluded_mismatch(dk) {
                        return Err("excluded: bands degenerate at this mismatch".to_string());
                    }
                    let p = ModelParams {
                        delta_k_d: dk,
                        ..*params
                    };
                    TwoPolaritonInput::resonant_pair(delta, &p)
                        .and_then(|input| scatter(&input, &p))
                        .map_err(|e| e.to_string())
                })
                .collect()
        })
        .collect();

    let n = delta_k_ds.len();
    let mut maps = ResonanceMaps {
        deltas: deltas.to_vec(),
        delta_k_ds: delta_k_ds.to_vec(),
        elastic_probability: Vec::with_capacity(rows.len()),
        elastic_phase: Vec::with_capacity(rows.len()),
        decay: Vec::with_capacity(rows.len()),
        classes: Vec::with_capacity(rows.len()),
        failures: Vec::new(),
    };
    for (i, row) in rows.into_iter().enumerate() {
        let mut prob = Vec::with_capacity(n);
        let mut phase = Vec::with_capacity(n);
        let mut decay = Vec::with_capacity(n);
        let mut class = Vec::with_capacity(n);
        for (j, cell) in row.into_iter().enumerate() {
            match cell {
                Ok(r) => {
                    prob.push(Some(r.t_el.norm_sqr()));
                    phase.push(Some(r.elastic_phase()));
                    decay.push(Some(-r.q_prime_d.im));
                    class.push(Some(r.class));
                }
                Err(reason) => {
                    prob.push(None);
                    phase.push(None);
                    decay.push(None);
                    class.push(None);
                    maps.failures.push(ScanFailure {
                        delta: deltas[i],
                        delta_k_d: delta_k_ds[j],
                        reason,
                    });
                }
            }
        }
        maps.elastic_probability.push(prob);
        maps.elastic_phase.push(phase);
        maps.decay.push(decay);
        maps.classes.push(class);
    }
    maps
}

/// Largest |m(δ, Δkd) − m(δ, 2π − Δkd)| over cells where both mirror
/// partners are present. Columns must be symmetric about π.
pub fn mirror_asymmetry(map: &[Vec<Option<f64>>], delta_k_ds: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for row in map {
        for (j, &dk) in delta_k_ds.iter().enumerate() {
            let mirror = delta_k_ds
                .iter()
                .position(|&other| (other - (TAU - dk)).abs() < 1e-9);
            if let (Some(m), Some(a)) = (mirror, row[j]) {
                if let Some(b) = row[m] {
                    let d = if a.is_infinite() && b.is_infinite() && a.signum() == b.signum() {
                        0.0
                    } else {
                        (a - b).abs()
                    };
                    worst = worst.max(d);
                }
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn sym(dk: f64) -> ModelParams {
        ModelParams::symmetric(dk, 30)
    }

    fn phase_distance(a: f64, b: f64) -> f64 {
        let d = (a - b).rem_euclid(TAU);
        d.min(TAU - d)
    }

    #[test]
    fn resonance_is_a_pi_phase() {
        for dk in [PI / 2.0, 1.5 * PI, 1.0, 5.0] {
            let p = sym(dk);
            let input = TwoPolaritonInput::resonant_pair(0.0, &p).unwrap();
            let r = scatter(&input, &p).unwrap();
            assert_abs_diff_eq!(r.t_el.norm(), 1.0, epsilon = 1e-9);
            assert!(phase_distance(r.elastic_phase(), PI) < 1e-9, "Δkd = {dk}");
            assert!(r.q_prime_d.im < 0.0);
            assert!(r.residual < 1e-10);
            assert_eq!(r.class, ScatteringClass::Resonance);
            assert!(r.t_in_scaled.norm() > 0.0);
        }
    }

    #[test]
    fn off_resonance_classes() {
        let p = sym(1.5 * PI);
        let input = TwoPolaritonInput::resonant_pair(0.8, &p).unwrap();
        let r = scatter(&input, &p).unwrap();
        assert!(r.q_prime_d.im.abs() < 1e-12);
        assert_eq!(r.class, ScatteringClass::Inelastic);
        assert!(energy_defect(&input, &r, &p).unwrap() < 1e-8);
        let input = TwoPolaritonInput::resonant_pair(0.05, &p).unwrap();
        let r = scatter(&input, &p).unwrap();
        assert!(r.q_prime_d.im < -CLASS_TOL);
    }

    #[test]
    fn phase_is_linear_near_resonance() {
        let p = sym(1.5 * PI);
        let phase = |d: f64| {
            let input = TwoPolaritonInput::resonant_pair(d, &p).unwrap();
            scatter(&input, &p).unwrap().elastic_phase() - PI
        };
        let (a, b) = (phase(1e-4), phase(2e-4));
        assert!(a.abs() > 0.0);
        assert_abs_diff_eq!(b / a, 2.0, epsilon = 1e-3);
        assert_abs_diff_eq!(phase(-1e-4), -a, epsilon = 1e-9);
    }

    #[test]
    fn ordering_rule() {
        let p = sym(1.5 * PI);
        let input = TwoPolaritonInput::resonant_pair(0.0, &p).unwrap();
        assert_abs_diff_eq!(input.q1_d, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(input.q2_d, PI, epsilon = 1e-14);
        let p = sym(PI / 2.0);
        let input = TwoPolaritonInput::resonant_pair(0.0, &p).unwrap();
        assert_abs_diff_eq!(input.q1_d, PI, epsilon = 1e-14);
    }

    #[test]
    fn involution_on_real_branch() {
        let p = ModelParams {
            gamma_a: 0.3,
            gamma_b: 0.7,
            delta_k_d: 4.2,
            ..Default::default()
        };
        let input = TwoPolaritonInput::resonant_pair(0.9, &p).unwrap();
        let qp = degenerate_q(input.k_total_d, input.q_rel_d, &p).unwrap();
        assert!(qp.is_real());
        let back = degenerate_q(input.k_total_d, qp.q_prime_d().re, &p).unwrap();
        let q = back.q_prime_d().re;
        let target = input.q_rel_d;
        assert!(
            phase_distance(q, target).min(phase_distance(q, -target)) < 1e-9,
            "{q} vs ±{target}"
        );
    }

    #[test]
    fn classification_is_exhaustive() {
        let z = |re: f64, im: f64| Complex64::new(re, im);
        assert_eq!(classify(z(-1.0, 0.0), z(0.0, -0.5)), ScatteringClass::Resonance);
        assert_eq!(classify(z(0.5, 0.0), z(0.3, 0.0)), ScatteringClass::Inelastic);
        assert_eq!(classify(z(0.0, 1.0), z(0.3, 0.0)), ScatteringClass::Elastic);
        assert_eq!(classify(z(0.5, 0.0), z(0.3, -0.2)), ScatteringClass::Elastic);
    }

    #[test]
    fn scan_marks_excluded_columns() {
        let maps = resonance_scan(&[0.0, 0.3], &[0.0, 1.0, PI, 5.0, TAU], &ModelParams::default());
        assert_eq!(maps.failures.len(), 6);
        assert!(maps.elastic_probability[0][0].is_none());
        assert!(maps.elastic_probability[1][1].is_some());
        assert_eq!(maps.classes[0][3], Some(ScatteringClass::Resonance));
    }

    #[test]
    fn small_scan_is_symmetric_and_bounded() {
        let deltas: Vec<f64> = (0..21).map(|i| -1.0 + 0.1 * i as f64).collect();
        let dks: Vec<f64> = (0..41).map(|j| TAU * j as f64 / 40.0).collect();
        let maps = resonance_scan(&deltas, &dks, &ModelParams::default());
        assert!(mirror_asymmetry(&maps.elastic_probability, &dks) < 1e-8);
        assert!(mirror_asymmetry(&maps.elastic_phase, &dks) < 1e-8);
        assert!(mirror_asymmetry(&maps.decay, &dks) < 1e-8);
        for row in &maps.elastic_probability {
            for v in row.iter().flatten() {
                assert!(*v <= 1.0 + 1e-9);
            }
        }
    }

    proptest! {
        #[test]
        fn pairs_conserve_energy(delta in -3.0f64..3.0, dk in 0.05f64..6.2, ga in 0.2f64..0.8) {
            let p = ModelParams { gamma_a: ga, gamma_b: 1.0 - ga, delta_k_d: dk, ..Default::default() };
            prop_assume!((dk - PI).abs() > 1e-3);
            let input = TwoPolaritonInput::resonant_pair(delta, &p).unwrap();
            if let Ok(r) = scatter(&input, &p) {
                if let Some(e) = energy_defect(&input, &r, &p) {
                    prop_assert!(e < 1e-8);
                }
                prop_assert!(r.residual < 1e-10 * (1.0 + r.t_el.norm() + r.t_in_scaled.norm()));
                prop_assert!(r.q_prime_d.im <= 0.0);
            }
        }

        #[test]
        fn elastic_probability_bounded(delta in -1.0f64..1.0, dk in 0.05f64..6.2) {
            prop_assume!((dk - PI).abs() > 1e-3);
            let p = sym(dk);
            let input = TwoPolaritonInput::resonant_pair(delta, &p).unwrap();
            let r = scatter(&input, &p).unwrap();
            prop_assert!(r.t_el.norm_sqr() <= 1.0 + 1e-9);
        }
    }
}
