//! Polariton band structure of the infinite array.

use std::f64::consts::TAU;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;

const POLE_GUARD: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Band {
    Plus,
    Minus,
}

impl Band {
    pub fn as_str(&self) -> &'static str {
        match self {
            Band::Plus => "plus",
            Band::Minus => "minus",
        }
    }
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandPoint {
    /// Minus-band points lie in (−Δkd/2, Δkd/2); plus-band points in
    /// (Δkd/2, 2π − Δkd/2), so the plus resonance sits at qd = π.
    pub q_d: f64,
    pub band: Band,
    pub omega: f64,
    pub v_g: f64,
}

/// Distance of `x` from the nearest multiple of 2π.
fn wrap_distance(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    r.min(TAU - r)
}

fn check_poles(q_d: f64, params: &ModelParams) -> Result<()> {
    let half = 0.5 * params.delta_k_d;
    for arg in [q_d + half, q_d - half] {
        if wrap_distance(arg) < POLE_GUARD {
            return Err(Error::DivergentBandEdge { q_d });
        }
    }
    Ok(())
}

fn cot(x: f64) -> f64 {
    x.cos() / x.sin()
}

fn omega_raw(q_d: f64, params: &ModelParams) -> f64 {
    let half = 0.5 * params.delta_k_d;
    -0.5 * params.gamma_a * cot(0.5 * (q_d + half)) - 0.5 * params.gamma_b * cot(0.5 * (q_d - half))
}

fn velocity_raw(q_d: f64, params: &ModelParams) -> f64 {
    let half = 0.5 * params.delta_k_d;
    let sa = (0.5 * (q_d + half)).sin();
    let sb = (0.5 * (q_d - half)).sin();
    0.25 * params.gamma_a / (sa * sa) + 0.25 * params.gamma_b / (sb * sb)
}

/// Markovian dispersion ω(q) − ω0.
pub fn markov_omega(q_d: f64, params: &ModelParams) -> Result<f64> {
    check_poles(q_d, params)?;
    Ok(omega_raw(q_d, params))
}

/// Group velocity ∂ω/∂q (units Γd).
pub fn group_velocity(q_d: f64, params: &ModelParams) -> Result<f64> {
    check_poles(q_d, params)?;
    Ok(velocity_raw(q_d, params))
}

/// Open interval in qd between the two poles that delimit a band.
pub fn band_bracket(band: Band, params: &ModelParams) -> (f64, f64) {
    let half = 0.5 * params.delta_k_d.rem_euclid(TAU);
    match band {
        Band::Minus => (-half, half),
        Band::Plus => (half, TAU - half),
    }
}

/// Inverse of [`markov_omega`] on one band: the qd with ω(qd) = δ.
pub fn band_invert(delta: f64, band: Band, params: &ModelParams) -> Result<f64> {
    let no_root = || Error::NoRootInBracket {
        band: band.as_str(),
        delta,
    };
    if !delta.is_finite() {
        return Err(no_root());
    }
    let (lo, hi) = band_bracket(band, params);
    if hi - lo < 2.0 * POLE_GUARD {
        return Err(no_root());
    }
    let (mut a, mut b) = (lo + POLE_GUARD, hi - POLE_GUARD);
    if omega_raw(a, params) > delta || omega_raw(b, params) < delta {
        return Err(no_root());
    }
    // ω is increasing on the bracket; bisect until the interval stops shrinking.
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if omega_raw(mid, params) < delta {
            a = mid;
        } else {
            b = mid;
        }
    }
    let ra = (omega_raw(a, params) - delta).abs();
    let rb = (omega_raw(b, params) - delta).abs();
    Ok(if ra <= rb { a } else { b })
}

/// Point on a band at detuning `delta`.
pub fn band_point(delta: f64, band: Band, params: &ModelParams) -> Result<BandPoint> {
    let q_d = band_invert(delta, band, params)?;
    Ok(BandPoint {
        q_d,
        band,
        omega: omega_raw(q_d, params),
        v_g: velocity_raw(q_d, params),
    })
}

/// `n` evenly spaced interior samples of one band, keeping `margin` away from the poles.
pub fn band_samples(band: Band, params: &ModelParams, n: usize, margin: f64) -> Vec<BandPoint> {
    let (lo, hi) = band_bracket(band, params);
    let (lo, hi) = (lo + margin, hi - margin);
    if n == 0 || hi <= lo {
        return Vec::new();
    }
    (0..n)
        .map(|i| {
            let q_d = if n == 1 {
                0.5 * (lo + hi)
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            };
            BandPoint {
                q_d,
                band,
                omega: omega_raw(q_d, params),
                v_g: velocity_raw(q_d, params),
            }
        })
        .collect()
}

fn exact_rhs(omega: f64, q_d: f64, params: &ModelParams) -> f64 {
    omega_raw(q_d - omega * params.inv_c, params)
}

/// Retardation-corrected dispersion: solves ω = ω_Markov(q − ω/c) at fixed q.
pub fn exact_omega(q_d: f64, params: &ModelParams) -> Result<f64> {
    let s = params.inv_c;
    if !(s > 0.0) {
        return Err(crate::error::invalid("inv_c", "exact dispersion needs inv_c > 0"));
    }
    let seed = markov_omega(q_d, params)?;
    let residual = |w: f64| w - exact_rhs(w, q_d, params);

    // Poles of the right-hand side sit at ω = (q ± Δ/2 − 2πm)/s; the residual is
    // increasing between consecutive poles, so the one holding the seed brackets a root.
    let half = 0.5 * params.delta_k_d;
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for shift in [half, -half] {
        let base = q_d + shift - seed * s;
        let m = (base / TAU).floor();
        for mm in [m - 1.0, m, m + 1.0, m + 2.0] {
            let pole = (q_d + shift - TAU * mm) / s;
            if pole < seed {
                lo = lo.max(pole);
            } else if pole > seed {
                hi = hi.min(pole);
            }
        }
    }
    let width = hi - lo;
    let guard = (width * 1e-14).max(f64::MIN_POSITIVE);
    let (mut a, mut b) = (lo + guard, hi - guard);

    let mut w = seed;
    let mut best = (residual(w).abs(), w);
    for _ in 0..60 {
        let next = 0.5 * w + 0.5 * exact_rhs(w, q_d, params);
        if !(next > a && next < b) {
            break;
        }
        w = next;
        let r = residual(w);
        if r.abs() < best.0 {
            best = (r.abs(), w);
        }
        if r < 0.0 {
            a = a.max(w);
        } else {
            b = b.min(w);
        }
        if r.abs() < 1e-13 {
            return Ok(w);
        }
    }
    for _ in 0..400 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let r = residual(mid);
        if r.abs() < best.0 {
            best = (r.abs(), mid);
        }
        if r.abs() < 1e-13 {
            break;
        }
        if r < 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    if best.0 < 1e-10 {
        Ok(best.1)
    } else {
        Err(Error::NonConvergence { residual: best.0 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonantDelays {
    pub tau_plus: f64,
    pub tau_minus: f64,
    /// Delay imprinted on the a photon, (τ− − τ+)·N/2.
    pub initial_delay: f64,
}

/// Per-emitter delays of the two resonant polaritons, τ± = d / v_g(q±).
pub fn resonant_delays(params: &ModelParams) -> Result<ResonantDelays> {
    let r = params.delta_k_d.rem_euclid(TAU);
    if r < 1e-12 || TAU - r < 1e-12 {
        return Err(Error::BandCollapse(
            "resonant delays are undefined when the modes are phase matched".into(),
        ));
    }
    let v_plus = band_point(0.0, Band::Plus, params)?.v_g;
    let v_minus = band_point(0.0, Band::Minus, params)?.v_g;
    let tau_plus = 1.0 / v_plus;
    let tau_minus = 1.0 / v_minus;
    Ok(ResonantDelays {
        tau_plus,
        tau_minus,
        initial_delay: 0.5 * (tau_minus - tau_plus) * params.n_emitters as f64,
    })
}

/// Closed-form delays for Γa = Γb.
pub fn symmetric_resonant_delays(delta_k_d: f64, total_linewidth: f64) -> (f64, f64) {
    let c = (0.25 * delta_k_d).cos();
    let s = (0.25 * delta_k_d).sin();
    (4.0 * c * c / total_linewidth, 4.0 * s * s / total_linewidth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn sym(dk: f64) -> ModelParams {
        ModelParams::symmetric(dk, 30)
    }

    #[test]
    fn markov_examples() {
        let p = sym(1.5 * PI);
        assert_abs_diff_eq!(markov_omega(0.0, &p).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(markov_omega(PI, &p).unwrap(), 0.0, epsilon = 1e-15);
        let p0 = sym(0.0);
        assert_abs_diff_eq!(markov_omega(PI, &p0).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(markov_omega(PI / 2.0, &p0).unwrap(), -0.5, epsilon = 1e-15);
    }

    #[test]
    fn pole_is_reported() {
        let p = sym(1.5 * PI);
        let pole = 0.75 * PI;
        assert!(matches!(
            markov_omega(pole, &p),
            Err(Error::DivergentBandEdge { .. })
        ));
        assert!(matches!(
            group_velocity(-pole + 1e-10, &p),
            Err(Error::DivergentBandEdge { .. })
        ));
    }

    #[test]
    fn velocity_examples() {
        let p = sym(1.5 * PI);
        let s = (3.0 * PI / 8.0).sin();
        let c = (3.0 * PI / 8.0).cos();
        assert_abs_diff_eq!(group_velocity(0.0, &p).unwrap(), 1.0 / (4.0 * s * s), epsilon = 1e-14);
        assert_abs_diff_eq!(group_velocity(0.0, &p).unwrap(), 0.29289, epsilon = 1e-5);
        assert_abs_diff_eq!(group_velocity(PI, &p).unwrap(), 1.0 / (4.0 * c * c), epsilon = 1e-14);
        assert_abs_diff_eq!(group_velocity(PI, &p).unwrap(), 1.70711, epsilon = 1e-5);
        let p = sym(PI);
        assert_abs_diff_eq!(
            group_velocity(0.0, &p).unwrap(),
            group_velocity(PI, &p).unwrap(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn inversion_at_resonance() {
        let p = sym(1.5 * PI);
        assert_abs_diff_eq!(band_invert(0.0, Band::Minus, &p).unwrap(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(band_invert(0.0, Band::Plus, &p).unwrap(), PI, epsilon = 1e-14);
        let q = band_invert(0.1, Band::Minus, &p).unwrap();
        assert!((markov_omega(q, &p).unwrap() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn non_finite_detuning_has_no_root() {
        assert!(matches!(
            band_invert(f64::INFINITY, Band::Plus, &sym(1.0)),
            Err(Error::NoRootInBracket { band: "plus", .. })
        ));
    }

    #[test]
    fn delays_examples() {
        let d = resonant_delays(&sym(1.5 * PI)).unwrap();
        assert_abs_diff_eq!(d.tau_plus, 0.58579, epsilon = 1e-5);
        assert_abs_diff_eq!(d.tau_minus, 3.41421, epsilon = 1e-5);
        assert_abs_diff_eq!(d.initial_delay, 42.426, epsilon = 1e-3);
        let (tp, tm) = symmetric_resonant_delays(1.5 * PI, 1.0);
        assert_abs_diff_eq!(d.tau_plus, tp, epsilon = 1e-12);
        assert_abs_diff_eq!(d.tau_minus, tm, epsilon = 1e-12);
        let d = resonant_delays(&sym(PI)).unwrap();
        assert_abs_diff_eq!(d.tau_plus, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d.tau_minus, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d.initial_delay, 0.0, epsilon = 1e-10);
        assert!(resonant_delays(&sym(0.0)).is_err());
    }

    #[test]
    fn exact_dispersion_converges_to_markov() {
        let p = sym(1.5 * PI);
        for q in [-1.5, -0.7, 0.0, 0.4, 1.9, 2.8, 3.5] {
            let mut last = f64::INFINITY;
            for inv_c in [1e-1, 1e-2, 1e-3, 1e-4] {
                let pc = ModelParams { inv_c, ..p };
                let w = exact_omega(q, &pc).unwrap();
                let res = w - markov_omega(q - w * inv_c, &pc).unwrap();
                assert!(res.abs() < 1e-10);
                let gap = (w - markov_omega(q, &p).unwrap()).abs();
                assert!(gap <= last + 1e-15, "q = {q}, inv_c = {inv_c}");
                if inv_c == 1e-3 {
                    assert!(gap < 1e-2);
                }
                last = gap;
            }
        }
    }

    #[test]
    fn exact_dispersion_needs_finite_c() {
        assert!(exact_omega(0.3, &sym(1.5 * PI)).is_err());
    }

    #[test]
    fn samples_stay_inside_bands() {
        let p = sym(1.5 * PI);
        let pts = band_samples(Band::Plus, &p, 11, 0.05);
        assert_eq!(pts.len(), 11);
        assert!(pts.windows(2).all(|w| w[1].omega > w[0].omega));
        assert!(pts.iter().all(|b| b.v_g > 0.0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn velocity_is_derivative(frac in 0.02f64..0.98, dk in 0.1f64..6.18, ga in 0.1f64..0.9, plus in any::<bool>()) {
            let p = ModelParams { gamma_a: ga, gamma_b: 1.0 - ga, delta_k_d: dk, ..Default::default() };
            let band = if plus { Band::Plus } else { Band::Minus };
            let (lo, hi) = band_bracket(band, &p);
            let q = lo + frac * (hi - lo);
            let h = 1e-5;
            let fd = (markov_omega(q + h, &p).unwrap() - markov_omega(q - h, &p).unwrap()) / (2.0 * h);
            let v = group_velocity(q, &p).unwrap();
            prop_assert!((fd - v).abs() < 1e-6 * v.max(1.0), "fd {} v {}", fd, v);
        }

        #[test]
        fn odd_symmetry(q in -2.0f64..2.0, dk in 0.1f64..6.18) {
            let p = sym(dk);
            prop_assume!(check_poles(q, &p).is_ok());
            prop_assert!((markov_omega(-q, &p).unwrap() + markov_omega(q, &p).unwrap()).abs() < 1e-9 * (1.0 + markov_omega(q, &p).unwrap().abs()));
        }

        #[test]
        fn inversion_round_trip(delta in -30.0f64..30.0, dk in 0.1f64..6.18, plus in any::<bool>()) {
            let p = sym(dk);
            let band = if plus { Band::Plus } else { Band::Minus };
            let q = band_invert(delta, band, &p).unwrap();
            let (lo, hi) = band_bracket(band, &p);
            prop_assert!(q > lo && q < hi);
            prop_assert!((markov_omega(q, &p).unwrap() - delta).abs() < 1e-12 * delta.abs().max(1.0));
            let q2 = band_invert(delta + 0.01, band, &p).unwrap();
            prop_assert!(q2 > q);
        }

        #[test]
        fn delays_are_inverse_velocities(dk in 0.05f64..6.23) {
            let p = sym(dk);
            let d = resonant_delays(&p).unwrap();
            let (tp, tm) = symmetric_resonant_delays(dk, 1.0);
            prop_assert!((d.tau_plus - tp).abs() < 1e-9 * tp.max(1.0));
            prop_assert!((d.tau_minus - tm).abs() < 1e-9 * tm.max(1.0));
            prop_assert!((d.tau_minus - 1.0 / group_velocity(0.0, &p).unwrap()).abs() < 1e-12 * tm.max(1.0));
        }
    }
}
