use std::f64::consts::PI;

use chiralqed_web::{dispersion_curve, elastic_scan_values, wavepacket_run};

#[test]
fn dispersion_bands_are_labelled_and_finite() {
    let d = dispersion_curve(1.5 * PI, 0.5, 40).unwrap();
    let band = d.band();
    assert_eq!(band.len(), d.q_d().len());
    assert!(band.iter().any(|&b| b == 0.0) && band.iter().any(|&b| b == 1.0));
    assert!(d.omega().iter().all(|w| w.is_finite()));
}

#[test]
fn resonant_pair_acquires_pi_phase() {
    let s = elastic_scan_values(1.5 * PI, 0.5, -1.0, 1.0, 11).unwrap();
    let mid = 5;
    assert!(s.delta()[mid].abs() < 1e-12);
    assert!((s.probability()[mid] - 1.0).abs() < 1e-9);
    assert!((s.phase()[mid].abs() - PI).abs() < 1e-9);
}

#[test]
fn invalid_arguments_are_reported() {
    assert!(dispersion_curve(1.5 * PI, 1.5, 10).is_err());
    assert!(wavepacket_run(5, 0.2, 1.5 * PI, 1).is_err());
    assert!(wavepacket_run(5, -0.2, 1.5 * PI, 21).is_err());
}

#[test]
fn small_wavepacket_run_is_normalized() {
    let w = wavepacket_run(2, 0.3, 1.5 * PI, 31).unwrap();
    assert_eq!(w.density().len(), 31 * 31);
    assert!(w.overlap_abs() > 0.0 && w.overlap_abs() <= 1.0 + 1e-9);
    assert!((0.0..=1.0).contains(&w.non_product()));
}
