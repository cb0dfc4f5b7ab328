//! Single-photon scattering: emitter transmission matrix, unit-cell S-matrix,
//! transfer eigenstates, beam splitter and the chained gate map.

use std::f64::consts::TAU;
use std::ops::Mul;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{GateConfig, ModelParams};

const I: Complex64 = Complex64::new(0.0, 1.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// 2×2 channel matrix, `m[out][in]` with channel 0 = a and 1 = b.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TMatrix {
    pub m: [[Complex64; 2]; 2],
}

impl TMatrix {
    pub fn new(aa: Complex64, ab: Complex64, ba: Complex64, bb: Complex64) -> Self {
        Self {
            m: [[aa, ab], [ba, bb]],
        }
    }

    pub fn identity() -> Self {
        Self::new(ONE, ZERO, ZERO, ONE)
    }

    pub fn diagonal(a: Complex64, b: Complex64) -> Self {
        Self::new(a, ZERO, ZERO, b)
    }

    pub fn aa(&self) -> Complex64 {
        self.m[0][0]
    }
    pub fn ab(&self) -> Complex64 {
        self.m[0][1]
    }
    pub fn ba(&self) -> Complex64 {
        self.m[1][0]
    }
    pub fn bb(&self) -> Complex64 {
        self.m[1][1]
    }

    pub fn apply(&self, v: [Complex64; 2]) -> [Complex64; 2] {
        [
            self.m[0][0] * v[0] + self.m[0][1] * v[1],
            self.m[1][0] * v[0] + self.m[1][1] * v[1],
        ]
    }

    pub fn adjoint(&self) -> Self {
        Self::new(
            self.m[0][0].conj(),
            self.m[1][0].conj(),
            self.m[0][1].conj(),
            self.m[1][1].conj(),
        )
    }

    pub fn trace(&self) -> Complex64 {
        self.m[0][0] + self.m[1][1]
    }

    pub fn det(&self) -> Complex64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    /// Matrix power by repeated squaring.
    pub fn pow(&self, mut n: usize) -> Self {
        let mut base = *self;
        let mut acc = Self::identity();
        while n > 0 {
            if n & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            n >>= 1;
        }
        acc
    }

    /// Largest entry of |M†M − I|.
    pub fn unitarity_defect(&self) -> f64 {
        let p = self.adjoint() * *self;
        let id = Self::identity();
        let mut worst = 0.0f64;
        for r in 0..2 {
            for c in 0..2 {
                worst = worst.max((p.m[r][c] - id.m[r][c]).norm());
            }
        }
        worst
    }

    /// Both eigenvalues (unordered).
    pub fn eigenvalues(&self) -> [Complex64; 2] {
        let tr = self.trace();
        let disc = (tr * tr - 4.0 * self.det()).sqrt();
        [(tr + disc) * 0.5, (tr - disc) * 0.5]
    }

    /// A normalised eigenvector for eigenvalue `lambda`.
    fn eigenvector(&self, lambda: Complex64) -> [Complex64; 2] {
        let [[a, b], [c, d]] = self.m;
        // Rows of (M − λ) annihilate the eigenvector; use the better-conditioned row.
        let v1 = [b, lambda - a];
        let v2 = [lambda - d, c];
        let n1 = v1[0].norm_sqr() + v1[1].norm_sqr();
        let n2 = v2[0].norm_sqr() + v2[1].norm_sqr();
        let (v, n) = if n1 >= n2 { (v1, n1) } else { (v2, n2) };
        if n < 1e-300 {
            // M is proportional to the identity.
            return [ONE, ZERO];
        }
        let s = n.sqrt();
        [v[0] / s, v[1] / s]
    }
}

impl Mul for TMatrix {
    type Output = TMatrix;

    fn mul(self, rhs: TMatrix) -> TMatrix {
        let mut out = [[ZERO; 2]; 2];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, slot) in row.iter_mut().enumerate() {
                *slot = self.m[r][0] * rhs.m[0][c] + self.m[r][1] * rhs.m[1][c];
            }
        }
        TMatrix { m: out }
    }
}

/// Transmission matrix of a single emitter at detuning `delta`.
pub fn emitter_t(delta: f64, params: &ModelParams) -> TMatrix {
    let (ga, gb, loss) = (params.gamma_a, params.gamma_b, params.gamma_loss);
    let denom = Complex64::new(loss + ga + gb, -2.0 * delta);
    let taa = Complex64::new(loss + gb - ga, -2.0 * delta) / denom;
    let tbb = Complex64::new(loss + ga - gb, -2.0 * delta) / denom;
    let tab = Complex64::new(-2.0 * (ga * gb).sqrt(), 0.0) / denom;
    TMatrix::new(taa, tab, tab, tbb)
}

/// Free-propagation phases e^{i kα(δ) d/2} over half a unit cell.
pub fn half_cell_phases(delta: f64, params: &ModelParams) -> [Complex64; 2] {
    let shift = delta * params.inv_c;
    let ka = params.k0_d - 0.5 * params.delta_k_d + shift;
    let kb = params.k0_d + 0.5 * params.delta_k_d + shift;
    [(I * 0.5 * ka).exp(), (I * 0.5 * kb).exp()]
}

/// Unit-cell S-matrix P·s·P.
pub fn unit_cell_s1(delta: f64, params: &ModelParams) -> TMatrix {
    let [pa, pb] = half_cell_phases(delta, params);
    let p = TMatrix::diagonal(pa, pb);
    p * emitter_t(delta, params) * p
}

/// Frequency-resolved eigen-decomposition of the unit-cell S-matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransferEigen {
    /// Mixing angle θ_ω. Only defined for lossless emitters, where the
    /// eigenvectors are real.
    pub theta: Option<f64>,
    /// Phase per cell of the + state beyond k0·d; imaginary part is the
    /// amplitude decay −ln|λ| per cell. Real part taken in [0, 2π).
    pub q_plus_d: Complex64,
    /// Same for the − state; real part in (−π, π].
    pub q_minus_d: Complex64,
    pub eigvec_plus: [Complex64; 2],
    pub eigvec_minus: [Complex64; 2],
}

/// Mixing angle θ_ω, principal arccot branch in (0, π).
pub fn mixing_angle(delta: f64, params: &ModelParams) -> f64 {
    let g = (params.gamma_a * params.gamma_b).sqrt();
    let half = 0.5 * params.delta_k_d;
    let x = (params.gamma_b - params.gamma_a) / (2.0 * g) * half.cos() - delta / g * half.sin();
    f64::atan2(1.0, x)
}

fn lossless_eigvecs(theta: f64) -> ([Complex64; 2], [Complex64; 2]) {
    let (s, c) = (0.5 * theta).sin_cos();
    (
        [Complex64::from(s), Complex64::from(c)],
        [Complex64::from(c), Complex64::from(-s)],
    )
}

fn rayleigh(s: &TMatrix, v: [Complex64; 2]) -> Complex64 {
    let sv = s.apply(v);
    v[0].conj() * sv[0] + v[1].conj() * sv[1]
}

fn overlap(u: [Complex64; 2], v: [Complex64; 2]) -> f64 {
    (u[0].conj() * v[0] + u[1].conj() * v[1]).norm()
}

fn q_from_eigenvalue(lambda: Complex64, k0_d: f64, plus: bool) -> Complex64 {
    let z = lambda * (-I * k0_d).exp();
    let mut re = z.arg();
    if plus && re < 0.0 {
        re += TAU;
    }
    Complex64::new(re, -z.norm().ln())
}

fn is_band_collapse(delta_k_d: f64) -> bool {
    let r = delta_k_d.rem_euclid(TAU);
    r < 1e-12 || TAU - r < 1e-12
}

/// Eigen-decomposition of [`unit_cell_s1`] with ± band labels.
///
/// Lossless emitters use the closed-form mixing angle. With loss the matrix
/// is diagonalised numerically and the labels are carried by continuity from
/// resonance out to `delta`.
pub fn transfer_eigen(delta: f64, params: &ModelParams) -> Result<TransferEigen> {
    if is_band_collapse(params.delta_k_d) {
        return Err(Error::BandCollapse(format!(
            "delta_k_d = {} leaves the − state uncoupled",
            params.delta_k_d
        )));
    }
    if params.gamma_a * params.gamma_b <= 0.0 {
        return Err(Error::BandCollapse(
            "one channel is uncoupled, only a single band exists".into(),
        ));
    }
    let s = unit_cell_s1(delta, params);
    if params.gamma_loss == 0.0 {
        let theta = mixing_angle(delta, params);
        let (vp, vm) = lossless_eigvecs(theta);
        return Ok(TransferEigen {
            theta: Some(theta),
            q_plus_d: q_from_eigenvalue(rayleigh(&s, vp), params.k0_d, true),
            q_minus_d: q_from_eigenvalue(rayleigh(&s, vm), params.k0_d, false),
            eigvec_plus: vp,
            eigvec_minus: vm,
        });
    }

    // Label at resonance against the lossless eigenvectors, then follow δ.
    let lossless = ModelParams {
        gamma_loss: 0.0,
        ..*params
    };
    let (mut vp, mut vm) = lossless_eigvecs(mixing_angle(0.0, &lossless));
    let mut current = 0.0f64;
    let (mut lp, mut lm);
    loop {
        let sm = unit_cell_s1(current, params);
        let [l1, l2] = sm.eigenvalues();
        if (l1 - l2).norm() < 1e-12 {
            return Err(Error::BandCollapse(format!(
                "degenerate eigenvalues at detuning {current}"
            )));
        }
        let e1 = sm.eigenvector(l1);
        let e2 = sm.eigenvector(l2);
        if overlap(vp, e1) + overlap(vm, e2) >= overlap(vp, e2) + overlap(vm, e1) {
            (vp, vm, lp, lm) = (e1, e2, l1, l2);
        } else {
            (vp, vm, lp, lm) = (e2, e1, l2, l1);
        }
        if current == delta {
            break;
        }
        let step = 0.02 * current.abs().max(1.0);
        current = if (delta - current).abs() <= step {
            delta
        } else {
            current + step.copysign(delta - current)
        };
    }
    Ok(TransferEigen {
        theta: None,
        q_plus_d: q_from_eigenvalue(lp, params.k0_d, true),
        q_minus_d: q_from_eigenvalue(lm, params.k0_d, false),
        eigvec_plus: vp,
        eigvec_minus: vm,
    })
}

/// Transmission matrix of the linear beam-splitting scatterer (no propagation phases).
pub fn beam_splitter_t(delta: f64, config: &GateConfig) -> TMatrix {
    emitter_t(delta, &config.splitter_params())
}

/// Single-photon gate map t·S^N·t.
pub fn chain_g1(delta: f64, params: &ModelParams, config: &GateConfig) -> TMatrix {
    let t = beam_splitter_t(delta, config);
    t * unit_cell_s1(delta, params).pow(params.n_emitters) * t
}

/// Eigenvalue arguments of a matrix, each in (−π, π].
pub fn eigenphases(m: &TMatrix) -> [f64; 2] {
    let [a, b] = m.eigenvalues();
    [a.arg(), b.arg()]
}

/// Distance of an angle from a target, modulo 2π.
pub fn angle_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}
