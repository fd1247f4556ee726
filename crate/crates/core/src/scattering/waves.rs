//! Threshold waves on the outlets and the anti-Hermitian flux form q.
//!
//! The waves are linear in the axial coordinate once the cutoff has
//! saturated, so all q-form values reduce to finite modal sums that are
//! evaluated in closed form; there is no quadrature error to track.

use crate::cross_section::phi;
use crate::error::{Error, Result};
use num_complex::Complex64;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// C² cutoff: 0 for z ≤ 0, 1 for z ≥ 1, quintic blend between.
pub fn cutoff(z: f64) -> f64 {
    if z <= 0.0 {
        0.0
    } else if z >= 1.0 {
        1.0
    } else {
        z * z * z * (10.0 + z * (-15.0 + 6.0 * z))
    }
}

pub fn cutoff_d1(z: f64) -> f64 {
    if z <= 0.0 || z >= 1.0 {
        0.0
    } else {
        z * z * (30.0 + z * (-60.0 + 30.0 * z))
    }
}

pub fn cutoff_d2(z: f64) -> f64 {
    if z <= 0.0 || z >= 1.0 {
        0.0
    } else {
        z * (60.0 + z * (-180.0 + 120.0 * z))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WaveKind {
    Incoming,
    Outgoing,
}

/// w^in = e^{iψ} χ(z) 2^{-1/2} (z + i) Φ_1(y) and its conjugate partner.
#[derive(Debug, Clone, Copy)]
pub struct ThresholdWave {
    pub outlet: usize,
    pub width: f64,
    pub kind: WaveKind,
    pub psi_rot: f64,
}

impl ThresholdWave {
    pub fn new(outlet: usize, width: f64, kind: WaveKind, psi_rot: f64) -> Self {
        ThresholdWave { outlet, width, kind, psi_rot }
    }

    /// Axial profile α(z) with w(z, y) = α(z) Φ_1(y).
    pub fn profile(&self, z: f64) -> Complex64 {
        let lin = match self.kind {
            WaveKind::Incoming => Complex64::new(z, 1.0),
            WaveKind::Outgoing => Complex64::new(z, -1.0),
        };
        self.phase() * cutoff(z) * lin * 0.5f64.sqrt()
    }

    pub fn profile_d1(&self, z: f64) -> Complex64 {
        let lin = match self.kind {
            WaveKind::Incoming => Complex64::new(z, 1.0),
            WaveKind::Outgoing => Complex64::new(z, -1.0),
        };
        self.phase() * (cutoff_d1(z) * lin + cutoff(z)) * 0.5f64.sqrt()
    }

    fn phase(&self) -> Complex64 {
        match self.kind {
            WaveKind::Incoming => (I * self.psi_rot).exp(),
            WaveKind::Outgoing => (-I * self.psi_rot).exp(),
        }
    }

    pub fn eval(&self, z: f64, y: f64) -> Complex64 {
        self.profile(z) * phi(self.width, 1, y)
    }

    /// Modal snapshot at axial position z, padded to p_modes entries.
    pub fn modal_sample(&self, z: f64, p_modes: usize) -> ModalSample {
        let mut alpha = vec![Complex64::ZERO; p_modes];
        let mut dalpha = vec![Complex64::ZERO; p_modes];
        alpha[0] = self.profile(z);
        dalpha[0] = self.profile_d1(z);
        ModalSample { alpha, dalpha }
    }
}

/// Per-mode values and axial derivatives of a field on one cross-section.
#[derive(Debug, Clone)]
pub struct ModalSample {
    pub alpha: Vec<Complex64>,
    pub dalpha: Vec<Complex64>,
}

impl ModalSample {
    pub fn zero(p_modes: usize) -> Self {
        ModalSample {
            alpha: vec![Complex64::ZERO; p_modes],
            dalpha: vec![Complex64::ZERO; p_modes],
        }
    }
}

/// q(u, v) = ∫ (v̄ ∂_z u − u ∂_z v̄) dy at one cross-section, exact modal sum.
pub fn q_form(u: &ModalSample, v: &ModalSample) -> Complex64 {
    assert_eq!(u.alpha.len(), v.alpha.len());
    let mut q = Complex64::ZERO;
    for p in 0..u.alpha.len() {
        q += v.alpha[p].conj() * u.dalpha[p] - u.alpha[p] * v.dalpha[p].conj();
    }
    q
}

/// q evaluated at z = R for two threshold waves, guarding the cutoff region.
pub fn q_between(u: &ThresholdWave, v: &ThresholdWave, r: f64) -> Result<Complex64> {
    if r <= 1.0 {
        return Err(Error::RInsideCutoff { r });
    }
    assert_eq!(u.outlet, v.outlet, "q pairs waves of one outlet");
    Ok(q_form(&u.modal_sample(r, 1), &v.modal_sample(r, 1)))
}
