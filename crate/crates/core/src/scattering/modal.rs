//! Modal trace maps between the finite element space and the truncated
//! modal basis on the outlet faces, plus the diagonal symbols of the
//! Steklov-Poincare operators acting in that basis.
//!
//! The map a_p(u) = ∫ u(y) Φ_p(y) dy is evaluated segment by segment with
//! the closed-form integral of a linear hat against a sine, so the only
//! error left in the trace coefficients is the interpolation error of u
//! itself.

use crate::cross_section::{phi, Kappa, ThresholdInfo};
use crate::error::{Error, Result};
use crate::fem::DofMap;
use num_complex::Complex64;
use std::f64::consts::PI;

/// ∫_a^b ℓ(y) sin(ω y) dy for the linear ℓ with ℓ(a) = va, ℓ(b) = vb.
fn hat_sine(a: f64, b: f64, va: f64, vb: f64, omega: f64) -> f64 {
    let (sa, ca) = (omega * a).sin_cos();
    let (sb, cb) = (omega * b).sin_cos();
    (va * ca - vb * cb) / omega + (vb - va) * (sb - sa) / (omega * omega * (b - a))
}

/// Sparse representation of u ↦ (a_1(u), ..., a_P(u)) on one face.
#[derive(Debug, Clone)]
pub struct ModalTraceMap {
    pub outlet: usize,
    pub width: f64,
    pub p_modes: usize,
    /// Free dofs sitting on the face, in ascending-y order.
    pub dofs: Vec<u32>,
    /// weights[p][j]: contribution of dofs[j] to a_{p+1}.
    pub weights: Vec<Vec<f64>>,
}

impl ModalTraceMap {
    pub fn build(dofs: &DofMap, outlet: usize, p_modes: usize) -> Result<ModalTraceMap> {
        let f = &dofs.faces[outlet];
        let retained = f.n_retained();
        if retained == 0 {
            return Err(Error::EmptyFace(outlet));
        }
        if p_modes > retained {
            return Err(Error::ModalOverresolution { outlet, p: p_modes, dofs: retained });
        }
        let np = f.y.len();
        // per-point accumulation first; eliminated points drop out afterwards
        let mut by_point = vec![vec![0.0f64; np]; p_modes];
        let scale = (2.0 / f.width).sqrt();
        for p in 1..=p_modes {
            let omega = p as f64 * PI / f.width;
            for s in 0..np - 1 {
                let (a, b) = (f.y[s], f.y[s + 1]);
                by_point[p - 1][s] += scale * hat_sine(a, b, 1.0, 0.0, omega);
                by_point[p - 1][s + 1] += scale * hat_sine(a, b, 0.0, 1.0, omega);
            }
        }
        let mut keep = Vec::with_capacity(retained);
        let mut weights = vec![Vec::with_capacity(retained); p_modes];
        for (j, d) in f.dof.iter().enumerate() {
            let Some(d) = d else { continue };
            keep.push(*d);
            for p in 0..p_modes {
                weights[p].push(by_point[p][j]);
            }
        }
        Ok(ModalTraceMap { outlet, width: f.width, p_modes, dofs: keep, weights })
    }

    /// Trace coefficients of a real free-dof vector.
    pub fn coefficients(&self, u: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .map(|w| w.iter().zip(&self.dofs).map(|(w, &d)| w * u[d as usize]).sum())
            .collect()
    }

    pub fn coefficients_c(&self, u: &[Complex64]) -> Vec<Complex64> {
        self.weights
            .iter()
            .map(|w| w.iter().zip(&self.dofs).map(|(w, &d)| u[d as usize] * *w).sum())
            .collect()
    }

    /// Adds the load vector of the face functional v ↦ Σ_p c_p a_p(v).
    pub fn add_load(&self, c: &[Complex64], out: &mut [Complex64]) {
        debug_assert_eq!(c.len(), self.p_modes);
        for (p, w) in self.weights.iter().enumerate() {
            if c[p] == Complex64::ZERO {
                continue;
            }
            for (w, &d) in w.iter().zip(&self.dofs) {
                out[d as usize] += c[p] * *w;
            }
        }
    }

    /// Nodal interpolant of Φ_p on this face (free-dof vector).
    pub fn interpolated_mode(&self, dofs: &DofMap, p: usize) -> Vec<f64> {
        let f = &dofs.faces[self.outlet];
        let mut u = vec![0.0; dofs.n_free()];
        for (y, d) in f.retained() {
            u[d as usize] = phi(self.width, p, y);
        }
        u
    }
}

/// Diagonal symbols of T, M and M^{1/2} on one outlet, modes p = 1..=P.
#[derive(Debug, Clone)]
pub struct ModalSymbols {
    pub outlet: usize,
    pub is_threshold: bool,
    /// |κ_p|; exactly 1 in the threshold mode.
    pub m: Vec<f64>,
    pub m_sqrt: Vec<f64>,
    /// -κ_p; the fictitious value i in the threshold mode.
    pub t: Vec<Complex64>,
}

pub fn modal_symbols(info: &ThresholdInfo, outlet: usize, p_modes: usize) -> ModalSymbols {
    assert!(p_modes <= info.p_modes());
    let kappa = &info.kappa[outlet][..p_modes];
    let m: Vec<f64> = kappa.iter().map(|k| k.abs()).collect();
    let m_sqrt: Vec<f64> = m.iter().map(|v| v.sqrt()).collect();
    let t: Vec<Complex64> = kappa
        .iter()
        .map(|k| match k {
            Kappa::ThresholdMode => Complex64::new(0.0, 1.0),
            Kappa::Decaying(v) => Complex64::new(-v, 0.0),
        })
        .collect();
    let is_threshold = info.is_threshold(outlet);
    // M^{1/2} restricted to the threshold modes is the identity
    if is_threshold {
        assert_eq!(m[0], 1.0);
        assert_eq!(m_sqrt[0], 1.0);
    }
    ModalSymbols { outlet, is_threshold, m, m_sqrt, t }
}
