//! Reconstruction of bounded solutions from detection kernel vectors.
//!
//! A trapped mode lives on the node solve itself: the kernel vector of
//! P⊥SP⊥ − 1 is the modal data whose node solution decays down every
//! outlet. A stabilizing solution pairs each threshold outlet's incoming
//! and outgoing wave into a constant transverse profile; its near field is
//! solved on a window wide enough to clear the cutoff collar.
//!
//! Fields are normalized to unit L² over the window Ω(2) and rotated so
//! the largest nodal value is real and positive, which pins the free phase
//! and makes repeated runs byte-identical.

use crate::cross_section::{phi, Kappa};
use crate::error::{Error, Result};
use crate::geometry::{TruncatedDomain, Vec2};
use crate::linalg::sparse::Csr;
use crate::mesh::{generate_mesh, Mesh};
use crate::scattering::physical::{collar_load, R_CUT};
use crate::scattering::reduced::NodeLevel;
use crate::scattering::waves::cutoff;
use crate::scattering::{DetectOptions, ScatteringArtifacts};
use num_complex::Complex64;

const I: Complex64 = Complex64::new(0.0, 1.0);
const SQRT2: f64 = std::f64::consts::SQRT_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Trapped,
    Stabilizing,
}

/// Separated representation of the field beyond z0 on one outlet:
/// constant·Φ₁(y) + Σ a_p e^{−κ_p (z−z0)} Φ_p(y).
#[derive(Debug, Clone)]
pub struct OutletTail {
    pub outlet: usize,
    pub width: f64,
    pub z0: f64,
    pub constant: Complex64,
    /// (p, κ_p, a_p) per decaying mode.
    pub decaying: Vec<(usize, f64, Complex64)>,
}

impl OutletTail {
    fn eval(&self, y: f64, z: f64) -> Complex64 {
        let mut v = self.constant * phi(self.width, 1, y);
        for &(p, kappa, a) in &self.decaying {
            v += a * (-kappa * (z - self.z0)).exp() * phi(self.width, p, y);
        }
        v
    }
}

/// A reconstructed bounded solution: nodal values on the window mesh plus
/// separated tails past the truncation faces.
pub struct Field {
    pub kind: FieldKind,
    pub domain: TruncatedDomain,
    pub mesh: Mesh,
    /// Value at every mesh point (zero on walls).
    pub values: Vec<Complex64>,
    pub tails: Vec<OutletTail>,
    /// Largest leftover threshold-mode trace; ≈ 0 for a clean kernel.
    pub threshold_leak: f64,
    /// L² norm over the window before normalization.
    pub window_norm: f64,
}

fn mass_norm2(mass: &Csr, v: &[Complex64]) -> f64 {
    let mut s = Complex64::ZERO;
    for i in 0..v.len() {
        for (j, m) in mass.row(i) {
            s += v[i].conj() * m * v[j];
        }
    }
    s.re
}

/// ∫_0^len e^{−2κz} dz, the window mass of one decaying tail mode.
fn tail_mass(kappa: f64, len: f64) -> f64 {
    (1.0 - (-2.0 * kappa * len).exp()) / (2.0 * kappa)
}

fn kernel_vector<'a>(
    kernel: &'a [nalgebra::DVector<Complex64>],
    which: usize,
    target: &str,
    tol: f64,
) -> Result<&'a nalgebra::DVector<Complex64>> {
    kernel.get(which).ok_or(Error::KernelEmpty { target: target.into(), tol })
}

/// Point values from the free-dof vector, walls filled with zero.
fn point_values(level: &NodeLevel, free: &[Complex64]) -> Vec<Complex64> {
    level
        .dofs
        .free_of_point
        .iter()
        .map(|d| d.map_or(Complex64::ZERO, |d| free[d as usize]))
        .collect()
}

/// Normalizes to unit window norm and pins the phase on the largest value.
fn finish(
    kind: FieldKind,
    level: &NodeLevel,
    mut values: Vec<Complex64>,
    mut tails: Vec<OutletTail>,
    leak: f64,
    tail_norm2: f64,
) -> Field {
    let free: Vec<Complex64> = level
        .dofs
        .point_of_free
        .iter()
        .map(|&p| values[p as usize])
        .collect();
    let norm = (mass_norm2(&level.mass, &free) + tail_norm2).sqrt();
    let mut best = Complex64::ONE;
    let mut bm = 0.0;
    for v in &values {
        if v.norm() > bm {
            bm = v.norm();
            best = *v;
        }
    }
    let fac = if bm > 0.0 { best.conj() / (bm * norm) } else { Complex64::ONE };
    for v in &mut values {
        *v *= fac;
    }
    for t in &mut tails {
        t.constant *= fac;
        for a in &mut t.decaying {
            a.2 *= fac;
        }
    }
    Field {
        kind,
        domain: level.domain.clone(),
        mesh: level.mesh.clone(),
        values,
        tails,
        threshold_leak: leak,
        window_norm: norm,
    }
}

/// Tails from the face traces of a decaying solve; threshold-mode content
/// is reported as leak instead of entering the tail.
fn decaying_tails(
    level: &NodeLevel,
    art: &ScatteringArtifacts,
    traces: &[Complex64],
    z0: f64,
    window: f64,
) -> (Vec<OutletTail>, f64, f64) {
    let mut tails = Vec::new();
    let mut leak = 0.0f64;
    let mut tail_norm2 = 0.0;
    for (n, out) in level.domain.outlets().iter().enumerate() {
        let mut tail = OutletTail {
            outlet: n,
            width: out.width,
            z0,
            constant: Complex64::ZERO,
            decaying: Vec::new(),
        };
        for p in 1..=level.p_modes {
            let a = traces[level.flat(n, p)];
            match art.info.kappa[n][p - 1] {
                Kappa::ThresholdMode => leak = leak.max(a.norm()),
                Kappa::Decaying(kappa) => {
                    tail_norm2 += a.norm_sqr() * tail_mass(kappa, window);
                    tail.decaying.push((p, kappa, a));
                }
            }
        }
        tails.push(tail);
    }
    (tails, leak, tail_norm2)
}

/// Trapped mode from a kernel vector of P⊥SP⊥ − 1: the node solution with
/// that modal data is the eigenfunction restricted to the node, and its
/// face traces are the decay amplitudes.
pub fn trapped(art: &ScatteringArtifacts, which: usize) -> Result<Field> {
    let psi = kernel_vector(&art.trapped_kernel, which, "trapped", art.tol_eig)?;
    let level = &art.level_fine;
    let g: Vec<Complex64> = psi
        .iter()
        .zip(&level.m_sqrt)
        .map(|(c, &ms)| -SQRT2 * I * ms * c)
        .collect();
    let w = level.solve_reduced(&art.factor_fine, &g);
    let traces = level.trace_all(&w);
    let (tails, leak, tail_norm2) = decaying_tails(level, art, &traces, 0.0, R_CUT);
    let values = point_values(level, &w);
    Ok(finish(FieldKind::Trapped, level, values, tails, leak, tail_norm2))
}

/// Stabilizing solution from a kernel vector c of s + e^{2iψ}: each
/// threshold outlet carries the constant-profile pairing √2 i c_n of its
/// waves, and the remainder is solved on Ω(2) with decay symbols.
pub fn stabilizing(
    art: &ScatteringArtifacts,
    opts: &DetectOptions,
    which: usize,
) -> Result<Field> {
    let c = kernel_vector(&art.stabilizing_kernel, which, "stabilizing", art.tol_eig)?;
    let geom = art.level_fine.domain.geometry();
    let domain = geom.truncate(R_CUT)?;
    let mut mesh = generate_mesh(&domain, opts.h)?;
    for _ in 0..opts.refine {
        mesh = mesh.refine();
    }
    let level = NodeLevel::build(&art.info, &domain, mesh, opts.p_modes)?;
    let symbols: Vec<Vec<Complex64>> = level.symbols.iter().map(|sy| sy.t.clone()).collect();
    let factor = level.factor(art.info.lambda_dagger, &symbols)?;

    let phase = Complex64::from_polar(1.0, opts.psi_rot);
    let amps: Vec<(usize, Complex64)> = art
        .info
        .threshold_outlets
        .iter()
        .zip(c.iter())
        .map(|(&n, cn)| (n, SQRT2 * I * cn * phase))
        .collect();

    let mut rhs = vec![Complex64::ZERO; level.dofs.n_free()];
    for &(n, amp) in &amps {
        collar_load(&level, n, &move |_z| (amp, Complex64::ZERO), &mut rhs);
    }
    let remainder = factor.solve(&rhs);
    let traces = level.trace_all(&remainder);
    // the tails start at the faces, so they add nothing inside the window
    let (mut tails, leak, _) = decaying_tails(&level, art, &traces, R_CUT, 0.0);
    for &(n, amp) in &amps {
        tails[n].constant = amp;
    }

    // total field: remainder plus the cut-off waves
    let mut values = point_values(&level, &remainder);
    let outlets = level.domain.outlets().to_vec();
    for (i, p) in level.mesh.points.iter().enumerate() {
        for &(n, amp) in &amps {
            let (y, z) = outlets[n].local(*p);
            if z > 0.0 && y > 0.0 && y < outlets[n].width {
                values[i] += amp * cutoff(z) * phi(outlets[n].width, 1, y);
            }
        }
    }
    Ok(finish(FieldKind::Stabilizing, &level, values, tails, leak, 0.0))
}

impl Field {
    /// Field value at a point: separated tail past the window, P1
    /// interpolation on the mesh, None outside the domain.
    pub fn eval(&self, p: Vec2) -> Option<Complex64> {
        for tail in &self.tails {
            let out = &self.domain.outlets()[tail.outlet];
            let (y, z) = out.local(p);
            if z >= tail.z0 && (0.0..=out.width).contains(&y) {
                return Some(tail.eval(y, z));
            }
        }
        for tri in &self.mesh.triangles {
            let [a, b, c] = tri.map(|i| self.mesh.points[i as usize]);
            let det = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
            if det.abs() < 1e-300 {
                continue;
            }
            let l1 = ((p.x - a.x) * (c.y - a.y) - (p.y - a.y) * (c.x - a.x)) / det;
            let l2 = ((b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x)) / det;
            let l0 = 1.0 - l1 - l2;
            if l0 >= -1e-9 && l1 >= -1e-9 && l2 >= -1e-9 {
                return Some(
                    self.values[tri[0] as usize] * l0
                        + self.values[tri[1] as usize] * l1
                        + self.values[tri[2] as usize] * l2,
                );
            }
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use crate::scattering::scattering_analysis;

    fn opts() -> DetectOptions {
        DetectOptions { h: 0.125, refine: 1, p_modes: 4, ..Default::default() }
    }

    #[test]
    fn strip_stabilizing_field_is_the_transverse_mode() {
        // exact bounded solution of the straight strip: Φ₁(y) everywhere,
        // unit-normalized over the length-5 window and phase-fixed positive
        let (rep, art) = scattering_analysis(&presets::strip(), &opts()).unwrap();
        assert_eq!(rep.d_st, 1);
        let field = stabilizing(&art, &opts(), 0).unwrap();
        let scale = 1.0 / 5.0f64.sqrt();
        let mut worst = 0.0f64;
        for (p, v) in field.mesh.points.iter().zip(&field.values) {
            let want = scale * phi(1.0, 1, p.y);
            worst = worst.max((v - Complex64::new(want, 0.0)).norm());
        }
        assert!(worst < 2.5e-2, "field deviates from Φ₁/√5 by {worst:.2e}");
        for tail in &field.tails {
            assert!((tail.constant - scale).norm() < 2e-2, "{}", tail.constant);
            for &(_, _, a) in &tail.decaying {
                assert!(a.norm() < 1e-2);
            }
        }
        assert!(field.threshold_leak < 2.5e-2, "{}", field.threshold_leak);

        // evaluation: mesh interior, far tail, and outside
        let mid = field.eval(Vec2::new(0.5, 0.5)).unwrap();
        assert!((mid - Complex64::new(scale * phi(1.0, 1, 0.5), 0.0)).norm() < 2.5e-2);
        let far = field.eval(Vec2::new(6.0, 0.5)).unwrap();
        assert!((far - Complex64::new(scale * phi(1.0, 1, 0.5), 0.0)).norm() < 2.5e-2);
        assert!(field.eval(Vec2::new(0.5, 2.0)).is_none());
    }

    #[test]
    fn reconstruction_is_deterministic() {
        let (_, art) = scattering_analysis(&presets::strip(), &opts()).unwrap();
        let a = stabilizing(&art, &opts(), 0).unwrap();
        let b = stabilizing(&art, &opts(), 0).unwrap();
        assert_eq!(a.values.len(), b.values.len());
        for (x, y) in a.values.iter().zip(&b.values) {
            assert_eq!(x, y);
        }
    }

    #[test]
    fn absent_kernels_are_reported() {
        let (rep, art) = scattering_analysis(&presets::strip(), &opts()).unwrap();
        assert_eq!(rep.d_tr, 0);
        match trapped(&art, 0) {
            Err(Error::KernelEmpty { target, .. }) => assert_eq!(target, "trapped"),
            other => panic!("expected KernelEmpty, got {:?}", other.map(|f| f.kind)),
        }
        match stabilizing(&art, &opts(), 3) {
            Err(Error::KernelEmpty { target, .. }) => assert_eq!(target, "stabilizing"),
            other => panic!("expected KernelEmpty, got {:?}", other.map(|f| f.kind)),
        }
    }

    #[test]
    fn tail_window_mass_matches_quadrature() {
        let kappa = 1.7;
        let len = 2.0;
        let n = 20000;
        let dz = len / n as f64;
        let mut q = 0.0;
        for i in 0..n {
            let z = (i as f64 + 0.5) * dz;
            q += (-2.0 * kappa * z).exp() * dz;
        }
        assert!((tail_mass(kappa, len) - q).abs() < 1e-7);
    }
}
