//! Dense helpers for the small complex matrices of the scattering layer
//! (the scattering matrix and operators derived from it). nalgebra supplies
//! the factorizations; these wrappers fix deterministic ordering and the
//! tolerance conventions used by the detectors.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Eigenvalues of a general complex matrix, sorted by (re, im) for
/// reproducible output.
pub fn eigenvalues(m: &DMatrix<Complex64>) -> Vec<Complex64> {
    let n = m.nrows();
    if n == 0 {
        return Vec::new();
    }
    let schur = m
        .clone()
        .try_schur(1e-14, 100_000)
        .unwrap_or_else(|| m.clone().schur());
    let t = schur.unpack().1;
    let mut ev: Vec<Complex64> = (0..n).map(|i| t[(i, i)]).collect();
    ev.sort_by(|a, b| {
        a.re.partial_cmp(&b.re)
            .unwrap()
            .then(a.im.partial_cmp(&b.im).unwrap())
    });
    ev
}

/// Number of eigenvalues within `tol` of `target`.
pub fn count_eigenvalues_near(
    m: &DMatrix<Complex64>,
    target: Complex64,
    tol: f64,
) -> usize {
    eigenvalues(m)
        .into_iter()
        .filter(|ev| (ev - target).norm() <= tol)
        .count()
}

/// Orthonormal basis of the numerical kernel: right singular vectors with
/// singular value at most `tol`.
pub fn kernel_basis(m: &DMatrix<Complex64>, tol: f64) -> Vec<DVector<Complex64>> {
    let svd = m.clone().svd(true, true);
    let v_t = svd.v_t.expect("kernel_basis: svd without V");
    let mut out = Vec::new();
    for (i, s) in svd.singular_values.iter().enumerate() {
        if *s <= tol {
            out.push(v_t.row(i).adjoint());
        }
    }
    out
}

/// Frobenius distance of S^H S from the identity.
pub fn unitarity_error(s: &DMatrix<Complex64>) -> f64 {
    let n = s.nrows();
    let g = s.adjoint() * s - DMatrix::<Complex64>::identity(n, n);
    g.norm()
}

/// Frobenius distance of S from its transpose.
pub fn symmetry_error(s: &DMatrix<Complex64>) -> f64 {
    (s - s.transpose()).norm()
}
