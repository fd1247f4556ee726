//! Banded direct solvers. After reverse Cuthill-McKee ordering the
//! assembled operators have a small band, so an O(n b^2) banded
//! factorization replaces a general sparse one.
//!
//! Two factorizations cover every system in the library:
//! - real symmetric positive definite (stiffness shifts in the eigensolver):
//!   banded Cholesky without pivoting;
//! - complex non-Hermitian (the scattering systems): banded LU with partial
//!   pivoting in LAPACK-style storage with `kl` extra fill rows.

use crate::error::{Error, Result};
use crate::linalg::sparse::Csr;
use num_complex::Complex64;

/// Lower-band Cholesky factor of a real SPD matrix.
pub struct BandCholesky {
    n: usize,
    bw: usize,
    /// column-major: entry (i, j) with j <= i <= j + bw at l[j*(bw+1) + i - j]
    l: Vec<f64>,
}

impl BandCholesky {
    pub fn factor(a: &Csr) -> Result<Self> {
        let n = a.n;
        let bw = a.bandwidth();
        let stride = bw + 1;
        let mut l = vec![0.0f64; n * stride];
        for i in 0..n {
            for (j, v) in a.row(i) {
                if j <= i {
                    l[j * stride + (i - j)] = v;
                }
            }
        }
        let scale = a.max_abs().max(1e-300);
        for j in 0..n {
            let kmin = j.saturating_sub(bw);
            // diagonal
            let mut s = l[j * stride];
            for k in kmin..j {
                let ljk = l[k * stride + (j - k)];
                s -= ljk * ljk;
            }
            if s <= 1e-14 * scale {
                return Err(Error::SingularSystem(s / scale));
            }
            let d = s.sqrt();
            l[j * stride] = d;
            let imax = (j + bw).min(n - 1);
            for i in (j + 1)..=imax {
                let kmin_i = i.saturating_sub(bw);
                let mut s = l[j * stride + (i - j)];
                for k in kmin_i.max(kmin)..j {
                    s -= l[k * stride + (i - k)] * l[k * stride + (j - k)];
                }
                l[j * stride + (i - j)] = s / d;
            }
        }
        Ok(BandCholesky { n, bw, l })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let (n, bw, stride) = (self.n, self.bw, self.bw + 1);
        for j in 0..n {
            let kmin = j.saturating_sub(bw);
            let mut s = x[j];
            for k in kmin..j {
                s -= self.l[k * stride + (j - k)] * x[k];
            }
            x[j] = s / self.l[j * stride];
        }
        for j in (0..n).rev() {
            let imax = (j + bw).min(n - 1);
            let mut s = x[j];
            for i in (j + 1)..=imax {
                s -= self.l[j * stride + (i - j)] * x[i];
            }
            x[j] = s / self.l[j * stride];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// Banded LU with partial pivoting for complex matrices, LAPACK zgbtrf
/// storage: `kl` subdiagonals, `ku` superdiagonals on input, `kl + ku`
/// superdiagonals after fill. Entry (i, j) lives at
/// `ab[j*ldab + kl + ku + i - j]` with `ldab = 2*kl + ku + 1`.
pub struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<Complex64>,
    piv: Vec<u32>,
}

impl BandLu {
    /// Build from triplets (duplicates accumulate) and factor.
    pub fn from_triplets(n: usize, entries: &[(usize, usize, Complex64)]) -> Result<Self> {
        let mut kl = 0usize;
        let mut ku = 0usize;
        for &(i, j, _) in entries {
            if i > j {
                kl = kl.max(i - j);
            } else {
                ku = ku.max(j - i);
            }
        }
        let ldab = 2 * kl + ku + 1;
        let mut ab = vec![Complex64::new(0.0, 0.0); n * ldab];
        for &(i, j, v) in entries {
            ab[j * ldab + (kl + ku + i - j)] += v;
        }
        let mut lu = BandLu { n, kl, ku, ldab, ab, piv: vec![0; n] };
        lu.factor()?;
        Ok(lu)
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        j * self.ldab + (self.kl + self.ku + i - j)
    }

    fn factor(&mut self) -> Result<()> {
        let n = self.n;
        let (kl, kw) = (self.kl, self.kl + self.ku);
        let scale = self
            .ab
            .iter()
            .fold(0.0f64, |m, v| m.max(v.norm()))
            .max(1e-300);
        for j in 0..n {
            let imax = (j + kl).min(n - 1);
            let mut jp = j;
            let mut best = self.ab[self.idx(j, j)].norm();
            for i in (j + 1)..=imax {
                let v = self.ab[self.idx(i, j)].norm();
                if v > best {
                    best = v;
                    jp = i;
                }
            }
            self.piv[j] = jp as u32;
            if best <= 1e-300 {
                return Err(Error::SingularSystem(best / scale));
            }
            let cmax = (j + kw).min(n - 1);
            if jp != j {
                for c in j..=cmax {
                    let a = self.idx(j, c);
                    let b = self.idx(jp, c);
                    self.ab.swap(a, b);
                }
            }
            let pivot = self.ab[self.idx(j, j)];
            for i in (j + 1)..=imax {
                let k = self.idx(i, j);
                self.ab[k] /= pivot;
            }
            for c in (j + 1)..=cmax {
                let ajc = self.ab[self.idx(j, c)];
                if ajc.norm_sqr() != 0.0 {
                    for i in (j + 1)..=imax {
                        let m = self.ab[self.idx(i, j)];
                        let k = self.idx(i, c);
                        self.ab[k] -= m * ajc;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Solve A x = b.
    pub fn solve_in_place(&self, b: &mut [Complex64]) {
        let n = self.n;
        let (kl, kw) = (self.kl, self.kl + self.ku);
        for j in 0..n {
            let p = self.piv[j] as usize;
            if p != j {
                b.swap(p, j);
            }
            let bj = b[j];
            let imax = (j + kl).min(n - 1);
            for i in (j + 1)..=imax {
                b[i] -= self.ab[self.idx(i, j)] * bj;
            }
        }
        for j in (0..n).rev() {
            let mut s = b[j];
            let cmax = (j + kw).min(n - 1);
            for c in (j + 1)..=cmax {
                s -= self.ab[self.idx(j, c)] * b[c];
            }
            b[j] = s / self.ab[self.idx(j, j)];
        }
    }

    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// Solve A^H x = b (conjugate transpose), needed by the smallest
    /// singular value estimate.
    pub fn solve_adjoint_in_place(&self, b: &mut [Complex64]) {
        let n = self.n;
        let (kl, kw) = (self.kl, self.kl + self.ku);
        // U^H y = b: lower triangular, non-unit
        for j in 0..n {
            let imin = j.saturating_sub(kw);
            let mut s = b[j];
            for i in imin..j {
                s -= self.ab[self.idx(i, j)].conj() * b[i];
            }
            b[j] = s / self.ab[self.idx(j, j)].conj();
        }
        // L^H z = y with interleaved pivot swaps
        for j in (0..n).rev() {
            let imax = (j + kl).min(n - 1);
            let mut s = b[j];
            for i in (j + 1)..=imax {
                s -= self.ab[self.idx(i, j)].conj() * b[i];
            }
            b[j] = s;
            let p = self.piv[j] as usize;
            if p != j {
                b.swap(p, j);
            }
        }
    }

    /// Power iteration on (A^H A)^{-1}. Good to a few percent, which is all
    /// the near-singularity guard needs.
    pub fn sigma_min_estimate(&self, iters: usize) -> f64 {
        let n = self.n;
        let mut v: Vec<Complex64> = (0..n)
            .map(|i| {
                let t = (i as f64 + 1.0) / (n as f64 + 1.0);
                Complex64::new(1.0 + 0.37 * t, 0.21 - 0.11 * t)
            })
            .collect();
        normalize(&mut v);
        let mut lam = 0.0f64;
        for _ in 0..iters.max(2) {
            let mut w = v.clone();
            self.solve_adjoint_in_place(&mut w);
            self.solve_in_place(&mut w);
            lam = norm(&w);
            if !lam.is_finite() || lam == 0.0 {
                return 0.0;
            }
            v = w;
            normalize(&mut v);
        }
        1.0 / lam.sqrt()
    }
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn normalize(v: &mut [Complex64]) {
    let s = norm(v);
    if s > 0.0 {
        for z in v.iter_mut() {
            *z /= s;
        }
    }
}
