//! The reduced node problem and the fictitious scattering operator.
//!
//! The operator lives on the truncated modal space of the outlet faces:
//! P modes per outlet, ordered outlet-major. One banded factorization of
//! the complex node matrix is shared by all column solves; columns are
//! independent and run in parallel, then merge in index order so repeated
//! runs are bit-identical.

use crate::cross_section::ThresholdInfo;
use crate::error::Result;
use crate::fem::{assemble_mass, assemble_stiffness, DofMap, Elimination};
use crate::geometry::TruncatedDomain;
use crate::linalg::sparse::{Csr, Triplets};
use crate::linalg::{reverse_cuthill_mckee, BandLu};
use crate::mesh::Mesh;
use crate::scattering::modal::{modal_symbols, ModalSymbols, ModalTraceMap};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

const I: Complex64 = Complex64::new(0.0, 1.0);
const SQRT2: f64 = std::f64::consts::SQRT_2;

/// One discretization level of a truncated junction with modal face maps.
pub struct NodeLevel {
    pub domain: TruncatedDomain,
    pub mesh: Mesh,
    pub dofs: DofMap,
    pub stiffness: Csr,
    pub mass: Csr,
    pub traces: Vec<ModalTraceMap>,
    pub symbols: Vec<ModalSymbols>,
    pub p_modes: usize,
    /// |κ|^{1/2} per flat modal index.
    pub m_sqrt: Vec<f64>,
}

impl NodeLevel {
    pub fn build(
        info: &ThresholdInfo,
        domain: &TruncatedDomain,
        mesh: Mesh,
        p_modes: usize,
    ) -> Result<NodeLevel> {
        let dofs = DofMap::build(&mesh, domain, Elimination::mixed());
        let stiffness = assemble_stiffness(&mesh, &dofs);
        let mass = assemble_mass(&mesh, &dofs);
        let n_out = domain.outlets().len();
        let traces: Vec<ModalTraceMap> = (0..n_out)
            .map(|n| ModalTraceMap::build(&dofs, n, p_modes))
            .collect::<Result<_>>()?;
        let symbols: Vec<ModalSymbols> =
            (0..n_out).map(|n| modal_symbols(info, n, p_modes)).collect();
        let m_sqrt = symbols.iter().flat_map(|s| s.m_sqrt.iter().copied()).collect();
        Ok(NodeLevel {
            domain: domain.clone(),
            mesh,
            dofs,
            stiffness,
            mass,
            traces,
            symbols,
            p_modes,
            m_sqrt,
        })
    }

    pub fn n_mod(&self) -> usize {
        self.traces.len() * self.p_modes
    }

    /// Flat modal index of mode p (1-based) on outlet n.
    pub fn flat(&self, n: usize, p: usize) -> usize {
        n * self.p_modes + (p - 1)
    }

    /// Factorization of K − λ† M − Σ_p t_p A_pᵀ A_p for caller-chosen
    /// boundary symbols t (per outlet and mode).
    pub fn factor(&self, lambda: f64, t: &[Vec<Complex64>]) -> Result<ComplexFactor> {
        let n = self.dofs.n_free();
        assert_eq!(t.len(), self.traces.len());

        // sparsity pattern including the dense face blocks, for the ordering
        let mut pat = Triplets::new(n);
        for i in 0..n {
            for (j, _) in self.stiffness.row(i) {
                pat.push(i, j, 1.0);
            }
            for (j, _) in self.mass.row(i) {
                pat.push(i, j, 1.0);
            }
        }
        for tr in &self.traces {
            for &dj in &tr.dofs {
                for &dk in &tr.dofs {
                    pat.push(dj as usize, dk as usize, 1.0);
                }
            }
        }
        let perm = reverse_cuthill_mckee(&pat.to_csr());

        let mut entries: Vec<(usize, usize, Complex64)> = Vec::new();
        for i in 0..n {
            for (j, v) in self.stiffness.row(i) {
                entries.push((perm[i], perm[j], Complex64::new(v, 0.0)));
            }
            for (j, v) in self.mass.row(i) {
                entries.push((perm[i], perm[j], Complex64::new(-lambda * v, 0.0)));
            }
        }
        for (tr, tn) in self.traces.iter().zip(t) {
            let m = tr.dofs.len();
            for j in 0..m {
                for k in 0..m {
                    let mut v = Complex64::ZERO;
                    for (p, tp) in tn.iter().enumerate() {
                        v -= tp * (tr.weights[p][j] * tr.weights[p][k]);
                    }
                    if v != Complex64::ZERO {
                        entries.push((
                            perm[tr.dofs[j] as usize],
                            perm[tr.dofs[k] as usize],
                            v,
                        ));
                    }
                }
            }
        }
        let lu = BandLu::from_triplets(n, &entries)?;
        Ok(ComplexFactor { perm, lu })
    }

    /// Symbols of the fictitious reduced problem: t_p = i |κ_p|.
    pub fn fictitious_symbols(&self) -> Vec<Vec<Complex64>> {
        self.symbols
            .iter()
            .map(|s| s.m.iter().map(|&m| I * m).collect())
            .collect()
    }

    /// Load vector of v ↦ Σ a_p(v) g_p from flat modal coefficients.
    pub fn modal_load(&self, g: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(g.len(), self.n_mod());
        let mut rhs = vec![Complex64::ZERO; self.dofs.n_free()];
        for (n, tr) in self.traces.iter().enumerate() {
            let block = &g[n * self.p_modes..(n + 1) * self.p_modes];
            tr.add_load(block, &mut rhs);
        }
        rhs
    }

    /// All trace coefficients of a free-dof vector, flat modal order.
    pub fn trace_all(&self, w: &[Complex64]) -> Vec<Complex64> {
        self.traces.iter().flat_map(|tr| tr.coefficients_c(w)).collect()
    }

    /// Solution of the reduced node problem with face data g (flat modal).
    pub fn solve_reduced(&self, factor: &ComplexFactor, g: &[Complex64]) -> Vec<Complex64> {
        factor.solve(&self.modal_load(g))
    }

    /// Columns of the fictitious scattering operator: for ψ = e_j solve with
    /// g = −√2 i M^{1/2} ψ and read off Sψ = iψ − √2 i M^{1/2} tr w.
    pub fn assemble_s(&self, factor: &ComplexFactor) -> DMatrix<Complex64> {
        let nm = self.n_mod();
        let cols: Vec<Vec<Complex64>> = (0..nm)
            .into_par_iter()
            .map(|j| {
                let mut g = vec![Complex64::ZERO; nm];
                g[j] = -SQRT2 * I * self.m_sqrt[j];
                let w = self.solve_reduced(factor, &g);
                let tr = self.trace_all(&w);
                let mut col: Vec<Complex64> = tr
                    .iter()
                    .zip(&self.m_sqrt)
                    .map(|(t, &ms)| -SQRT2 * I * ms * t)
                    .collect();
                col[j] += I;
                col
            })
            .collect();
        DMatrix::from_fn(nm, nm, |i, j| cols[j][i])
    }
}

/// Bandwidth-reduced LU of one complex node matrix.
pub struct ComplexFactor {
    perm: Vec<usize>,
    lu: BandLu,
}

impl ComplexFactor {
    pub fn solve(&self, rhs: &[Complex64]) -> Vec<Complex64> {
        let n = rhs.len();
        let mut b = vec![Complex64::ZERO; n];
        for (old, &new) in self.perm.iter().enumerate() {
            b[new] = rhs[old];
        }
        self.lu.solve_in_place(&mut b);
        let mut x = vec![Complex64::ZERO; n];
        for (old, &new) in self.perm.iter().enumerate() {
            x[old] = b[new];
        }
        x
    }

    pub fn sigma_min(&self, iters: usize) -> f64 {
        self.lu.sigma_min_estimate(iters)
    }
}

/// Threshold block of S in the wave normalization: s = e^{2iψ} (−i) P₀ S P₀.
pub fn extract_s(
    s_full: &DMatrix<Complex64>,
    info: &ThresholdInfo,
    p_modes: usize,
    psi_rot: f64,
) -> DMatrix<Complex64> {
    let idx: Vec<usize> = info.threshold_outlets.iter().map(|&n| n * p_modes).collect();
    let rot = (2.0 * I * psi_rot).exp();
    DMatrix::from_fn(idx.len(), idx.len(), |k, l| {
        rot * (-I) * s_full[(idx[k], idx[l])]
    })
}

/// Indices of the threshold modes (the range of P₀) in flat modal order.
pub fn p0_indices(info: &ThresholdInfo, p_modes: usize) -> Vec<usize> {
    info.threshold_outlets.iter().map(|&n| n * p_modes).collect()
}
