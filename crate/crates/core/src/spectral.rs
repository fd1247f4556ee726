//! Smallest eigenpairs of the sparse symmetric pencil K v = mu M v.
//!
//! Block Lanczos on the shift-inverted operator (K + M)^{-1} M in the
//! M inner product. The shift by one mass keeps the factorization positive
//! definite even when K is singular (pure Neumann), and maps the smallest
//! pencil eigenvalues onto the largest, well separated end of the Lanczos
//! spectrum: theta = 1/(mu + 1).
//!
//! The constrained variant restricts the pencil to the nullspace of a small
//! set of dense rows C by projecting every operator application onto
//! {v : Cv = 0} through the factored form, which is exactly the shift-invert
//! operator of the constrained pencil (solve the saddle system, eliminate
//! the multiplier).

use crate::error::{Error, Result};
use crate::linalg::band::BandCholesky;
use crate::linalg::rcm::reverse_cuthill_mckee;
use crate::linalg::sparse::{Csr, Triplets};
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

#[derive(Debug, Clone)]
pub struct EigenOptions {
    /// number of eigenpairs
    pub k: usize,
    /// bound on the true residual |Kv - mu Mv| / |Mv|
    pub tol: f64,
    /// block iterations before giving up
    pub max_blocks: usize,
    /// block width; at least the expected eigenvalue multiplicity
    pub block: usize,
    pub seed: u64,
}

impl EigenOptions {
    pub fn new(k: usize) -> Self {
        EigenOptions {
            k,
            tol: 1e-9,
            max_blocks: 120,
            block: k.clamp(2, 3),
            seed: 0x00C0FFEE,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EigenResult {
    /// ascending
    pub values: Vec<f64>,
    /// M-orthonormal, original dof indexing
    pub vectors: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub basis_size: usize,
}

/// Factored K + M with the reordering folded in.
struct ShiftedSolver {
    perm: Vec<usize>,
    chol: BandCholesky,
}

impl ShiftedSolver {
    fn new(k_mat: &Csr, m_mat: &Csr) -> Result<Self> {
        let f = add_scaled(k_mat, m_mat, 1.0, 1.0);
        let perm = reverse_cuthill_mckee(&f);
        let chol = BandCholesky::factor(&f.permuted(&perm))?;
        Ok(ShiftedSolver { perm, chol })
    }

    /// x := (K + M)^{-1} x
    fn solve_in_place(&self, x: &mut [f64]) {
        let n = x.len();
        let mut xp = vec![0.0; n];
        for i in 0..n {
            xp[self.perm[i]] = x[i];
        }
        self.chol.solve_in_place(&mut xp);
        for i in 0..n {
            x[i] = xp[self.perm[i]];
        }
    }
}

fn add_scaled(a: &Csr, b: &Csr, alpha: f64, beta: f64) -> Csr {
    debug_assert_eq!(a.n, b.n);
    let mut t = Triplets::new(a.n);
    for i in 0..a.n {
        for (j, v) in a.row(i) {
            t.push(i, j, alpha * v);
        }
        for (j, v) in b.row(i) {
            t.push(i, j, beta * v);
        }
    }
    t.to_csr()
}

/// Dense constraint rows with the machinery to stay in their nullspace.
struct Constraints {
    rows: Vec<Vec<f64>>,
    /// u_a = (K+M)^{-1} c_a
    finv_rows: Vec<Vec<f64>>,
    /// Cholesky of C (K+M)^{-1} C^T
    gram: Cholesky<f64, Dyn>,
    /// Cholesky of C C^T (for residual projection)
    cct: Cholesky<f64, Dyn>,
}

impl Constraints {
    fn new(rows: &[Vec<f64>], solver: &ShiftedSolver) -> Result<Self> {
        let c = rows.len();
        let finv_rows: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| {
                let mut u = r.clone();
                solver.solve_in_place(&mut u);
                u
            })
            .collect();
        let mut g = DMatrix::<f64>::zeros(c, c);
        let mut cct = DMatrix::<f64>::zeros(c, c);
        for a in 0..c {
            for b in 0..c {
                g[(a, b)] = dot(&rows[a], &finv_rows[b]);
                cct[(a, b)] = dot(&rows[a], &rows[b]);
            }
        }
        let cond_proxy = |m: &DMatrix<f64>| -> f64 {
            let ev = m.clone().symmetric_eigen().eigenvalues;
            let mx = ev.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mn = ev.iter().cloned().fold(f64::INFINITY, f64::min);
            if mx <= 0.0 {
                0.0
            } else {
                mn / mx
            }
        };
        let gram = Cholesky::new(g.clone())
            .ok_or_else(|| Error::RankDeficientConstraints(cond_proxy(&g)))?;
        let cct = Cholesky::new(cct.clone())
            .ok_or_else(|| Error::RankDeficientConstraints(cond_proxy(&cct)))?;
        // explicit conditioning guard: near-duplicate rows factor but poison
        // the projector
        if cond_proxy(&g) < 1e-12 {
            return Err(Error::RankDeficientConstraints(cond_proxy(&g)));
        }
        Ok(Constraints { rows: rows.to_vec(), finv_rows, gram, cct })
    }

    /// v := v - (K+M)^{-1} C^T (C (K+M)^{-1} C^T)^{-1} C v, which lands in
    /// {Cv = 0} and is the oblique projector matching the factored solve.
    fn project(&self, v: &mut [f64]) {
        let c = self.rows.len();
        let mut y = DVector::<f64>::zeros(c);
        for a in 0..c {
            y[a] = dot(&self.rows[a], v);
        }
        let t = self.gram.solve(&y);
        for a in 0..c {
            let ta = t[a];
            for (vi, ui) in v.iter_mut().zip(&self.finv_rows[a]) {
                *vi -= ta * ui;
            }
        }
    }

    /// r := r - C^T (C C^T)^{-1} C r (Euclidean projection off range C^T);
    /// removes the Lagrange-multiplier component from a pencil residual.
    fn project_residual(&self, r: &mut [f64]) {
        let c = self.rows.len();
        let mut y = DVector::<f64>::zeros(c);
        for a in 0..c {
            y[a] = dot(&self.rows[a], r);
        }
        let t = self.cct.solve(&y);
        for a in 0..c {
            let ta = t[a];
            for (ri, ci) in r.iter_mut().zip(&self.rows[a]) {
                *ri -= ta * ci;
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn rand_unit(rng: &mut ChaCha8Rng) -> f64 {
    ((rng.next_u64() >> 11) as f64) / ((1u64 << 53) as f64) - 0.5
}

pub fn smallest_eigenpairs(k_mat: &Csr, m_mat: &Csr, opts: &EigenOptions) -> Result<EigenResult> {
    lanczos(k_mat, m_mat, None, opts)
}

/// Eigenpairs of the pencil restricted to {v : Cv = 0}.
pub fn constrained_eigenpairs(
    k_mat: &Csr,
    m_mat: &Csr,
    c_rows: &[Vec<f64>],
    opts: &EigenOptions,
) -> Result<EigenResult> {
    if c_rows.is_empty() {
        return lanczos(k_mat, m_mat, None, opts);
    }
    lanczos(k_mat, m_mat, Some(c_rows), opts)
}

fn lanczos(
    k_mat: &Csr,
    m_mat: &Csr,
    c_rows: Option<&[Vec<f64>]>,
    opts: &EigenOptions,
) -> Result<EigenResult> {
    let n = k_mat.n;
    k_mat.require_symmetric(1e-12)?;
    m_mat.require_symmetric(1e-12)?;
    let k_want = opts.k;
    let b = opts.block.max(1);
    let n_constraints = c_rows.map_or(0, |c| c.len());
    if k_want == 0 || k_want + b + n_constraints > n {
        return Err(Error::Config(format!(
            "cannot extract {k_want} eigenpairs (block {b}, {n_constraints} constraints) from a {n}-dof system"
        )));
    }

    let solver = ShiftedSolver::new(k_mat, m_mat)?;
    let constraints = match c_rows {
        Some(rows) => Some(Constraints::new(rows, &solver)?),
        None => None,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let cap = (opts.max_blocks + 2) * b;
    let mut basis: Vec<Vec<f64>> = Vec::new();
    // t[i][j] = q_i^T M Op q_j over imaged columns
    let mut t_entries: Vec<Vec<f64>> = Vec::new();

    let mut scratch = vec![0.0f64; n];
    let m_norm = |v: &[f64], scratch: &mut Vec<f64>| -> f64 {
        m_mat.matvec(v, scratch);
        dot(v, scratch).max(0.0).sqrt()
    };

    // M-orthonormalize v against the whole basis (twice), normalize, admit.
    // Returns false on breakdown (v numerically in the span).
    let admit = |v: &mut Vec<f64>,
                 basis: &mut Vec<Vec<f64>>,
                 scratch: &mut Vec<f64>|
     -> bool {
        let initial = m_norm(v, scratch);
        for _pass in 0..2 {
            m_mat.matvec(v, scratch);
            let coeffs: Vec<f64> = basis.iter().map(|q| dot(q, scratch)).collect();
            for (q, c) in basis.iter().zip(&coeffs) {
                if *c != 0.0 {
                    for (vi, qi) in v.iter_mut().zip(q) {
                        *vi -= c * qi;
                    }
                }
            }
        }
        let norm = m_norm(v, scratch);
        if !(norm > 1e-8 * initial.max(1e-300)) {
            return false;
        }
        for vi in v.iter_mut() {
            *vi /= norm;
        }
        basis.push(std::mem::take(v));
        true
    };

    // starting block
    let mut fresh = 0usize;
    while basis.len() < b {
        let mut v: Vec<f64> = (0..n).map(|_| rand_unit(&mut rng)).collect();
        if let Some(cs) = &constraints {
            cs.project(&mut v);
        }
        if !admit(&mut v, &mut basis, &mut scratch) {
            fresh += 1;
            if fresh > 16 {
                return Err(Error::NoConvergence {
                    requested: k_want,
                    converged: 0,
                    tol: opts.tol,
                    steps: 0,
                });
            }
        }
    }

    let mut imaged = 0usize; // columns whose Op image is folded into T
    let mut iterations = 0usize;
    let mut best: Option<EigenResult> = None;

    for block_iter in 0..opts.max_blocks {
        iterations = block_iter + 1;
        let lo = imaged;
        let hi = basis.len();
        // images of the newest block
        for src in lo..hi {
            let mut w = vec![0.0f64; n];
            m_mat.matvec(&basis[src], &mut w);
            solver.solve_in_place(&mut w);
            if let Some(cs) = &constraints {
                cs.project(&mut w);
            }
            // T column from the raw image
            m_mat.matvec(&w, &mut scratch);
            let col: Vec<f64> = basis.iter().map(|q| dot(q, &scratch)).collect();
            t_entries.push(col);
            // orthogonalize and admit as the next block's column
            if basis.len() < cap && !admit(&mut w, &mut basis, &mut scratch) {
                // breakdown: restart with a fresh projected random direction
                let mut v: Vec<f64> = (0..n).map(|_| rand_unit(&mut rng)).collect();
                if let Some(cs) = &constraints {
                    cs.project(&mut v);
                }
                let _ = admit(&mut v, &mut basis, &mut scratch);
            }
        }
        imaged = hi;

        if imaged < k_want {
            continue;
        }

        // Rayleigh-Ritz over the imaged prefix
        let m_sz = imaged;
        let mut t = DMatrix::<f64>::zeros(m_sz, m_sz);
        for j in 0..m_sz {
            for i in 0..m_sz.min(t_entries[j].len()) {
                let v = t_entries[j][i];
                t[(i, j)] = v;
            }
        }
        // symmetrize (entries exist on at least one side)
        for i in 0..m_sz {
            for j in (i + 1)..m_sz {
                let v = if t[(i, j)] != 0.0 { t[(i, j)] } else { t[(j, i)] };
                let w = if t[(j, i)] != 0.0 { t[(j, i)] } else { t[(i, j)] };
                let avg = 0.5 * (v + w);
                t[(i, j)] = avg;
                t[(j, i)] = avg;
            }
        }
        let eig = t.clone().symmetric_eigen();
        let mut idx: Vec<usize> = (0..m_sz).collect();
        idx.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
        let take = k_want.min(m_sz);

        let mut values = Vec::with_capacity(take);
        let mut vectors = Vec::with_capacity(take);
        let mut residuals = Vec::with_capacity(take);
        let mut all_ok = true;
        for &ri in idx.iter().take(take) {
            let theta = eig.eigenvalues[ri];
            let mu = if theta > 1e-300 { 1.0 / theta - 1.0 } else { f64::INFINITY };
            let s = eig.eigenvectors.column(ri);
            let mut v = vec![0.0f64; n];
            for (j, q) in basis.iter().take(m_sz).enumerate() {
                let sj = s[j];
                if sj != 0.0 {
                    for (vi, qi) in v.iter_mut().zip(q) {
                        *vi += sj * qi;
                    }
                }
            }
            // true pencil residual
            let mut kv = vec![0.0f64; n];
            let mut mv = vec![0.0f64; n];
            k_mat.matvec(&v, &mut kv);
            m_mat.matvec(&v, &mut mv);
            let mv_norm = dot(&mv, &mv).sqrt().max(1e-300);
            for i in 0..n {
                kv[i] -= mu * mv[i];
            }
            if let Some(cs) = &constraints {
                cs.project_residual(&mut kv);
            }
            let res = dot(&kv, &kv).sqrt() / mv_norm;
            if !(res <= opts.tol) {
                all_ok = false;
            }
            values.push(mu);
            vectors.push(v);
            residuals.push(res);
        }

        let result = EigenResult {
            values,
            vectors,
            residuals,
            iterations,
            basis_size: basis.len(),
        };
        if all_ok && take == k_want {
            return Ok(result);
        }
        best = Some(result);
        if basis.len() >= cap.min(n) {
            break;
        }
    }

    let converged = best
        .as_ref()
        .map(|r| r.residuals.iter().filter(|&&x| x <= opts.tol).count())
        .unwrap_or(0);
    Err(Error::NoConvergence {
        requested: k_want,
        converged,
        tol: opts.tol,
        steps: iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{assemble_mass, assemble_stiffness, face_gram, DofMap, Elimination, FaceGram};
    use crate::mesh::generate_mesh;
    use crate::presets;
    use std::f64::consts::PI;

    fn square_pencil(h: f64, elim: Elimination) -> (Csr, Csr, DofMap, crate::mesh::Mesh) {
        let d = presets::strip().truncate(0.0).unwrap();
        let mesh = generate_mesh(&d, h).unwrap();
        let dofs = DofMap::build(&mesh, &d, elim);
        let k = assemble_stiffness(&mesh, &dofs);
        let m = assemble_mass(&mesh, &dofs);
        (k, m, dofs, mesh)
    }

    #[test]
    fn dirichlet_square_spectrum() {
        let (k, m, _, _) = square_pencil(1.0 / 16.0, Elimination::dirichlet());
        let r = smallest_eigenpairs(&k, &m, &EigenOptions::new(3)).unwrap();
        let pi2 = PI * PI;
        // 2 pi^2, 5 pi^2, 5 pi^2 with O(h^2) upward bias
        assert!((r.values[0] - 2.0 * pi2).abs() < 0.02 * 2.0 * pi2, "{}", r.values[0]);
        assert!((r.values[1] - 5.0 * pi2).abs() < 0.02 * 5.0 * pi2);
        assert!((r.values[2] - 5.0 * pi2).abs() < 0.02 * 5.0 * pi2);
        assert!(r.values[0] > 2.0 * pi2, "conforming P1 approaches from above");
        for res in &r.residuals {
            assert!(*res <= 1e-9);
        }
        // M-orthonormality
        let mut mv = vec![0.0; r.vectors[0].len()];
        for i in 0..3 {
            m.matvec(&r.vectors[i], &mut mv);
            for j in 0..3 {
                let g = dot(&r.vectors[j], &mv);
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((g - expect).abs() < 1e-10, "gram[{i}{j}] = {g}");
            }
        }
    }

    #[test]
    fn eigenvalues_decrease_under_refinement() {
        let (k1, m1, _, _) = square_pencil(1.0 / 8.0, Elimination::dirichlet());
        let (k2, m2, _, _) = square_pencil(1.0 / 16.0, Elimination::dirichlet());
        let r1 = smallest_eigenpairs(&k1, &m1, &EigenOptions::new(2)).unwrap();
        let r2 = smallest_eigenpairs(&k2, &m2, &EigenOptions::new(2)).unwrap();
        for i in 0..2 {
            assert!(r2.values[i] <= r1.values[i] + 1e-9);
        }
    }

    #[test]
    fn neumann_square_spectrum_with_multiplicity() {
        let (k, m, _, _) = square_pencil(1.0 / 12.0, Elimination::neumann());
        let r = smallest_eigenpairs(&k, &m, &EigenOptions::new(4)).unwrap();
        let pi2 = PI * PI;
        assert!(r.values[0].abs() < 1e-8, "constant mode, mu = {}", r.values[0]);
        assert!((r.values[1] - pi2).abs() < 0.02 * pi2);
        assert!((r.values[2] - pi2).abs() < 0.02 * pi2);
        assert!((r.values[3] - 2.0 * pi2).abs() < 0.03 * 2.0 * pi2);
    }

    #[test]
    fn mixed_dirichlet_bottom_neumann_rest() {
        // modes cos(m pi x) sin((k + 1/2) pi y): mu_1 = pi^2/4, mu_2 = 5 pi^2/4
        let d = presets::strip().truncate(0.0).unwrap();
        let mesh = generate_mesh(&d, 1.0 / 14.0).unwrap();
        let mut free_of_point = vec![None; mesh.points.len()];
        let mut point_of_free = Vec::new();
        for (p, q) in mesh.points.iter().enumerate() {
            if q.y > 1e-12 {
                free_of_point[p] = Some(point_of_free.len() as u32);
                point_of_free.push(p as u32);
            }
        }
        let dofs = DofMap { free_of_point, point_of_free, faces: vec![] };
        let k = assemble_stiffness(&mesh, &dofs);
        let m = assemble_mass(&mesh, &dofs);
        let r = smallest_eigenpairs(&k, &m, &EigenOptions::new(2)).unwrap();
        let pi2 = PI * PI;
        assert!((r.values[0] - pi2 / 4.0).abs() < 0.02 * pi2 / 4.0, "{}", r.values[0]);
        assert!((r.values[1] - 5.0 * pi2 / 4.0).abs() < 0.02 * 5.0 * pi2 / 4.0);
    }

    #[test]
    fn constrained_with_zero_rows_matches_unconstrained() {
        let (k, m, _, _) = square_pencil(1.0 / 8.0, Elimination::dirichlet());
        let a = smallest_eigenpairs(&k, &m, &EigenOptions::new(2)).unwrap();
        let b = constrained_eigenpairs(&k, &m, &[], &EigenOptions::new(2)).unwrap();
        for i in 0..2 {
            assert!((a.values[i] - b.values[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn strip_node_constraints_remove_the_constant() {
        // unit square, Neumann faces left/right, Dirichlet walls top/bottom,
        // constraint: first-mode moment vanishes on both faces.
        let d = presets::strip().truncate(0.0).unwrap();
        let mesh = generate_mesh(&d, 1.0 / 12.0).unwrap();
        let dofs = DofMap::build(&mesh, &d, Elimination::mixed());
        let k = assemble_stiffness(&mesh, &dofs);
        let m = assemble_mass(&mesh, &dofs);
        let free = smallest_eigenpairs(&k, &m, &EigenOptions::new(1)).unwrap();

        let mut rows = Vec::new();
        for face in 0..2 {
            let g = face_gram(&dofs, face, FaceGram::Mass).unwrap();
            let mut phi = vec![0.0; dofs.n_free()];
            for (y, dof) in dofs.faces[face].retained() {
                phi[dof as usize] = crate::cross_section::phi(1.0, 1, y);
            }
            let mut row = vec![0.0; dofs.n_free()];
            g.matvec(&phi, &mut row);
            rows.push(row);
        }
        let con = constrained_eigenpairs(&k, &m, &rows, &EigenOptions::new(1)).unwrap();
        assert!(con.values[0] > free.values[0] + 0.1, "constraint must bite");
        // the constrained strip node concentrates mode 2 on the cross
        // section: mu_1 -> 2 pi^2
        let pi2 = PI * PI;
        assert!(
            (con.values[0] - 2.0 * pi2).abs() < 0.03 * 2.0 * pi2,
            "constrained mu_1 = {}",
            con.values[0]
        );
    }

    #[test]
    fn duplicate_constraint_rows_rejected() {
        let (k, m, dofs, _) = {
            let d = presets::strip().truncate(0.0).unwrap();
            let mesh = generate_mesh(&d, 0.2).unwrap();
            let dofs = DofMap::build(&mesh, &d, Elimination::mixed());
            let k = assemble_stiffness(&mesh, &dofs);
            let m = assemble_mass(&mesh, &dofs);
            (k, m, dofs, mesh)
        };
        let mut row = vec![0.0; dofs.n_free()];
        row[0] = 1.0;
        row[1] = -0.5;
        let rows = vec![row.clone(), row];
        match constrained_eigenpairs(&k, &m, &rows, &EigenOptions::new(1)) {
            Err(Error::RankDeficientConstraints(_)) => {}
            other => panic!("expected rank deficiency, got {other:?}"),
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let (k, m, _, _) = square_pencil(1.0 / 8.0, Elimination::dirichlet());
        let r1 = smallest_eigenpairs(&k, &m, &EigenOptions::new(2)).unwrap();
        let r2 = smallest_eigenpairs(&k, &m, &EigenOptions::new(2)).unwrap();
        assert_eq!(r1.values, r2.values);
        assert_eq!(r1.vectors, r2.vectors);
    }
}
