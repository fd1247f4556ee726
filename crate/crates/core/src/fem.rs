//! P1 finite element assembly for the variational problems on the truncated
//! junction: global stiffness and mass with Dirichlet elimination, and 1D
//! mass / tangential stiffness matrices on the truncation faces.
//!
//! Closed element formulas keep every integral exact for the polynomial
//! degree in play, so quadrature introduces no tolerance of its own.

use crate::error::{Error, Result};
use crate::geometry::{BoundaryTag, TruncatedDomain};
use crate::linalg::sparse::{Csr, Triplets};
use crate::mesh::Mesh;
use std::collections::BTreeSet;

/// Which parts of the boundary are eliminated (homogeneous Dirichlet).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Elimination {
    pub walls: bool,
    pub faces: bool,
}

impl Elimination {
    /// Mixed problem: Dirichlet walls, natural (Neumann) faces.
    pub fn mixed() -> Self {
        Elimination { walls: true, faces: false }
    }
    /// Everything eliminated; Dirichlet truncation used for upper bounds.
    pub fn dirichlet() -> Self {
        Elimination { walls: true, faces: true }
    }
    /// Nothing eliminated.
    pub fn neumann() -> Self {
        Elimination { walls: false, faces: false }
    }
}

/// Points of one truncation face, sorted by the outlet arclength y,
/// endpoints included. `dof[i]` is the retained global dof of point i, or
/// None where the point was eliminated.
#[derive(Debug, Clone)]
pub struct FaceDofs {
    pub outlet: usize,
    pub width: f64,
    pub y: Vec<f64>,
    pub point: Vec<u32>,
    pub dof: Vec<Option<u32>>,
}

impl FaceDofs {
    /// Retained (y, dof) pairs.
    pub fn retained(&self) -> impl Iterator<Item = (f64, u32)> + '_ {
        self.y
            .iter()
            .zip(&self.dof)
            .filter_map(|(y, d)| d.map(|d| (*y, d)))
    }
    pub fn n_retained(&self) -> usize {
        self.dof.iter().filter(|d| d.is_some()).count()
    }
}

#[derive(Debug, Clone)]
pub struct DofMap {
    pub free_of_point: Vec<Option<u32>>,
    pub point_of_free: Vec<u32>,
    pub faces: Vec<FaceDofs>,
}

impl DofMap {
    pub fn n_free(&self) -> usize {
        self.point_of_free.len()
    }

    pub fn build(mesh: &Mesh, domain: &TruncatedDomain, elim: Elimination) -> DofMap {
        let mut wall_pts: BTreeSet<u32> = BTreeSet::new();
        let n_out = domain.outlets().len();
        let mut face_pts: Vec<BTreeSet<u32>> = vec![BTreeSet::new(); n_out];
        for e in &mesh.boundary {
            match e.tag {
                BoundaryTag::Wall => {
                    wall_pts.insert(e.a);
                    wall_pts.insert(e.b);
                }
                BoundaryTag::Face(k) => {
                    face_pts[k].insert(e.a);
                    face_pts[k].insert(e.b);
                }
            }
        }
        let mut eliminated: BTreeSet<u32> = BTreeSet::new();
        if elim.walls {
            eliminated.extend(wall_pts.iter().copied());
        }
        if elim.faces {
            for f in &face_pts {
                eliminated.extend(f.iter().copied());
            }
        }

        let np = mesh.points.len();
        let mut free_of_point = vec![None; np];
        let mut point_of_free = Vec::with_capacity(np - eliminated.len());
        for p in 0..np as u32 {
            if !eliminated.contains(&p) {
                free_of_point[p as usize] = Some(point_of_free.len() as u32);
                point_of_free.push(p);
            }
        }

        let faces = (0..n_out)
            .map(|k| {
                let o = &domain.outlets()[k];
                let mut pts: Vec<(f64, u32)> = face_pts[k]
                    .iter()
                    .map(|&p| (o.local(mesh.points[p as usize]).0, p))
                    .collect();
                pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
                FaceDofs {
                    outlet: k,
                    width: o.width,
                    y: pts.iter().map(|&(y, _)| y).collect(),
                    point: pts.iter().map(|&(_, p)| p).collect(),
                    dof: pts
                        .iter()
                        .map(|&(_, p)| free_of_point[p as usize])
                        .collect(),
                }
            })
            .collect();

        DofMap { free_of_point, point_of_free, faces }
    }
}

/// Stiffness (∇u, ∇v) over retained dofs.
pub fn assemble_stiffness(mesh: &Mesh, dofs: &DofMap) -> Csr {
    let mut t = Triplets::new(dofs.n_free());
    for tri in &mesh.triangles {
        let p: Vec<_> = tri.iter().map(|&i| mesh.points[i as usize]).collect();
        let area2 = crate::geometry::orient(p[0], p[1], p[2]);
        let b = [p[1].y - p[2].y, p[2].y - p[0].y, p[0].y - p[1].y];
        let c = [p[2].x - p[1].x, p[0].x - p[2].x, p[1].x - p[0].x];
        for i in 0..3 {
            let Some(di) = dofs.free_of_point[tri[i] as usize] else { continue };
            for j in 0..3 {
                let Some(dj) = dofs.free_of_point[tri[j] as usize] else { continue };
                let v = (b[i] * b[j] + c[i] * c[j]) / (2.0 * area2);
                t.push(di as usize, dj as usize, v);
            }
        }
    }
    t.to_csr()
}

/// Consistent mass (u, v) over retained dofs.
pub fn assemble_mass(mesh: &Mesh, dofs: &DofMap) -> Csr {
    let mut t = Triplets::new(dofs.n_free());
    for tri in &mesh.triangles {
        let p: Vec<_> = tri.iter().map(|&i| mesh.points[i as usize]).collect();
        let area = 0.5 * crate::geometry::orient(p[0], p[1], p[2]);
        for i in 0..3 {
            let Some(di) = dofs.free_of_point[tri[i] as usize] else { continue };
            for j in 0..3 {
                let Some(dj) = dofs.free_of_point[tri[j] as usize] else { continue };
                let v = if i == j { area / 6.0 } else { area / 12.0 };
                t.push(di as usize, dj as usize, v);
            }
        }
    }
    t.to_csr()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaceGram {
    Mass,
    TangentStiffness,
}

/// 1D P1 matrix on the face of outlet `n`, embedded in global dof indexing.
pub fn face_gram(dofs: &DofMap, n: usize, which: FaceGram) -> Result<Csr> {
    let f = &dofs.faces[n];
    if f.n_retained() == 0 {
        return Err(Error::EmptyFace(n));
    }
    let mut t = Triplets::new(dofs.n_free());
    for s in 0..f.y.len().saturating_sub(1) {
        let l = f.y[s + 1] - f.y[s];
        let local = match which {
            FaceGram::Mass => [[l / 3.0, l / 6.0], [l / 6.0, l / 3.0]],
            FaceGram::TangentStiffness => [[1.0 / l, -1.0 / l], [-1.0 / l, 1.0 / l]],
        };
        let dd = [f.dof[s], f.dof[s + 1]];
        for i in 0..2 {
            let Some(di) = dd[i] else { continue };
            for j in 0..2 {
                let Some(dj) = dd[j] else { continue };
                t.push(di as usize, dj as usize, local[i][j]);
            }
        }
    }
    Ok(t.to_csr())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec2;
    use crate::mesh::{generate_mesh, BoundaryEdge};
    use crate::presets;

    /// One right triangle with legs 1, all dofs retained.
    fn single_triangle() -> (Mesh, DofMap) {
        let mesh = Mesh {
            points: vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)],
            triangles: vec![[0, 1, 2]],
            boundary: vec![
                BoundaryEdge { a: 0, b: 1, tag: BoundaryTag::Wall },
                BoundaryEdge { a: 1, b: 2, tag: BoundaryTag::Wall },
                BoundaryEdge { a: 2, b: 0, tag: BoundaryTag::Wall },
            ],
            h: 1.0,
        };
        let dofs = DofMap {
            free_of_point: vec![Some(0), Some(1), Some(2)],
            point_of_free: vec![0, 1, 2],
            faces: vec![],
        };
        (mesh, dofs)
    }

    #[test]
    fn element_matrices_reference_triangle() {
        let (mesh, dofs) = single_triangle();
        let k = assemble_stiffness(&mesh, &dofs);
        let expect = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        for i in 0..3 {
            let mut row_sum = 0.0;
            for j in 0..3 {
                assert!((k.get(i, j) - expect[i][j]).abs() < 1e-15);
                row_sum += k.get(i, j);
            }
            assert!(row_sum.abs() < 1e-15, "constants must be in the kernel");
        }
        let m = assemble_mass(&mesh, &dofs);
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 / 12.0 } else { 1.0 / 24.0 };
                assert!((m.get(i, j) - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn pure_neumann_square_kernel_and_area() {
        let d = presets::strip().truncate(0.0).unwrap();
        let mesh = generate_mesh(&d, 0.2).unwrap();
        let dofs = DofMap::build(&mesh, &d, Elimination::neumann());
        assert_eq!(dofs.n_free(), mesh.points.len());
        let k = assemble_stiffness(&mesh, &dofs);
        let ones = vec![1.0; dofs.n_free()];
        let mut y = vec![0.0; dofs.n_free()];
        k.matvec(&ones, &mut y);
        assert!(y.iter().all(|v| v.abs() < 1e-12));
        let m = assemble_mass(&mesh, &dofs);
        m.matvec(&ones, &mut y);
        let total: f64 = y.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        // refinement leaves the total area unchanged
        let fine = mesh.refine();
        let dofs_f = DofMap::build(&fine, &d, Elimination::neumann());
        let m_f = assemble_mass(&fine, &dofs_f);
        let ones_f = vec![1.0; dofs_f.n_free()];
        let mut y_f = vec![0.0; dofs_f.n_free()];
        m_f.matvec(&ones_f, &mut y_f);
        assert!((y_f.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn strip_mass_total_is_domain_area() {
        let d = presets::strip().truncate(2.0).unwrap();
        let mesh = generate_mesh(&d, 0.25).unwrap();
        let dofs = DofMap::build(&mesh, &d, Elimination::neumann());
        let m = assemble_mass(&mesh, &dofs);
        let ones = vec![1.0; dofs.n_free()];
        let mut y = vec![0.0; dofs.n_free()];
        m.matvec(&ones, &mut y);
        assert!((y.iter().sum::<f64>() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn dirichlet_square_is_positive_definite() {
        let d = presets::strip().truncate(0.0).unwrap();
        let mesh = generate_mesh(&d, 0.15).unwrap();
        let dofs = DofMap::build(&mesh, &d, Elimination::dirichlet());
        assert!(dofs.n_free() > 0);
        let k = assemble_stiffness(&mesh, &dofs);
        k.require_symmetric(1e-14).unwrap();
        let perm = crate::linalg::reverse_cuthill_mckee(&k);
        let kp = k.permuted(&perm);
        assert!(crate::linalg::BandCholesky::factor(&kp).is_ok());
    }

    #[test]
    fn rayleigh_quotient_converges_at_second_order() {
        // interpolant of sin(pi x) sin(pi y) on the all-Dirichlet square
        let d = presets::strip().truncate(0.0).unwrap();
        let quotient = |h: f64| -> f64 {
            let mesh = generate_mesh(&d, h).unwrap();
            let dofs = DofMap::build(&mesh, &d, Elimination::dirichlet());
            let k = assemble_stiffness(&mesh, &dofs);
            let m = assemble_mass(&mesh, &dofs);
            let u: Vec<f64> = dofs
                .point_of_free
                .iter()
                .map(|&p| {
                    let q = mesh.points[p as usize];
                    (std::f64::consts::PI * q.x).sin() * (std::f64::consts::PI * q.y).sin()
                })
                .collect();
            let mut ku = vec![0.0; u.len()];
            let mut mu = vec![0.0; u.len()];
            k.matvec(&u, &mut ku);
            m.matvec(&u, &mut mu);
            let num: f64 = u.iter().zip(&ku).map(|(a, b)| a * b).sum();
            let den: f64 = u.iter().zip(&mu).map(|(a, b)| a * b).sum();
            num / den
        };
        let exact = 2.0 * std::f64::consts::PI * std::f64::consts::PI;
        let e1 = (quotient(1.0 / 8.0) - exact).abs();
        let e2 = (quotient(1.0 / 16.0) - exact).abs();
        assert!(e2 < e1 / 3.0, "rate too slow: {e1:.3e} -> {e2:.3e}");
    }

    #[test]
    fn face_lists_sorted_and_tagged() {
        let d = presets::strip().truncate(2.0).unwrap();
        let mesh = generate_mesh(&d, 0.25).unwrap();
        let dofs = DofMap::build(&mesh, &d, Elimination::mixed());
        assert_eq!(dofs.faces.len(), 2);
        for f in &dofs.faces {
            assert!((f.width - 1.0).abs() < 1e-14);
            assert!(f.y.windows(2).all(|w| w[0] < w[1]));
            assert!(f.y[0].abs() < 1e-12);
            assert!((f.y[f.y.len() - 1] - 1.0).abs() < 1e-12);
            // endpoints are wall points
            assert!(f.dof[0].is_none());
            assert!(f.dof[f.y.len() - 1].is_none());
            assert_eq!(f.n_retained(), f.y.len() - 2);
        }
    }

    #[test]
    fn face_gram_mass_and_tangent_on_bare_cross() {
        // the bare cross node has no wall edges: all face dofs retained
        let d = presets::cross().truncate(0.0).unwrap();
        let mesh = generate_mesh(&d, 0.2).unwrap();
        let dofs = DofMap::build(&mesh, &d, Elimination::mixed());
        let g = face_gram(&dofs, 0, FaceGram::Mass).unwrap();
        let ones = vec![1.0; dofs.n_free()];
        let mut y = vec![0.0; dofs.n_free()];
        g.matvec(&ones, &mut y);
        assert!((y.iter().sum::<f64>() - 1.0).abs() < 1e-12, "face length");
        let gt = face_gram(&dofs, 0, FaceGram::TangentStiffness).unwrap();
        gt.matvec(&ones, &mut y);
        assert!(y.iter().all(|v| v.abs() < 1e-10), "constant in kernel");
    }

    #[test]
    fn face_gram_of_interpolated_first_mode_tends_to_one() {
        let d = presets::strip().truncate(1.0).unwrap();
        let energy = |h: f64| -> f64 {
            let mesh = generate_mesh(&d, h).unwrap();
            let dofs = DofMap::build(&mesh, &d, Elimination::mixed());
            let g = face_gram(&dofs, 0, FaceGram::Mass).unwrap();
            let mut phi = vec![0.0; dofs.n_free()];
            for (y, dof) in dofs.faces[0].retained() {
                phi[dof as usize] = 2.0f64.sqrt() * (std::f64::consts::PI * y).sin();
            }
            let mut gphi = vec![0.0; dofs.n_free()];
            g.matvec(&phi, &mut gphi);
            phi.iter().zip(&gphi).map(|(a, b)| a * b).sum()
        };
        let e1 = (energy(1.0 / 8.0) - 1.0).abs();
        let e2 = (energy(1.0 / 16.0) - 1.0).abs();
        assert!(e2 < e1 / 3.0, "no h^2 convergence: {e1:.3e} -> {e2:.3e}");
        assert!(e2 < 5e-3);
    }

    #[test]
    fn coarse_face_is_empty() {
        let d = presets::strip().truncate(1.0).unwrap();
        let mesh = generate_mesh(&d, 2.0).unwrap();
        let dofs = DofMap::build(&mesh, &d, Elimination::mixed());
        match face_gram(&dofs, 0, FaceGram::Mass) {
            Err(Error::EmptyFace(0)) => {}
            other => panic!("expected EmptyFace, got {other:?}"),
        }
    }
}
