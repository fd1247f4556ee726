//! Conforming P1 triangulations of the truncated junction.
//!
//! The node polygon is ear-clipped and every ear triangle is subdivided into
//! m^2 congruent copies; the outlet rectangles get structured grids whose
//! attachment rows reuse the identical edge subdivision. All points that two
//! patches share are generated through one canonical interpolation formula
//! (endpoints ordered by vertex index), so deduplication can compare exact
//! bit patterns instead of distances.

use crate::error::{Error, Result};
use crate::geometry::{lerp, orient, BoundaryTag, TruncatedDomain, Vec2};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub a: u32,
    pub b: u32,
    pub tag: BoundaryTag,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub points: Vec<Vec2>,
    /// counterclockwise vertex triples
    pub triangles: Vec<[u32; 3]>,
    pub boundary: Vec<BoundaryEdge>,
    /// requested size parameter (max edge length is <= sqrt(2) h)
    pub h: f64,
}

/// Bit-exact point key; -0.0 folds onto +0.0.
fn key(p: Vec2) -> (u64, u64) {
    let norm = |v: f64| if v == 0.0 { 0.0f64 } else { v };
    (norm(p.x).to_bits(), norm(p.y).to_bits())
}

struct PointPool {
    points: Vec<Vec2>,
    index: BTreeMap<(u64, u64), u32>,
}

impl PointPool {
    fn new() -> Self {
        PointPool { points: Vec::new(), index: BTreeMap::new() }
    }
    fn insert(&mut self, p: Vec2) -> u32 {
        match self.index.entry(key(p)) {
            std::collections::btree_map::Entry::Occupied(e) => *e.get(),
            std::collections::btree_map::Entry::Vacant(e) => {
                let id = self.points.len() as u32;
                self.points.push(p);
                e.insert(id);
                id
            }
        }
    }
}

/// Point k of m on the segment between polygon vertices ia and ib, counted
/// from ia. Both orientations of the call produce bit-identical points.
fn edge_point(pts: &[Vec2], ia: usize, ib: usize, k: usize, m: usize) -> Vec2 {
    if ia <= ib {
        lerp(pts[ia], pts[ib], k as f64 / m as f64)
    } else {
        lerp(pts[ib], pts[ia], (m - k) as f64 / m as f64)
    }
}

/// Ear clipping into n-2 triangles over the original vertices.
fn triangulate_polygon(pts: &[Vec2]) -> Result<Vec<[usize; 3]>> {
    let n = pts.len();
    let scale = crate::geometry::diameter(pts);
    let eps = 1e-12 * scale * scale;
    let mut alive: Vec<usize> = (0..n).collect();
    let mut tris = Vec::with_capacity(n - 2);
    let mut guard = 0usize;
    while alive.len() > 3 {
        let m = alive.len();
        let mut clipped = false;
        for i in 0..m {
            let (ip, ic, inx) = (alive[(i + m - 1) % m], alive[i], alive[(i + 1) % m]);
            let (a, b, c) = (pts[ip], pts[ic], pts[inx]);
            if orient(a, b, c) <= eps {
                continue; // reflex or collinear corner
            }
            // no other alive vertex inside the closed candidate ear; points
            // on the ear boundary block it too, otherwise collinear chains
            // get stranded in a zero-area remainder
            let blocked = alive.iter().any(|&j| {
                if j == ip || j == ic || j == inx {
                    return false;
                }
                let p = pts[j];
                orient(a, b, p) >= -eps && orient(b, c, p) >= -eps && orient(c, a, p) >= -eps
            });
            if blocked {
                continue;
            }
            tris.push([ip, ic, inx]);
            alive.remove(i);
            clipped = true;
            break;
        }
        if !clipped {
            return Err(Error::DegenerateDomain(
                "polygon triangulation failed (no ear found)".into(),
            ));
        }
        guard += 1;
        if guard > 4 * n {
            return Err(Error::DegenerateDomain(
                "polygon triangulation did not terminate".into(),
            ));
        }
    }
    tris.push([alive[0], alive[1], alive[2]]);
    Ok(tris)
}

fn push_triangle(tris: &mut Vec<[u32; 3]>, pts: &[Vec2], a: u32, b: u32, c: u32) {
    if orient(pts[a as usize], pts[b as usize], pts[c as usize]) > 0.0 {
        tris.push([a, b, c]);
    } else {
        tris.push([a, c, b]);
    }
}

/// Build the mesh of Omega(R) with target size h.
pub fn generate_mesh(domain: &TruncatedDomain, h: f64) -> Result<Mesh> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::Config(format!("mesh size must be positive, got {h}")));
    }
    let verts = domain.node();
    let nv = verts.len();
    let ears = triangulate_polygon(verts)?;

    // one global subdivision count keeps shared edges conforming
    let mut max_edge = 0.0f64;
    for t in &ears {
        for e in 0..3 {
            max_edge = max_edge.max((verts[t[e]] - verts[t[(e + 1) % 3]]).norm());
        }
    }
    let m = (max_edge / h).ceil().max(1.0) as usize;

    let mut pool = PointPool::new();
    let mut triangles: Vec<[u32; 3]> = Vec::new();
    let mut boundary: Vec<BoundaryEdge> = Vec::new();

    // node patches: barycentric lattice per ear, canonical points on ear edges
    for t in &ears {
        let (ia, ib, ic) = (t[0], t[1], t[2]);
        let (pa, pb, pc) = (verts[ia], verts[ib], verts[ic]);
        // lattice[(i, j)] with i along a->b, j along a->c, i + j <= m
        let mut lattice = vec![0u32; (m + 1) * (m + 1)];
        for i in 0..=m {
            for j in 0..=(m - i) {
                let p = if j == 0 {
                    edge_point(verts, ia, ib, i, m)
                } else if i == 0 {
                    edge_point(verts, ia, ic, j, m)
                } else if i + j == m {
                    edge_point(verts, ib, ic, j, m)
                } else {
                    let (fi, fj) = (i as f64 / m as f64, j as f64 / m as f64);
                    pa + (pb - pa) * fi + (pc - pa) * fj
                };
                lattice[i * (m + 1) + j] = pool.insert(p);
            }
        }
        let at = |i: usize, j: usize| lattice[i * (m + 1) + j];
        for i in 0..m {
            for j in 0..(m - i) {
                push_triangle(&mut triangles, &pool.points, at(i, j), at(i + 1, j), at(i, j + 1));
                if i + j < m - 1 {
                    push_triangle(
                        &mut triangles,
                        &pool.points,
                        at(i + 1, j),
                        at(i + 1, j + 1),
                        at(i, j + 1),
                    );
                }
            }
        }
    }

    // node boundary segments
    let r = domain.r();
    for e in 0..nv {
        let attached = domain.outlets().iter().position(|o| o.edge == e);
        let tag = match attached {
            Some(_) if r > 0.0 => continue, // interior after fusing the outlet
            Some(k) => BoundaryTag::Face(k),
            None => BoundaryTag::Wall,
        };
        for k in 0..m {
            let p = pool.insert(edge_point(verts, e, (e + 1) % nv, k, m));
            let q = pool.insert(edge_point(verts, e, (e + 1) % nv, k + 1, m));
            boundary.push(BoundaryEdge { a: p, b: q, tag });
        }
    }

    // outlet grids
    if r > 0.0 {
        for (k, o) in domain.outlets().iter().enumerate() {
            let (ia, ib) = (o.edge, (o.edge + 1) % nv);
            let nz = (r / h).ceil().max(1.0) as usize;
            let mut grid = vec![0u32; (m + 1) * (nz + 1)];
            for iy in 0..=m {
                let base = edge_point(verts, ia, ib, iy, m);
                for iz in 0..=nz {
                    let z = r * iz as f64 / nz as f64;
                    grid[iy * (nz + 1) + iz] = pool.insert(base + o.normal * z);
                }
            }
            let at = |iy: usize, iz: usize| grid[iy * (nz + 1) + iz];
            for iy in 0..m {
                for iz in 0..nz {
                    push_triangle(
                        &mut triangles,
                        &pool.points,
                        at(iy, iz),
                        at(iy + 1, iz),
                        at(iy + 1, iz + 1),
                    );
                    push_triangle(
                        &mut triangles,
                        &pool.points,
                        at(iy, iz),
                        at(iy + 1, iz + 1),
                        at(iy, iz + 1),
                    );
                }
            }
            for iz in 0..nz {
                boundary.push(BoundaryEdge { a: at(0, iz), b: at(0, iz + 1), tag: BoundaryTag::Wall });
                boundary.push(BoundaryEdge { a: at(m, iz), b: at(m, iz + 1), tag: BoundaryTag::Wall });
            }
            for iy in 0..m {
                boundary.push(BoundaryEdge {
                    a: at(iy, nz),
                    b: at(iy + 1, nz),
                    tag: BoundaryTag::Face(k),
                });
            }
        }
    }

    Ok(Mesh { points: pool.points, triangles, boundary, h })
}

impl Mesh {
    /// Red refinement: every triangle splits into four via edge midpoints.
    /// Boundary edges split in two and keep their tags.
    pub fn refine(&self) -> Mesh {
        let mut points = self.points.clone();
        let mut midpoint: BTreeMap<(u32, u32), u32> = BTreeMap::new();
        let mut mid = |a: u32, b: u32, points: &mut Vec<Vec2>| -> u32 {
            let kk = (a.min(b), a.max(b));
            *midpoint.entry(kk).or_insert_with(|| {
                let p = lerp(points[kk.0 as usize], points[kk.1 as usize], 0.5);
                points.push(p);
                (points.len() - 1) as u32
            })
        };
        let mut triangles = Vec::with_capacity(4 * self.triangles.len());
        for t in &self.triangles {
            let (a, b, c) = (t[0], t[1], t[2]);
            let ab = mid(a, b, &mut points);
            let bc = mid(b, c, &mut points);
            let ca = mid(c, a, &mut points);
            triangles.push([a, ab, ca]);
            triangles.push([ab, b, bc]);
            triangles.push([ca, bc, c]);
            triangles.push([ab, bc, ca]);
        }
        let mut boundary = Vec::with_capacity(2 * self.boundary.len());
        for e in &self.boundary {
            let mp = mid(e.a, e.b, &mut points);
            boundary.push(BoundaryEdge { a: e.a, b: mp, tag: e.tag });
            boundary.push(BoundaryEdge { a: mp, b: e.b, tag: e.tag });
        }
        Mesh { points, triangles, boundary, h: self.h * 0.5 }
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        0.5 * orient(
            self.points[a as usize],
            self.points[b as usize],
            self.points[c as usize],
        )
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    pub fn max_edge_len(&self) -> f64 {
        let mut mx = 0.0f64;
        for t in &self.triangles {
            for e in 0..3 {
                let p = self.points[t[e] as usize];
                let q = self.points[t[(e + 1) % 3] as usize];
                mx = mx.max((p - q).norm());
            }
        }
        mx
    }

    /// Conformity audit: every triangle edge is shared by exactly two
    /// triangles or is exactly one tagged boundary edge.
    pub fn check_conforming(&self) -> Result<()> {
        let mut count: BTreeMap<(u32, u32), u32> = BTreeMap::new();
        for t in &self.triangles {
            for e in 0..3 {
                let (a, b) = (t[e], t[(e + 1) % 3]);
                *count.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        let mut btags: BTreeMap<(u32, u32), u32> = BTreeMap::new();
        for e in &self.boundary {
            *btags.entry((e.a.min(e.b), e.a.max(e.b))).or_insert(0) += 1;
        }
        for (k, c) in &count {
            let nb = btags.get(k).copied().unwrap_or(0);
            let ok = (*c == 2 && nb == 0) || (*c == 1 && nb == 1);
            if !ok {
                return Err(Error::DegenerateDomain(format!(
                    "edge {:?} has {} triangles and {} boundary tags",
                    k, c, nb
                )));
            }
        }
        if btags.keys().any(|k| !count.contains_key(k)) {
            return Err(Error::DegenerateDomain(
                "boundary edge not present in any triangle".into(),
            ));
        }
        Ok(())
    }
}
