//! Junction geometry: a bounded polygonal node with semi-infinite strip
//! outlets attached to whole polygon edges.
//!
//! The node polygon is stored counterclockwise. Outlet `n` occupies
//! `{ a_n + y·t_n + z·nu_n : y in (0, w_n), z > 0 }` where `a_n` is the first
//! vertex of its attachment edge, `t_n` the unit edge direction, `nu_n` the
//! outward normal and `w_n` the edge length. `(y, z)` are the outlet's local
//! coordinates; `z` increases away from the node.
//!
//! Vertices entered as exact rationals keep an exact representation alongside
//! the floating one so that outlet widths can be compared exactly when
//! classifying threshold outlets.

use crate::error::{Error, Result};
use num_rational::Ratio;

/// Exact coordinate type for rational inputs.
pub type Rat = Ratio<i128>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }
    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }
    /// z-component of the cross product.
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }
    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }
    pub fn scale(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
    pub fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
    pub fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
    /// Rotate by -90 degrees; for a CCW polygon this turns an edge direction
    /// into the outward normal.
    pub fn perp_outward(self) -> Vec2 {
        Vec2::new(self.y, -self.x)
    }
}

impl std::ops::Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}
impl std::ops::Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}
impl std::ops::Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        self.scale(s)
    }
}

/// Interpolate between `a` and `b`. Both the node triangulation and the
/// outlet grids construct shared attachment points through this exact
/// formula so that deduplication can compare bit patterns.
pub fn lerp(a: Vec2, b: Vec2, t: f64) -> Vec2 {
    Vec2::new(a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t)
}

/// One semi-infinite outlet strip.
#[derive(Debug, Clone)]
pub struct Outlet {
    /// Index of the node polygon edge it attaches to (edge i joins vertex i
    /// to vertex i+1 mod n).
    pub edge: usize,
    /// First vertex of the attachment edge; origin of the local frame.
    pub origin: Vec2,
    /// Unit vector along the attachment edge (local y direction).
    pub tangent: Vec2,
    /// Unit outward normal (local z direction).
    pub normal: Vec2,
    /// Strip width = attachment edge length.
    pub width: f64,
    /// Exact squared width when both edge endpoints are rational.
    pub width_sq_exact: Option<Rat>,
}

impl Outlet {
    /// Local coordinates of a point: y along the edge, z outward.
    pub fn local(&self, p: Vec2) -> (f64, f64) {
        let d = p - self.origin;
        (d.dot(self.tangent), d.dot(self.normal))
    }
    /// Point from local coordinates.
    pub fn global(&self, y: f64, z: f64) -> Vec2 {
        self.origin + self.tangent * y + self.normal * z
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryTag {
    /// Dirichlet part of the boundary (walls of the junction).
    Wall,
    /// Artificial truncation face of outlet n (Neumann side in the mixed
    /// problem, modal coupling in the scattering problems).
    Face(usize),
}

#[derive(Debug, Clone)]
pub struct JunctionGeometry {
    vertices: Vec<Vec2>,
    exact: Vec<Option<(Rat, Rat)>>,
    outlets: Vec<Outlet>,
}

impl JunctionGeometry {
    /// Validate and build. `exact` carries per-vertex rational coordinates
    /// where available (pass `None` entries for irrational vertices).
    pub fn build(
        vertices: Vec<Vec2>,
        exact: Vec<Option<(Rat, Rat)>>,
        outlet_edges: &[usize],
    ) -> Result<Self> {
        let n = vertices.len();
        if n < 3 {
            return Err(Error::DegenerateDomain(format!(
                "node polygon needs at least 3 vertices, got {n}"
            )));
        }
        if exact.len() != n {
            return Err(Error::Config(
                "exact coordinate list length differs from vertex count".into(),
            ));
        }
        let area = signed_area(&vertices);
        let scale = diameter(&vertices);
        if area.abs() < 1e-14 * scale * scale {
            return Err(Error::DegenerateDomain("node polygon has zero area".into()));
        }
        if area < 0.0 {
            return Err(Error::DegenerateDomain(
                "node polygon vertices must be ordered counterclockwise".into(),
            ));
        }
        for i in 0..n {
            let e = vertices[(i + 1) % n] - vertices[i];
            if e.norm() < 1e-14 * scale {
                return Err(Error::DegenerateDomain(format!("edge {i} has zero length")));
            }
        }
        if let Some((i, j)) = find_self_intersection(&vertices) {
            return Err(Error::SelfIntersectingPolygon(i, j));
        }

        let mut seen = vec![false; n];
        let mut outlets = Vec::with_capacity(outlet_edges.len());
        for (k, &e) in outlet_edges.iter().enumerate() {
            if e >= n {
                return Err(Error::AttachmentNotOnBoundary(k));
            }
            if seen[e] {
                return Err(Error::Config(format!(
                    "outlet edge {e} used more than once"
                )));
            }
            seen[e] = true;
            let a = vertices[e];
            let b = vertices[(e + 1) % n];
            let dir = b - a;
            let width = dir.norm();
            let tangent = dir.scale(1.0 / width);
            let width_sq_exact = match (&exact[e], &exact[(e + 1) % n]) {
                (Some((ax, ay)), Some((bx, by))) => {
                    let dx = *bx - *ax;
                    let dy = *by - *ay;
                    Some(dx * dx + dy * dy)
                }
                _ => None,
            };
            outlets.push(Outlet {
                edge: e,
                origin: a,
                tangent,
                normal: tangent.perp_outward(),
                width,
                width_sq_exact,
            });
        }
        if outlets.is_empty() {
            return Err(Error::DegenerateDomain("junction has no outlets".into()));
        }

        let geom = JunctionGeometry { vertices, exact, outlets };
        geom.check_outlet_overlap()?;
        Ok(geom)
    }

    pub fn node(&self) -> &[Vec2] {
        &self.vertices
    }
    pub fn exact_vertices(&self) -> &[Option<(Rat, Rat)>] {
        &self.exact
    }
    pub fn outlets(&self) -> &[Outlet] {
        &self.outlets
    }
    pub fn node_area(&self) -> f64 {
        signed_area(&self.vertices)
    }
    pub fn diameter(&self) -> f64 {
        diameter(&self.vertices)
    }

    /// Truncated computational domain Omega(R): the node plus a length-R
    /// piece of every outlet. R = 0 is the bare node with the attachment
    /// edges as faces.
    pub fn truncate(&self, r: f64) -> Result<TruncatedDomain> {
        if !r.is_finite() || r < 0.0 {
            return Err(Error::DegenerateDomain(format!(
                "truncation length must be nonnegative, got {r}"
            )));
        }
        Ok(TruncatedDomain { geom: self.clone(), r })
    }

    /// Outlet strips must not collide with each other or re-enter the node.
    /// Checked on finite truncations (see the ledger note on range).
    fn check_outlet_overlap(&self) -> Result<()> {
        let wmax = self
            .outlets
            .iter()
            .map(|o| o.width)
            .fold(0.0f64, f64::max);
        let r_check = 4.0 * (self.diameter() + wmax) + 10.0;
        let eps = 1e-12 * (self.diameter() + r_check);
        // corners from the raw polygon vertices so that quads of adjacent
        // outlets share them bitwise
        let n = self.vertices.len();
        let quads: Vec<[Vec2; 4]> = self
            .outlets
            .iter()
            .map(|o| {
                // counterclockwise
                let a = self.vertices[o.edge];
                let b = self.vertices[(o.edge + 1) % n];
                [a, a + o.normal * r_check, b + o.normal * r_check, b]
            })
            .collect();
        for i in 0..quads.len() {
            for j in (i + 1)..quads.len() {
                if convex_quads_overlap(&quads[i], &quads[j], eps) {
                    return Err(Error::OutletOverlap(i, j));
                }
            }
        }
        // a strip passing back over the node would cross a non-attachment
        // polygon edge in its open interior
        for (k, (o, q)) in self.outlets.iter().zip(&quads).enumerate() {
            for e in 0..n {
                if e == o.edge {
                    continue;
                }
                let a = self.vertices[e];
                let b = self.vertices[(e + 1) % n];
                if segment_enters_quad(a, b, q, eps) {
                    return Err(Error::OutletOverlap(k, k));
                }
            }
        }
        Ok(())
    }
}

/// A junction together with a truncation length. Meshing and the boundary
/// outline are derived from this view.
#[derive(Debug, Clone)]
pub struct TruncatedDomain {
    geom: JunctionGeometry,
    r: f64,
}

impl TruncatedDomain {
    pub fn r(&self) -> f64 {
        self.r
    }
    pub fn geometry(&self) -> &JunctionGeometry {
        &self.geom
    }
    pub fn node(&self) -> &[Vec2] {
        self.geom.node()
    }
    pub fn outlets(&self) -> &[Outlet] {
        self.geom.outlets()
    }

    /// Boundary outline as a closed CCW polygon with tags, attachment edges
    /// replaced by the three outlet-rectangle sides when R > 0.
    pub fn outline(&self) -> (Vec<Vec2>, Vec<BoundaryTag>) {
        let verts = self.geom.node();
        let n = verts.len();
        let mut pts = Vec::new();
        let mut tags = Vec::new();
        for e in 0..n {
            let a = verts[e];
            let outlet = self
                .geom
                .outlets()
                .iter()
                .position(|o| o.edge == e);
            match outlet {
                None => {
                    pts.push(a);
                    tags.push(BoundaryTag::Wall);
                }
                Some(k) if self.r == 0.0 => {
                    pts.push(a);
                    tags.push(BoundaryTag::Face(k));
                }
                Some(k) => {
                    let o = &self.geom.outlets()[k];
                    let b = verts[(e + 1) % n];
                    let shift = o.normal * self.r;
                    pts.push(a);
                    tags.push(BoundaryTag::Wall);
                    pts.push(a + shift);
                    tags.push(BoundaryTag::Face(k));
                    pts.push(b + shift);
                    tags.push(BoundaryTag::Wall);
                }
            }
        }
        (pts, tags)
    }

    pub fn area(&self) -> f64 {
        let (pts, _) = self.outline();
        signed_area(&pts)
    }
}

pub fn signed_area(poly: &[Vec2]) -> f64 {
    let n = poly.len();
    let mut s = 0.0;
    for i in 0..n {
        s += poly[i].cross(poly[(i + 1) % n]);
    }
    0.5 * s
}

pub fn diameter(pts: &[Vec2]) -> f64 {
    let mut d = 0.0f64;
    for i in 0..pts.len() {
        for j in (i + 1)..pts.len() {
            d = d.max((pts[i] - pts[j]).norm());
        }
    }
    d
}

/// Twice the signed area of triangle abc.
pub fn orient(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    (b - a).cross(c - a)
}

pub fn point_in_polygon(p: Vec2, poly: &[Vec2]) -> bool {
    // even-odd rule with horizontal ray
    let n = poly.len();
    let mut inside = false;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        if (a.y > p.y) != (b.y > p.y) {
            let xi = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if p.x < xi {
                inside = !inside;
            }
        }
    }
    inside
}

fn segments_properly_intersect(a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> bool {
    segments_properly_intersect_tol(a, b, c, d, 0.0)
}

/// Proper crossing with a dead zone: orientations within `tol` of zero do
/// not count, so touching at shared or nearly shared endpoints is ignored.
fn segments_properly_intersect_tol(a: Vec2, b: Vec2, c: Vec2, d: Vec2, tol: f64) -> bool {
    let opposite = |p: f64, q: f64| (p > tol && q < -tol) || (p < -tol && q > tol);
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    opposite(d1, d2) && opposite(d3, d4)
}

fn find_self_intersection(poly: &[Vec2]) -> Option<(usize, usize)> {
    let n = poly.len();
    for i in 0..n {
        for j in (i + 1)..n {
            // skip adjacent edges (they share a vertex)
            if j == i || (j + 1) % n == i || (i + 1) % n == j {
                continue;
            }
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            let (c, d) = (poly[j], poly[(j + 1) % n]);
            if segments_properly_intersect(a, b, c, d) {
                return Some((i, j));
            }
        }
    }
    None
}

/// Separating-axis test for open-interior overlap of two convex quads.
/// Touching along boundaries (shared corners of adjacent outlets) does not
/// count as overlap.
fn convex_quads_overlap(p: &[Vec2; 4], q: &[Vec2; 4], eps: f64) -> bool {
    let axes = |quad: &[Vec2; 4]| -> Vec<Vec2> {
        (0..4)
            .map(|i| (quad[(i + 1) % 4] - quad[i]).perp_outward())
            .collect()
    };
    for axis in axes(p).into_iter().chain(axes(q)) {
        let proj = |quad: &[Vec2; 4]| {
            let vals: Vec<f64> = quad.iter().map(|v| v.dot(axis)).collect();
            (
                vals.iter().cloned().fold(f64::INFINITY, f64::min),
                vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            )
        };
        let (amin, amax) = proj(p);
        let (bmin, bmax) = proj(q);
        let tol = eps * axis.norm();
        if amax <= bmin + tol || bmax <= amin + tol {
            return false;
        }
    }
    true
}

/// Does segment ab pass through the open interior of the quad?
fn segment_enters_quad(a: Vec2, b: Vec2, quad: &[Vec2; 4], eps: f64) -> bool {
    // sample interior crossings: proper intersection with any side, or an
    // endpoint strictly inside
    let inside = |p: Vec2| -> bool {
        (0..4).all(|i| {
            let o = orient(quad[i], quad[(i + 1) % 4], p);
            o > eps * (quad[(i + 1) % 4] - quad[i]).norm()
        })
    };
    if inside(a) || inside(b) || inside(lerp(a, b, 0.5)) {
        return true;
    }
    for i in 0..4 {
        let (c, d) = (quad[i], quad[(i + 1) % 4]);
        let tol = eps * ((b - a).norm() + (d - c).norm());
        if segments_properly_intersect_tol(a, b, c, d, tol) {
            return true;
        }
    }
    false
}
