//! Ready-made junction geometries used by the command line examples and the
//! test suite.

use crate::geometry::{JunctionGeometry, Rat, Vec2};

fn rat(p: i128, q: i128) -> Rat {
    Rat::new(p, q)
}

fn exact_pt(x: (i128, i128), y: (i128, i128)) -> Option<(Rat, Rat)> {
    Some((rat(x.0, x.1), rat(y.0, y.1)))
}

fn unit_square() -> (Vec<Vec2>, Vec<Option<(Rat, Rat)>>) {
    let verts = vec![
        Vec2::new(0.0, 0.0),
        Vec2::new(1.0, 0.0),
        Vec2::new(1.0, 1.0),
        Vec2::new(0.0, 1.0),
    ];
    let exact = vec![
        exact_pt((0, 1), (0, 1)),
        exact_pt((1, 1), (0, 1)),
        exact_pt((1, 1), (1, 1)),
        exact_pt((0, 1), (1, 1)),
    ];
    (verts, exact)
}

/// Straight strip: unit square with outlets on the right and left edges.
/// The junction is a plain infinite strip of width 1.
pub fn strip() -> JunctionGeometry {
    let (v, e) = unit_square();
    JunctionGeometry::build(v, e, &[1, 3]).unwrap()
}

/// T junction: unit square with outlets right, top and left.
pub fn tee() -> JunctionGeometry {
    let (v, e) = unit_square();
    JunctionGeometry::build(v, e, &[1, 2, 3]).unwrap()
}

/// Cross: unit square with outlets on all four edges.
pub fn cross() -> JunctionGeometry {
    let (v, e) = unit_square();
    JunctionGeometry::build(v, e, &[0, 1, 2, 3]).unwrap()
}

/// L bend: unit square with outlets right and top.
pub fn lbend() -> JunctionGeometry {
    let (v, e) = unit_square();
    JunctionGeometry::build(v, e, &[1, 2]).unwrap()
}

/// T junction with a stem of width 1/2 on top; the two arms keep width 1,
/// so only they are threshold outlets.
pub fn tee_narrow_stem() -> JunctionGeometry {
    let verts = vec![
        Vec2::new(0.0, 0.0),
        Vec2::new(1.0, 0.0),
        Vec2::new(1.0, 1.0),
        Vec2::new(0.75, 1.0),
        Vec2::new(0.25, 1.0),
        Vec2::new(0.0, 1.0),
    ];
    let exact = vec![
        exact_pt((0, 1), (0, 1)),
        exact_pt((1, 1), (0, 1)),
        exact_pt((1, 1), (1, 1)),
        exact_pt((3, 4), (1, 1)),
        exact_pt((1, 4), (1, 1)),
        exact_pt((0, 1), (1, 1)),
    ];
    JunctionGeometry::build(verts, exact, &[1, 3, 5]).unwrap()
}

/// Symmetric Y junction: equilateral triangle with outlets on all sides.
/// One vertex is irrational, so two of the widths carry no exact form.
pub fn wye() -> JunctionGeometry {
    let h = 3.0f64.sqrt() / 2.0;
    let verts = vec![
        Vec2::new(0.0, 0.0),
        Vec2::new(1.0, 0.0),
        Vec2::new(0.5, h),
    ];
    let exact = vec![exact_pt((0, 1), (0, 1)), exact_pt((1, 1), (0, 1)), None];
    JunctionGeometry::build(verts, exact, &[0, 1, 2]).unwrap()
}
