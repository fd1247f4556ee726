//! Legacy-text VTK output for meshes and complex fields, plus the small
//! deterministic writers the pipelines share. Numbers are printed in fixed
//! scientific form so identical runs produce identical bytes.

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::scattering::Field;
use num_complex::Complex64;
use std::fmt::Write as _;
use std::path::Path;

/// Fixed-width scientific form; the one float format used in text outputs.
pub fn fnum(x: f64) -> String {
    if x == 0.0 {
        // avoid the -0 / 0 split producing distinct bytes
        "0.000000000e0".into()
    } else {
        format!("{x:.9e}")
    }
}

fn vtk_header(out: &mut String, title: &str, mesh: &Mesh) {
    out.push_str("# vtk DataFile Version 3.0\n");
    out.push_str(title);
    out.push('\n');
    out.push_str("ASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(out, "POINTS {} double", mesh.points.len());
    for p in &mesh.points {
        let _ = writeln!(out, "{} {} 0", fnum(p.x), fnum(p.y));
    }
    let nt = mesh.triangles.len();
    let _ = writeln!(out, "CELLS {nt} {}", 4 * nt);
    for t in &mesh.triangles {
        let _ = writeln!(out, "3 {} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(out, "CELL_TYPES {nt}");
    for _ in 0..nt {
        out.push_str("5\n");
    }
}

fn scalar_array(out: &mut String, name: &str, values: impl Iterator<Item = f64>) {
    let _ = writeln!(out, "SCALARS {name} double 1");
    out.push_str("LOOKUP_TABLE default\n");
    for v in values {
        out.push_str(&fnum(v));
        out.push('\n');
    }
}

/// Mesh alone, for `export-mesh`.
pub fn vtk_mesh(mesh: &Mesh, title: &str) -> String {
    let mut s = String::new();
    vtk_header(&mut s, title, mesh);
    s
}

/// Complex point data on a mesh: real, imaginary and modulus arrays.
pub fn vtk_complex(mesh: &Mesh, values: &[Complex64], title: &str) -> String {
    assert_eq!(values.len(), mesh.points.len());
    let mut s = String::new();
    vtk_header(&mut s, title, mesh);
    let _ = writeln!(s, "POINT_DATA {}", mesh.points.len());
    scalar_array(&mut s, "re_u", values.iter().map(|z| z.re));
    scalar_array(&mut s, "im_u", values.iter().map(|z| z.im));
    scalar_array(&mut s, "abs_u", values.iter().map(|z| z.norm()));
    s
}

/// Field on its own window mesh.
pub fn vtk_field(field: &Field, title: &str) -> String {
    vtk_complex(&field.mesh, &field.values, title)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}

/// Serialize with serde_json's stable field order and a trailing newline.
pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Config(format!("serializing {}: {e}", path.display())))?;
    text.push('\n');
    write_text(path, &text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_mesh;
    use crate::presets;

    #[test]
    fn mesh_vtk_is_well_formed_and_deterministic() {
        let dom = presets::strip().truncate(1.0).unwrap();
        let mesh = generate_mesh(&dom, 0.5).unwrap();
        let a = vtk_mesh(&mesh, "strip");
        let b = vtk_mesh(&mesh, "strip");
        assert_eq!(a, b);
        assert!(a.starts_with("# vtk DataFile Version 3.0\nstrip\nASCII\n"));
        let npts = mesh.points.len();
        assert!(a.contains(&format!("POINTS {npts} double")));
        assert!(a.contains(&format!("CELL_TYPES {}", mesh.triangles.len())));
        // one line per cell type plus everything else; sanity on line count
        let lines = a.lines().count();
        assert_eq!(lines, 6 + npts + 2 * mesh.triangles.len() + 1);
        assert!(!a.contains("-0.000000000e0"));
    }

    #[test]
    fn fnum_pins_the_zero_sign() {
        assert_eq!(fnum(0.0), fnum(-0.0));
        assert_eq!(fnum(1.0), "1.000000000e0");
    }
}
