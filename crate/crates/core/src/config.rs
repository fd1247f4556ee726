//! Run configuration: TOML files describing a junction and the knobs of the
//! analysis pipelines. Coordinates and sweep grids accept exact rationals
//! ("3/4", "0.25", integers) because the threshold-outlet count is decided
//! by exact width comparison wherever the inputs allow it.

use crate::error::{Error, Result};
use crate::geometry::{JunctionGeometry, Rat, Vec2};
use crate::presets;
use serde::Deserialize;
use std::path::{Path, PathBuf};

/// One numeric field that may carry an exact rational value.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Number {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Number {
    /// Floating value and, when the input was exact, the rational it came from.
    pub fn resolve(&self) -> Result<(f64, Option<Rat>)> {
        match self {
            Number::Int(i) => Ok((*i as f64, Some(Rat::new(*i as i128, 1)))),
            Number::Float(f) => Ok((*f, None)),
            Number::Text(s) => {
                let r = parse_rational(s)?;
                Ok((rat_to_f64(r), Some(r)))
            }
        }
    }
}

/// "p/q", a decimal string, or an integer string, with optional sign.
pub fn parse_rational(s: &str) -> Result<Rat> {
    let t = s.trim();
    let bad = || Error::Config(format!("cannot parse '{s}' as a rational number"));
    if let Some((p, q)) = t.split_once('/') {
        let num: i128 = p.trim().parse().map_err(|_| bad())?;
        let den: i128 = q.trim().parse().map_err(|_| bad())?;
        if den == 0 {
            return Err(Error::Config(format!("zero denominator in '{s}'")));
        }
        return Ok(Rat::new(num, den));
    }
    if let Some((w, f)) = t.split_once('.') {
        let sign = if w.trim_start().starts_with('-') { -1i128 } else { 1 };
        let whole: i128 = if w.is_empty() || w == "-" { 0 } else { w.parse().map_err(|_| bad())? };
        if f.is_empty() || !f.bytes().all(|b| b.is_ascii_digit()) || f.len() > 18 {
            return Err(bad());
        }
        let frac: i128 = f.parse().map_err(|_| bad())?;
        let den = 10i128.pow(f.len() as u32);
        return Ok(Rat::new(whole * den + sign * frac, den));
    }
    let num: i128 = t.parse().map_err(|_| bad())?;
    Ok(Rat::new(num, 1))
}

fn rat_to_f64(r: Rat) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawGeometry {
    preset: Option<String>,
    vertices: Option<Vec<[Number; 2]>>,
    outlets: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMesh {
    h: Option<f64>,
    refine: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModes {
    p: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAbsence {
    r_grid: Option<Vec<f64>>,
    k: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDetect {
    psi_rot: Option<f64>,
    tol_eig: Option<f64>,
    fields: Option<bool>,
    r_vis: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParamSweep {
    knob: String,
    grid: Vec<Number>,
    bisect_tol: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<String>,
    seed: Option<u64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    geometry: RawGeometry,
    mesh: Option<RawMesh>,
    modes: Option<RawModes>,
    absence: Option<RawAbsence>,
    detect: Option<RawDetect>,
    param_sweep: Option<RawParamSweep>,
    output: Option<RawOutput>,
}

/// Geometry parameter varied by `param-sweep`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Knob {
    /// Scale all x coordinates (node length for axis-aligned junctions).
    StretchX,
    /// Scale all y coordinates.
    StretchY,
    /// Scale one outlet edge about its midpoint (outlet index, not edge).
    OutletWidth(usize),
}

impl Knob {
    fn parse(s: &str) -> Result<Knob> {
        match s {
            "stretch-x" => Ok(Knob::StretchX),
            "stretch-y" => Ok(Knob::StretchY),
            _ => {
                if let Some(n) = s.strip_prefix("outlet-width:") {
                    let k: usize = n.parse().map_err(|_| {
                        Error::Config(format!("bad outlet index in knob '{s}'"))
                    })?;
                    Ok(Knob::OutletWidth(k))
                } else {
                    Err(Error::Config(format!(
                        "unknown knob '{s}' (expected stretch-x, stretch-y or outlet-width:N)"
                    )))
                }
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            Knob::StretchX => "stretch-x".into(),
            Knob::StretchY => "stretch-y".into(),
            Knob::OutletWidth(n) => format!("outlet-width:{n}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ParamSweepConfig {
    pub knob: Knob,
    /// Grid values with exact forms where given.
    pub grid: Vec<(f64, Option<Rat>)>,
    /// Width of the final bracketing interval for crossing refinement.
    pub bisect_tol: f64,
}

/// Geometry description kept re-buildable so knobs can be applied to it.
#[derive(Debug, Clone)]
pub struct GeometrySpec {
    pub label: String,
    vertices: Vec<Vec2>,
    exact: Vec<Option<(Rat, Rat)>>,
    outlet_edges: Vec<usize>,
}

impl GeometrySpec {
    pub fn from_geometry(label: &str, g: &JunctionGeometry) -> GeometrySpec {
        GeometrySpec {
            label: label.to_string(),
            vertices: g.node().to_vec(),
            exact: g.exact_vertices().to_vec(),
            outlet_edges: g.outlets().iter().map(|o| o.edge).collect(),
        }
    }

    pub fn build(&self) -> Result<JunctionGeometry> {
        JunctionGeometry::build(self.vertices.clone(), self.exact.clone(), &self.outlet_edges)
    }

    /// The junction with the knob applied at value t.
    pub fn with_knob(&self, knob: Knob, t: f64, t_exact: Option<Rat>) -> Result<JunctionGeometry> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::Config(format!("knob value must be positive, got {t}")));
        }
        let mut vertices = self.vertices.clone();
        let mut exact = self.exact.clone();
        let scale_exact = |v: Rat, m: Rat| t_exact.map(|tr| m + (v - m) * tr);
        match knob {
            Knob::StretchX => {
                for (v, e) in vertices.iter_mut().zip(exact.iter_mut()) {
                    v.x *= t;
                    *e = e.and_then(|(x, y)| scale_exact(x, Rat::new(0, 1)).map(|x| (x, y)));
                }
            }
            Knob::StretchY => {
                for (v, e) in vertices.iter_mut().zip(exact.iter_mut()) {
                    v.y *= t;
                    *e = e.and_then(|(x, y)| scale_exact(y, Rat::new(0, 1)).map(|y| (x, y)));
                }
            }
            Knob::OutletWidth(k) => {
                let &edge = self.outlet_edges.get(k).ok_or_else(|| {
                    Error::Config(format!("knob outlet index {k} out of range"))
                })?;
                let n = vertices.len();
                let (a, b) = (edge, (edge + 1) % n);
                let m = vertices[a].add(vertices[b]).scale(0.5);
                for i in [a, b] {
                    vertices[i] = m.add(vertices[i].sub(m).scale(t));
                }
                let me = match (exact[a], exact[b]) {
                    (Some((ax, ay)), Some((bx, by))) => {
                        let half = Rat::new(1, 2);
                        Some(((ax + bx) * half, (ay + by) * half))
                    }
                    _ => None,
                };
                for i in [a, b] {
                    exact[i] = match (exact[i], me) {
                        (Some((x, y)), Some((mx, my))) => scale_exact(x, mx)
                            .zip(scale_exact(y, my)),
                        _ => None,
                    };
                }
            }
        }
        JunctionGeometry::build(vertices, exact, &self.outlet_edges)
    }
}

/// Everything one pipeline invocation needs.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub geometry: GeometrySpec,
    pub h: f64,
    pub refine: usize,
    pub p_modes: usize,
    pub r_grid: Vec<f64>,
    pub k_curves: usize,
    pub psi_rot: f64,
    pub tol_eig: Option<f64>,
    pub export_fields: bool,
    pub r_vis: f64,
    pub param_sweep: Option<ParamSweepConfig>,
    pub out_dir: PathBuf,
    pub seed: u64,
}

fn preset_by_name(name: &str) -> Result<JunctionGeometry> {
    match name {
        "strip" => Ok(presets::strip()),
        "tee" => Ok(presets::tee()),
        "cross" => Ok(presets::cross()),
        "lbend" => Ok(presets::lbend()),
        "tee-narrow-stem" => Ok(presets::tee_narrow_stem()),
        "wye" => Ok(presets::wye()),
        _ => Err(Error::Config(format!(
            "unknown preset '{name}' (strip, tee, cross, lbend, tee-narrow-stem, wye)"
        ))),
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<RunConfig> {
        let raw: RawConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("config parse: {e}")))?;
        RunConfig::from_raw(raw)
    }

    pub fn from_path(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("reading {}: {e}", path.display())))?;
        RunConfig::from_toml_str(&text)
    }

    fn from_raw(raw: RawConfig) -> Result<RunConfig> {
        let geometry = match (&raw.geometry.preset, &raw.geometry.vertices) {
            (Some(name), None) => {
                if raw.geometry.outlets.is_some() {
                    return Err(Error::Config(
                        "a preset geometry does not take an outlet list".into(),
                    ));
                }
                GeometrySpec::from_geometry(name, &preset_by_name(name)?)
            }
            (None, Some(verts)) => {
                let outlets = raw.geometry.outlets.clone().ok_or_else(|| {
                    Error::Config("explicit geometry needs an outlets list".into())
                })?;
                let mut vertices = Vec::with_capacity(verts.len());
                let mut exact = Vec::with_capacity(verts.len());
                for v in verts {
                    let (x, xe) = v[0].resolve()?;
                    let (y, ye) = v[1].resolve()?;
                    vertices.push(Vec2::new(x, y));
                    exact.push(xe.zip(ye));
                }
                // build once to validate, keep the spec form
                let g = JunctionGeometry::build(vertices, exact, &outlets)?;
                GeometrySpec::from_geometry("custom", &g)
            }
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "give either a geometry preset or explicit vertices, not both".into(),
                ))
            }
            (None, None) => {
                return Err(Error::Config(
                    "geometry section needs a preset or explicit vertices".into(),
                ))
            }
        };

        let mesh = raw.mesh.unwrap_or(RawMesh { h: None, refine: None });
        let h = mesh.h.unwrap_or(0.125);
        let refine = mesh.refine.unwrap_or(2);
        if !(h > 0.0 && h < 1.0) {
            return Err(Error::Config(format!("mesh.h must lie in (0, 1), got {h}")));
        }
        if refine == 0 {
            return Err(Error::Config("mesh.refine must be at least 1".into()));
        }
        let p_modes = raw.modes.and_then(|m| m.p).unwrap_or(12);
        if p_modes == 0 {
            return Err(Error::Config("modes.p must be at least 1".into()));
        }

        let absence = raw.absence.unwrap_or(RawAbsence { r_grid: None, k: None });
        let r_grid = absence
            .r_grid
            .unwrap_or_else(|| vec![0.0, 0.5, 1.0, 2.0, 3.0, 4.0, 6.0, 8.0]);
        if r_grid.is_empty() || r_grid.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(Error::Config("absence.r_grid must be nonnegative and nonempty".into()));
        }
        let k_curves = absence.k.unwrap_or(3);
        if k_curves == 0 {
            return Err(Error::Config("absence.k must be at least 1".into()));
        }

        let detect = raw.detect.unwrap_or(RawDetect {
            psi_rot: None,
            tol_eig: None,
            fields: None,
            r_vis: None,
        });
        if let Some(t) = detect.tol_eig {
            if !(t > 0.0) {
                return Err(Error::Config(format!("detect.tol_eig must be positive, got {t}")));
            }
        }
        let r_vis = detect.r_vis.unwrap_or(5.0);
        if !(r_vis > 1.0) {
            return Err(Error::Config(format!("detect.r_vis must exceed 1, got {r_vis}")));
        }

        let param_sweep = match raw.param_sweep {
            None => None,
            Some(ps) => {
                let knob = Knob::parse(&ps.knob)?;
                if ps.grid.is_empty() {
                    return Err(Error::Config("param_sweep.grid is empty".into()));
                }
                let mut grid = Vec::with_capacity(ps.grid.len());
                for n in &ps.grid {
                    grid.push(n.resolve()?);
                }
                if grid.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return Err(Error::Config(
                        "param_sweep.grid must be strictly increasing".into(),
                    ));
                }
                let bisect_tol = ps.bisect_tol.unwrap_or(1e-3);
                if !(bisect_tol > 0.0) {
                    return Err(Error::Config("param_sweep.bisect_tol must be positive".into()));
                }
                Some(ParamSweepConfig { knob, grid, bisect_tol })
            }
        };

        let output = raw.output.unwrap_or(RawOutput { dir: None, seed: None });
        Ok(RunConfig {
            geometry,
            h,
            refine,
            p_modes,
            r_grid,
            k_curves,
            psi_rot: detect.psi_rot.unwrap_or(0.0),
            tol_eig: detect.tol_eig,
            export_fields: detect.fields.unwrap_or(false),
            r_vis,
            param_sweep,
            out_dir: PathBuf::from(output.dir.unwrap_or_else(|| "out".into())),
            seed: output.seed.unwrap_or(0x00C0_FFEE),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rationals_parse_in_all_shapes() {
        assert_eq!(parse_rational("3/4").unwrap(), Rat::new(3, 4));
        assert_eq!(parse_rational("-7/2").unwrap(), Rat::new(-7, 2));
        assert_eq!(parse_rational("0.25").unwrap(), Rat::new(1, 4));
        assert_eq!(parse_rational("-1.5").unwrap(), Rat::new(-3, 2));
        assert_eq!(parse_rational("3").unwrap(), Rat::new(3, 1));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("a/b").is_err());
        assert!(parse_rational("1.2.3").is_err());
    }

    #[test]
    fn preset_config_builds() {
        let cfg = RunConfig::from_toml_str(
            r#"
            [geometry]
            preset = "tee"
            [mesh]
            h = 0.25
            refine = 1
            [modes]
            p = 6
            "#,
        )
        .unwrap();
        assert_eq!(cfg.geometry.label, "tee");
        assert_eq!(cfg.p_modes, 6);
        let g = cfg.geometry.build().unwrap();
        assert_eq!(g.outlets().len(), 3);
        assert_eq!(cfg.seed, 0x00C0_FFEE);
    }

    #[test]
    fn explicit_geometry_with_rational_vertices() {
        let cfg = RunConfig::from_toml_str(
            r#"
            [geometry]
            vertices = [["0", "0"], ["1", "0"], ["1", "1"], ["0", "1"]]
            outlets = [1, 3]
            "#,
        )
        .unwrap();
        let g = cfg.geometry.build().unwrap();
        assert_eq!(g.outlets().len(), 2);
        assert_eq!(g.outlets()[0].width_sq_exact, Some(Rat::new(1, 1)));
    }

    #[test]
    fn bad_configs_are_rejected() {
        for (text, needle) in [
            ("", "geometry"),
            ("[geometry]\npreset = \"blob\"", "unknown preset"),
            ("[geometry]\npreset = \"tee\"\n[mesh]\nh = 0.0", "mesh.h"),
            ("[geometry]\npreset = \"tee\"\n[mesh]\nrefine = 0", "refine"),
            ("[geometry]\npreset = \"tee\"\n[modes]\np = 0", "modes.p"),
            (
                "[geometry]\npreset = \"tee\"\nvertices = [[\"0\",\"0\"]]",
                "not both",
            ),
            (
                "[geometry]\nvertices = [[\"0\",\"0\"],[\"1\",\"0\"],[\"1\",\"1\"]]",
                "outlets",
            ),
            (
                "[geometry]\npreset = \"tee\"\n[param_sweep]\nknob = \"wobble\"\ngrid = [1]",
                "unknown knob",
            ),
            (
                "[geometry]\npreset = \"tee\"\n[param_sweep]\nknob = \"stretch-x\"\ngrid = [2, 1]",
                "increasing",
            ),
            ("[geometry]\npreset = \"tee\"\n[detect]\nr_vis = 0.5", "r_vis"),
            ("[geomtry]\npreset = \"tee\"", "parse"),
        ] {
            let err = RunConfig::from_toml_str(text).unwrap_err().to_string();
            assert!(err.contains(needle), "{text:?} -> {err}");
        }
    }

    #[test]
    fn outlet_width_knob_scales_exactly() {
        let spec = GeometrySpec::from_geometry("t", &presets::tee_narrow_stem());
        let g = spec.with_knob(Knob::OutletWidth(1), 0.5, Some(Rat::new(1, 2))).unwrap();
        // stem edge halves from 1/2 to 1/4, symmetric about x = 1/2
        let o = &g.outlets()[1];
        assert_eq!(o.width_sq_exact, Some(Rat::new(1, 16)));
        // the arms keep exact width 1
        assert_eq!(g.outlets()[0].width_sq_exact, Some(Rat::new(1, 1)));
        assert_eq!(g.outlets()[2].width_sq_exact, Some(Rat::new(1, 1)));
        // inexact knob value drops the exact form but still scales
        let g2 = spec.with_knob(Knob::OutletWidth(1), 0.5, None).unwrap();
        assert!(g2.outlets()[1].width_sq_exact.is_none());
        assert!((g2.outlets()[1].width - 0.25).abs() < 1e-14);
    }

    #[test]
    fn stretch_knob_keeps_widths_of_transverse_outlets() {
        let spec = GeometrySpec::from_geometry("s", &presets::strip());
        let g = spec.with_knob(Knob::StretchX, 2.0, Some(Rat::new(2, 1))).unwrap();
        // outlets sit on vertical edges; stretching x leaves their widths
        for o in g.outlets() {
            assert_eq!(o.width_sq_exact, Some(Rat::new(1, 1)));
        }
        assert!((g.node_area() - 2.0).abs() < 1e-14);
        assert!(spec.with_knob(Knob::StretchX, 0.0, None).is_err());
        assert!(spec.with_knob(Knob::OutletWidth(9), 1.0, None).is_err());
    }
}
