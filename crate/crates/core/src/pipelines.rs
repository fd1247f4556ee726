//! The file-producing pipelines behind the CLI subcommands. Each one takes a
//! validated RunConfig, writes fixed-name outputs under the output
//! directory, and reports whether every verdict was conclusive.

use crate::absence::{self, SweepOptions, Verdict};
use crate::config::{Knob, RunConfig};
use crate::cross_section::threshold;
use crate::error::{Error, Result};
use crate::io::{fnum, vtk_complex, vtk_mesh, write_json, write_text};
use crate::mesh::generate_mesh;
use crate::scattering::{
    reconstruct_stabilizing, reconstruct_trapped, scattering_analysis, sweep_sample,
    DetectOptions, Field, ScatteringReport,
};
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;
use std::path::PathBuf;

/// Aggregate outcome for exit codes: 0 when completed, 2 when any verdict
/// was inconclusive; numerical failures surface as errors (3).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Completed,
    Inconclusive,
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf> {
    std::fs::create_dir_all(&cfg.out_dir)?;
    Ok(cfg.out_dir.clone())
}

fn csv(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut text = header.join(",");
    text.push('\n');
    for row in rows {
        debug_assert_eq!(row.len(), header.len());
        text.push_str(&row.join(","));
        text.push('\n');
    }
    text
}

fn detect_options(cfg: &RunConfig) -> DetectOptions {
    DetectOptions {
        h: cfg.h,
        refine: cfg.refine,
        p_modes: cfg.p_modes,
        psi_rot: cfg.psi_rot,
        tol_eig: cfg.tol_eig,
    }
}

// ---------------------------------------------------------------- sections

#[derive(Debug, Serialize)]
pub struct CrossSectionRow {
    pub outlet: usize,
    pub width: f64,
    pub p: usize,
    pub lambda: f64,
    /// |κ_p|; 1 on a threshold mode by the fictitious convention.
    pub kappa: f64,
    pub threshold_mode: bool,
}

#[derive(Debug, Serialize)]
pub struct CrossSectionReport {
    pub lambda_dagger: f64,
    pub n_threshold: usize,
    pub threshold_outlets: Vec<usize>,
    pub p_modes: usize,
    pub rows: Vec<CrossSectionRow>,
}

pub fn cmd_cross_section(cfg: &RunConfig) -> Result<RunStatus> {
    let dir = out_dir(cfg)?;
    let geom = cfg.geometry.build()?;
    let info = threshold(&geom, cfg.p_modes)?;

    let mut rows = Vec::new();
    for (n, spec) in info.spectra.iter().enumerate() {
        for (i, &lambda) in spec.lambdas.iter().enumerate() {
            let kappa = &info.kappa[n][i];
            rows.push(CrossSectionRow {
                outlet: n,
                width: spec.width,
                p: i + 1,
                lambda,
                kappa: kappa.abs(),
                threshold_mode: kappa.is_threshold(),
            });
        }
    }
    let report = CrossSectionReport {
        lambda_dagger: info.lambda_dagger,
        n_threshold: info.n_threshold,
        threshold_outlets: info.threshold_outlets.clone(),
        p_modes: cfg.p_modes,
        rows,
    };

    let table: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.outlet.to_string(),
                fnum(r.width),
                r.p.to_string(),
                fnum(r.lambda),
                fnum(r.kappa),
                (r.threshold_mode as u8).to_string(),
            ]
        })
        .collect();
    write_text(
        &dir.join("cross_section.csv"),
        &csv(&["outlet", "width", "p", "lambda", "kappa", "threshold_mode"], &table),
    )?;
    write_json(&dir.join("cross_section.json"), &report)?;
    log::info!(
        "cross-section: lambda_dagger = {:.9}, n_threshold = {}",
        report.lambda_dagger,
        report.n_threshold
    );
    Ok(RunStatus::Completed)
}

// ------------------------------------------------------------------ absence

pub fn cmd_absence(cfg: &RunConfig) -> Result<RunStatus> {
    let dir = out_dir(cfg)?;
    let geom = cfg.geometry.build()?;
    let opts = SweepOptions {
        r_grid: cfg.r_grid.clone(),
        h: cfg.h,
        refine: cfg.refine,
        k: cfg.k_curves,
        seed: cfg.seed,
    };
    let report = absence::analyze(&geom, &opts)?;

    let mut header: Vec<String> = vec!["r".into()];
    for k in 1..=cfg.k_curves {
        header.push(format!("mu{k}"));
        header.push(format!("bar{k}"));
    }
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let rows: Vec<Vec<String>> = report
        .sweep
        .points
        .iter()
        .map(|pt| {
            let mut row = vec![fnum(pt.r)];
            for (v, b) in pt.values.iter().zip(&pt.bars) {
                row.push(fnum(*v));
                row.push(fnum(*b));
            }
            row
        })
        .collect();
    write_text(&dir.join("absence.csv"), &csv(&header_refs, &rows))?;
    write_json(&dir.join("absence.json"), &report)?;

    match &report.verdict {
        Verdict::Absent { r_star, mu, bar } => {
            log::info!("absence: ABSENT from R* = {r_star} (mu = {mu:.9}, bar = {bar:.2e})");
            Ok(RunStatus::Completed)
        }
        Verdict::Inconclusive { reason } => {
            log::warn!("absence: INCONCLUSIVE ({reason})");
            Ok(RunStatus::Inconclusive)
        }
    }
}

// ------------------------------------------------------------------- detect

#[derive(Debug, Serialize)]
#[serde(tag = "status")]
pub enum DetectOutcome {
    #[serde(rename = "COMPLETED")]
    Completed { report: ScatteringReport },
    #[serde(rename = "INCONCLUSIVE")]
    Inconclusive { reason: String, requested_tol: f64, achievable: f64 },
}

/// Field values on a fresh mesh over Ω(r_vis); the window solve is P1
/// interpolated and the tails are evaluated in closed form.
fn field_on(geom: &crate::geometry::JunctionGeometry, field: &Field, r_vis: f64, h: f64) -> Result<(crate::mesh::Mesh, Vec<Complex64>)> {
    let domain = geom.truncate(r_vis)?;
    let mesh = generate_mesh(&domain, h)?;
    let values: Vec<Complex64> = mesh
        .points
        .iter()
        .map(|&p| field.eval(p).unwrap_or(Complex64::ZERO))
        .collect();
    Ok((mesh, values))
}

pub fn cmd_detect(cfg: &RunConfig) -> Result<RunStatus> {
    let dir = out_dir(cfg)?;
    let geom = cfg.geometry.build()?;
    let opts = detect_options(cfg);
    let (report, art) = match scattering_analysis(&geom, &opts) {
        Ok(pair) => pair,
        Err(Error::ToleranceUnresolvable { requested, achievable }) => {
            let outcome = DetectOutcome::Inconclusive {
                reason: "an eigenvalue falls in the ambiguous band around a count target"
                    .into(),
                requested_tol: requested,
                achievable,
            };
            write_json(&dir.join("detect.json"), &outcome)?;
            log::warn!(
                "detect: INCONCLUSIVE (requested tol {requested:.2e}, achievable {achievable:.2e})"
            );
            return Ok(RunStatus::Inconclusive);
        }
        Err(e) => return Err(e),
    };

    log::info!(
        "detect: d_tr = {}, d_st = {}, d_bd = {} (consistent: {})",
        report.d_tr,
        report.d_st,
        report.d_bd,
        report.counts_consistent
    );

    if cfg.export_fields {
        for i in 0..report.d_tr {
            let field = reconstruct_trapped(&art, i)?;
            let (mesh, values) = field_on(&geom, &field, cfg.r_vis, cfg.h)?;
            let name = format!("field_trapped_{i}.vtk");
            write_text(&dir.join(&name), &vtk_complex(&mesh, &values, "trapped mode"))?;
        }
        for i in 0..report.d_st {
            let field = reconstruct_stabilizing(&art, &opts, i)?;
            let (mesh, values) = field_on(&geom, &field, cfg.r_vis, cfg.h)?;
            let name = format!("field_stabilizing_{i}.vtk");
            write_text(&dir.join(&name), &vtk_complex(&mesh, &values, "stabilizing solution"))?;
        }
    }
    write_json(&dir.join("detect.json"), &DetectOutcome::Completed { report })?;
    Ok(RunStatus::Completed)
}

// -------------------------------------------------------------- param sweep

/// Largest per-branch phase step the matching will accept before declaring
/// the grid too coarse to track.
const MAX_PHASE_STEP: f64 = 1.0;
/// Floor under the per-branch phase tolerance.
const PHASE_TOL_FLOOR: f64 = 1e-6;

#[derive(Debug, Serialize)]
pub struct Crossing {
    pub branch: usize,
    /// "on_grid" when a grid point itself sits on π, "bisected" otherwise.
    pub kind: String,
    pub t_lo: f64,
    pub t_hi: f64,
    pub t_star: f64,
    /// |phase − π| at t_star.
    pub residual: f64,
    /// Phase tolerance in force at t_star.
    pub tol: f64,
}

#[derive(Debug, Serialize)]
pub struct ParamSweepReport {
    pub knob: String,
    pub n_threshold: usize,
    pub bisect_tol: f64,
    pub grid: Vec<f64>,
    /// phases[i][k]: phase of branch k at grid point i, in [0, 2π).
    pub phases: Vec<Vec<f64>>,
    pub moduli: Vec<Vec<f64>>,
    /// Per-point per-branch phase tolerance from the fine↔coarse movement.
    pub phase_tols: Vec<Vec<f64>>,
    pub unitarity_fine: Vec<f64>,
    /// Branches sitting on π at every grid point.
    pub resonant_branches: Vec<usize>,
    pub crossings: Vec<Crossing>,
}

fn phase_of(z: Complex64) -> f64 {
    let a = z.arg();
    if a < 0.0 {
        a + 2.0 * PI
    } else {
        a
    }
}

/// (b − a) wrapped to (−π, π].
fn circ_delta(a: f64, b: f64) -> f64 {
    let mut d = (b - a) % (2.0 * PI);
    if d <= -PI {
        d += 2.0 * PI;
    } else if d > PI {
        d -= 2.0 * PI;
    }
    d
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 1 {
        return vec![vec![0]];
    }
    let mut out = Vec::new();
    for sub in permutations(n - 1) {
        for pos in 0..n {
            let mut p = sub.clone();
            p.insert(pos, n - 1);
            out.push(p);
        }
    }
    out
}

/// perm[k] = index into `next` assigned to branch k, minimizing total
/// circular movement.
fn best_assignment(prev: &[f64], next: &[f64]) -> Vec<usize> {
    let n = prev.len();
    let mut best = (f64::INFINITY, Vec::new());
    for perm in permutations(n) {
        let cost: f64 = (0..n)
            .map(|k| circ_delta(prev[k], next[perm[k]]).abs())
            .sum();
        if cost < best.0 {
            best = (cost, perm);
        }
    }
    best.1
}

fn nearest_phase(target: f64, pool: &[f64]) -> f64 {
    pool.iter()
        .copied()
        .min_by(|a, b| {
            circ_delta(target, *a)
                .abs()
                .partial_cmp(&circ_delta(target, *b).abs())
                .unwrap()
        })
        .unwrap()
}

struct SweepPoint {
    phases: Vec<f64>,
    moduli: Vec<f64>,
    /// Per-branch tolerance: how far the phase still moves between levels.
    tols: Vec<f64>,
    unitarity_fine: f64,
}

fn sweep_point(cfg: &RunConfig, knob: Knob, t: f64, t_exact: Option<crate::geometry::Rat>) -> Result<SweepPoint> {
    let geom = cfg.geometry.with_knob(knob, t, t_exact)?;
    let sample = sweep_sample(&geom, &detect_options(cfg))?;
    let eigs = crate::linalg::dense::eigenvalues(&sample.s);
    let ph_f: Vec<f64> = crate::linalg::dense::eigenvalues(&sample.s_fine)
        .iter()
        .map(|z| phase_of(*z))
        .collect();
    let ph_c: Vec<f64> = crate::linalg::dense::eigenvalues(&sample.s_coarse)
        .iter()
        .map(|z| phase_of(*z))
        .collect();
    let mut triples: Vec<(f64, f64, f64)> = eigs
        .iter()
        .map(|z| {
            let phase = phase_of(*z);
            let pf = nearest_phase(phase, &ph_f);
            let pc = nearest_phase(pf, &ph_c);
            let tol = PHASE_TOL_FLOOR.max(circ_delta(pf, pc).abs());
            (phase, z.norm(), tol)
        })
        .collect();
    triples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(SweepPoint {
        phases: triples.iter().map(|p| p.0).collect(),
        moduli: triples.iter().map(|p| p.1).collect(),
        tols: triples.iter().map(|p| p.2).collect(),
        unitarity_fine: sample.unitarity_fine,
    })
}

/// Sign of the offset from π once matched along the branch: −1 below, +1
/// above, 0 within the resonance tolerance.
fn pi_sign(x: f64, tol: f64) -> i8 {
    if (x - PI).abs() <= tol {
        0
    } else if x < PI {
        -1
    } else {
        1
    }
}

/// Bisect a sign change of phase−π on one branch. `phi_lo` is the tracked
/// phase at `lo`; each probe matches the nearest eigenvalue phase to it.
fn bisect_crossing(
    cfg: &RunConfig,
    knob: Knob,
    branch: usize,
    sign_lo: i8,
    mut lo: f64,
    mut phi_lo: f64,
    mut hi: f64,
    gap_tol: f64,
) -> Result<Crossing> {
    let mut residual = (phi_lo - PI).abs();
    let mut tol = PHASE_TOL_FLOOR;
    for _ in 0..60 {
        if hi - lo <= gap_tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let probe = sweep_point(cfg, knob, mid, None)?;
        let (j, _) = probe
            .phases
            .iter()
            .enumerate()
            .min_by(|a, b| {
                circ_delta(phi_lo, *a.1)
                    .abs()
                    .partial_cmp(&circ_delta(phi_lo, *b.1).abs())
                    .unwrap()
            })
            .ok_or(Error::PhaseTrackingLost { at: mid, b1: branch, b2: branch })?;
        let psi = phi_lo + circ_delta(phi_lo, probe.phases[j]);
        residual = (psi - PI).abs();
        tol = probe.tols[j];
        match pi_sign(psi, tol) {
            0 => {
                return Ok(Crossing {
                    branch,
                    kind: "bisected".into(),
                    t_lo: lo,
                    t_hi: hi,
                    t_star: mid,
                    residual,
                    tol,
                });
            }
            s if s == sign_lo => {
                lo = mid;
                phi_lo = probe.phases[j];
            }
            _ => hi = mid,
        }
    }
    Ok(Crossing {
        branch,
        kind: "bisected".into(),
        t_lo: lo,
        t_hi: hi,
        t_star: 0.5 * (lo + hi),
        residual,
        tol,
    })
}

pub fn cmd_param_sweep(cfg: &RunConfig) -> Result<RunStatus> {
    let dir = out_dir(cfg)?;
    let sweep = cfg
        .param_sweep
        .as_ref()
        .ok_or_else(|| Error::Config("param-sweep needs a [param_sweep] section".into()))?;
    let knob = sweep.knob;

    // the degenerate single-point grid is just a detection run at that value
    if sweep.grid.len() == 1 {
        let (t, te) = sweep.grid[0];
        let geom = cfg.geometry.with_knob(knob, t, te)?;
        let mut at = cfg.clone();
        at.geometry = crate::config::GeometrySpec::from_geometry(&cfg.geometry.label, &geom);
        return cmd_detect(&at);
    }

    let mut points = Vec::with_capacity(sweep.grid.len());
    let first = sweep_point(cfg, knob, sweep.grid[0].0, sweep.grid[0].1)?;
    let n = first.phases.len();
    points.push(first);
    for &(t, te) in &sweep.grid[1..] {
        let pt = sweep_point(cfg, knob, t, te)?;
        if pt.phases.len() != n {
            return Err(Error::Config(format!(
                "threshold multiplicity changes along the sweep ({} -> {} branches at {t}); split the grid where the widths tie",
                n,
                pt.phases.len()
            )));
        }
        points.push(pt);
    }

    // track: reorder every point to follow the previous one
    let mut phases: Vec<Vec<f64>> = vec![points[0].phases.clone()];
    let mut moduli: Vec<Vec<f64>> = vec![points[0].moduli.clone()];
    let mut tols: Vec<Vec<f64>> = vec![points[0].tols.clone()];
    for i in 1..points.len() {
        let prev = &phases[i - 1];
        let perm = best_assignment(prev, &points[i].phases);
        let new_phase: Vec<f64> = (0..n).map(|k| points[i].phases[perm[k]]).collect();
        for (k, np) in new_phase.iter().enumerate() {
            let step = circ_delta(prev[k], *np).abs();
            if step > MAX_PHASE_STEP {
                let b2 = (0..n)
                    .filter(|&j| j != k)
                    .min_by(|&a, &b| {
                        circ_delta(prev[a], *np)
                            .abs()
                            .partial_cmp(&circ_delta(prev[b], *np).abs())
                            .unwrap()
                    })
                    .unwrap_or(k);
                return Err(Error::PhaseTrackingLost { at: sweep.grid[i].0, b1: k, b2 });
            }
        }
        moduli.push((0..n).map(|k| points[i].moduli[perm[k]]).collect());
        tols.push((0..n).map(|k| points[i].tols[perm[k]]).collect());
        phases.push(new_phase);
    }

    // crossings of π per branch: grid points sitting on it, then strict sign
    // flips refined by bisection
    let mut crossings = Vec::new();
    let mut resonant_branches = Vec::new();
    for k in 0..n {
        let signs: Vec<i8> = (0..points.len())
            .map(|i| {
                let psi = if i == 0 {
                    phases[0][k]
                } else {
                    phases[i - 1][k] + circ_delta(phases[i - 1][k], phases[i][k])
                };
                pi_sign(psi, tols[i][k])
            })
            .collect();
        if signs.iter().all(|&s| s == 0) {
            resonant_branches.push(k);
            continue;
        }
        for (i, &s) in signs.iter().enumerate() {
            if s == 0 {
                crossings.push(Crossing {
                    branch: k,
                    kind: "on_grid".into(),
                    t_lo: sweep.grid[i].0,
                    t_hi: sweep.grid[i].0,
                    t_star: sweep.grid[i].0,
                    residual: circ_delta(PI, phases[i][k]).abs(),
                    tol: tols[i][k],
                });
            }
        }
        for i in 0..points.len() - 1 {
            if signs[i] as i16 * signs[i + 1] as i16 == -1 {
                crossings.push(bisect_crossing(
                    cfg,
                    knob,
                    k,
                    signs[i],
                    sweep.grid[i].0,
                    phases[i][k],
                    sweep.grid[i + 1].0,
                    sweep.bisect_tol,
                )?);
            }
        }
    }

    let report = ParamSweepReport {
        knob: knob.label(),
        n_threshold: n,
        bisect_tol: sweep.bisect_tol,
        grid: sweep.grid.iter().map(|g| g.0).collect(),
        phases,
        moduli,
        phase_tols: tols,
        unitarity_fine: points.iter().map(|p| p.unitarity_fine).collect(),
        resonant_branches,
        crossings,
    };

    let mut header: Vec<String> = vec!["param".into()];
    for k in 0..n {
        header.push(format!("phase{k}"));
    }
    for k in 0..n {
        header.push(format!("mod{k}"));
    }
    for k in 0..n {
        header.push(format!("tol{k}"));
    }
    header.push("unitarity_fine".into());
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let rows: Vec<Vec<String>> = (0..report.grid.len())
        .map(|i| {
            let mut row = vec![fnum(report.grid[i])];
            row.extend(report.phases[i].iter().map(|&x| fnum(x)));
            row.extend(report.moduli[i].iter().map(|&x| fnum(x)));
            row.extend(report.phase_tols[i].iter().map(|&x| fnum(x)));
            row.push(fnum(report.unitarity_fine[i]));
            row
        })
        .collect();
    write_text(&dir.join("param_sweep.csv"), &csv(&header_refs, &rows))?;
    write_json(&dir.join("param_sweep.json"), &report)?;
    log::info!(
        "param-sweep: {} branches, {} crossing(s), {} branch(es) resonant throughout",
        report.n_threshold,
        report.crossings.len(),
        report.resonant_branches.len()
    );
    Ok(RunStatus::Completed)
}

// -------------------------------------------------------------- export-mesh

pub fn cmd_export_mesh(cfg: &RunConfig) -> Result<RunStatus> {
    let dir = out_dir(cfg)?;
    let geom = cfg.geometry.build()?;
    let domain = geom.truncate(cfg.r_vis)?;
    let mut mesh = generate_mesh(&domain, cfg.h)?;
    for _ in 0..cfg.refine.saturating_sub(1) {
        mesh = mesh.refine();
    }
    log::info!(
        "export-mesh: {} points, {} triangles (h = {:.4})",
        mesh.points.len(),
        mesh.triangles.len(),
        mesh.h
    );
    write_text(&dir.join("mesh.vtk"), &vtk_mesh(&mesh, "junction mesh"))?;
    Ok(RunStatus::Completed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RunConfig;
    use std::f64::consts::PI;
    use std::path::Path;

    fn cfg_with(out: &Path, body: &str) -> RunConfig {
        let mut cfg = RunConfig::from_toml_str(body).unwrap();
        cfg.out_dir = out.to_path_buf();
        cfg
    }

    #[test]
    fn cross_section_writes_table_and_report() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = cfg_with(
            tmp.path(),
            "[geometry]\npreset = \"tee\"\n[modes]\np = 5\n",
        );
        assert_eq!(cmd_cross_section(&cfg).unwrap(), RunStatus::Completed);
        let text = std::fs::read_to_string(tmp.path().join("cross_section.csv")).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "outlet,width,p,lambda,kappa,threshold_mode"
        );
        assert_eq!(lines.count(), 15); // 3 outlets x 5 modes
        let json: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(tmp.path().join("cross_section.json")).unwrap())
                .unwrap();
        assert_eq!(json["n_threshold"], 3);
        assert!((json["lambda_dagger"].as_f64().unwrap() - PI * PI).abs() < 1e-12);
        assert_eq!(json["rows"][0]["p"], 1);
        assert_eq!(json["rows"][0]["threshold_mode"], true);
    }

    #[test]
    fn absence_pipeline_on_strip_is_inconclusive() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = cfg_with(
            tmp.path(),
            "[geometry]\npreset = \"strip\"\n[mesh]\nh = 0.25\nrefine = 1\n[absence]\nr_grid = [0, 1, 2]\nk = 2\n",
        );
        assert_eq!(cmd_absence(&cfg).unwrap(), RunStatus::Inconclusive);
        let text = std::fs::read_to_string(tmp.path().join("absence.csv")).unwrap();
        assert!(text.starts_with("r,mu1,bar1,mu2,bar2\n"));
        assert_eq!(text.lines().count(), 4);
        let json: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(tmp.path().join("absence.json")).unwrap())
                .unwrap();
        assert!(json["verdict"]["Inconclusive"]["reason"].is_string());
    }

    #[test]
    fn detect_pipeline_writes_completed_report() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = cfg_with(
            tmp.path(),
            "[geometry]\npreset = \"strip\"\n[mesh]\nh = 0.25\nrefine = 1\n[modes]\np = 3\n",
        );
        assert_eq!(cmd_detect(&cfg).unwrap(), RunStatus::Completed);
        let json: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(tmp.path().join("detect.json")).unwrap())
                .unwrap();
        assert_eq!(json["status"], "COMPLETED");
        assert_eq!(json["report"]["d_st"], 1);
        assert_eq!(json["report"]["d_tr"], 0);
    }

    #[test]
    fn param_sweep_tracks_the_persistent_strip_resonance() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = cfg_with(
            tmp.path(),
            "[geometry]\npreset = \"strip\"\n[mesh]\nh = 0.125\nrefine = 1\n[modes]\np = 4\n[param_sweep]\nknob = \"stretch-y\"\ngrid = [\"4/5\", 1, \"5/4\"]\n",
        );
        assert_eq!(cmd_param_sweep(&cfg).unwrap(), RunStatus::Completed);
        let json: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(tmp.path().join("param_sweep.json")).unwrap())
                .unwrap();
        assert_eq!(json["n_threshold"], 2);
        // one branch pinned at -1 for every width of the straight strip
        let resonant = json["resonant_branches"].as_array().unwrap();
        assert_eq!(resonant.len(), 1);
        assert_eq!(json["crossings"].as_array().unwrap().len(), 0);
        let text = std::fs::read_to_string(tmp.path().join("param_sweep.csv")).unwrap();
        assert!(text.starts_with("param,phase0,phase1,mod0,mod1,tol0,tol1,unitarity_fine\n"));
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn export_mesh_writes_vtk() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = cfg_with(
            tmp.path(),
            "[geometry]\npreset = \"lbend\"\n[mesh]\nh = 0.25\nrefine = 1\n[detect]\nr_vis = 2.0\n",
        );
        assert_eq!(cmd_export_mesh(&cfg).unwrap(), RunStatus::Completed);
        let text = std::fs::read_to_string(tmp.path().join("mesh.vtk")).unwrap();
        assert!(text.starts_with("# vtk DataFile Version 3.0\n"));
        assert!(text.contains("CELL_TYPES"));
    }

    #[test]
    fn circular_phase_arithmetic() {
        assert!((circ_delta(0.1, 2.0 * PI - 0.1) - (-0.2)).abs() < 1e-12);
        assert!((circ_delta(2.0 * PI - 0.1, 0.1) - 0.2).abs() < 1e-12);
        let perm = best_assignment(&[0.2, 3.0], &[3.1, 0.3]);
        assert_eq!(perm, vec![1, 0]);
    }
}
