//! Absence criterion for threshold resonances.
//!
//! Truncate the junction at distance R, put Neumann conditions on the cut
//! faces, and watch the low eigenvalues mu_k^R as R grows. Curves below the
//! threshold increase monotonically; the junction has no bounded threshold
//! solution exactly when, for some R, the (kappa+1)-th curve climbs past the
//! threshold, where kappa counts the genuine discrete eigenvalues. The sweep
//! certifies ABSENT when that happens beyond the discretization error bars
//! and reports INCONCLUSIVE otherwise; it never claims existence, which is
//! the scattering module's job.
//!
//! Every eigenvalue here is computed on two nested refinement levels and
//! Richardson-extrapolated; the error bar is the distance from the fine
//! level to the extrapolated value.

use crate::cross_section::{phi, threshold};
use crate::error::{Error, Result};
use crate::fem::{
    assemble_mass, assemble_stiffness, face_gram, DofMap, Elimination, FaceGram,
};
use crate::geometry::JunctionGeometry;
use crate::linalg::sparse::Csr;
use crate::mesh::{generate_mesh, Mesh};
use crate::spectral::{constrained_eigenpairs, smallest_eigenpairs, EigenOptions, EigenResult};
use rayon::prelude::*;
use serde::Serialize;

/// Eigenvalues of one truncated problem, extrapolated over the two finest
/// refinement levels.
#[derive(Debug, Clone, Serialize)]
pub struct MixedPoint {
    pub r: f64,
    /// Richardson-extrapolated
    pub values: Vec<f64>,
    /// |fine - extrapolated|
    pub bars: Vec<f64>,
    pub fine: Vec<f64>,
    pub coarse: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum CurveLimit {
    /// the curve passes the threshold on the grid, beyond its error bar
    Exceeds { first_r: f64, margin: f64 },
    /// extrapolated R -> infinity limit of a curve that stays below
    Limit { value: f64, bar: f64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct RSweep {
    pub lambda_dagger: f64,
    pub r_grid: Vec<f64>,
    pub points: Vec<MixedPoint>,
    /// one per eigenvalue curve
    pub limits: Vec<CurveLimit>,
    /// Dirichlet-truncated eigenvalues at the largest R: upper bounds for
    /// the discrete spectrum, the cross-check for the kappa estimate
    pub dirichlet_upper: MixedPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Verdict {
    Absent { r_star: f64, mu: f64, bar: f64 },
    Inconclusive { reason: String },
}

#[derive(Debug, Clone, Serialize)]
pub struct AbsenceReport {
    pub sweep: RSweep,
    pub kappa: Option<usize>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepOptions {
    pub r_grid: Vec<f64>,
    pub h: f64,
    /// nested refinements of the base mesh; the two finest levels feed the
    /// extrapolation, so this must be >= 1
    pub refine: usize,
    /// number of eigenvalue curves
    pub k: usize,
    pub seed: u64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        // exponential convergence in R makes a long tail wasteful
        SweepOptions {
            r_grid: vec![0.0, 0.5, 1.0, 2.0, 3.0, 4.0, 6.0, 8.0],
            h: 0.125,
            refine: 2,
            k: 3,
            seed: 0x00C0FFEE,
        }
    }
}

struct Level {
    dofs: DofMap,
    stiffness: Csr,
    mass: Csr,
}

fn discretize(mesh: &Mesh, domain: &crate::geometry::TruncatedDomain, elim: Elimination) -> Level {
    let dofs = DofMap::build(mesh, domain, elim);
    let stiffness = assemble_stiffness(mesh, &dofs);
    let mass = assemble_mass(mesh, &dofs);
    Level { dofs, stiffness, mass }
}

/// The two finest nested levels for the truncation at r.
fn levels(
    geom: &JunctionGeometry,
    r: f64,
    h: f64,
    refine: usize,
    elim: Elimination,
) -> Result<(Level, Level)> {
    if refine == 0 {
        return Err(Error::Config(
            "error bars need at least one refinement level".into(),
        ));
    }
    let domain = geom.truncate(r)?;
    let mut mesh = generate_mesh(&domain, h)?;
    for _ in 0..refine.saturating_sub(1) {
        mesh = mesh.refine();
    }
    let fine_mesh = mesh.refine();
    Ok((
        discretize(&mesh, &domain, elim),
        discretize(&fine_mesh, &domain, elim),
    ))
}

fn richardson(fine: &[f64], coarse: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let values: Vec<f64> = fine
        .iter()
        .zip(coarse)
        .map(|(f, c)| f + (f - c) / 3.0)
        .collect();
    let bars: Vec<f64> = fine
        .iter()
        .zip(&values)
        .map(|(f, v)| (f - v).abs())
        .collect();
    (values, bars)
}

fn eigen_point(
    geom: &JunctionGeometry,
    r: f64,
    h: f64,
    refine: usize,
    k: usize,
    seed: u64,
    elim: Elimination,
) -> Result<MixedPoint> {
    let (coarse, fine) = levels(geom, r, h, refine, elim)?;
    let mut opts = EigenOptions::new(k);
    opts.seed = seed;
    let ec = smallest_eigenpairs(&coarse.stiffness, &coarse.mass, &opts)?;
    let ef = smallest_eigenpairs(&fine.stiffness, &fine.mass, &opts)?;
    let (values, bars) = richardson(&ef.values, &ec.values);
    Ok(MixedPoint { r, values, bars, fine: ef.values, coarse: ec.values })
}

/// First k eigenvalues of the truncated problem with Neumann cut faces.
pub fn mixed_eigenvalues(
    geom: &JunctionGeometry,
    r: f64,
    h: f64,
    refine: usize,
    k: usize,
    seed: u64,
) -> Result<MixedPoint> {
    eigen_point(geom, r, h, refine, k, seed, Elimination::mixed())
}

/// Same truncation with Dirichlet cut faces. These decrease in R and bound
/// the discrete eigenvalues from above (extension by zero is admissible for
/// the infinite problem), so together with the Neumann values they bracket.
pub fn dirichlet_eigenvalues(
    geom: &JunctionGeometry,
    r: f64,
    h: f64,
    refine: usize,
    k: usize,
    seed: u64,
) -> Result<MixedPoint> {
    eigen_point(geom, r, h, refine, k, seed, Elimination::dirichlet())
}

/// Monotonicity of sub-threshold curves across the grid (the perturbation
/// lemma behind the sweep). A decrease beyond the combined bars means the
/// discretization cannot be trusted.
fn check_monotone(points: &[MixedPoint], lambda_dagger: f64) -> Result<()> {
    let k = points.first().map_or(0, |p| p.values.len());
    for curve in 0..k {
        for i in 0..points.len().saturating_sub(1) {
            let (prev, next) = (&points[i], &points[i + 1]);
            let (a, b) = (prev.values[curve], next.values[curve]);
            if a >= lambda_dagger {
                continue;
            }
            let bar = prev.bars[curve] + next.bars[curve];
            if b < a - bar {
                return Err(Error::MonotonicityViolation {
                    k: curve + 1,
                    r_prev: prev.r,
                    r_next: next.r,
                    prev: a,
                    next: b,
                    bar,
                });
            }
        }
    }
    Ok(())
}

/// Tail limit of one curve: fit mu(R) ~ mu_inf - c e^{-2 alpha R} through
/// the last three points. Needs the last two grid spacings equal for the
/// closed-form ratio; otherwise, or when the tail is flat or noisy, fall
/// back to the last value with the tail variation folded into the bar.
fn tail_limit(r_grid: &[f64], mu: &[f64], bars: &[f64]) -> (f64, f64) {
    let n = r_grid.len();
    let (r1, r2, r3) = (r_grid[n - 3], r_grid[n - 2], r_grid[n - 1]);
    let (m1, m2, m3) = (mu[n - 3], mu[n - 2], mu[n - 1]);
    let bar3 = bars[n - 1];
    let (d1, d2) = (m2 - m1, m3 - m2);
    let equal_spacing = ((r3 - r2) - (r2 - r1)).abs() <= 1e-9 * (r3 - r1);
    let scale = m3.abs().max(1.0);
    if equal_spacing && d1.abs() > 1e-13 * scale {
        let q = d2 / d1;
        if q > 0.0 && q < 0.95 {
            let corr = d2 * q / (1.0 - q);
            return (m3 + corr, bar3 + 0.25 * corr.abs());
        }
    }
    (m3, bar3 + d2.abs())
}

fn classify_curves(
    r_grid: &[f64],
    points: &[MixedPoint],
    lambda_dagger: f64,
) -> Vec<CurveLimit> {
    let k = points.first().map_or(0, |p| p.values.len());
    (0..k)
        .map(|curve| {
            for (i, p) in points.iter().enumerate() {
                if p.values[curve] - p.bars[curve] > lambda_dagger {
                    return CurveLimit::Exceeds {
                        first_r: r_grid[i],
                        margin: p.values[curve] - lambda_dagger,
                    };
                }
            }
            let mu: Vec<f64> = points.iter().map(|p| p.values[curve]).collect();
            let bars: Vec<f64> = points.iter().map(|p| p.bars[curve]).collect();
            let (value, bar) = tail_limit(r_grid, &mu, &bars);
            CurveLimit::Limit { value, bar }
        })
        .collect()
}

pub fn r_sweep(geom: &JunctionGeometry, opts: &SweepOptions) -> Result<RSweep> {
    if opts.r_grid.len() < 3 {
        return Err(Error::Config("R grid needs at least 3 points".into()));
    }
    if opts.r_grid.windows(2).any(|w| w[1] <= w[0]) || opts.r_grid[0] < 0.0 {
        return Err(Error::Config("R grid must be ascending and nonnegative".into()));
    }
    if opts.k == 0 {
        return Err(Error::Config("need at least one eigenvalue curve".into()));
    }
    let info = threshold(geom, 1)?;
    let lambda_dagger = info.lambda_dagger;

    let points: Vec<MixedPoint> = opts
        .r_grid
        .par_iter()
        .map(|&r| mixed_eigenvalues(geom, r, opts.h, opts.refine, opts.k, opts.seed))
        .collect::<Result<Vec<_>>>()?;

    check_monotone(&points, lambda_dagger)?;
    let limits = classify_curves(&opts.r_grid, &points, lambda_dagger);
    let r_max = *opts.r_grid.last().unwrap();
    let dirichlet_upper =
        dirichlet_eigenvalues(geom, r_max, opts.h, opts.refine, opts.k, opts.seed)?;

    Ok(RSweep { lambda_dagger, r_grid: opts.r_grid.clone(), points, limits, dirichlet_upper })
}

/// Count the discrete eigenvalues below the threshold. A curve counts when
/// its extrapolated limit sits below by more than its bar AND the
/// Dirichlet-truncated upper bound at the largest R confirms. A limit inside
/// its own bar of the threshold, or a disagreement between the two routes,
/// is ambiguous: the caller reports INCONCLUSIVE.
pub fn estimate_kappa(sweep: &RSweep) -> Result<usize> {
    let ld = sweep.lambda_dagger;
    let mut kappa = 0usize;
    for (curve, limit) in sweep.limits.iter().enumerate() {
        let &CurveLimit::Limit { value, bar } = limit else { continue };
        if (value - ld).abs() <= bar {
            return Err(Error::AmbiguousLimit { k: curve + 1, limit: value, bar, threshold: ld });
        }
        let below_neumann = value + bar < ld;
        let upper =
            sweep.dirichlet_upper.values[curve] + sweep.dirichlet_upper.bars[curve];
        let below_dirichlet = upper < ld;
        if below_neumann != below_dirichlet {
            return Err(Error::AmbiguousLimit {
                k: curve + 1,
                limit: value,
                bar: bar.max((upper - ld).abs()),
                threshold: ld,
            });
        }
        if below_neumann {
            kappa += 1;
        }
    }
    Ok(kappa)
}

/// Theorem: no threshold resonance iff some truncation has its
/// (kappa+1)-th eigenvalue above the threshold. One-sided numerically: the
/// sweep can certify absence but never existence.
pub fn absence_verdict(sweep: &RSweep, kappa: usize) -> Verdict {
    if kappa >= sweep.points.first().map_or(0, |p| p.values.len()) {
        return Verdict::Inconclusive {
            reason: format!(
                "all {kappa} computed curves lie below the threshold; raise the curve count to test curve {}",
                kappa + 1
            ),
        };
    }
    for p in &sweep.points {
        if p.values[kappa] - p.bars[kappa] > sweep.lambda_dagger {
            return Verdict::Absent { r_star: p.r, mu: p.values[kappa], bar: p.bars[kappa] };
        }
    }
    Verdict::Inconclusive {
        reason: format!(
            "curve {} never exceeds the threshold beyond its error bar on the sweep grid",
            kappa + 1
        ),
    }
}

/// Full pipeline. An ambiguous multiplicity estimate is not a failure: it
/// becomes an INCONCLUSIVE verdict with the offending curve in the reason.
pub fn analyze(geom: &JunctionGeometry, opts: &SweepOptions) -> Result<AbsenceReport> {
    let sweep = r_sweep(geom, opts)?;
    match estimate_kappa(&sweep) {
        Ok(kappa) => {
            let verdict = absence_verdict(&sweep, kappa);
            Ok(AbsenceReport { sweep, kappa: Some(kappa), verdict })
        }
        Err(e @ Error::AmbiguousLimit { .. }) => Ok(AbsenceReport {
            sweep,
            kappa: None,
            verdict: Verdict::Inconclusive { reason: e.to_string() },
        }),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SlopeReport {
    /// 1-based index of the requested eigenvalue
    pub k: usize,
    pub r: f64,
    /// extrapolated group eigenvalue
    pub mu: f64,
    pub bar: f64,
    pub multiplicity: usize,
    /// d mu / d R for each member of the group, ascending: eigenvalues of
    /// the face quadratic-form matrix (dy v_p, dy v_q) - mu (v_p, v_q)
    pub slopes: Vec<f64>,
    /// finite-difference cross-check, ascending
    pub fd: Vec<f64>,
    pub fd_step: f64,
}

fn solve_level(level: &Level, k: usize, seed: u64) -> Result<EigenResult> {
    let mut opts = EigenOptions::new(k);
    opts.seed = seed;
    smallest_eigenpairs(&level.stiffness, &level.mass, &opts)
}

/// eigenvalues within a relative gap of 1e-6 (symmetric geometries produce
/// exact multiplicities) form one perturbation group
fn group_around(values: &[f64], k0: usize, gap: f64) -> (usize, usize) {
    let mut lo = k0;
    while lo > 0 && values[lo] - values[lo - 1] < gap {
        lo -= 1;
    }
    let mut hi = k0;
    while hi + 1 < values.len() && values[hi + 1] - values[hi] < gap {
        hi += 1;
    }
    (lo, hi)
}

/// Rate of increase of the k-th eigenvalue group under lengthening of the
/// truncation, from the boundary quadratic form of the eigenvectors on the
/// cut faces, with a finite-difference sanity check.
pub fn eigenvalue_slope(
    geom: &JunctionGeometry,
    r: f64,
    h: f64,
    refine: usize,
    k: usize,
    seed: u64,
) -> Result<SlopeReport> {
    if k == 0 {
        return Err(Error::Config("eigenvalue index is 1-based".into()));
    }
    let info = threshold(geom, 1)?;
    let ld = info.lambda_dagger;
    let gap = 1e-6 * ld;

    let (coarse, fine) = levels(geom, r, h, refine, Elimination::mixed())?;
    let mut ask = k + 2;
    let (ef, lo, hi) = loop {
        let ef = solve_level(&fine, ask, seed)?;
        let (lo, hi) = group_around(&ef.values, k - 1, gap);
        if hi + 1 < ask || ask >= k + 6 {
            break (ef, lo, hi);
        }
        ask += 2;
    };
    let ec = solve_level(&coarse, k.min(ask), seed)?;
    let mu_fine = ef.values[k - 1];
    let mu_hat = mu_fine + (mu_fine - ec.values[k - 1]) / 3.0;
    let bar = (mu_fine - mu_hat).abs();
    if mu_hat >= ld - bar {
        return Err(Error::EigenvalueAtThreshold { mu: mu_hat, r, threshold: ld, bar });
    }

    let m = hi - lo + 1;
    let n_free = fine.dofs.n_free();
    let mut a = nalgebra::DMatrix::<f64>::zeros(m, m);
    let mut scratch = vec![0.0f64; n_free];
    for face in 0..geom.outlets().len() {
        let gt = face_gram(&fine.dofs, face, FaceGram::TangentStiffness)?;
        let gm = face_gram(&fine.dofs, face, FaceGram::Mass)?;
        for p in 0..m {
            let vp = &ef.vectors[lo + p];
            for q in 0..m {
                let vq = &ef.vectors[lo + q];
                gt.matvec(vq, &mut scratch);
                let t: f64 = vp.iter().zip(&scratch).map(|(x, y)| x * y).sum();
                gm.matvec(vq, &mut scratch);
                let g: f64 = vp.iter().zip(&scratch).map(|(x, y)| x * y).sum();
                a[(p, q)] += t - mu_fine * g;
            }
        }
    }
    // symmetrize away assembly roundoff
    for p in 0..m {
        for q in (p + 1)..m {
            let avg = 0.5 * (a[(p, q)] + a[(q, p)]);
            a[(p, q)] = avg;
            a[(q, p)] = avg;
        }
    }
    let mut slopes: Vec<f64> = a.symmetric_eigen().eigenvalues.iter().cloned().collect();
    slopes.sort_by(|x, y| x.partial_cmp(y).unwrap());

    let fd_step = 0.1;
    let (_, fine2) = levels(geom, r + fd_step, h, refine, Elimination::mixed())?;
    let ef2 = solve_level(&fine2, ask, seed)?;
    let mut fd: Vec<f64> = (lo..=hi)
        .map(|i| (ef2.values[i] - ef.values[i]) / fd_step)
        .collect();
    fd.sort_by(|x, y| x.partial_cmp(y).unwrap());

    Ok(SlopeReport {
        k,
        r,
        mu: mu_hat,
        bar,
        multiplicity: m,
        slopes,
        fd,
        fd_step,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SufficiencyReport {
    pub holds: bool,
    /// first eigenvalue of the node problem constrained against the
    /// threshold-mode traces
    pub mu1: f64,
    pub bar: f64,
    pub lambda_dagger: f64,
    pub n_constraints: usize,
}

fn first_mode_rows(level: &Level, threshold_outlets: &[usize], widths: &[f64]) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (&n, &w) in threshold_outlets.iter().zip(widths) {
        let g = face_gram(&level.dofs, n, FaceGram::Mass)?;
        let n_free = level.dofs.n_free();
        let mut trace = vec![0.0; n_free];
        for (y, dof) in level.dofs.faces[n].retained() {
            trace[dof as usize] = phi(w, 1, y);
        }
        let mut row = vec![0.0; n_free];
        g.matvec(&trace, &mut row);
        rows.push(row);
    }
    Ok(rows)
}

/// Sufficient condition for the absence of trapped modes: the node problem
/// with the first-mode moments removed on every threshold face must have its
/// first eigenvalue above the threshold. HOLDS rules trapped modes out;
/// FAILS says nothing.
pub fn no_trapped_sufficient(
    geom: &JunctionGeometry,
    h: f64,
    refine: usize,
    seed: u64,
) -> Result<SufficiencyReport> {
    let info = threshold(geom, 1)?;
    let widths: Vec<f64> = info
        .threshold_outlets
        .iter()
        .map(|&n| geom.outlets()[n].width)
        .collect();
    let (coarse, fine) = levels(geom, 0.0, h, refine, Elimination::mixed())?;
    let solve = |level: &Level| -> Result<f64> {
        let rows = first_mode_rows(level, &info.threshold_outlets, &widths)?;
        let mut opts = EigenOptions::new(1);
        opts.seed = seed;
        let r = constrained_eigenpairs(&level.stiffness, &level.mass, &rows, &opts)?;
        Ok(r.values[0])
    };
    let mc = solve(&coarse)?;
    let mf = solve(&fine)?;
    let mu1 = mf + (mf - mc) / 3.0;
    let bar = (mf - mu1).abs();
    Ok(SufficiencyReport {
        holds: mu1 - bar > info.lambda_dagger,
        mu1,
        bar,
        lambda_dagger: info.lambda_dagger,
        n_constraints: info.threshold_outlets.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use std::f64::consts::PI;

    const PI2: f64 = PI * PI;

    #[test]
    fn cross_node_spectrum() {
        let g = presets::cross();
        let p = mixed_eigenvalues(&g, 0.0, 0.25, 1, 3, 7).unwrap();
        assert!(p.values[0].abs() < 1e-8 * PI2, "constant mode: {}", p.values[0]);
        assert!((p.values[1] - PI2).abs() < 0.01 * PI2);
        assert!((p.values[2] - PI2).abs() < 0.01 * PI2);
    }

    #[test]
    fn tee_node_spectrum() {
        let g = presets::tee();
        let p = mixed_eigenvalues(&g, 0.0, 0.125, 1, 2, 7).unwrap();
        assert!((p.values[0] - PI2 / 4.0).abs() < 0.005 * PI2, "{}", p.values[0]);
        assert!((p.values[1] - 5.0 * PI2 / 4.0).abs() < 0.01 * PI2);
        // bars honest: fine-level error should not exceed a few bars
        assert!((p.values[0] - PI2 / 4.0).abs() < 4.0 * p.bars[0] + 1e-6);
    }

    #[test]
    fn strip_truncated_spectrum_closed_form() {
        // domain 3x1, Dirichlet long sides, Neumann short ends:
        // (m pi/3)^2 + (k pi)^2, m >= 0, k >= 1
        let g = presets::strip();
        let p = mixed_eigenvalues(&g, 1.0, 0.125, 1, 3, 7).unwrap();
        let exact = [PI2, PI2 * (1.0 + 1.0 / 9.0), PI2 * (1.0 + 4.0 / 9.0)];
        for (v, e) in p.values.iter().zip(exact) {
            assert!((v - e).abs() < 0.004 * e, "{v} vs {e}");
        }
    }

    #[test]
    fn dirichlet_truncation_bounds_from_above() {
        // L-bend: Neumann values below the true eigenvalue, Dirichlet above;
        // bracket shrinks with R
        let g = presets::lbend();
        let lo3 = mixed_eigenvalues(&g, 3.0, 0.125, 1, 1, 7).unwrap();
        let hi3 = dirichlet_eigenvalues(&g, 3.0, 0.125, 1, 1, 7).unwrap();
        let lo6 = mixed_eigenvalues(&g, 6.0, 0.125, 1, 1, 7).unwrap();
        let hi6 = dirichlet_eigenvalues(&g, 6.0, 0.125, 1, 1, 7).unwrap();
        assert!(lo3.values[0] < hi3.values[0]);
        assert!(lo6.values[0] < hi6.values[0]);
        assert!(lo3.values[0] <= lo6.values[0] + lo3.bars[0] + lo6.bars[0]);
        assert!(hi6.values[0] <= hi3.values[0] + hi3.bars[0] + hi6.bars[0]);
        let w3 = hi3.values[0] - lo3.values[0];
        let w6 = hi6.values[0] - lo6.values[0];
        assert!(w6 < w3, "bracket must shrink: {w3} -> {w6}");
        assert!(hi6.values[0] < PI2, "L-bend traps a mode below threshold");
    }

    #[test]
    fn strip_sweep_is_inconclusive() {
        let g = presets::strip();
        let opts = SweepOptions {
            r_grid: vec![0.0, 1.0, 2.0, 3.0, 4.0],
            h: 0.125,
            refine: 1,
            k: 1,
            seed: 7,
        };
        let report = analyze(&g, &opts).unwrap();
        match &report.sweep.limits[0] {
            CurveLimit::Limit { value, bar } => {
                assert!((value - PI2).abs() <= *bar, "limit {value} hugs the threshold");
            }
            other => panic!("strip curve must not exceed: {other:?}"),
        }
        assert_eq!(report.kappa, None);
        assert!(matches!(report.verdict, Verdict::Inconclusive { .. }));
    }

    #[test]
    fn tee_sweep_absent_at_zero() {
        let g = presets::tee();
        let opts = SweepOptions {
            r_grid: vec![0.0, 0.5, 1.0, 2.0, 3.0, 4.0],
            h: 0.125,
            refine: 1,
            k: 2,
            seed: 7,
        };
        let report = analyze(&g, &opts).unwrap();
        assert_eq!(report.kappa, Some(1));
        match report.verdict {
            Verdict::Absent { r_star, mu, bar } => {
                assert_eq!(r_star, 0.0);
                assert!(mu - PI2 > 3.0 * bar, "margin: {} vs bar {bar}", mu - PI2);
            }
            v => panic!("expected ABSENT(0), got {v:?}"),
        }
    }

    #[test]
    fn monotonicity_check_fires_on_decreasing_curve() {
        let mk = |r: f64, v: f64| MixedPoint {
            r,
            values: vec![v],
            bars: vec![1e-4],
            fine: vec![v],
            coarse: vec![v],
        };
        let pts = vec![mk(0.0, 5.0), mk(1.0, 5.5), mk(2.0, 5.2)];
        match check_monotone(&pts, 9.0) {
            Err(Error::MonotonicityViolation { k: 1, .. }) => {}
            other => panic!("{other:?}"),
        }
        // decreases above the threshold are fine
        let pts = vec![mk(0.0, 10.0), mk(1.0, 11.0), mk(2.0, 10.5)];
        check_monotone(&pts, 9.0).unwrap();
    }

    #[test]
    fn kappa_on_synthetic_sweep() {
        let point = |r: f64, values: Vec<f64>| {
            let bars = vec![1e-5; values.len()];
            MixedPoint { r, values: values.clone(), bars, fine: values.clone(), coarse: values }
        };
        let ld = PI2;
        let sweep = RSweep {
            lambda_dagger: ld,
            r_grid: vec![0.0, 1.0, 2.0],
            points: vec![
                point(0.0, vec![5.0, 11.0]),
                point(1.0, vec![5.5, 11.5]),
                point(2.0, vec![5.6, 11.6]),
            ],
            limits: vec![
                CurveLimit::Limit { value: 5.62, bar: 1e-3 },
                CurveLimit::Exceeds { first_r: 0.0, margin: 11.0 - ld },
            ],
            dirichlet_upper: point(2.0, vec![5.7, 12.0]),
        };
        assert_eq!(estimate_kappa(&sweep).unwrap(), 1);
        match absence_verdict(&sweep, 1) {
            Verdict::Absent { r_star, .. } => assert_eq!(r_star, 0.0),
            v => panic!("{v:?}"),
        }

        // limit inside its bar of the threshold -> ambiguous
        let mut s2 = sweep.clone();
        s2.limits[0] = CurveLimit::Limit { value: ld - 1e-5, bar: 1e-3 };
        match estimate_kappa(&s2) {
            Err(Error::AmbiguousLimit { k: 1, .. }) => {}
            other => panic!("{other:?}"),
        }

        // routes disagreeing -> ambiguous
        let mut s3 = sweep.clone();
        s3.dirichlet_upper.values[0] = ld + 0.5;
        match estimate_kappa(&s3) {
            Err(Error::AmbiguousLimit { k: 1, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn slope_at_threshold_is_rejected() {
        let g = presets::strip();
        match eigenvalue_slope(&g, 1.0, 0.125, 1, 1, 7) {
            Err(Error::EigenvalueAtThreshold { .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn lbend_slope_positive_and_matches_fd() {
        let g = presets::lbend();
        let rep = eigenvalue_slope(&g, 2.0, 0.125, 1, 1, 7).unwrap();
        assert_eq!(rep.multiplicity, 1);
        assert!(rep.slopes[0] > 0.0);
        let rel = (rep.slopes[0] - rep.fd[0]).abs() / rep.fd[0].abs();
        assert!(rel < 0.25, "slope {} vs fd {}", rep.slopes[0], rep.fd[0]);
    }

    #[test]
    fn cross_slope_decays_with_r() {
        let g = presets::cross();
        let s1 = eigenvalue_slope(&g, 1.0, 0.25, 1, 1, 7).unwrap();
        let s2 = eigenvalue_slope(&g, 2.5, 0.25, 1, 1, 7).unwrap();
        assert!(s1.slopes[0] > 0.0 && s2.slopes[0] > 0.0);
        assert!(s2.slopes[0] < s1.slopes[0], "exponential localization");
    }

    #[test]
    fn strip_node_sufficiency_holds() {
        let g = presets::strip();
        let rep = no_trapped_sufficient(&g, 0.125, 1, 7).unwrap();
        assert!(rep.holds);
        assert_eq!(rep.n_constraints, 2);
        assert!((rep.mu1 - 2.0 * PI2).abs() < 0.02 * PI2, "{}", rep.mu1);
    }
}
