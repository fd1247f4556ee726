//! Threshold scattering machinery: the fictitious scattering operator on
//! the node, the threshold scattering matrix, resonance detection, and
//! field reconstruction.
//!
//! Detection runs the operator assembly on two nested meshes, extrapolates
//! entrywise, and counts eigenvalues near the targets with a tolerance
//! floored by the observed refinement gap, so a count is only ever reported
//! when the discretization actually resolves it.

pub mod field;
pub mod modal;
pub mod physical;
pub mod reduced;
pub mod waves;

pub use field::{
    stabilizing as reconstruct_stabilizing, trapped as reconstruct_trapped, Field, FieldKind,
    OutletTail,
};
pub use modal::{modal_symbols, ModalSymbols, ModalTraceMap};
pub use physical::{solve_physical_reduced, PhysicalSolution};
pub use reduced::{extract_s, p0_indices, ComplexFactor, NodeLevel};
pub use waves::{cutoff, q_between, q_form, ModalSample, ThresholdWave, WaveKind};

use crate::cross_section::{threshold, ThresholdInfo};
use crate::error::{Error, Result};
use crate::geometry::JunctionGeometry;
use crate::linalg::dense::{eigenvalues, kernel_basis, symmetry_error, unitarity_error};
use crate::mesh::generate_mesh;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone)]
pub struct DetectOptions {
    /// Target mesh size of the base level.
    pub h: f64,
    /// Number of refinement levels; the two finest are used.
    pub refine: usize,
    /// Modes kept per outlet.
    pub p_modes: usize,
    /// Phase of the threshold-wave normalization.
    pub psi_rot: f64,
    /// Overrides the derived eigenvalue tolerance when set.
    pub tol_eig: Option<f64>,
}

impl Default for DetectOptions {
    fn default() -> Self {
        DetectOptions { h: 0.125, refine: 2, p_modes: 12, psi_rot: 0.0, tol_eig: None }
    }
}

/// Everything the detection pipeline concluded, in serializable form.
#[derive(Debug, Clone, Serialize)]
pub struct ScatteringReport {
    pub lambda_dagger: f64,
    pub n_threshold: usize,
    pub threshold_outlets: Vec<usize>,
    pub p_modes: usize,
    pub n_mod: usize,
    pub psi_rot: f64,
    pub h_coarse: f64,
    pub h_fine: f64,
    /// ‖S*S − I‖ per level and for the extrapolated operator.
    pub unitarity_coarse: f64,
    pub unitarity_fine: f64,
    pub unitarity: f64,
    pub symmetry: f64,
    /// ‖S_fine − S_coarse‖ over all modes, diagnostic only.
    pub refinement_gap: f64,
    pub s_unitarity: f64,
    pub s_symmetry: f64,
    pub tol_floor: f64,
    /// Largest fine↔coarse eigenvalue drift near each count target.
    pub movement_tr: f64,
    pub movement_st: f64,
    pub movement_bd: f64,
    /// Tolerance actually used for each count.
    pub tol_tr: f64,
    pub tol_st: f64,
    pub tol_bd: f64,
    /// Threshold scattering matrix in the ψ-rotated wave normalization.
    pub s: Vec<Vec<[f64; 2]>>,
    /// s with the evanescent-channel feedback folded in; this is the matrix
    /// the incoming-wave route measures, and it stays unitary where the bare
    /// block does not.
    pub s_closure: Vec<Vec<[f64; 2]>>,
    pub s_closure_unitarity: f64,
    /// ‖s_closure − s‖: size of the feedback the bare block misses.
    pub closure_gap: f64,
    /// Advisory stabilizing count from s_closure eigenvalues (unguarded).
    pub d_st_closure: usize,
    pub s_eigenvalues: Vec<[f64; 2]>,
    pub s_perp_eigenvalues: Vec<[f64; 2]>,
    pub s_hat_eigenvalues: Vec<[f64; 2]>,
    /// Trapped-mode count: eigenvalues of P⊥SP⊥ near 1.
    pub d_tr: usize,
    /// Stabilizing count: eigenvalues of s near −e^{2iψ}.
    pub d_st: usize,
    /// Total bounded-solution count from the rotated operator.
    pub d_bd: usize,
    /// Whether d_bd = d_tr + d_st held.
    pub counts_consistent: bool,
    pub trapped_kernel: Vec<Vec<[f64; 2]>>,
    pub stabilizing_kernel: Vec<Vec<[f64; 2]>>,
    /// Extrapolated fictitious scattering operator, row-major.
    pub s_full: Vec<Vec<[f64; 2]>>,
}

/// Dense artifacts kept out of the report for reuse by reconstruction.
pub struct ScatteringArtifacts {
    pub info: ThresholdInfo,
    pub level_fine: NodeLevel,
    pub factor_fine: ComplexFactor,
    pub s_extrapolated: DMatrix<Complex64>,
    pub s_threshold: DMatrix<Complex64>,
    pub s_closure: DMatrix<Complex64>,
    pub tol_eig: f64,
    pub trapped_kernel: Vec<DVector<Complex64>>,
    pub stabilizing_kernel: Vec<DVector<Complex64>>,
}

fn to_rows(m: &DMatrix<Complex64>) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

fn to_pairs(v: &[Complex64]) -> Vec<[f64; 2]> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

fn sorted_eigenvalues(m: &DMatrix<Complex64>) -> Vec<Complex64> {
    let mut e = eigenvalues(m);
    e.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).unwrap());
    e
}

/// Counts eigenvalues within tol of the target; refuses to answer when one
/// falls in the ambiguous band (tol, 10·tol).
fn guarded_count(eigs: &[Complex64], target: Complex64, tol: f64) -> Result<usize> {
    let mut count = 0;
    for e in eigs {
        let d = (e - target).norm();
        if d <= tol {
            count += 1;
        } else if d < 10.0 * tol {
            return Err(Error::ToleranceUnresolvable { requested: tol, achievable: d });
        }
    }
    Ok(count)
}

/// How far the eigenvalues that could decide a count moved between the two
/// levels: max over fine eigenvalues within the capture radius of the
/// target of the distance to the nearest coarse eigenvalue.
fn movement(eig_f: &[Complex64], eig_c: &[Complex64], target: Complex64) -> f64 {
    let mut worst = 0.0f64;
    for lf in eig_f {
        if (lf - target).norm() > 0.5 {
            continue;
        }
        let d = eig_c
            .iter()
            .map(|lc| (lf - lc).norm())
            .fold(f64::INFINITY, f64::min);
        worst = worst.max(d);
    }
    worst
}

/// The three counted matrices derived from one fictitious operator: the
/// rotated threshold block, the complement block, and the bounded-solution
/// symmetrization D S D with D = diag(ζ on threshold modes, 1 elsewhere).
fn counted_matrices(
    s_full: &DMatrix<Complex64>,
    info: &ThresholdInfo,
    p_modes: usize,
    psi_rot: f64,
    p0: &[usize],
    comp: &[usize],
) -> (DMatrix<Complex64>, DMatrix<Complex64>, DMatrix<Complex64>) {
    let nm = s_full.nrows();
    let s_rot = extract_s(s_full, info, p_modes, psi_rot);
    let s_perp = DMatrix::from_fn(comp.len(), comp.len(), |i, j| s_full[(comp[i], comp[j])]);
    let zeta = Complex64::new(1.0, 1.0) * 0.5f64.sqrt();
    let dz: Vec<Complex64> = (0..nm)
        .map(|i| if p0.contains(&i) { zeta } else { Complex64::ONE })
        .collect();
    let s_hat = DMatrix::from_fn(nm, nm, |i, j| dz[i] * s_full[(i, j)] * dz[j]);
    (s_rot, s_perp, s_hat)
}

/// Threshold scattering matrix with the evanescent channels folded in:
/// i·s = S₀₀ + S₀⊥(I⊥ − S⊥⊥)⁻¹S⊥₀, then the ψ-rotation. The bare block
/// P₀SP₀ misses the feedback through decaying modes wherever the junction
/// couples them to the threshold mode, while the folded matrix is the one an
/// incoming-wave experiment measures and stays unitary up to discretization
/// error. Near a trapped mode the fold degenerates (S⊥⊥ has an eigenvalue
/// at 1) and the result becomes unreliable.
fn closure_threshold(
    s_full: &DMatrix<Complex64>,
    psi_rot: f64,
    p0: &[usize],
    comp: &[usize],
) -> DMatrix<Complex64> {
    let pick = |rows: &[usize], cols: &[usize]| {
        DMatrix::from_fn(rows.len(), cols.len(), |i, j| s_full[(rows[i], cols[j])])
    };
    let s00 = pick(p0, p0);
    let s0p = pick(p0, comp);
    let sp0 = pick(comp, p0);
    let spp = pick(comp, comp);
    let folded = match (DMatrix::identity(comp.len(), comp.len()) - spp).lu().solve(&sp0) {
        Some(x) => &s00 + s0p * x,
        None => s00,
    };
    folded * ((2.0 * I * psi_rot).exp() * (-I))
}

/// Two-level assembly shared by detection and parameter sweeps.
struct Ladder {
    info: ThresholdInfo,
    h_coarse: f64,
    h_fine: f64,
    fine: NodeLevel,
    ff: ComplexFactor,
    s_c: DMatrix<Complex64>,
    s_f: DMatrix<Complex64>,
    s_x: DMatrix<Complex64>,
}

fn ladder(geom: &JunctionGeometry, opts: &DetectOptions) -> Result<Ladder> {
    if opts.refine == 0 {
        return Err(Error::Config("detection needs at least one refinement level".into()));
    }
    if opts.p_modes == 0 {
        return Err(Error::Config("at least one outlet mode is required".into()));
    }
    let info = threshold(geom, opts.p_modes)?;
    let domain = geom.truncate(0.0)?;

    let mut mesh = generate_mesh(&domain, opts.h)?;
    for _ in 0..opts.refine.saturating_sub(1) {
        mesh = mesh.refine();
    }
    let fine_mesh = mesh.refine();
    let h_coarse = mesh.h;
    let h_fine = fine_mesh.h;
    let coarse = NodeLevel::build(&info, &domain, mesh, opts.p_modes)?;
    let fine = NodeLevel::build(&info, &domain, fine_mesh, opts.p_modes)?;

    let fc = coarse.factor(info.lambda_dagger, &coarse.fictitious_symbols())?;
    let ff = fine.factor(info.lambda_dagger, &fine.fictitious_symbols())?;
    let s_c = coarse.assemble_s(&fc);
    let s_f = fine.assemble_s(&ff);
    let s_x = &s_f + (&s_f - &s_c) * Complex64::new(1.0 / 3.0, 0.0);
    Ok(Ladder { info, h_coarse, h_fine, fine, ff, s_c, s_f, s_x })
}

/// One parameter-sweep sample: the rotated threshold matrix at both levels
/// and extrapolated, without the guarded counting. Sweeps pass through
/// resonances, where a count is legitimately ambiguous but the matrix and
/// its eigenvalue phases stay well-defined.
pub struct SweepSample {
    pub s: DMatrix<Complex64>,
    pub s_fine: DMatrix<Complex64>,
    pub s_coarse: DMatrix<Complex64>,
    pub unitarity_fine: f64,
    pub n_threshold: usize,
}

pub fn sweep_sample(geom: &JunctionGeometry, opts: &DetectOptions) -> Result<SweepSample> {
    let lad = ladder(geom, opts)?;
    let p0 = p0_indices(&lad.info, opts.p_modes);
    let project = |m: &DMatrix<Complex64>| extract_s(m, &lad.info, opts.p_modes, opts.psi_rot);
    Ok(SweepSample {
        s: project(&lad.s_x),
        s_fine: project(&lad.s_f),
        s_coarse: project(&lad.s_c),
        unitarity_fine: unitarity_error(&lad.s_f),
        n_threshold: p0.len(),
    })
}

/// Runs the full detection pipeline and keeps the dense artifacts around.
pub fn scattering_analysis(
    geom: &JunctionGeometry,
    opts: &DetectOptions,
) -> Result<(ScatteringReport, ScatteringArtifacts)> {
    let Ladder { info, h_coarse, h_fine, fine, ff, s_c, s_f, s_x } = ladder(geom, opts)?;
    let gap = (&s_f - &s_c).norm();

    let unitarity_coarse = unitarity_error(&s_c);
    let unitarity_fine = unitarity_error(&s_f);
    let unitarity = unitarity_error(&s_x);
    let symmetry = symmetry_error(&s_x);

    let p0 = p0_indices(&info, opts.p_modes);
    let nm = fine.n_mod();
    let comp: Vec<usize> = (0..nm).filter(|i| !p0.contains(i)).collect();

    let (s_rot, s_perp, s_hat) =
        counted_matrices(&s_x, &info, opts.p_modes, opts.psi_rot, &p0, &comp);
    let (rot_f, perp_f, hat_f) =
        counted_matrices(&s_f, &info, opts.p_modes, opts.psi_rot, &p0, &comp);
    let (rot_c, perp_c, hat_c) =
        counted_matrices(&s_c, &info, opts.p_modes, opts.psi_rot, &p0, &comp);

    let eig_perp = sorted_eigenvalues(&s_perp);
    let eig_s = sorted_eigenvalues(&s_rot);
    let eig_hat = sorted_eigenvalues(&s_hat);

    let one = Complex64::ONE;
    let st_target = -(2.0 * I * opts.psi_rot).exp();
    let movement_tr = movement(&eigenvalues(&perp_f), &eigenvalues(&perp_c), one);
    let movement_st = movement(&eigenvalues(&rot_f), &eigenvalues(&rot_c), st_target);
    let movement_bd = movement(&eigenvalues(&hat_f), &eigenvalues(&hat_c), one);

    // the per-level operators are unitary by an algebraic identity, so any
    // defect there flags broken assembly rather than discretization error;
    // resolution near each target is certified by the eigenvalue movement
    let tol_floor = 1e-6f64;
    let tol_base = tol_floor.max(10.0 * unitarity_fine.max(unitarity_coarse));
    let tol_of = |mv: f64| opts.tol_eig.unwrap_or(tol_base.max(0.25 * mv));
    let tol_tr = tol_of(movement_tr);
    let tol_st = tol_of(movement_st);
    let tol_bd = tol_of(movement_bd);

    let d_tr = guarded_count(&eig_perp, one, tol_tr)?;
    let d_st = guarded_count(&eig_s, st_target, tol_st)?;
    let d_bd = guarded_count(&eig_hat, one, tol_bd)?;
    let counts_consistent = d_bd == d_tr + d_st;

    let s_closure = closure_threshold(&s_x, opts.psi_rot, &p0, &comp);
    let cl_f = closure_threshold(&s_f, opts.psi_rot, &p0, &comp);
    let cl_c = closure_threshold(&s_c, opts.psi_rot, &p0, &comp);
    let tol_st_cl = tol_of(movement(&eigenvalues(&cl_f), &eigenvalues(&cl_c), st_target));
    let d_st_closure = eigenvalues(&s_closure)
        .iter()
        .filter(|e| (*e - st_target).norm() <= tol_st_cl)
        .count();
    let closure_gap = (&s_closure - &s_rot).norm();

    // kernel vectors for reconstruction; the eigenvalue counts stay the
    // source of truth, these are best-effort bases
    let mut trapped_kernel = Vec::new();
    if d_tr > 0 {
        let shifted = &s_perp - DMatrix::<Complex64>::identity(comp.len(), comp.len());
        for v in kernel_basis(&shifted, tol_tr) {
            let mut full = DVector::from_element(nm, Complex64::ZERO);
            for (i, &c) in comp.iter().enumerate() {
                full[c] = v[i];
            }
            trapped_kernel.push(full);
        }
        trapped_kernel.truncate(d_tr);
    }
    let mut stabilizing_kernel = Vec::new();
    if d_st > 0 {
        let n0 = s_rot.nrows();
        let shifted = &s_rot - DMatrix::<Complex64>::identity(n0, n0) * st_target;
        stabilizing_kernel = kernel_basis(&shifted, tol_st);
        stabilizing_kernel.truncate(d_st);
    }

    let report = ScatteringReport {
        lambda_dagger: info.lambda_dagger,
        n_threshold: info.n_threshold,
        threshold_outlets: info.threshold_outlets.clone(),
        p_modes: opts.p_modes,
        n_mod: nm,
        psi_rot: opts.psi_rot,
        h_coarse,
        h_fine,
        unitarity_coarse,
        unitarity_fine,
        unitarity,
        symmetry,
        refinement_gap: gap,
        s_unitarity: unitarity_error(&s_rot),
        s_symmetry: symmetry_error(&s_rot),
        tol_floor,
        movement_tr,
        movement_st,
        movement_bd,
        tol_tr,
        tol_st,
        tol_bd,
        s: to_rows(&s_rot),
        s_closure: to_rows(&s_closure),
        s_closure_unitarity: unitarity_error(&s_closure),
        closure_gap,
        d_st_closure,
        s_eigenvalues: to_pairs(&eig_s),
        s_perp_eigenvalues: to_pairs(&eig_perp),
        s_hat_eigenvalues: to_pairs(&eig_hat),
        d_tr,
        d_st,
        d_bd,
        counts_consistent,
        trapped_kernel: trapped_kernel.iter().map(|v| to_pairs(v.as_slice())).collect(),
        stabilizing_kernel: stabilizing_kernel
            .iter()
            .map(|v| to_pairs(v.as_slice()))
            .collect(),
        s_full: to_rows(&s_x),
    };
    let artifacts = ScatteringArtifacts {
        info,
        level_fine: fine,
        factor_fine: ff,
        s_extrapolated: s_x,
        s_threshold: s_rot,
        s_closure,
        tol_eig: tol_tr.max(tol_st).max(tol_bd),
        trapped_kernel,
        stabilizing_kernel,
    };
    Ok((report, artifacts))
}

pub fn scattering_report(
    geom: &JunctionGeometry,
    opts: &DetectOptions,
) -> Result<ScatteringReport> {
    scattering_analysis(geom, opts).map(|(r, _)| r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    fn small(p: usize) -> DetectOptions {
        DetectOptions { h: 0.125, refine: 1, p_modes: p, ..Default::default() }
    }

    #[test]
    fn strip_detection_counts_and_matrix() {
        let (rep, art) = scattering_analysis(&presets::strip(), &DetectOptions::default()).unwrap();
        assert_eq!((rep.d_tr, rep.d_st, rep.d_bd), (0, 1, 1));
        assert!(rep.counts_consistent);
        // the closed-form strip matrix
        let s = &art.s_threshold;
        let want = [
            [Complex64::new(-0.2, 0.4), Complex64::new(-0.8, -0.4)],
            [Complex64::new(-0.8, -0.4), Complex64::new(-0.2, 0.4)],
        ];
        for k in 0..2 {
            for l in 0..2 {
                assert!(
                    (s[(k, l)] - want[k][l]).norm() < 1e-3,
                    "s[{k}][{l}] = {}",
                    s[(k, l)]
                );
            }
        }
        // the stabilizing kernel vector is the symmetric combination
        assert_eq!(art.stabilizing_kernel.len(), 1);
        let c = &art.stabilizing_kernel[0];
        assert!((c[0].norm() - 0.5f64.sqrt()).abs() < 1e-3);
        assert!((c[0] - c[1]).norm() < 1e-3);
        // per-level unitarity is an algebraic identity of the assembly
        assert!(rep.unitarity_fine < 1e-12 && rep.unitarity_coarse < 1e-12);
        assert!(rep.symmetry < 1e-10, "{}", rep.symmetry);
        assert!(rep.s_symmetry < 1e-10);
        assert!(rep.s_unitarity < 1e-3, "{}", rep.s_unitarity);
        // no modal coupling across a straight node, so the fold is a no-op
        assert!(rep.closure_gap < 1e-3, "{}", rep.closure_gap);
        assert_eq!(rep.d_st_closure, 1);
    }

    #[test]
    fn tee_and_cross_report_no_bounded_solutions() {
        for (k, geom) in [presets::tee(), presets::cross()].into_iter().enumerate() {
            let (rep, _) = scattering_analysis(&geom, &small(8)).unwrap();
            assert_eq!((rep.d_tr, rep.d_st, rep.d_bd), (0, 0, 0), "{:?}", rep.s_eigenvalues);
            assert_eq!(rep.d_st_closure, 0);
            assert!(rep.counts_consistent);
            assert!(rep.unitarity_fine < 1e-12);
            assert!(rep.s_symmetry < 1e-8);
            // the folded matrix recovers unitarity that the bare threshold
            // block loses to evanescent feedback
            assert!(rep.s_closure_unitarity < 5e-3, "{}", rep.s_closure_unitarity);
            if k == 0 {
                assert!(rep.closure_gap > 0.1, "{}", rep.closure_gap);
            }
        }
    }

    #[test]
    fn phase_rotation_covariance_and_count_invariance() {
        let psi = std::f64::consts::PI / 6.0;
        let base = scattering_report(&presets::strip(), &small(4)).unwrap();
        let rot = scattering_report(
            &presets::strip(),
            &DetectOptions { psi_rot: psi, ..small(4) },
        )
        .unwrap();
        let f = (2.0 * I * psi).exp();
        for k in 0..2 {
            for l in 0..2 {
                let b = Complex64::new(base.s[k][l][0], base.s[k][l][1]);
                let r = Complex64::new(rot.s[k][l][0], rot.s[k][l][1]);
                assert!((r - f * b).norm() < 1e-10, "covariance broke at [{k}][{l}]");
            }
        }
        assert_eq!(
            (base.d_tr, base.d_st, base.d_bd),
            (rot.d_tr, rot.d_st, rot.d_bd)
        );
    }

    #[test]
    fn tolerance_override_can_force_the_ambiguous_band() {
        // the strip has an eigenvalue of s exactly at −1 and another at
        // distance |(3+4i)/5 + 1| = 1.789; an override of 0.2 puts the far
        // one in the (tol, 10 tol) band
        let err = scattering_report(
            &presets::strip(),
            &DetectOptions { tol_eig: Some(0.2), ..small(2) },
        )
        .unwrap_err();
        match err {
            Error::ToleranceUnresolvable { requested, achievable } => {
                assert_eq!(requested, 0.2);
                assert!(achievable > 0.2 && achievable < 2.0, "{achievable}");
            }
            other => panic!("expected ToleranceUnresolvable, got {other:?}"),
        }
    }

    #[test]
    fn detection_is_deterministic() {
        let a = serde_json::to_string(&scattering_report(&presets::tee(), &small(6)).unwrap())
            .unwrap();
        let b = serde_json::to_string(&scattering_report(&presets::tee(), &small(6)).unwrap())
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn config_errors_are_rejected() {
        let bad = DetectOptions { refine: 0, ..Default::default() };
        assert!(matches!(
            scattering_report(&presets::strip(), &bad),
            Err(Error::Config(_))
        ));
        let bad = DetectOptions { p_modes: 0, ..Default::default() };
        assert!(matches!(
            scattering_report(&presets::strip(), &bad),
            Err(Error::Config(_))
        ));
    }
}
