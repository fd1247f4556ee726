use thiserror::Error;

/// Crate-wide error type. Variants carry enough context to be actionable
/// from the CLI without a backtrace.
#[derive(Debug, Error)]
pub enum Error {
    // geometry
    #[error("polygon is self-intersecting (edges {0} and {1} cross)")]
    SelfIntersectingPolygon(usize, usize),
    #[error("degenerate domain: {0}")]
    DegenerateDomain(String),
    #[error("outlet {0} attachment is not a boundary edge of the node polygon")]
    AttachmentNotOnBoundary(usize),
    #[error("outlets {0} and {1} overlap")]
    OutletOverlap(usize, usize),

    // mesh / fem
    #[error("face of outlet {0} carries no retained degrees of freedom (mesh too coarse or width too small)")]
    EmptyFace(usize),
    #[error("stiffness matrix is not symmetric: |K - K^T| = {0:.3e}")]
    KNotSymmetric(f64),
    #[error("modal truncation P = {p} exceeds the {dofs} retained trace dofs on the face of outlet {outlet}")]
    ModalOverresolution { outlet: usize, p: usize, dofs: usize },

    // spectral
    #[error("eigensolver did not converge: {converged} of {requested} pairs at tol {tol:.1e} after {steps} steps")]
    NoConvergence { requested: usize, converged: usize, tol: f64, steps: usize },
    #[error("constraint rows are rank deficient (pivot ratio {0:.3e})")]
    RankDeficientConstraints(f64),

    // absence criterion
    #[error("eigenvalue curve {k} decreases from {prev:.9} to {next:.9} between R = {r_prev} and R = {r_next}, beyond the error bars ({bar:.2e}); discretization too coarse")]
    MonotonicityViolation { k: usize, r_prev: f64, r_next: f64, prev: f64, next: f64, bar: f64 },
    #[error("limit of eigenvalue curve {k} ({limit:.9}) lies within its error bar ({bar:.2e}) below the threshold {threshold:.9}; multiplicity estimate is ambiguous")]
    AmbiguousLimit { k: usize, limit: f64, bar: f64, threshold: f64 },
    #[error("eigenvalue {mu:.9} at R = {r} sits at the threshold {threshold:.9} within {bar:.2e}; the perturbation slope is not defined there")]
    EigenvalueAtThreshold { mu: f64, r: f64, threshold: f64, bar: f64 },

    // scattering
    #[error("linear system is singular (pivot {0:.3e})")]
    SingularSystem(f64),
    #[error("radiating solve is near-singular (smallest singular value {sigma:.3e} < {tol:.3e}); a threshold resonance is likely present, use the scattering-operator route")]
    NearSingular { sigma: f64, tol: f64 },
    #[error("no kernel vector found: no eigenvalue within {tol:.2e} of the target {target}")]
    KernelEmpty { target: String, tol: f64 },
    #[error("evaluation point R = {r} lies inside the cutoff collar [0, 1]; wave decompositions are only valid beyond it")]
    RInsideCutoff { r: f64 },
    #[error("tolerance {requested:.2e} cannot be resolved: achievable accuracy is {achievable:.2e}")]
    ToleranceUnresolvable { requested: f64, achievable: f64 },

    // param sweep
    #[error("phase tracking lost at parameter {at}: branches {b1} and {b2} collide")]
    PhaseTrackingLost { at: f64, b1: usize, b2: usize },

    // config / io
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
