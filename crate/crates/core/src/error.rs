use thiserror::Error;

use crate::lattice::LatticeKind;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("lattice kind {0:?} cannot be built directly")]
    UnsupportedLattice(LatticeKind),
    #[error("hole radius {radius} outside [0, {limit}) (exceeds packing limit)")]
    RadiusOutOfRange { radius: f64, limit: f64 },
    #[error("relative permittivity {0} must be >= 1")]
    InvalidPermittivity(f64),
    #[error("supercell must have at least one row")]
    ZeroRows,
    #[error("cladding too thin: {rows} supercell rows for {missing} missing rows (need >= missing + 4)")]
    CladdingTooThin { rows: usize, missing: usize },
    #[error("invalid defect width scale {0}")]
    InvalidWidthScale(f64),
    #[error("structure has no defect description")]
    MissingDefect,
    #[error("resolution {got} below minimum {min} samples per period")]
    ResolutionTooLow { got: usize, min: usize },
    #[error("grid {grid:?} too coarse for basis needing {needed:?} samples (aliasing risk)")]
    AliasingRisk { grid: [usize; 2], needed: [usize; 2] },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("operator basis has {operator} plane waves but dielectric data has {eps}")]
    BasisMismatch { operator: usize, eps: usize },
    #[error("eigensolver failure at k = ({kx}, {ky}): {reason}")]
    EigensolverFailure { kx: f64, ky: f64, reason: String },
    #[error("requested {requested} bands but basis holds only {available}")]
    TooManyBands { requested: usize, available: usize },
    #[error("k path is empty")]
    EmptyPath,
    #[error("cutoff must be positive, got {0}")]
    InvalidCutoff(f64),
    #[error("mode has no retained eigenvector")]
    MissingEigenvector,
    #[error("mode field vanishes identically")]
    ZeroVector,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("projection requires a perfect crystal, found a defect")]
    DefectPresent,
    #[error("need at least {min} transverse samples, got {got}")]
    TooFewTransverseSamples { got: usize, min: usize },
    #[error("insufficient k sampling: gap edges moved by {drift:.3e} (relative) on refinement")]
    InsufficientKSampling { drift: f64 },
    #[error("defect bands and projection do not share the guide axis: {0}")]
    AxisMismatch(String),
    #[error("group velocity needs at least 3 samples, got {0}")]
    TooFewSamples(usize),
    #[error("group velocity needs uniformly spaced k samples")]
    NonUniformSpacing,
    #[error("surround index must be positive, got {0}")]
    InvalidSurroundIndex(f64),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatchError {
    #[error("sections do not share the same kx grid")]
    GridMismatch,
    #[error("sections do not share the same geometry")]
    GeometryMismatch,
    #[error("validity windows overlap or are out of order: low [{0}, {1}] vs high [{2}, {3}]")]
    OverlappingWindows(f64, f64, f64, f64),
    #[error("band data must be sampled on kx in [0, 0.5] along the guide with at least 2 points")]
    BadGrid,
    #[error("band index {0} not present in section")]
    MissingBand(usize),
    #[error("tolerances must be positive")]
    InvalidTolerance,
    #[error("search needs {needed} evaluations, over the budget of {cap}")]
    CombinatorialBudgetExceeded { needed: u64, cap: u64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OverlapError {
    #[error("momentum mismatch: k_s + k_i - k_p = ({0}, {1}) is not a reciprocal lattice vector")]
    MomentumMismatch(f64, f64),
    #[error("mode field vanishes identically")]
    ZeroVector,
    #[error("modes live on different cells or meshes")]
    MeshMismatch,
    #[error(transparent)]
    Solver(#[from] SolverError),
}
