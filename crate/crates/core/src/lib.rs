//! Plane-wave band solver and phase-matching toolkit for 2D photonic crystals
//! and line-defect waveguides.
//!
//! All quantities are in reduced units: lengths in lattice constants `a`,
//! wavevectors in `2π/a`, frequencies as `ω̃ = ωa/2πc = a/λ`.

pub mod basis;
pub mod epsilon;
pub mod error;
pub mod fft;
pub mod lattice;
pub mod linalg;
pub mod overlap;
pub mod phasematch;
pub mod pwe;
pub mod slab;

pub use basis::PlaneWaveBasis;
pub use epsilon::{EpsilonFourier, EpsilonGrid, InverseRule};
pub use error::{AnalysisError, GeometryError, MatchError, OverlapError, SolverError};
pub use lattice::{Cell, DefectSpec, Lattice, LatticeKind, StructureSpec, Vec2};
pub use overlap::{NonlinearRegion, OverlapResult};
pub use phasematch::{Dgd, MatchParams, MatchSolution, Section, StitchedDispersion};
pub use pwe::{BandMeta, BandStructure, BlochMode, Polarization, Solver, SolverOptions};
pub use slab::{GapMap, ProjectedBands};
