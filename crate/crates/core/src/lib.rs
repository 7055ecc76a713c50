//! Computation engine for twisted ribbon graph complexes.
//!
//! Ribbon graphs are stored as half-edge combinatorial maps (a fixed-point-free
//! involution `tau` pairing half-edges into edges, and a permutation `sigma`
//! whose cycles are the vertex rotations). On top of that sit canonical forms
//! with orientation signs, exhaustive basis enumeration per (d, m, n, g, degree)
//! signature, the twisting differential as sparse matrices over exact scalars,
//! properadic compositions, and the deformation-complex machinery that ties the
//! twisted complexes to the ordinary graph complexes.

pub mod basis;
pub mod canonical;
pub mod defcomplex;
pub mod differential;
pub mod gc;
pub mod linalg;
pub mod oracle;
pub mod properad;
pub mod ribbon;
pub mod surgery;

pub use basis::{enumerate, enumerate_full, EnumLimits, GradedBasis};
pub use canonical::{canonicalize, decode, CanonicalForm, CanonicalKey, FormalSum, Signature};
pub use differential::{assemble, d_twist, DifferentialMatrix};
pub use linalg::{cohomology, rank, solve, CohomologyTable, Scalar, SparseMatrix};
pub use ribbon::{GraphMetrics, Orientation, RibbonGraph, ValidationReport};

use thiserror::Error;

/// Error type shared across the engine.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid ribbon graph: {0}")]
    InvalidGraph(String),
    #[error("signature mismatch: {0}")]
    SignatureMismatch(String),
    #[error("infeasible signature: {0}")]
    Infeasible(String),
    #[error("resource cap exceeded: {0}")]
    CapExceeded(String),
    #[error("differential term not in target basis: {0}")]
    MissingTarget(String),
    #[error("arity mismatch: {0}")]
    ArityMismatch(String),
    #[error("composition graph has a directed cycle")]
    CyclicCompositionGraph,
    #[error("not a cocycle: residual has {0} terms")]
    NotACocycle(usize),
    #[error("decode error: {0}")]
    Decode(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;
