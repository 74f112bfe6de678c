//! Sparse spectral Helmholtz-Hodge decomposition of scattered vector data.
//!
//! Given pointwise vector measurements on a periodic box, this crate fits a
//! sparse Fourier representation that is the sum of an exactly divergence-free
//! field and an exactly curl-free field. The coefficient constraints (zero
//! divergence, zero curl, real-valuedness) are built into a reduced real
//! parameterization, so the fit is an unconstrained regularized least-squares
//! problem. Basis indices are selected adaptively: the active index set grows
//! by one neighbor layer per outer iteration and low-energy boundary modes are
//! pruned until the boundary carries a negligible share of the spectral
//! energy.
//!
//! Entry points:
//! - [`decompose`] runs the full adaptive fit on a [`MeasurementSet`].
//! - [`CoefficientSet`] holds one constrained component and evaluates it.
//! - [`fields`] provides closed-form test fields and seeded samplers.
//! - [`io`] reads and writes the CSV/text/PGM formats used by the CLI.
//!
//! The `parallel` feature (on by default) runs the data-parallel inner loops
//! on rayon. Reductions use a fixed block partition with an in-order tree
//! combine, so results are bit-identical run to run, across thread counts,
//! and with the feature disabled.

pub mod constraints;
mod exec;
pub mod fields;
pub mod io;
pub mod metrics;
pub mod objective;
pub mod solver;
pub mod spectral;

pub use constraints::{l2_inner, CoefficientSet, ConstraintKind, SubspaceBasis};
pub use metrics::{estimate_decay, DecayFit, Grid};
pub use objective::{
    complex_gradient, objective, reduced_gradient, MeasurementSet, Regularization,
};
pub use solver::{
    decompose, prune_boundary, solve_dense_oracle, solve_inner, DecompositionResult, OuterConfig,
    SolverConfig, TraceEntry,
};
pub use spectral::{basis_eval, offsets, Domain, IndexSet, MultiIndex};

/// Errors produced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unsupported dimension {0}: expected 2 or 3")]
    UnsupportedDimension(usize),
    #[error("domain lengths must be positive, got {0}")]
    NonPositiveLength(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("index set is not closed under negation: missing {0:?}")]
    NotNegationClosed(Vec<i32>),
    #[error("zero index has no constrained subspace")]
    ZeroIndex,
    #[error("domains differ between operands")]
    DomainMismatch,
    #[error("seminorm order must be nonnegative, got {0}")]
    NegativeOrder(f64),
    #[error("packed vector has length {got}, expected {expected}")]
    PackedLength { got: usize, expected: usize },
    #[error("evaluated field has imaginary residue {residue:.3e} (tolerance {tol:.3e})")]
    ImaginaryResidue { residue: f64, tol: f64 },
    #[error("measurement set is invalid: {0}")]
    InvalidMeasurements(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(
        "inner solver did not reach gradient tolerance in {iterations} iterations \
         (gradient norm {grad_norm:.3e}, target {target:.3e})"
    )]
    InnerSolver {
        iterations: usize,
        grad_norm: f64,
        target: f64,
        /// Best iterate found, in packed joint coordinates.
        best: Vec<f64>,
        /// Outer-iteration trace gathered before the failure (empty when the
        /// solver was called directly).
        trace: Vec<TraceEntry>,
    },
    #[error("spectral decay fit needs at least {needed} populated shells, found {found}")]
    InsufficientShells { needed: usize, found: usize },
    #[error("spectral decay fit is degenerate: {0}")]
    DegenerateFit(String),
    #[error("{path}: {msg}")]
    Format { path: String, msg: String },
    #[error("i/o error on {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
