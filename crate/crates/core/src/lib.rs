//! # chanent
//!
//! Entropy of a channel with respect to a state, computed as a convex roof over
//! pure-state decompositions.
//!
//! For a state `ω` on the input algebra and a channel `α` (represented by its
//! predual action `ω ↦ ω∘α` onto a direct sum of full matrix blocks), the
//! channel entropy is
//!
//! ```text
//! H_ω(α) = sup_E Σ p_j S(ω_j∘α, ω∘α)  =  S(ω∘α) − R(ω),
//! R(ω)   = inf_E Σ p_j S(ω_j∘α)
//! ```
//!
//! with both extrema over ensembles `E = {p_j; ω_j}` averaging to `ω`. `R` is
//! the convex hull of `ω ↦ S(ω∘α)` and it suffices to search extremal (pure)
//! decompositions. [`roof::solve_r`] performs that search by multi-start descent
//! over the Stiefel manifold of mixing isometries.
//!
//! ## Modules
//!
//! - [`state`]: Hermitian eigendecomposition, density operators, von Neumann and
//!   relative entropy.
//! - [`ensemble`]: ensembles, convex sums, shortening, mutual entropy.
//! - [`channel`]: block-structured reduction channels (pinchings, block
//!   compressions, commutative subalgebras, explicit Kraus lists).
//! - [`roof`]: the convex-roof solver and its numerical certificates.
//! - [`oracle`]: closed-form qubit roof and the `M_{n+1}` block construction.
//! - [`accinfo`]: accessible-information brackets and the Holevo bound.
//! - [`verify`]: the invariant suite behind `chanent verify`.
//!
//! All entropies are in nats.

#![forbid(unsafe_code)]

pub mod accinfo;
pub mod channel;
pub mod ensemble;
pub mod io;
pub mod oracle;
pub mod random;
pub mod roof;
pub mod state;
pub mod verify;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use nalgebra::Complex;

/// Complex scalar used throughout.
pub type C64 = nalgebra::Complex<f64>;
/// Dense complex matrix, row-major in every serialized form.
pub type CMatrix = nalgebra::DMatrix<C64>;
/// Dense complex column vector.
pub type CVector = nalgebra::DVector<C64>;

pub use channel::{BlockDensity, ReductionChannel};
pub use ensemble::Ensemble;
pub use roof::{RoofResult, SolverConfig};
pub use state::{DensityOperator, PureState};

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not Hermitian (max |M - M^†| entry {asymmetry:.3e})")]
    NotHermitian { asymmetry: f64 },

    #[error("trace is not 1 (got {trace})")]
    InvalidTrace { trace: f64 },

    #[error("not positive semi-definite (min eigenvalue {min_eigenvalue:.3e})")]
    NotPositive { min_eigenvalue: f64 },

    #[error("vector is not normalized (norm {norm})")]
    NotNormalized { norm: f64 },

    #[error("{what} out of range: {value}")]
    OutOfRange { what: &'static str, value: f64 },

    #[error("ensemble is empty")]
    EmptyEnsemble,

    #[error("invalid ensemble: {0}")]
    InvalidEnsemble(String),

    #[error("invalid channel: {0}")]
    InvalidChannel(String),

    #[error("projections {i} and {j} violate Q_i Q_j = δ_ij Q_i (deviation {deviation:.3e})")]
    ProjectionProduct { i: usize, j: usize, deviation: f64 },

    #[error("projections do not sum to the identity (deviation {deviation:.3e})")]
    ProjectionSum { deviation: f64 },

    #[error("invalid measurement: {0}")]
    InvalidMeasurement(String),

    #[error("matrix does not have orthonormal columns (max |V^†V - I| entry {deviation:.3e})")]
    NotIsometry { deviation: f64 },

    #[error("block construction failed: {0}")]
    ConstructionFailure(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Numerical tolerances shared by every validation step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Max entry of `M - M^†`.
    pub herm: f64,
    /// Deviation of the trace from one.
    pub trace: f64,
    /// Deviation of a vector norm from one.
    pub norm: f64,
    /// Eigenvalues in `[-psd, 0]` are clipped to zero; below is an error.
    pub psd: f64,
    /// Spectral cutoff defining the support of the second argument of a relative entropy.
    pub support: f64,
    /// Ensemble members at or below this weight are dropped.
    pub weight: f64,
    /// Max-entry distance under which two ensemble members are merged.
    pub state: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            herm: 1e-9,
            trace: 1e-9,
            norm: 1e-9,
            psd: 1e-9,
            support: 1e-10,
            weight: 1e-12,
            state: 1e-9,
        }
    }
}

impl Tolerances {
    /// Defaults with the validation tolerances (`herm`, `trace`, `norm`, `psd`) replaced by `tol`.
    pub fn with_validation(tol: f64) -> Self {
        Self {
            herm: tol,
            trace: tol,
            norm: tol,
            psd: tol,
            ..Self::default()
        }
    }
}

/// `s(x) = -x ln x` with `s(0) = 0`.
#[inline]
pub fn s(x: f64) -> f64 {
    if x > 0.0 {
        -x * x.ln()
    } else {
        0.0
    }
}
