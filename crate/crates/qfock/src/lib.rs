//! Computations in the quadratic Fock space of the renormalized square of
//! white noise (RSWN).
//!
//! The RSWN *-Lie algebra has generators `B?_f` (creators), `B_f`
//! (annihilators), `N_f` (number operators), a central `1`, a constant
//! `c > 0`, and relations
//!
//! ```text
//! [B_f, B?_g] = 2c<f,g> + 4 N_{conj(f) g},      [N_a, B?_f] = 2 B?_{a f},
//! [B?_f, B?_g] = [B_f, B_g] = [N_a, N_b] = 0,
//! ```
//!
//! acting on a vacuum `Phi` with `B_h Phi = N_g Phi = 0`. Everything this
//! crate computes — n-particle inner products, quadratic exponential vectors
//! `Psi(f) = sum_n B?^n_f Phi / n!`, their closed-form scalar product, Gram
//! matrices — lives in the cyclic representation generated from `Phi`.
//!
//! Two numeric towers are supported throughout: exact complex rationals
//! (bit-exact, used by the symbolic normal-ordering oracle) and complex
//! doubles (used for series summation and spectral work). Conversion is
//! one-way, exact to float.

pub mod factorization;
pub mod fock;
pub mod gram;
pub mod normal_order;
pub mod num;
pub mod schema;
pub mod stepfn;

pub use num::{C64, CRat, Rat, RealScalar, Scalar};
pub use stepfn::{Cell, CellId, IntervalSpec, MeasuredCellFunction, Partition};

/// Errors shared by every module of the crate.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("overlapping intervals: {0}")]
    OverlappingIntervals(String),
    #[error("empty interval: {0}")]
    EmptyInterval(String),
    #[error("incompatible partitions: {0}")]
    IncompatiblePartitions(String),
    #[error("moment power must be >= 1")]
    NonpositivePower,
    #[error("invalid cell: {0}")]
    InvalidCell(String),
    #[error("unknown cell id: {0}")]
    UnknownCellId(String),
    #[error("invalid region split: {0}")]
    InvalidSplit(String),
    #[error("domain violation: {0}")]
    DomainViolation(String),
    #[error("no convergence within budget: {0}")]
    NoConvergenceWithinBudget(String),
    #[error("non-rational input: {0}")]
    NonRationalInput(String),
    #[error("oracle budget exceeded: {0}")]
    OracleBudgetExceeded(String),
    #[error("not Hermitian: {0}")]
    NotHermitian(String),
    #[error("parse error: {0}")]
    ParseError(String),
}

/// Stable machine-readable tag for each error variant, used by the CLI.
impl Error {
    pub fn kind(&self) -> &'static str {
        match self {
            Error::OverlappingIntervals(_) => "OverlappingIntervals",
            Error::EmptyInterval(_) => "EmptyInterval",
            Error::IncompatiblePartitions(_) => "IncompatiblePartitions",
            Error::NonpositivePower => "NonpositivePower",
            Error::InvalidCell(_) => "InvalidCell",
            Error::UnknownCellId(_) => "UnknownCellId",
            Error::InvalidSplit(_) => "InvalidSplit",
            Error::DomainViolation(_) => "DomainViolation",
            Error::NoConvergenceWithinBudget(_) => "NoConvergenceWithinBudget",
            Error::NonRationalInput(_) => "NonRationalInput",
            Error::OracleBudgetExceeded(_) => "OracleBudgetExceeded",
            Error::NotHermitian(_) => "NotHermitian",
            Error::ParseError(_) => "ParseError",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
