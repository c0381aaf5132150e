use serde::Serialize;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, LabError>;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("overflow: |z|^|n| exceeds 1e300 at n = {n} (shrink the window)")]
    Overflow { n: i64 },

    #[error("window error: {0}")]
    Window(String),

    #[error("tail condition fails: sum of ||V(j)|| for j >= {start} is {tail_sum:.3e}, needs < {bound:.3e}")]
    NonContraction { start: i64, tail_sum: f64, bound: f64 },

    #[error("fixed-point iteration did not converge after {iterations} iterations (last change {change:.3e})")]
    NonConvergence { iterations: usize, change: f64 },

    #[error("singular Jost basis at z = {z}: the two-site system is rank deficient")]
    SingularBasis { z: crate::C64 },

    #[error("M{which} is not invertible at z = {z} (reciprocal condition {rcond:.3e})")]
    NonInvertible { which: char, z: crate::C64, rcond: f64 },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("unresolved root near z = {r}: winding {winding} vs kernel dimension {kernel}")]
    UnresolvedRoot { r: f64, winding: i64, kernel: usize },

    #[error("winding number around z = {r} did not stabilise after radius reductions")]
    WindingNotConverged { r: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("kernel extraction failed: {0}")]
    Kernel(String),

    #[error("invalid tail model: {0}")]
    Tail(String),

    #[error("matrix size {size} exceeds the configured cap {cap}")]
    MemoryGuard { size: usize, cap: usize },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },

    #[error("block at n = {n} is not Hermitian (deviation {deviation:.3e})")]
    NotHermitian { n: i64, deviation: f64 },

    #[error("duplicate site n = {0}")]
    DuplicateSite(i64),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Non-fatal diagnostics attached to results.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Warning {
    /// `|z^2 - 1|` below the edge tolerance; ν and derivatives are ill conditioned.
    NearEdge { proximity: f64 },
    /// Two candidate roots closer than twice the scan spacing.
    GridTooCoarse { spacing: f64 },
    /// A singular value lies within a decade of the rank threshold.
    BorderlineRank { singular_value: f64, threshold: f64 },
    /// The band-edge log-log fit has a large residual.
    PoorFit { residual: f64 },
    /// Successive differences of the ε-sweep are not decreasing.
    NonMonotone,
    /// Doubling the quadrature order changed the value by more than 1e-8.
    QuadratureNotConverged { eps: f64, change: f64 },
}
