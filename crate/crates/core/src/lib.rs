//! Numerical laboratory for matrix-valued discrete Schrödinger operators
//! `H = H0 + V` on `l2(Z, C^L)`, with `(H0 u)(n) = u(n+1) + u(n-1)`.
//!
//! The spectral parameter is `z` with `E = z + 1/z`. The crate builds Jost
//! solutions, the scattering coefficients `M±`, `N±` and the scattering
//! matrix, locates bound and half-bound states, and checks the Levinson
//! identity
//!
//! ```text
//! 2πi (J_b + J_h / 2 - L) = - lim_{ε→0} ∫_{Γ+^ε} d/dz log det S(z) dz
//! ```
//!
//! by contour quadrature and extrapolation in `ε`.

pub mod error;
pub mod io;
pub mod jost;
pub mod lattice;
pub mod levinson;
pub mod linalg;
pub mod quadrature;
pub mod random;
pub mod scattering;
pub mod spectral;

pub use error::{LabError, Result, Warning};
pub use jost::{JostSolution, Side, Window};
pub use lattice::{HermitianBlock, Potential, Region, SpectralPoint, TailModel};
pub use levinson::{LevinsonConfig, LevinsonReport};
pub use scattering::ScatteringData;
pub use spectral::{BoundState, HalfBound, SpectralConfig, SpectralReport};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;

/// Dense complex matrix (an `L×L` block or an assembled operator).
pub type CMat = nalgebra::DMatrix<C64>;
