//! Numerical toolkit for the defect calculus of operator pairs on finite
//! matrices and structured sequence-space operators.
//!
//! The central object is the order-`m` defect of a pair `(A, B)` against a
//! metric operator `P`,
//!
//! ```text
//! Delta^m(P) = sum_{j=0}^{m} (-1)^j C(m,j) A*^(m-j) P B^(m-j),
//! ```
//!
//! whose vanishing says `(A, B)` is an order-`m` biisometric pair for `P`.
//! The crate computes and classifies these defects, builds the biorthogonal
//! sequence systems that a first-order pair induces when the adjoint kernels
//! meet the range of `P`, checks the power-boundedness collapse of
//! higher-order pairs to first order, and certifies unitary-similarity
//! structure for invertible pairs under a strictly positive metric.
//!
//! Finite-support vectors and symbolic weight rules keep structured shift
//! computations exact where the arithmetic allows it; dense matrices go
//! through `nalgebra`.

pub mod asymptotics;
pub mod biortho;
pub mod defect;
mod error;
pub mod fsvec;
pub mod generators;
pub mod jsonio;
mod linalg;
pub mod metric;
pub mod operator;
pub mod rule;

pub use error::CoreError;
pub use fsvec::FsVector;
pub use metric::{Metric, Positivity};
pub use operator::{kernel_basis, LinearOperator, ShiftDirection};
pub use rule::WeightRule;

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;

/// Default relative tolerance for residual comparisons.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Default index window for structured-operator norms and scans.
pub const DEFAULT_WINDOW: usize = 64;

/// Number of powers sampled when corroborating power-boundedness.
pub const POWERS_CHECKED: usize = 64;

/// Default number of supporting angles for numerical range computation.
pub const DEFAULT_ANGLES: usize = 256;
