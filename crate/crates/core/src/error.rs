use crate::metric::Positivity;
use crate::C64;

/// Errors surfaced by the library.
///
/// Hypothesis failures that a caller can act on (empty kernel, degenerate
/// pairing, metric not positive) are distinct variants rather than strings so
/// front ends can map them to exit semantics.
#[derive(Debug, Clone, thiserror::Error)]
pub enum CoreError {
    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },

    #[error("{op} is not supported for the {variant} representation")]
    UnsupportedVariant { op: &'static str, variant: &'static str },

    #[error("weight rule has no value at index {index}")]
    RuleExhausted { index: usize },

    #[error("metric is not positive (classified {0:?})")]
    MetricNotPositive(Positivity),

    #[error("vector is not in the range of the metric (residual {residual:.3e} > tol {tol:.3e})")]
    NotInRange { residual: f64, tol: f64 },

    #[error("eigenvalue computation did not converge")]
    EigenFailed,

    #[error("defect evaluation routes disagree ({gap:.3e} > allowed {bound:.3e}); reduce the order")]
    CrossCheckDiverged { gap: f64, bound: f64 },

    #[error("precondition failed: {check} ({detail})")]
    PreconditionFailed { check: &'static str, detail: String },

    #[error("adjoint kernel is trivial; no sequence system exists")]
    KernelEmpty,

    #[error("adjoint kernel does not meet the range of the metric")]
    RangeIntersectionEmpty,

    #[error("all candidate pairings are degenerate (best |pairing| {best:.3e})")]
    DegeneratePairing { best: f64 },

    #[error("eigenvalue {value} is not semisimple (algebraic {algebraic}, geometric {geometric})")]
    NonSemisimple { value: C64, algebraic: usize, geometric: usize },

    #[error("eigenvalue {value} is not unimodular (|value| = {modulus})")]
    NonUnimodular { value: C64, modulus: f64 },

    #[error("matrix is singular; inverse required")]
    Singular,

    #[error("order {m} exceeds the supported maximum {max}")]
    OrderTooLarge { m: u32, max: u32 },

    #[error("weight at index {index} is not a positive real ({value})")]
    NonpositiveWeight { index: usize, value: C64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl CoreError {
    pub fn dim(context: impl Into<String>) -> Self {
        CoreError::DimensionMismatch { context: context.into() }
    }
}
