//! Error type shared by every module of the crate.

use thiserror::Error;

/// Errors raised by field arithmetic, polynomial kernels and the verification checks.
///
/// Verification outcomes (a check that fails) are never errors; they are reported
/// through [`crate::cert::Certificate`]. Errors signal misuse or unsupported input.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KzError {
    /// Attempted to invert the zero element.
    #[error("zero has no multiplicative inverse")]
    ZeroInverse,
    /// The characteristic supplied is not a prime (or is out of the supported range).
    #[error("{0} is not a supported prime (need 2 <= p < 2^31)")]
    NotPrime(u64),
    /// A user-supplied modulus is not a monic irreducible polynomial of the stated degree.
    #[error("modulus is not a monic irreducible polynomial of degree {0}")]
    NotIrreducible(usize),
    /// Two operands live in different fields.
    #[error("operands belong to different fields")]
    FieldMismatch,
    /// A variable or basis index is outside its valid range.
    #[error("index {index} out of range (valid range {min}..={max})")]
    IndexOutOfRange { index: usize, min: usize, max: usize },
    /// A jet operation would need coefficients beyond the stored precision.
    #[error("jet precision {precision} is too small for {needed} iterations")]
    PrecisionExceeded { precision: usize, needed: usize },
    /// An Omega matrix was requested with equal indices.
    #[error("omega matrix needs distinct indices, got i = j = {0}")]
    IndexError(usize),
    /// Vectors of different lengths were combined.
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    /// The operation needs h in the prime field but h is not.
    #[error("operation requires h in the prime field")]
    RationalH,
    /// The point has two equal coordinates.
    #[error("point has coinciding coordinates {0} and {1}")]
    PointNotInS(usize, usize),
    /// The rank structure statement does not apply because the Q-family count is extreme.
    #[error("degenerate case: dPlus = {d_plus} with n = {n}")]
    DegenerateCase { d_plus: usize, n: usize },
    /// The critical points over the given point are not pairwise distinct.
    #[error("point is not etale: critical points collide")]
    NotEtale,
    /// A formal solve was requested below the minimal truncation order.
    #[error("truncation {got} is smaller than the characteristic {p}")]
    TruncationTooSmall { got: usize, p: u64 },
    /// No auxiliary curve exponent links the curve to the KZ context.
    #[error("no curve linkage: {0}")]
    LinkageError(String),
    /// The requested degree exceeds the memory guard.
    #[error("degree guard: n * h~ = {0} exceeds the limit 20000")]
    DegreeGuard(u64),
    /// The packed monomial representation supports a bounded number of variables.
    #[error("too many variables: {0} (at most {max})", max = crate::multipoly::MAX_VARS)]
    TooManyVariables(usize),
    /// A theorem-gated operation was called with p dividing n.
    #[error("operation requires p not dividing n (p = {p}, n = {n})")]
    CharacteristicDividesN { p: u64, n: usize },
    /// A precondition on the parameter h (such as h outside F_p) is violated.
    #[error("invalid level parameter: {0}")]
    InvalidLevel(String),
    /// A configuration value is missing or malformed.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    /// The requested operation is not supported for these parameters.
    #[error("unsupported: {0}")]
    Unsupported(String),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, KzError>;
