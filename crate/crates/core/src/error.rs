use thiserror::Error;

/// Every failure the laboratory can report.
///
/// Variant names are part of the command-line contract: the CLI prints them
/// verbatim and maps them onto exit codes via [`LabError::kind`].
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LabError {
    #[error("NotPrime: {0} is not prime")]
    NotPrime(u64),
    #[error("DegreeTooLarge: {p}^{k} does not fit below 2^63")]
    DegreeTooLarge { p: u64, k: u32 },
    #[error("InvalidFrobPower: Frobenius power must be nonnegative, got {0}")]
    InvalidFrobPower(i64),
    #[error("InvalidDegree: extension degree must be at least 1")]
    InvalidDegree,
    #[error("DivisionByZero")]
    DivisionByZero,
    #[error("MixedContext: operands belong to GF({left_p}^{left_k}) and GF({right_p}^{right_k})")]
    MixedContext {
        left_p: u64,
        left_k: u32,
        right_p: u64,
        right_k: u32,
    },
    #[error("IndexOutOfRange: element index {index} is not below q = {q}")]
    IndexOutOfRange { index: u64, q: u64 },
    #[error("CharTwo: operation requires odd characteristic")]
    CharTwo,

    #[error("ParseError at {line}:{column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("ShadowedVariable: `{0}` is bound where it is already bound or free")]
    ShadowedVariable(String),
    #[error("MissingParam: no binding for parameter `{0}`")]
    MissingParam(String),
    #[error("BadParamSpec: {0}")]
    BadParamSpec(String),
    #[error("MissingBinding: no value for `{0}`")]
    MissingBinding(String),
    #[error("BudgetExceeded: {evaluated} evaluations exceed budget {budget}{}", .context.as_deref().map(|c| format!(" ({c})")).unwrap_or_default())]
    BudgetExceeded {
        budget: u64,
        evaluated: u64,
        context: Option<String>,
    },
    #[error("BadVariableSplit: {0}")]
    BadVariableSplit(String),
    #[error("BadArity: expected {expected} free variable(s), found {found}")]
    BadArity { expected: usize, found: usize },
    #[error("NotQuantifierFree")]
    NotQuantifierFree,
    #[error("BadSchedule: {0}")]
    BadSchedule(String),

    #[error("DuplicateElements")]
    DuplicateElements,
    #[error("NotSubset: target set is not contained in the ambient set")]
    NotSubset,
    #[error("NoNonCubes: 3 does not divide q - 1 = {0}, every element is a cube")]
    NoNonCubes(u64),
    #[error("BadCharacteristic: q = {0} is not congruent to 1 mod 4")]
    BadCharacteristic(u64),
    #[error("NoInjector: every nonzero element is a difference quotient of the set")]
    NoInjector,
    #[error("TuplesExhausted: cannot draw {n} distinct elements from a field of size {q}")]
    TuplesExhausted { n: usize, q: u64 },
    #[error("FixedFieldTooSmall: need {needed} fixed elements, field has {available}")]
    FixedFieldTooSmall { needed: u64, available: u64 },
    #[error("CodingFailed: no code found for cell {0}")]
    CodingFailed(String),
    #[error("FixedFieldMismatch: Fix(s^{n}) has {actual} elements, expected {expected}")]
    FixedFieldMismatch { n: u32, actual: u64, expected: u64 },

    #[error("BadPolynomial: {0}")]
    BadPolynomial(String),
    #[error("DegreeOverflow: specialized exponent does not fit in 128 bits")]
    DegreeOverflow,
    #[error("SetTooLarge: at most {max} elements supported, got {found}")]
    SetTooLarge { max: usize, found: usize },
    #[error("InvariantViolated: {0}")]
    InvariantViolated(String),
}

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Precondition,
    Budget,
    Internal,
}

impl LabError {
    pub fn kind(&self) -> ErrorKind {
        match self {
            LabError::BudgetExceeded { .. } => ErrorKind::Budget,
            LabError::DegreeOverflow | LabError::InvariantViolated(_) => ErrorKind::Internal,
            _ => ErrorKind::Precondition,
        }
    }

    /// The bare variant name, e.g. `"NotPrime"`.
    pub fn name(&self) -> &'static str {
        match self {
            LabError::NotPrime(_) => "NotPrime",
            LabError::DegreeTooLarge { .. } => "DegreeTooLarge",
            LabError::InvalidFrobPower(_) => "InvalidFrobPower",
            LabError::InvalidDegree => "InvalidDegree",
            LabError::DivisionByZero => "DivisionByZero",
            LabError::MixedContext { .. } => "MixedContext",
            LabError::IndexOutOfRange { .. } => "IndexOutOfRange",
            LabError::CharTwo => "CharTwo",
            LabError::Parse { .. } => "ParseError",
            LabError::ShadowedVariable(_) => "ShadowedVariable",
            LabError::MissingParam(_) => "MissingParam",
            LabError::BadParamSpec(_) => "BadParamSpec",
            LabError::MissingBinding(_) => "MissingBinding",
            LabError::BudgetExceeded { .. } => "BudgetExceeded",
            LabError::BadVariableSplit(_) => "BadVariableSplit",
            LabError::BadArity { .. } => "BadArity",
            LabError::NotQuantifierFree => "NotQuantifierFree",
            LabError::BadSchedule(_) => "BadSchedule",
            LabError::DuplicateElements => "DuplicateElements",
            LabError::NotSubset => "NotSubset",
            LabError::NoNonCubes(_) => "NoNonCubes",
            LabError::BadCharacteristic(_) => "BadCharacteristic",
            LabError::NoInjector => "NoInjector",
            LabError::TuplesExhausted { .. } => "TuplesExhausted",
            LabError::FixedFieldTooSmall { .. } => "FixedFieldTooSmall",
            LabError::CodingFailed(_) => "CodingFailed",
            LabError::FixedFieldMismatch { .. } => "FixedFieldMismatch",
            LabError::BadPolynomial(_) => "BadPolynomial",
            LabError::DegreeOverflow => "DegreeOverflow",
            LabError::SetTooLarge { .. } => "SetTooLarge",
            LabError::InvariantViolated(_) => "InvariantViolated",
        }
    }
}

pub type Result<T, E = LabError> = std::result::Result<T, E>;
