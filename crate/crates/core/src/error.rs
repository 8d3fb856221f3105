use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("negative probability {value} at cell ({x}, {y})")]
    NegativeProb { x: String, y: String, value: f64 },
    #[error("probabilities sum to {sum}, not 1")]
    SumNotOne { sum: f64 },
    #[error("duplicate cell ({x}, {y})")]
    DuplicateCell { x: String, y: String },
    #[error("no samples")]
    EmptySamples,
    #[error("unknown symbol '{0}'")]
    UnknownSymbol(String),
    #[error("marginal of '{0}' is zero")]
    ZeroMarginal(String),
    #[error("reference assigns zero mass where the distribution does not")]
    ZeroReference,
    #[error("support of P is not contained in support of Q")]
    SupportMismatch,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("rank deficient at column {column}")]
    RankDeficient { column: usize },
    #[error("matrix is not positive definite (pivot {pivot} at {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },
    #[error("matrix is not symmetric")]
    NotSymmetric,
    #[error("no convergence after {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("k = {k} outside 1..={max}")]
    KOutOfRange { k: usize, max: usize },
    #[error("not a divergence transition matrix: {0}")]
    NotADtm(String),
    #[error("cell ({x}, {y}) is negative: {value}")]
    NegativeCell { x: String, y: String, value: f64 },
    #[error("whitening failed at iteration {iteration}; k exceeds the effective rank")]
    RankDeficientWhitening { iteration: usize },
    #[error("epsilon too large: perturbed mass {value} at '{symbol}'")]
    EpsTooLarge { symbol: String, value: f64 },
    #[error("features are not orthonormal: {0}")]
    NotOrthonormal(String),
    #[error("features are not normalized: {0}")]
    NotNormalized(String),
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("singular: {0}")]
    Singular(String),
    #[error("degenerate embedding covariance")]
    SingularEmbedding,
    #[error("unknown user '{0}'")]
    UnknownUser(String),
    #[error("requested {requested} items but only {available} exist")]
    LTooLarge { requested: usize, available: usize },
    #[error("singular feature covariance")]
    SingularCovariance,
    #[error("feature map is not injective on the X alphabet")]
    NotInjective,
    #[error("delta = {delta} outside the admissible range (max {max})")]
    DeltaOutOfRange { delta: f64, max: f64 },
    #[error("feature has zero mean under the reference")]
    ZeroMeanFeature,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable machine-readable error code.
    pub fn code(&self) -> &'static str {
        use Error::*;
        match self {
            NegativeProb { .. } => "NEGATIVE_PROB",
            SumNotOne { .. } => "SUM_NOT_ONE",
            DuplicateCell { .. } => "DUPLICATE_CELL",
            EmptySamples => "EMPTY_SAMPLES",
            UnknownSymbol(_) => "UNKNOWN_SYMBOL",
            ZeroMarginal(_) => "ZERO_MARGINAL",
            ZeroReference => "ZERO_REFERENCE",
            SupportMismatch => "SUPPORT_MISMATCH",
            ShapeMismatch(_) => "SHAPE_MISMATCH",
            RankDeficient { .. } => "RANK_DEFICIENT",
            NotPositiveDefinite { .. } => "NOT_POSITIVE_DEFINITE",
            NotSymmetric => "NOT_SYMMETRIC",
            NoConvergence { .. } => "NO_CONVERGENCE",
            KOutOfRange { .. } => "K_OUT_OF_RANGE",
            NotADtm(_) => "NOT_A_DTM",
            NegativeCell { .. } => "NEGATIVE_CELL",
            RankDeficientWhitening { .. } => "RANK_DEFICIENT_WHITENING",
            EpsTooLarge { .. } => "EPS_TOO_LARGE",
            NotOrthonormal(_) => "NOT_ORTHONORMAL",
            NotNormalized(_) => "NOT_NORMALIZED",
            ConfigInvalid(_) => "CONFIG_INVALID",
            Singular(_) => "SINGULAR",
            SingularEmbedding => "SINGULAR_EMBEDDING",
            UnknownUser(_) => "UNKNOWN_USER",
            LTooLarge { .. } => "L_TOO_LARGE",
            SingularCovariance => "SINGULAR_COVARIANCE",
            NotInjective => "NOT_INJECTIVE",
            DeltaOutOfRange { .. } => "DELTA_OUT_OF_RANGE",
            ZeroMeanFeature => "ZERO_MEAN_FEATURE",
            InvalidArgument(_) => "INVALID_ARGUMENT",
            Parse { .. } => "PARSE_ERROR",
            Io(_) => "IO_ERROR",
        }
    }

    /// True for failures of a numerical routine, as opposed to bad input data.
    pub fn is_numerical(&self) -> bool {
        use Error::*;
        matches!(
            self,
            RankDeficient { .. }
                | NotPositiveDefinite { .. }
                | NoConvergence { .. }
                | NegativeCell { .. }
                | RankDeficientWhitening { .. }
                | EpsTooLarge { .. }
                | NotOrthonormal(_)
                | NotNormalized(_)
                | ConfigInvalid(_)
                | Singular(_)
                | SingularEmbedding
                | SingularCovariance
                | NotInjective
                | ZeroMeanFeature
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse {
            line: e.line(),
            msg: e.to_string(),
        }
    }
}
