use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("claim type thresholds must be positive and strictly increasing: {0:?}")]
    NonIncreasingThresholds(Vec<f64>),

    #[error("claim type {index} has non-positive probability {probability}")]
    DegenerateType { index: usize, probability: f64 },

    #[error("deductible must be non-negative, got {0}")]
    NegativeDeductible(f64),

    #[error("band ({lower}, {upper}] carries no probability mass")]
    EmptyBand { lower: f64, upper: f64 },

    #[error("claim type {0} has a zero penalty")]
    ZeroPenalty(usize),

    #[error("transition matrix is not regular within {0} steps")]
    NotRegularWithin(usize),

    #[error("transition matrix is not regular")]
    NotRegular,

    #[error("singular linear system at pivot {0}")]
    SingularSystem(usize),

    #[error("integrand is not finite at theta = {0}")]
    NonFiniteIntegrand(f64),

    #[error("quadrature did not converge: order doubling moved {quantity} by {change:e}")]
    QuadratureDivergence { quantity: String, change: f64 },

    #[error("no level has relativity above 1")]
    NoMalusZone,

    #[error("level {level} is not in the malus zone (starts at {malus_entry})")]
    NotInMalusZone { level: usize, malus_entry: usize },

    #[error("deductibles violate assumption 2{}: {detail}", level.map(|l| format!(" at level {l}")).unwrap_or_default())]
    Assumption2Violation {
        level: Option<usize>,
        detail: String,
    },

    #[error("level {level}: reduced relativity {value} falls below {floor} (assumption 1)")]
    Assumption1Violation {
        level: usize,
        value: f64,
        floor: f64,
    },

    #[error("schedule rejected: {0}")]
    InvalidSchedule(String),

    #[error("level {level}: alpha {alpha} outside [0, {bound}]")]
    AlphaOutOfRange {
        level: usize,
        alpha: f64,
        bound: f64,
    },

    #[error("deductibles of type {claim_type} decrease between levels {lower_level} and {upper_level} (assumption 2(iii))")]
    MonotonicityViolation {
        claim_type: usize,
        lower_level: usize,
        upper_level: usize,
    },

    #[error("alpha {alpha} cannot be met with deductibles proportional to band means (max reachable {reachable})")]
    InfeasibleProportional { alpha: f64, reachable: f64 },

    #[error("supplied deductibles give indifference residual {residual:e} at alpha {alpha}")]
    ManualDInconsistent { alpha: f64, residual: f64 },

    #[error("root not bracketed on [{lo}, {hi}]")]
    NotBracketed { lo: f64, hi: f64 },

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    /// Stable snake_case identifier of the variant.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::NonIncreasingThresholds(_) => "non_increasing_thresholds",
            Error::DegenerateType { .. } => "degenerate_type",
            Error::NegativeDeductible(_) => "negative_deductible",
            Error::EmptyBand { .. } => "empty_band",
            Error::ZeroPenalty(_) => "zero_penalty",
            Error::NotRegularWithin(_) => "not_regular_within",
            Error::NotRegular => "not_regular",
            Error::SingularSystem(_) => "singular_system",
            Error::NonFiniteIntegrand(_) => "non_finite_integrand",
            Error::QuadratureDivergence { .. } => "quadrature_divergence",
            Error::NoMalusZone => "no_malus_zone",
            Error::NotInMalusZone { .. } => "not_in_malus_zone",
            Error::Assumption2Violation { .. } => "assumption2_violation",
            Error::Assumption1Violation { .. } => "assumption1_violation",
            Error::InvalidSchedule(_) => "invalid_schedule",
            Error::AlphaOutOfRange { .. } => "alpha_out_of_range",
            Error::MonotonicityViolation { .. } => "monotonicity_violation",
            Error::InfeasibleProportional { .. } => "infeasible_proportional",
            Error::ManualDInconsistent { .. } => "manual_d_inconsistent",
            Error::NotBracketed { .. } => "not_bracketed",
            Error::Config(_) => "config",
        }
    }
}
