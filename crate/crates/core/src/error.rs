use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QsdError {
    #[error("structural violation in row {row}: {reason}")]
    Structural { row: usize, reason: String },

    #[error("cemetery unreachable from states {states:?}")]
    Unreachable { states: Vec<usize> },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("horizon too deep: renormalize stepwise (survival {survival:e} below floor)")]
    HorizonTooDeep { survival: f64 },

    #[error("criteria violated: QSD not unique at this truncation ({0})")]
    NotUnique(String),

    #[error("(A1) fails at t0 = {t0}: try larger t0 or report failure")]
    A1Fails { t0: f64 },

    #[error("extend t_max: {0}")]
    ExtendHorizon(String),

    #[error("state space of {required} states exceeds budget {budget}")]
    Budget { required: usize, budget: usize },

    #[error("singular matrix")]
    Singular,

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("rate expression: {0}")]
    Expr(String),
}

impl QsdError {
    /// True for negative mathematical verdicts, as opposed to malformed input.
    pub fn is_criteria_failure(&self) -> bool {
        matches!(self, Self::A1Fails { .. } | Self::NotUnique(_) | Self::ExtendHorizon(_))
    }
}

pub type Result<T, E = QsdError> = std::result::Result<T, E>;
