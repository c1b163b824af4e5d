use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NeutronError {
    #[error("invalid domain: {0}")]
    Domain(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("point ({0}, {1}) is not inside the domain")]
    Outside(f64, f64),
    #[error("t_star too deep: no particle survived to t = {0}")]
    NoSurvivors(f64),
    #[error("precondition violated: {0}")]
    Precondition(String),
}

pub type Result<T, E = NeutronError> = std::result::Result<T, E>;
