use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid architecture factor {name} = {value}")]
    InvalidFactor { name: &'static str, value: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("architecture does not match base configuration: {0}")]
    ConfigMismatch(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("insufficient data: need at least {needed} records, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("target of {target} MACs is unreachable (feasible range {min}..={max})")]
    InfeasibleTarget { target: f64, min: f64, max: f64 },
}

impl Error {
    /// True for failures of the numerical machinery (factorization, optimizer)
    /// as opposed to bad inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Numeric(_))
    }
}
