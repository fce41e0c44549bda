use thiserror::Error;

/// Errors raised by the optimizer, solvers and simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid fading model: {0}")]
    InvalidModel(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("density evaluation is undefined for a discrete fading model; use the state list")]
    DiscreteKind,

    #[error("operation requires a discrete fading model")]
    NotDiscrete,

    #[error("operation requires a continuous fading model")]
    NotContinuous,

    #[error("normalized power must be positive, got {0}")]
    NonPositivePi(f64),

    #[error("no Lagrange multiplier bracket in [1e-30, 1e30] for pi = {pi}")]
    BracketFailure { pi: f64 },

    #[error("root finder did not converge: {0}")]
    RootFinding(String),

    #[error("quadrature did not reach tolerance (estimate {value}, error {abs_err})")]
    Quadrature { value: f64, abs_err: f64 },

    #[error("no interior stationary point; optimum lies at the {0} boundary")]
    NoStationaryPoint(Boundary),

    #[error("no sign change of the stationary integral over the scanned multiplier range")]
    NoBracket,

    #[error("hypothesis not met: {0}")]
    HypothesisNotMet(String),

    #[error("network power budget {p_bar} W does not exceed overhead power {overhead} W")]
    BudgetExhausted { p_bar: f64, overhead: f64 },

    #[error("packet scheme ordering violated: h1*P1 = {lhs} < h2*P2 = {rhs}")]
    OrderingViolation { lhs: f64, rhs: f64 },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for errors caused by bad inputs rather than numerical breakdown.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidModel(_)
                | Error::InvalidParameter { .. }
                | Error::DiscreteKind
                | Error::NotDiscrete
                | Error::NotContinuous
                | Error::NonPositivePi(_)
                | Error::BudgetExhausted { .. }
                | Error::OrderingViolation { .. }
                | Error::HypothesisNotMet(_)
        )
    }
}

/// Which end of the hop-distance axis carries the optimum when no interior
/// stationary point exists.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Zero,
    Infinity,
}

impl std::fmt::Display for Boundary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Boundary::Zero => f.write_str("d -> 0"),
            Boundary::Infinity => f.write_str("d -> infinity"),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
