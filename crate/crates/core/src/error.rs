use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid scenario configuration or malformed config file.
    #[error("config: {0}")]
    Config(String),

    /// An argument outside an operation's domain (bad action index, inactive
    /// user, missing target, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A numeric procedure failed (singular system, LP residual too large,
    /// iteration cap hit).
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// A linear program ended with a non-optimal status where an optimum was
    /// required.
    #[error("linear program not optimal: {0}")]
    Lp(String),

    /// `low_regime_policy` was asked to solve a high-regime instance; the LP
    /// path is the correct tool there.
    #[error(
        "not in the low access-rate regime (eps_omega = {eps_omega} > omega_init = {omega_init})"
    )]
    NotLowRegime { eps_omega: f64, omega_init: f64 },

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
