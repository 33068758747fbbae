use thiserror::Error;

/// Errors raised by the solvers.
///
/// Variants split into two families: input validation (a parameter or argument
/// outside its domain) and numerical failure (an iteration or quadrature that
/// did not reach its tolerance). [`Error::is_validation`] tells them apart.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{what} = {value} lies outside [{lo}, {hi}]")]
    OutOfRange {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("no sign change on [{lo}, {hi}]")]
    Bracket { lo: f64, hi: f64 },

    #[error("quadrature did not converge (error estimate {estimate:e}, requested {requested:e})")]
    Quadrature { estimate: f64, requested: f64 },

    #[error("{0} did not converge")]
    NoConvergence(String),

    #[error("time step {dt} exceeds the explicit reaction bound {limit}")]
    StepTooLarge { dt: f64, limit: f64 },

    #[error("degenerate state: total density vanished at node {node} (t = {t})")]
    DegenerateState { node: usize, t: f64 },

    #[error("grid is not uniform")]
    NonUniformGrid,

    #[error("profile is not a verified steady state (interior residual {interior:e}, boundary residual {boundary:e})")]
    UnverifiedProfile { interior: f64, boundary: f64 },

    #[error("boundary value {q} does not solve the time-map equation (residual {residual:e})")]
    NotABoundaryRoot { q: f64, residual: f64 },

    #[error("relaxation did not settle by t = {t} (rate {rate:e})")]
    NotSettled { t: f64, rate: f64 },
}

impl Error {
    /// True for input-validation failures, false for numerical ones.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_)
                | Error::OutOfRange { .. }
                | Error::StepTooLarge { .. }
                | Error::NonUniformGrid
                | Error::UnverifiedProfile { .. }
                | Error::NotABoundaryRoot { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_proportion(what: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            what,
            value,
            lo: 0.0,
            hi: 1.0,
        })
    }
}
