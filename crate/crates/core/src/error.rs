use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no endemic equilibrium: R0 = {r0} <= 1")]
    NoEndemicEquilibrium { r0: f64 },

    #[error("{what} did not converge after {iterations} iterations")]
    ConvergenceFailure {
        what: &'static str,
        iterations: usize,
    },

    #[error("state ({s}, {i}) lies outside the simplex")]
    DomainError { s: f64, i: f64 },

    #[error("roots of F still feasible at tau = {tau_max}; enlarge the search range")]
    SearchRangeExceeded { tau_max: f64 },

    #[error("tau = {tau} lies outside the feasibility interval of the {branch} branch")]
    OutsideFeasibleInterval { tau: f64, branch: &'static str },

    #[error("Q(i omega) vanishes at omega = {omega}")]
    DegenerateQ { omega: f64 },

    #[error("delay tau = {tau} is too small for a spectral discretization")]
    DegenerateDelay { tau: f64 },

    #[error("step size underflow at t = {t} (h = {h})")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("trajectory left the simplex at t = {t}: S = {s}, I = {i}")]
    DomainEscape { t: f64, s: f64, i: f64 },

    #[error("window of {window} years is too short: {reason}")]
    WindowTooShort { window: f64, reason: String },

    #[error("{0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
