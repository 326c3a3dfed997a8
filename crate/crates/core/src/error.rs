//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("field evaluation outside domain: {0}")]
    Domain(String),

    #[error("unknown voltage node '{0}'")]
    UnknownNode(String),

    #[error("no trapping minimum found: {0}")]
    NoMinimum(String),

    #[error("point is not a minimum: {0}")]
    NotAMinimum(String),

    #[error("trap depth unbounded: no barrier within {search_radius_um:.1} um")]
    Unbounded { search_radius_um: f64 },

    #[error("no root in bracket [{lo} V, {hi} V]: {msg}")]
    NoRoot { lo: f64, hi: f64, msg: String },

    #[error("scheduled voltage exceeds the {limit_v} V breakdown limit: {msg}")]
    VoltageLimit { limit_v: f64, msg: String },

    #[error("unreachable transport target: {0}")]
    UnreachableTarget(String),

    #[error("invalid shuttle protocol: {0}")]
    InvalidProtocol(String),

    #[error("ion lost at t = {t_s:.3e} s: {msg}")]
    IonLost { t_s: f64, msg: String },

    #[error("integrator step failure: {0}")]
    StepFailure(String),

    #[error("trajectory record has no post-transport window")]
    MissingWindow,

    #[error("shuttle and anomalous curves do not intersect")]
    NoCrossover,

    #[error("every sweep cell failed; first error: {0}")]
    AllCellsFailed(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
