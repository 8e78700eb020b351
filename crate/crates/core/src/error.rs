use std::fmt;

use crate::hydro::PairIndex;

/// A pair of particles that came closer than the separation radius.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparationViolation {
    pub pair: (PairIndex, PairIndex),
    pub distance: f64,
    pub sep_radius: f64,
}

impl fmt::Display for SeparationViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} and {} at distance {:.6e} <= R = {:.6e}",
            self.pair.0, self.pair.1, self.distance, self.sep_radius
        )
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("coincident particles: interaction tensor undefined at zero separation")]
    CoincidentParticles,

    #[error("need at least two particles, got {0}")]
    TooFewParticles(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("separation violated at t = {time:.6e}: {violation}")]
    Separation {
        time: f64,
        violation: SeparationViolation,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("bracket rank deficient: rank {rank} < {dim}")]
    RankDeficient { rank: usize, dim: usize },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

pub(crate) fn contract(msg: impl Into<String>) -> Error {
    Error::Contract(msg.into())
}
