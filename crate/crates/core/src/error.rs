use thiserror::Error;

use crate::dynamics::EntryState;

#[derive(Debug, Error)]
pub enum Error {
    #[error("altitude {altitude:.1} m is below the atmosphere validity floor {floor:.1} m")]
    BelowAtmosphere { altitude: f64, floor: f64 },

    #[error("angle of attack {alpha:.3} deg outside aero table [{lo:.3}, {hi:.3}]")]
    AeroOutOfRange { alpha: f64, lo: f64, hi: f64 },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("singular coordinates: {0}")]
    SingularCoordinates(&'static str),

    #[error("propagation diverged at t = {:.3} s: {reason}", last.t)]
    Diverged { last: Box<EntryState>, reason: String },

    #[error("exit orbit is hyperbolic")]
    Hyperbolic,

    #[error("numerical domain error: {0}")]
    NumericalDomain(String),

    #[error("no feasible switching schedule: {0}")]
    CorridorInfeasible(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(String),
}

pub type Result<T> = std::result::Result<T, Error>;
