use thiserror::Error;

use crate::pendulum::PendulumState;

/// Errors raised anywhere in the tracking pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("inertia matrix is numerically singular (condition number {condition:.3e})")]
    SingularConfiguration { condition: f64 },

    #[error("cable angles left the validity envelope: q = {:?}", .state.q.as_slice())]
    EnvelopeExceeded { state: PendulumState },

    #[error("filter diverged: {0}")]
    DivergedFilter(String),

    #[error("innovation covariance is numerically singular (condition number {condition:.3e})")]
    SingularInnovation { condition: f64 },

    #[error("measurement unavailable (gamma = 0)")]
    UnavailableMeasurement,

    #[error("calibration underdetermined: {0}")]
    Underdetermined(String),

    #[error("degenerate calibration motion: {0}")]
    DegenerateMotion(String),

    #[error("end-effector plant diverged")]
    DivergedPlant,

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{component} failed at t = {time:.6} s: {source}")]
    Component {
        component: &'static str,
        time: f64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Wrap an error with the pipeline component and simulated time it came from.
    pub fn at(self, component: &'static str, time: f64) -> Self {
        Error::Component {
            component,
            time,
            source: Box::new(self),
        }
    }
}
