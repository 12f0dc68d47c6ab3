use thiserror::Error;

use crate::phy::Node;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("missing distance for link {from}->{to}")]
    MissingDistance { from: Node, to: Node },

    #[error("missing transmit power for node {0}")]
    MissingPower(Node),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("transmitter {0} is not in the active set")]
    InactiveTransmitter(Node),

    #[error("receiver {0} is transmitting in the same slot")]
    ActiveReceiver(Node),

    #[error("inconsistent chain coefficients: b0 + b2 = {sum} exceeds 1")]
    ModelInconsistency { sum: f64 },

    #[error("closed-form steady state needs b0 > 0 (got {b0}); use the numeric solver")]
    ZeroDeparture { b0: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("batch means need at least {min} batches, got {got}")]
    TooFewBatches { got: usize, min: usize },
}

impl Error {
    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::ModelInconsistency { .. }
            | Error::ZeroDeparture { .. }
            | Error::Numerical(_) => 3,
            Error::Io(_) => 1,
            _ => 2,
        }
    }
}
