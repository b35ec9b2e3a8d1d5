use alloc::string::String;
use core::fmt;

/// Errors raised by the rendezvous library.
#[derive(Clone, Debug, PartialEq)]
pub enum Error {
    /// A scenario invariant does not hold; the message names it.
    InvalidConfig(String),
    /// A numeric input that must be finite was not.
    NonFinite(&'static str),
    /// A follower has no neighbors to follow. The id is absent when the
    /// failing call only saw positions.
    EmptyNeighborhood { robot: Option<usize> },
    /// The Laplacian was requested without a weight for a follower edge.
    MissingWeight { from: usize, to: usize },
    /// The sensing graph has no spanning tree rooted at the informed robot.
    NoSpanningTree { root: usize },
    /// Integration produced a non-finite pose.
    NonFiniteState {
        step: usize,
        robot: usize,
        dump: String,
    },
    /// An operation that needs at least one record got none.
    EmptyLog,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidConfig(msg) => write!(f, "invalid scenario: {msg}"),
            Error::NonFinite(what) => write!(f, "non-finite value: {what}"),
            Error::EmptyNeighborhood { robot: Some(id) } => {
                write!(f, "follower {id} has an empty neighbor set")
            }
            Error::EmptyNeighborhood { robot: None } => {
                f.write_str("follower has an empty neighbor set")
            }
            Error::MissingWeight { from, to } => {
                write!(f, "missing coupling weight for edge ({from},{to})")
            }
            Error::NoSpanningTree { root } => write!(
                f,
                "initial sensing graph has no directed spanning tree rooted at robot {root}"
            ),
            Error::NonFiniteState { step, robot, dump } => write!(
                f,
                "robot {robot} reached a non-finite state at step {step}: {dump}"
            ),
            Error::EmptyLog => f.write_str("trajectory log is empty"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
