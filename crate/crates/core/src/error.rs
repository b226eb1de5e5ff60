//! Crate-wide error type.

use core::fmt;

/// Errors produced by model construction, estimation, and analysis routines.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A size precondition was violated (e.g. chain with fewer than 2 nodes).
    InvalidSize { what: &'static str, got: usize },
    /// A node id lies outside the node universe `0..p`.
    NodeOutOfRange { node: usize, p: usize },
    /// An edge list does not describe a tree (wrong count, cycle, self-loop,
    /// duplicate, or disconnected).
    NotATree { reason: &'static str },
    /// The correlation parameter must lie strictly inside (0, 1).
    InvalidRho(f64),
    /// A generic argument precondition failed.
    InvalidArgument(&'static str),
    /// No samples have been observed jointly for the pair `(u, v)`; the
    /// empirical correlation is undefined (distinct from being zero).
    NoData { u: usize, v: usize },
    /// A scalar value fell outside the domain of an analytic formula.
    Domain { what: &'static str, value: f64 },
    /// The exponential-tilt family contains no distribution meeting the
    /// constraint within the searched bracket.
    TiltInfeasible,
    /// An acquisition would exceed the total scalar-sample budget. This is a
    /// programming bug in the caller, not a data condition.
    LedgerOverdraw { requested: u64, available: u64 },
    /// Exhaustive search refused to run on an instance above its size guard.
    TooLarge { limit: usize, got: usize },
    /// Two topologies that must share a node set do not.
    NodeSetMismatch,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidSize { what, got } => write!(f, "invalid size for {what}: {got}"),
            Error::NodeOutOfRange { node, p } => {
                write!(f, "node {node} out of range for universe of {p} nodes")
            }
            Error::NotATree { reason } => write!(f, "edge list is not a tree: {reason}"),
            Error::InvalidRho(r) => write!(f, "correlation must lie in (0,1), got {r}"),
            Error::InvalidArgument(what) => write!(f, "invalid argument: {what}"),
            Error::NoData { u, v } => write!(f, "no joint samples observed for pair ({u}, {v})"),
            Error::Domain { what, value } => write!(f, "{what} outside domain: {value}"),
            Error::TiltInfeasible => write!(f, "constraint unreachable within the tilt family"),
            Error::LedgerOverdraw {
                requested,
                available,
            } => write!(
                f,
                "budget overdraw: requested {requested} scalars with {available} available"
            ),
            Error::TooLarge { limit, got } => {
                write!(f, "instance size {got} exceeds exhaustive-search guard {limit}")
            }
            Error::NodeSetMismatch => write!(f, "topologies do not share a node set"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
