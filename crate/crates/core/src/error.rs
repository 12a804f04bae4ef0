use thiserror::Error;

use crate::graph::NodeSet;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("malformed document: {0}")]
    Malformed(#[from] serde_json::Error),

    #[error("node set must be nonempty")]
    EmptySet,

    #[error("node index {index} out of range 1..={n}")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("node sets overlap")]
    Overlap,

    #[error("weight {weight} on edge ({from}, {to}) is not an integer")]
    NonIntegerWeight { from: usize, to: usize, weight: f64 },

    #[error("exhaustive enumeration refused for n = {n} (limit {limit}); use the branch-and-bound solver")]
    TooLarge { n: usize, limit: usize },

    #[error("invalid sign vector: {0}")]
    InvalidSignVector(String),

    #[error("no finite strong-consensus bound: polarization index {0} is not negative")]
    NoConsensusBound(f64),

    #[error("autonomy index of {0} is -inf")]
    UnboundedAutonomy(NodeSet),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("state became non-finite at t = {time}")]
    BlowUp { time: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}
