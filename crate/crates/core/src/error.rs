use thiserror::Error;

use crate::graph::VertexId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A requested object would exceed a configured memory cap.
    #[error("size limit exceeded: {what} ({requested} > cap {cap})")]
    Size {
        what: &'static str,
        requested: u64,
        cap: u64,
    },

    /// A computation touched the truncation frontier, so the result would
    /// no longer agree with the infinite graph.
    #[error("boundary contamination: vertex {vertex} reached at step {step}")]
    Boundary { vertex: VertexId, step: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("tube starvation at time {time}: restricted front is empty")]
    TubeStarvation { time: usize },

    #[error("regression unavailable: {0}")]
    Regression(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("output error: {0}")]
    Output(String),

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
