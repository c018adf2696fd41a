use thiserror::Error;

#[derive(Debug, Error)]
pub enum LayoutError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("empty input: no edges and no vertex-count header")]
    EmptyInput,
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unknown backend `{0}` (expected one of naive, naive-cutoff, grid, lbvh, rayquery)")]
    UnknownBackend(String),
    #[error("traversal stack overflow (depth limit {0})")]
    TraversalStackOverflow(usize),
    #[error("non-finite position for vertex {vertex} after {phase} phase in iteration {iteration}")]
    NonFinite {
        vertex: usize,
        phase: &'static str,
        iteration: usize,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, LayoutError>;
