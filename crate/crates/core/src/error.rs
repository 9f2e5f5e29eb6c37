use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("node index {index} out of range (node_count = {node_count})")]
    NodeOutOfRange { index: usize, node_count: usize },

    #[error("invalid metapath: {0}")]
    Metapath(String),

    #[error("path-instance count overflow in {0}")]
    CountOverflow(String),

    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    Shape {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("tape: {0}")]
    Tape(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("infeasible synthetic spec: {0}")]
    Infeasible(String),

    #[error("insufficient data: {0}")]
    Insufficient(String),

    #[error("config: {0}")]
    Config(String),

    #[error("refused: {0}")]
    Refused(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code: 1 usage, 2 data, 3 numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            Error::NonFinite(_) => 3,
            _ => 2,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(op: &'static str, left: &[usize], right: &[usize]) -> Self {
        Error::Shape {
            op,
            left: left.to_vec(),
            right: right.to_vec(),
        }
    }
}
