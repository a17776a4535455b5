use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty event stream")]
    EmptyEvents,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("cannot split {nodes} nodes into {clients} non-empty clients")]
    TooManyClients { clients: usize, nodes: usize },
    #[error("graph too dense to sample {requested} non-edges")]
    TooDense { requested: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("numeric overflow: non-finite loss")]
    NumericOverflow,
    #[error("NaN: non-finite parameters at iteration {iteration} ({detail})")]
    Diverged { iteration: usize, detail: String },
    #[error("parameter layout mismatch: expected {expected} values, got {actual}")]
    LayoutMismatch { expected: usize, actual: usize },
    #[error("histograms built with different iteration counts ({0} vs {1})")]
    IterationMismatch(usize, usize),
    #[error("{metric} requires {requirement}")]
    Metric {
        metric: &'static str,
        requirement: &'static str,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("config: {0}")]
    Config(String),
    /// Finite parameters whose embeddings overflow when scored.
    #[error("NaN: {count} non-finite anomaly scores")]
    NonFiniteScores { count: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
