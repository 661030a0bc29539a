use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{}: line {line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("catalog validation failed: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("rendering error: {0}")]
    Render(String),

    #[error("backend error: {0}")]
    Backend(String),

    #[error("unparseable rating: {0:?}")]
    Unparseable(String),

    #[error("rating {0} outside 1..=7")]
    OutOfRange(i64),

    #[error("singular design: columns [{}] are linearly dependent on earlier columns", .columns.join(", "))]
    SingularDesign { columns: Vec<String> },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("integrity check failed: {0}")]
    Integrity(String),

    #[error("structural error: {0}")]
    Structural(String),

    #[error("{failed} of {total} probes failed terminally (threshold {threshold})")]
    TooManyFailures {
        failed: usize,
        total: usize,
        threshold: f64,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
