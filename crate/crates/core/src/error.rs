use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("line {line}: point {point} lies outside universe {universe}")]
    Domain {
        line: usize,
        point: String,
        universe: String,
    },

    #[error("line {line}: time slots must strictly increase (slot {prev} followed by {next})")]
    Ordering { line: usize, prev: u32, next: u32 },

    #[error("trajectory is empty")]
    EmptyTrajectory,

    #[error("index {index} out of range for a dataset of {len} trajectories")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid parameter `{name}`: {msg}")]
    InvalidParameter { name: &'static str, msg: String },

    #[error("ledger scope `{0}` does not name a node of the tree")]
    UnknownScope(String),

    #[error("budget audit failed: path {path} spends {spent} > total {total}")]
    AuditFailed { path: String, spent: f64, total: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, msg: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            msg: msg.into(),
        }
    }
}
