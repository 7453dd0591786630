use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{}value {value} outside {range}", line_prefix(*.line))]
    Range {
        line: Option<usize>,
        value: f64,
        range: &'static str,
    },

    #[error("line {line}: declared rating count {declared} but {observed} cells are rated")]
    CountMismatch {
        line: usize,
        declared: usize,
        observed: usize,
    },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("empty result: {0}")]
    Empty(String),

    #[error("cluster {0} has no members")]
    DegenerateCluster(usize),

    #[error("degenerate cluster model: {0}")]
    DegenerateModel(String),

    #[error(
        "current quality series does not trend upward (log-fit slope {slope}); no intersection"
    )]
    NoIntersection { slope: f64 },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    /// True for failures of the method itself (degenerate clusters, missing
    /// intersection) as opposed to bad input.
    pub fn is_methodology(&self) -> bool {
        matches!(
            self,
            Error::DegenerateCluster(_) | Error::DegenerateModel(_) | Error::NoIntersection { .. }
        )
    }
}

fn line_prefix(line: Option<usize>) -> String {
    line.map(|l| format!("line {l}: ")).unwrap_or_default()
}
