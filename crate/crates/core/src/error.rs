use std::path::PathBuf;

/// Errors produced by trace parsing, model learning and enforcement.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A malformed text input (trace, model, scenario or config file).
    /// `line` is 1-based and counts the header line.
    #[error("{msg} at line {line}")]
    Parse { line: usize, msg: String },

    #[error("trace too short: need at least {need} events, have {have}")]
    TraceTooShort { need: usize, have: usize },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("symbol {0} does not appear in the model")]
    UnknownSymbol(crate::trace::SymbolId),

    #[error("symbol set {set_id} has no edges left after filtering")]
    EmptyEdgeSet { set_id: usize },

    #[error("learning failed: {0}")]
    Learn(String),
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
