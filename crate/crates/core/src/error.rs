use std::path::PathBuf;

/// Broad failure classes. The CLI maps these onto exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Caller supplied an argument combination that cannot work.
    Usage,
    /// Malformed or inconsistent input data.
    Data,
    /// Numerical degeneracy or a vacuous/undefined quantity.
    Numeric,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Format(String),
    #[error("{0}")]
    InvalidInput(String),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Degenerate(String),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io { .. } | Error::Format(_) | Error::InvalidInput(_) => ErrorKind::Data,
            Error::Usage(_) => ErrorKind::Usage,
            Error::Degenerate(_) => ErrorKind::Numeric,
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io { path: path.to_path_buf(), source }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

macro_rules! bail {
    ($variant:ident, $($arg:tt)*) => {
        return Err($crate::error::Error::$variant(format!($($arg)*)))
    };
}
pub(crate) use bail;
