use std::path::PathBuf;

use crate::cache::CacheError;
use crate::client::FetchError;

/// Process exit statuses.
pub mod exit {
    pub const OK: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const DATA: i32 = 3;
    pub const DEGENERATE: i32 = 4;
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("config: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Cache {
        path: PathBuf,
        #[source]
        source: CacheError,
    },
    #[error(transparent)]
    Fetch(#[from] FetchError),
    #[error("data: {0}")]
    Data(String),
    /// A core computation failed; `context` names the module and grid cell.
    #[error("{context}: {source}")]
    Core {
        context: String,
        #[source]
        source: cryptofactor_core::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => exit::CONFIG,
            Error::Core { source, .. } if source.is_degenerate() => exit::DEGENERATE,
            Error::Core {
                source: cryptofactor_core::Error::InvalidSpec(_),
                ..
            } => exit::CONFIG,
            _ => exit::DATA,
        }
    }
}

/// Attach module and cell context to core results.
pub trait Context<T> {
    fn context(self, context: impl FnOnce() -> String) -> Result<T>;
}

impl<T> Context<T> for cryptofactor_core::Result<T> {
    fn context(self, context: impl FnOnce() -> String) -> Result<T> {
        self.map_err(|source| Error::Core {
            context: context(),
            source,
        })
    }
}
