use std::io;
use std::path::{Path, PathBuf};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{0}")]
    Usage(String),
    #[error("{}: no such file", .0.display())]
    MissingFile(PathBuf),
    #[error("{}: {message}", path.display())]
    InvalidConfig { path: PathBuf, message: String },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}:{line}: {message}", path.display())]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("{}: model format version {found}, this build reads version {expected}", path.display())]
    Version { path: PathBuf, found: u64, expected: u64 },
    #[error("{}: {source}", path.display())]
    Model { path: PathBuf, source: deeplift_core::Error },
    #[error(transparent)]
    Core(#[from] deeplift_core::Error),
}

impl Error {
    pub fn io(path: &Path, source: io::Error) -> Self {
        if source.kind() == io::ErrorKind::NotFound {
            Error::MissingFile(path.to_path_buf())
        } else {
            Error::Io {
                path: path.to_path_buf(),
                source,
            }
        }
    }

    pub fn parse(path: &Path, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.to_path_buf(),
            line,
            message: message.into(),
        }
    }

    /// Process exit status: 2 usage, 3 missing file, 4 invalid configuration, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 2,
            Error::MissingFile(_) => 3,
            Error::InvalidConfig { .. } | Error::Core(deeplift_core::Error::Config(_)) => 4,
            _ => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::Usage(_) => "usage",
            Error::MissingFile(_) => "missing-file",
            Error::InvalidConfig { .. } | Error::Core(deeplift_core::Error::Config(_)) => "invalid-config",
            Error::Io { .. } => "io",
            Error::Parse { .. } => "parse",
            Error::Version { .. } => "model-version",
            Error::Model { .. } => "invalid-model",
            Error::Core(_) => "compute",
        }
    }

    /// `error<TAB>kind<TAB>code<TAB>message` on one line.
    pub fn one_line(&self) -> String {
        let message = self.to_string().replace(['\n', '\t'], " ");
        format!("error\t{}\t{}\t{}", self.kind(), self.exit_code(), message)
    }
}

pub(crate) fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_string(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
