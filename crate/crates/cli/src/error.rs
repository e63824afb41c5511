use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config key `{key}`: {message}")]
    Config { key: String, message: String },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("checkpoint: bad magic")]
    BadMagic,
    #[error("checkpoint: unsupported format version {0}")]
    BadVersion(u16),
    #[error("checkpoint: dimension mismatch, header implies {expected} bytes, file has {found}")]
    DimensionMismatch { expected: u64, found: u64 },
    #[error("checkpoint: corrupted payload ({0})")]
    Corrupted(String),
    #[error("solver did not converge in {0} run(s); set allow_unconverged = true to accept")]
    Unconverged(usize),
    #[error(transparent)]
    Core(#[from] ghf::Error),
}

pub type Result<T> = std::result::Result<T, CliError>;

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
