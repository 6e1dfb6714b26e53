use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Crate-wide error type. Variants are kept distinct so callers (and the CLI
/// exit-code mapping) can tell usage errors, data-format errors and numeric
/// failures apart.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch in {op}: ({lrows}x{lcols}) vs ({rrows}x{rcols})")]
    ShapeMismatch {
        op: &'static str,
        lrows: usize,
        lcols: usize,
        rrows: usize,
        rcols: usize,
    },

    #[error("numeric failure in {location}: {detail}")]
    Numeric { location: String, detail: String },

    #[error("bad magic at byte offset {offset}: expected {expected:?}, found {found:?}")]
    BadMagic {
        offset: u64,
        expected: &'static str,
        found: [u8; 4],
    },

    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("truncated file {path:?}: expected {expected} bytes, got {actual}")]
    Truncated {
        path: String,
        expected: u64,
        actual: u64,
    },

    #[error("invalid view angle {angle} (valid angles: 0, 30, 45, 60, 90)")]
    InvalidView { angle: u16 },

    #[error("view mismatch: checkpoint has views {checkpoint:?}, requested {requested:?}")]
    ViewMismatch {
        checkpoint: Vec<u16>,
        requested: Vec<u16>,
    },

    #[error("manifest {path:?} line {line}: {detail}")]
    Manifest {
        path: String,
        line: usize,
        detail: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn numeric(location: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Numeric {
            location: location.into(),
            detail: detail.into(),
        }
    }
}
