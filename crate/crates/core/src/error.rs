use thiserror::Error;

/// Errors raised by the library. Every fallible public operation returns [`Result`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("index out of range: {0}")]
    Index(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("point {index} ({role}) lies outside its box in coordinate {coord}: {value}")]
    OutsideBox {
        role: &'static str,
        index: usize,
        coord: usize,
        value: f64,
    },

    #[error("kernel `{family}` is singular at r = 0")]
    KernelDomain { family: String },

    #[error("dense materialization of {entries} entries exceeds the cap of {cap}")]
    SizeCap { entries: usize, cap: usize },

    #[error("cross initialization failed at bond {bond}: every candidate 2x2 cross matrix is singular; re-run the index initialization with another seed")]
    InitSingular { bond: usize },

    #[error("cross matrix is singular; re-run the index initialization with another seed")]
    SingularCross,

    #[error("norm of the reference is zero: {0}")]
    ZeroNorm(String),

    #[error("container: {0}")]
    Container(#[from] ContainerError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Failures while decoding a PTTK1 container.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum ContainerError {
    #[error("bad magic bytes")]
    BadMagic,
    #[error("unsupported container version {found} (expected {expected})")]
    Version { found: u64, expected: u64 },
    #[error("unexpected end of data while reading {0}")]
    Truncated(&'static str),
    #[error("checksum mismatch in section {section}")]
    Checksum { section: u64 },
    #[error("malformed container: {0}")]
    Malformed(String),
}

pub type Result<T> = std::result::Result<T, Error>;
