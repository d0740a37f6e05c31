use std::io;
use std::path::PathBuf;

/// Errors raised while parsing NPY files.
#[derive(Debug, thiserror::Error)]
pub enum NpyError {
    #[error("not an NPY file: bad magic bytes")]
    BadMagic,
    #[error("unsupported NPY version {major}.{minor}; re-save it as version 1.0, e.g. numpy.lib.format.write_array(f, a, version=(1, 0))")]
    UnsupportedVersion { major: u8, minor: u8 },
    #[error("truncated NPY header")]
    TruncatedHeader,
    #[error("malformed NPY header: {0}")]
    MalformedHeader(String),
    #[error("unsupported dtype {0:?}; only little-endian f4/f8 are accepted")]
    UnsupportedDtype(String),
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },
    #[error("payload length mismatch: shape implies {expected} bytes, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("expected a {expected}-dimensional array, found shape {shape:?}")]
    Dimensionality { expected: usize, shape: Vec<usize> },
    #[error("non-finite value at flat index {index}")]
    NonFinite { index: usize },
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },
    #[error("matrix of {rows}x{cols} exceeds addressable size")]
    Size { rows: usize, cols: usize },
    #[error("invalid matrix data: {0}")]
    InvalidData(String),
    #[error("rank-deficient input: column {column} is dependent, detected rank {rank}")]
    RankDeficient { rank: usize, column: usize },
    #[error("numerical failure in {op}: residual {residual:e}")]
    NumericalFailure { op: &'static str, residual: f64 },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("contract violated: {0}")]
    Contract(String),
    #[error("feature {index} has norm {norm} exceeding radius {radius}")]
    FeatureNorm { index: usize, norm: f64, radius: f64 },
    #[error("schema error at {field}: {message}")]
    Schema { field: String, message: String },
    #[error("{path}: {source}")]
    Npy {
        path: PathBuf,
        #[source]
        source: NpyError,
    },
    #[error("layer {layer}: {source}")]
    Layer {
        layer: String,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::RankDeficient { .. } | Error::NumericalFailure { .. } | Error::Contract(_) => {
                true
            }
            Error::Layer { source, .. } => source.is_numerical(),
            _ => false,
        }
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
