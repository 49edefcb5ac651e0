use std::path::PathBuf;

use thiserror::Error;

use crate::costmodel::{CcfPair, DataflowKind};
use crate::formats::Dim;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed CCF tag `{0}`: expected 4 characters such as `UMCK`")]
    MalformedCcf(String),
    #[error("CCF tag `{0}` compresses the outer mode; only U·U· and U·C· formats are supported")]
    CompressedOuter(String),
    #[error("CCF tag `{0}` names dimension {1} twice")]
    RepeatedDim(String, Dim),
    #[error("format over {found:?} does not describe a matrix over {expected:?}")]
    DimMismatch { expected: [Dim; 2], found: [Dim; 2] },
    #[error("expected a dense (uncompressed) matrix, got {0}")]
    NotDense(String),
    #[error("invalid matrix payload: {0}")]
    InvalidPayload(String),
    #[error("density {0} outside (0, 1]")]
    Density(f64),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("kernel expects operands in {expected}, got ({a}, {b})")]
    KernelFormat { expected: String, a: String, b: String },
    #[error("{kind} cannot compute CCF pair {pair}")]
    UnsupportedPair { kind: DataflowKind, pair: CcfPair },
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error("no feasible plan for kernel `{0}`")]
    NoFeasiblePlan(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("unknown dataflow kind `{0}`")]
    UnknownKind(String),
    #[error("MatrixMarket line {line}: {msg}")]
    MatrixMarket { line: usize, msg: String },
    #[error("invalid workload: {0}")]
    Workload(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    TomlDe(#[from] toml::de::Error),
    #[error(transparent)]
    TomlSer(#[from] toml::ser::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
