use alloc::string::String;
use core::fmt;

use crate::graph::ValidationReport;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// The graph failed structural validation.
    InvalidGraph(ValidationReport),
    /// A tensor's shape and value count disagree.
    TensorShape { shape_len: usize, values: usize },
    /// A tensor carried NaN or an infinity.
    NonFinite { context: String },
    UnknownNode(String),
    MissingInput(String),
    InputShape {
        node: String,
        expected: alloc::vec::Vec<usize>,
        found: alloc::vec::Vec<usize>,
    },
    TargetIndex { node: String, index: usize, len: usize },
    /// The node kind has no rule for the requested propagation.
    Unsupported { node: String, kind: &'static str, method: &'static str },
    /// Automatic target selection found no sigmoid or softmax head.
    NoRecognizableHead(String),
    Normalization(String),
    InvalidBase { position: usize, found: char },
    Dataset(String),
    /// auROC needs at least one example of each class.
    SingleClass,
    NonFiniteLoss { epoch: usize, batch: usize },
    Config(String),
    /// Traces being combined were produced from different graphs.
    GraphMismatch,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidGraph(report) => write!(f, "invalid graph: {report}"),
            Error::TensorShape { shape_len, values } => write!(
                f,
                "tensor shape holds {shape_len} elements but {values} values were given"
            ),
            Error::NonFinite { context } => write!(f, "non-finite value in {context}"),
            Error::UnknownNode(id) => write!(f, "unknown node `{id}`"),
            Error::MissingInput(id) => write!(f, "no tensor supplied for input node `{id}`"),
            Error::InputShape { node, expected, found } => write!(
                f,
                "input `{node}` expects shape {expected:?}, got {found:?}"
            ),
            Error::TargetIndex { node, index, len } => write!(
                f,
                "target index {index} out of range for node `{node}` with {len} elements"
            ),
            Error::Unsupported { node, kind, method } => {
                write!(f, "node `{node}` of kind {kind} is not supported by {method}")
            }
            Error::NoRecognizableHead(msg) => write!(
                f,
                "automatic target selection failed ({msg}); choose an explicit target node"
            ),
            Error::Normalization(msg) => write!(f, "normalization: {msg}"),
            Error::InvalidBase { position, found } => {
                write!(f, "invalid base {found:?} at position {position}")
            }
            Error::Dataset(msg) => write!(f, "dataset: {msg}"),
            Error::SingleClass => write!(f, "auROC needs at least one positive and one negative"),
            Error::NonFiniteLoss { epoch, batch } => {
                write!(f, "non-finite loss at epoch {epoch}, batch {batch}")
            }
            Error::Config(msg) => write!(f, "invalid configuration: {msg}"),
            Error::GraphMismatch => write!(f, "traces come from different graphs"),
        }
    }
}

impl core::error::Error for Error {}
