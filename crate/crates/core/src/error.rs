use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("data length {actual} does not match shape product {expected}")]
    DataLength { expected: usize, actual: usize },

    #[error("duplicate axis label `{0}`")]
    DuplicateLabel(String),

    #[error("axis `{label}` has dimension zero")]
    ZeroDim { label: String },

    #[error("entry {value} violates the non-negative real domain")]
    DomainViolation { value: String },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("unknown axis label `{0}`")]
    UnknownLabel(String),

    #[error("bond `{label}` joins axes of dimension {left} and {right}")]
    BondDimMismatch {
        label: String,
        left: usize,
        right: usize,
    },

    #[error("label `{label}` appears in {count} tensors; contraction needs one or two")]
    LabelMultiplicity { label: String, count: usize },

    #[error("duplicate free label `{0}`")]
    DuplicateFree(String),

    #[error("contraction plan has no tensors")]
    EmptyPlan,

    #[error("target tensor is identically zero")]
    ZeroTarget,

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("invalid parameters: {0}")]
    InvalidParameter(String),

    #[error("invalid task: {0}")]
    InvalidTask(String),

    #[error("assignment does not fit the network: {0}")]
    StructureMismatch(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("negative entry at {0:?}")]
    NegativeEntry(Vec<usize>),

    #[error("linear solve failed: {0}")]
    Solve(String),

    #[error("residual {residual:.3e} exceeds tolerance {tol:.3e}")]
    ResidualTooLarge { residual: f64, tol: f64 },

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("unknown name `{0}`")]
    UnknownName(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
}
