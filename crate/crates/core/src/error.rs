use alfeld_linalg::LinalgError;

#[derive(Debug, thiserror::Error)]
pub enum CoreError {
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("degenerate tetrahedron")]
    Degenerate,
    #[error("no rational unit frame on face {0}")]
    FrameUnavailable(usize),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("unknown space label `{0}`")]
    UnknownLabel(String),
    #[error("{what} is only available for {bound}, got r={r}")]
    UnsupportedRange {
        what: String,
        bound: String,
        r: usize,
    },
    #[error("dof count {dofs} does not match dimension {dim} for {label}")]
    CountMismatch {
        label: String,
        dofs: usize,
        dim: usize,
    },
    #[error("mesh: {0}")]
    Mesh(String),
    #[error("{0}")]
    Precondition(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<T> = std::result::Result<T, CoreError>;
