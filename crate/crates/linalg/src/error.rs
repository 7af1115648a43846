use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LinalgError {
    #[error("matrix is singular (rank {rank} < {size})")]
    Singular { rank: usize, size: usize },
    #[error("dimension mismatch: {0}")]
    Shape(String),
    #[error("a denominator vanishes modulo {prime}; retry with another prime")]
    DenominatorVanishes { prime: u64 },
    #[error("modulus {0} is not an admissible prime")]
    BadModulus(u64),
    #[error("cannot parse rational number {0:?}")]
    Parse(String),
}
