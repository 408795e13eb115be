use thiserror::Error;

use crate::measurement::PovmReport;

#[derive(Debug, Error)]
pub enum Error {
    #[error("register of {0} qubits exceeds the 4-qubit limit")]
    TooManyQubits(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("state is not normalized: norm^2 = {0}")]
    NotNormalized(f64),

    #[error("length {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("operator is not unitary: max |U^dag U - I| = {0:e}")]
    NotUnitary(f64),

    #[error("operator is not Hermitian: max |A - A^dag| = {0:e}")]
    NotHermitian(f64),

    #[error("bad qubit targets {targets:?} for a {n_qubits}-qubit register")]
    BadTargets { targets: Vec<usize>, n_qubits: usize },

    #[error("empty set of kept qubits")]
    EmptyKeep,

    #[error("angle out of range: {0}")]
    AngleOutOfRange(String),

    #[error("parameter out of range: {0}")]
    InvalidParameter(String),

    #[error("invalid POVM: {0}")]
    InvalidPovm(PovmReport),

    #[error(
        "infeasible W-POVM parameters (a={a}, a'={a_prime}, lambda={lambda}): \
         feasibility requires lambda <= lambda_max(a, a') = {lambda_max}; \
         min eigenvalue of M5 = {min_eigenvalue:e}"
    )]
    InfeasibleWPovm {
        a: f64,
        a_prime: f64,
        lambda: f64,
        min_eigenvalue: f64,
        lambda_max: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
