use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid register layout: {0}")]
    InvalidLayout(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid site selection: {0}")]
    InvalidSites(String),

    #[error("observable is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("unknown rotation axis `{0}`")]
    UnknownAxis(String),

    #[error("subspace rotation requires two adjacent qutrit sites")]
    NonQutritPair,

    #[error("non-physical coherence times: T2* = {t2star} us must be below 2*T1 = {two_t1} us")]
    NonPhysicalCoherence { t2star: f64, two_t1: f64 },

    #[error("invalid noise parameter: {0}")]
    InvalidNoise(String),

    #[error("negative duration {0} ns")]
    NegativeDuration(f64),

    #[error("layout mismatch between circuit and state")]
    LayoutMismatch,

    #[error("linear inversion is singular")]
    SingularInversion,

    #[error("physicality projection did not converge after {iterations} iterations (last step {last_step:e})")]
    NoConvergence { iterations: usize, last_step: f64 },

    #[error("bootstrap requires shot-mode records")]
    ExactRecords,

    #[error("zero ideal expectation drawn for Pauli string {0}")]
    ZeroIdealExpectation(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
