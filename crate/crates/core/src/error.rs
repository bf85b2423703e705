use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid scene spec: {0}")]
    InvalidSpec(&'static str),
    #[error("no valid camera placement exists in the scene")]
    DegenerateScene,
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },
    #[error("class id {class} out of range for {classes} classes")]
    ClassOutOfRange { class: u32, classes: usize },
    #[error("observation has zero likelihood under the current posterior")]
    ImpossibleObservation,
    #[error("batch contains no supervised pixels")]
    EmptyBatch,
    #[error("empty {0}")]
    EmptySource(&'static str),
    #[error("non-finite value during optimization")]
    Divergence,
}
