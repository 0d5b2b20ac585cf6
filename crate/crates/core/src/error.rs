use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// The target-space metric stopped being positive definite.
    #[error("Kähler metric is singular at |φ| = {radius:.6e}: {detail}")]
    SingularMetric { radius: f64, detail: String },

    /// `h_ab = Re f_ab` lost positive definiteness; the model left its validity domain.
    #[error("gauge kinetic matrix h_ab is not positive definite at grid point {point}")]
    SingularKinetic { point: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid structure constants: {0}")]
    Algebra(String),

    #[error("Picard iteration did not contract within {iterations} iterations (last update {last_update:.3e}); reduce dt")]
    StepSize { iterations: usize, last_update: f64 },

    #[error("non-finite value in {quantity} at grid point {point}")]
    NonFinite { quantity: &'static str, point: usize },

    #[error("initial data construction failed: {0}")]
    InitialData(String),

    #[error("snapshot format error: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
