use thiserror::Error;

/// Errors produced by mesh handling, assembly, and the study driver.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("mesh topology error: {0}")]
    Topology(String),

    #[error("quadrature degree {requested} exceeds supported maximum {max}")]
    UnsupportedDegree { requested: usize, max: usize },

    #[error("singular Gram matrix on element {element}")]
    SingularGram { element: usize },

    #[error("interior block of element {element} is not invertible")]
    NonInvertibleInterior { element: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not symmetric positive definite: {0}")]
    NotSpd(String),

    #[error("linear solve stalled at relative residual {residual:.3e} (target {target:.3e})")]
    SolveTolerance { residual: f64, target: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("report schema mismatch: {0}")]
    Schema(String),

    #[error("refinement n={level}: {source}")]
    AtRefinement {
        level: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn at_refinement(self, level: usize) -> Self {
        Error::AtRefinement {
            level,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
