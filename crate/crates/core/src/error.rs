use thiserror::Error;

/// Errors raised while building discretizations, assembling or solving systems.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("singular geometry Jacobian on element {element}")]
    SingularJacobian { element: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("degree of freedom {dof} is constrained more than once")]
    DuplicateConstraint { dof: usize },

    #[error("singular matrix{}", match .pivot { Some(p) => format!(" (no acceptable pivot at index {p})"), None => String::new() })]
    SingularMatrix { pivot: Option<usize> },

    #[error("direct solve inaccurate: scaled residual {residual:.3e}")]
    InaccurateSolve { residual: f64 },

    #[error("singular subscale matrix on element {element}, quadrature point {point}")]
    SingularSubscaleMatrix { element: usize, point: usize },

    #[error("nonlinear iteration did not converge after {iterations} iterations (residual history {history:?})")]
    Nonconvergence { iterations: usize, history: Vec<f64> },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
