use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A caller-supplied argument violates a precondition.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// The requested mesh would exceed the vertex budget.
    #[error("mesh too large: about {estimated} vertices requested, budget is {budget}")]
    Capacity { estimated: usize, budget: usize },

    /// Mesh text could not be parsed or fails validation.
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Mesh topology or geometry is invalid.
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    /// The discrete problem has no unknowns or no bracket.
    #[error("degenerate problem: {0}")]
    Degenerate(String),

    /// A point lies outside the mesh.
    #[error("point ({x}, {y}) lies outside the mesh")]
    Geometry { x: f64, y: f64 },

    /// The conjugate-gradient iteration hit its cap.
    #[error("conjugate gradient did not converge after {iterations} iterations (relative residual {residual:e})")]
    Solver { iterations: usize, residual: f64 },

    /// A constraint specification is infeasible on the given domain.
    #[error("infeasible constraint: {0}")]
    Constraint(String),

    /// Reading or writing an artifact failed.
    #[error("i/o error: {0}")]
    Io(String),

    /// A solver failure that occurred inside an optimizer iteration.
    #[error("iteration {iteration}: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    /// True for conjugate-gradient failures, including ones wrapped by the optimizer.
    pub fn is_solver_failure(&self) -> bool {
        match self {
            Error::Solver { .. } => true,
            Error::Iteration { source, .. } => source.is_solver_failure(),
            _ => false,
        }
    }
}
