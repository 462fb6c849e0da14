use thiserror::Error;

/// Failures raised by the solvers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("newton iteration did not converge at time step {step} after {iterations} iterations (residual {residual:.3e})")]
    NewtonDiverged {
        step: usize,
        iterations: usize,
        residual: f64,
        iterate: Vec<f64>,
    },

    #[error("singular linear system (pivot {pivot:.3e} at row {row})")]
    SingularSystem { row: usize, pivot: f64 },

    #[error(
        "CFL condition violated at step {step}: dt = {dt:.3e} exceeds stable limit {limit:.3e}"
    )]
    Cfl { step: usize, dt: f64, limit: f64 },

    #[error("eikonal cost must be positive and finite, got {value} in cell {cell}")]
    EikonalCost { cell: usize, value: f64 },

    #[error("descent iteration {iteration}: {source}")]
    Descent {
        iteration: usize,
        #[source]
        source: Box<SolverError>,
    },
}

impl SolverError {
    /// Name of the solver stage that failed, used in failure records.
    pub fn module(&self) -> &'static str {
        match self {
            SolverError::InvalidInput(_) => "input",
            SolverError::NewtonDiverged { .. } => "forward",
            SolverError::SingularSystem { .. } => "linear_solve",
            SolverError::Cfl { .. } | SolverError::EikonalCost { .. } => "hughes",
            SolverError::Descent { .. } => "mfg",
        }
    }

    /// Residual associated with the failure, when there is one.
    pub fn residual(&self) -> Option<f64> {
        match self {
            SolverError::NewtonDiverged { residual, .. } => Some(*residual),
            SolverError::Descent { source, .. } => source.residual(),
            _ => None,
        }
    }

    pub fn iteration(&self) -> Option<usize> {
        match self {
            SolverError::Descent { iteration, .. } => Some(*iteration),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, SolverError>;
