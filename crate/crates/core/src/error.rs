use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("center not strictly interior: row {row} has slack {slack:e}")]
    NotInterior { row: usize, slack: f64 },

    #[error("gauge geometry error: {0}")]
    Geometry(String),

    #[error("infeasible demand: total {demand} outside ({min_capacity}, {max_capacity})")]
    InfeasibleDemand {
        demand: f64,
        min_capacity: f64,
        max_capacity: f64,
    },

    #[error("degenerate capacity: total minimum equals total maximum ({0})")]
    DegenerateCapacity(f64),

    #[error("non-convex cost: generator {0} has a negative quadratic coefficient")]
    NonConvexCost(usize),

    #[error("layer tape already consumed by a previous backward pass")]
    TapeConsumed,

    #[error("did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("training diverged at epoch {epoch}: loss is {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("grid search refused: {0} generators exceeds the limit of 3")]
    GridTooLarge(usize),

    #[error("case too tight: {accepted} of {requested} samples feasible after {draws} draws")]
    CaseTooTight {
        requested: usize,
        accepted: usize,
        draws: usize,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unsupported cost model {model} at line {line}")]
    UnsupportedCostModel { model: i64, line: usize },

    #[error("dataset hash mismatch: model trained on {expected}, dataset is {actual}")]
    HashMismatch { expected: String, actual: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Whether the error stems from bad user input rather than a runtime failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Dimension { .. }
                | Error::Invalid(_)
                | Error::Parse { .. }
                | Error::UnsupportedCostModel { .. }
                | Error::HashMismatch { .. }
                | Error::GridTooLarge(_)
                | Error::Json(_)
        )
    }
}

pub(crate) fn check_len(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::Dimension {
            context,
            expected,
            actual,
        });
    }
    Ok(())
}
