use thiserror::Error;

/// Failures reported by the solver kernels.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch between operands")]
    GridMismatch,

    #[error("derivative order {0} exceeds the supported maximum of 6")]
    OrderTooHigh(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("surface too close to the bottom: inf(eta + b) = {min_depth:.6e} < {margin:.6e}")]
    SeparationViolated { min_depth: f64, margin: f64 },

    #[error("truncation depth {depth} is below the required {required}")]
    TruncationTooShallow { depth: f64, required: f64 },

    #[error("Craig-Sulem series diverging: term norms grew at orders {orders:?}")]
    SeriesDiverging { orders: Vec<usize> },

    #[error("elliptic solve stalled after {iterations} iterations at relative residual {residual:.3e}")]
    SolverStalled { iterations: usize, residual: f64 },

    #[error("input has nonzero mean {mean:.3e}")]
    MeanNotZero { mean: f64 },

    #[error("no convergence within {max_iterations} iterations (residual {residual:.3e})")]
    NoConvergence { max_iterations: usize, residual: f64 },

    #[error("input field is zero")]
    ZeroInput,

    #[error("iterate left the admissible ball: norm {norm:.6e} >= radius {radius:.6e}")]
    BallExit { norm: f64, radius: f64 },

    #[error("fixed-point map is not contracting (ratios {ratios:?})")]
    NoContraction { ratios: Vec<f64> },

    #[error("maximum iterations ({0}) reached")]
    MaxIterations(usize),

    #[error("perturbation amplitude {amplitude:.3e} exceeds the admission threshold {threshold:.3e}")]
    NotAdmissible { amplitude: f64, threshold: f64 },

    #[error("step rejected: H^s norm grew from {before:.6e} to {after:.6e}")]
    StepRejected { before: f64, after: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
