use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("malformed document: {0}")]
    Malformed(String),

    #[error("equilibrium search did not converge after {iterations} iterations (residual {residual:e})")]
    EquilibriumNotConverged { iterations: usize, residual: f64 },

    #[error("zigzag instability: transverse/axial ratio {ratio:.4} below critical {critical:.4} for {n_ions} ions")]
    ZigzagInstability { n_ions: usize, ratio: f64, critical: f64 },

    #[error("detuning {mu:e} rad/s is within {tol:e} rad/s of mode {mode} frequency {omega:e} rad/s")]
    DegenerateDetuning { mu: f64, omega: f64, mode: usize, tol: f64 },

    #[error("ion {0} listed more than once")]
    DuplicateIon(usize),

    #[error("ion {0} is not involved in the constraint system")]
    IonNotInvolved(usize),

    #[error("index {index} out of range (size {size})")]
    IndexOutOfRange { index: usize, size: usize },

    #[error("power cap infeasible: required |Ω| {required:e} rad/s exceeds cap {cap:e} rad/s")]
    InfeasiblePowerCap { required: f64, cap: f64 },

    #[error("result is not converged: {0}")]
    Unconverged(String),

    #[error("malformed distribution in row {row}: probabilities sum to {sum}")]
    MalformedDistribution { row: usize, sum: f64 },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
