use thiserror::Error;

/// Errors raised anywhere in the simulator.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An antenna sits exactly on a receiver, so the free-space gain is unbounded.
    #[error("antenna {index} coincides with the receiver (zero distance)")]
    Singularity { index: usize },

    /// The scenario or a subproblem has an empty feasible set.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// The first-order conic solver hit its iteration cap.
    #[error("conic solver stopped after {iterations} iterations with KKT residual {residual:.3e}")]
    NotConverged {
        iterations: usize,
        residual: f64,
        /// KKT residual sampled every few iterations.
        trace: Vec<f64>,
    },

    /// The rank-one forcing loop hit its iteration cap.
    #[error("rank-one loop stopped after {iterations} iterations with slack ({varpi_w:.3e}, {varpi_v:.3e})")]
    RankOneNotConverged {
        iterations: usize,
        varpi_w: f64,
        varpi_v: f64,
    },

    /// A brute-force grid would exceed the evaluation budget.
    #[error("grid of {points:.3e} points exceeds the oracle budget of {limit:.1e}")]
    GridTooLarge { points: f64, limit: f64 },

    /// Malformed or incomplete configuration file.
    #[error("config error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Config { line: Option<usize>, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
