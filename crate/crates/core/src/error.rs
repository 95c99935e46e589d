use thiserror::Error;

/// Errors raised by the solvers, the ensemble harness and the experiment runner.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("Fock truncation violated: tail mass {tail:.3e} exceeds {threshold:.1e} with {n_levels} levels")]
    Truncation {
        tail: f64,
        threshold: f64,
        n_levels: usize,
    },

    #[error("integrator instability: {0}")]
    Instability(String),

    #[error("ansatz left its validity regime: {0}")]
    Validity(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("no jump can fire: {0}")]
    NoJump(String),

    #[error("steady-state solve failed: {0}")]
    SteadyState(String),

    #[error("{failed} of {total} trajectories failed (budget {budget:.1}%); first failure: {first}")]
    FailureBudget {
        failed: usize,
        total: usize,
        budget: f64,
        first: String,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
