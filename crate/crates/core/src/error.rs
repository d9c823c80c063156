use thiserror::Error;

/// Errors raised by the simulator and its building blocks.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("partition violation: {0}")]
    Partition(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("agent {agent} is isolated (every block-Lipschitz constant in its row is zero); supply a manual stepsize")]
    DegenerateAgent { agent: usize },

    #[error("infeasible point: block {block} lies outside its constraint set")]
    Infeasible { block: usize },

    #[error("divergence at t = {t}: {what} is not finite")]
    Divergence { t: usize, what: &'static str },

    #[error("document error: {0}")]
    Document(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
