use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("field lives on a different grid than the operator expects")]
    GridMismatch,

    #[error("expected {expected} components, got {found}")]
    ComponentCount { expected: usize, found: usize },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("grid with n_theta = {n_theta} cannot represent rotations by 2*pi/{order} exactly")]
    Alignment { n_theta: usize, order: usize },

    #[error("component {0} vanishes; the Nehari set requires every component to be nonzero")]
    ZeroComponent(usize),

    #[error("Nehari retraction infeasible: {0}")]
    Infeasible(String),

    #[error("invalid seed: {0}")]
    InvalidSeed(String),

    #[error("{0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
