use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("site {site} out of range 1..={n_sites}")]
    SiteOutOfRange { site: usize, n_sites: usize },

    #[error("window width {width} is invalid for a chain of {n_sites} sites")]
    InvalidWindowWidth { width: usize, n_sites: usize },

    #[error("window {start}..{end} lies outside the chain of {n_sites} sites")]
    WindowOutOfRange { start: usize, end: usize, n_sites: usize },

    #[error("size mismatch: expected {expected}, found {found}")]
    SizeMismatch { expected: usize, found: usize },

    #[error("{n_sites} sites exceed the dense limit of {limit}")]
    DenseLimit { n_sites: usize, limit: usize },

    #[error("string {0} does not fit inside a single window")]
    OutsideWindow(String),

    #[error("eigensolver did not converge after {matvecs} products (residual {residual:e})")]
    NoConvergence { matvecs: usize, residual: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("matrix is not unitary (deviation {0:e})")]
    NotUnitary(f64),

    #[error("ground state still degenerate after {attempts} resamples of seed {seed}")]
    DegenerateGroundState { seed: u64, attempts: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn at_iteration(self, iteration: usize) -> Self {
        Error::AtIteration {
            iteration,
            source: Box::new(self),
        }
    }
}
