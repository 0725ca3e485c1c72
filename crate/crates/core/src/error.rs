use thiserror::Error;

use crate::lattice::{Configuration, Event};

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("lattice size {size} is outside the supported range 1..={max}")]
    LatticeSize { size: usize, max: usize },

    #[error("configuration has {got} sites but the lattice has {expected}")]
    SizeMismatch { expected: usize, got: usize },

    #[error("site {site} is out of range for a lattice of {size} sites")]
    SiteOutOfRange { site: usize, size: usize },

    #[error("event {event} cannot fire in {config}: {reason} at site(s) {sites:?}")]
    Precondition {
        event: Event,
        config: Configuration,
        sites: Vec<usize>,
        reason: &'static str,
    },

    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("configuration {0} is absorbing (total exit rate is zero)")]
    Absorbing(Configuration),

    #[error("drain did not finish within the jump budget of {budget} ({open} tagged particles still inside)")]
    DrainBudgetExhausted { budget: u64, open: usize },

    #[error("particle ledger out of sync with the trajectory at jump {jump}: {detail}")]
    LedgerCorruption { jump: u64, detail: String },

    #[error("{open} particles injected by the cutoff are still inside; drain the run first")]
    IncompleteDrain { open: usize },

    #[error("{what} needs at most {max} sites, model has {size}")]
    CapExceeded {
        what: &'static str,
        size: usize,
        max: usize,
    },

    #[error("generator is singular to working precision (residual {residual:e}); the model is probably reducible")]
    Reducible { residual: f64 },

    #[error("model has no positive injection rate under the stationary law; residence time undefined")]
    NoInflux,

    #[error("eigenvalue iteration did not converge for a {dim}-dimensional operator")]
    EigenFailure { dim: usize },

    #[error("replica {index}: {source}")]
    Replica {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{0}")]
    Domain(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
