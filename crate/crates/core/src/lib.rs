//! Stochastic lattice-gas models: simulation with particle tracking, exact
//! finite-state solutions, and closed forms for the Ising ring and TASEP.

pub mod error;
pub mod lattice;
pub mod models;
pub mod oracle;
pub mod simulator;
pub mod stats;
pub mod tracker;

pub use error::{Error, Result};
pub use lattice::{
    apply_event, enabled_events, total_rate, validate_model, Configuration, Event, Lattice,
    RateModel, SiteSet, Topology,
};
pub use oracle::{detailed_balance_check, exact_law, ExactSolution, ReversibilityReport};
pub use simulator::{run, run_ensemble, JumpRecord, Observer, RunControl, RunSummary, StopRule};
pub use tracker::{Estimates, ResidenceLedger, Tracker};
