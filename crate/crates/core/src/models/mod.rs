//! Built-in rate models and their closed-form observables.

mod ising;
mod table;
mod tasep;

pub use ising::{ising_tau_exact, IsingModel, IsingParams, TransferMatrixSolution};
pub use table::{
    random_table_model, single_site_model, RandomModelOptions, TableModel, TABLE_MAX_SITES,
};
pub use tasep::{
    tasep_b, tasep_b_ln, tasep_density, tasep_ln_z, tasep_r_coefficient, tasep_tau_exact,
    tasep_z, TasepExact, TasepModel, TasepParams, TASEP_MAX_SITES,
};
