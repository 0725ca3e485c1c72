//! Turns a validated model section into a rate model.

use latgas_core::lattice::{validate_model, Configuration, RateModel, SiteSet};
use latgas_core::models::{IsingModel, TableModel, TasepModel};
use latgas_core::Error;

use crate::config::{ModelSpec, TableEvent, TableSpec};

#[derive(Debug, Clone)]
pub enum BuiltModel {
    Ising(IsingModel),
    Tasep(TasepModel),
    Table(TableModel),
}

impl BuiltModel {
    pub fn rates(&self) -> &dyn RateModel {
        match self {
            BuiltModel::Ising(m) => m,
            BuiltModel::Tasep(m) => m,
            BuiltModel::Table(m) => m,
        }
    }
}

pub fn build_model(spec: &ModelSpec) -> Result<BuiltModel, Error> {
    Ok(match spec {
        ModelSpec::Ising(p) => BuiltModel::Ising(IsingModel::new(*p)?),
        ModelSpec::Tasep(p) => BuiltModel::Tasep(TasepModel::new(*p)?),
        ModelSpec::Table(t) => BuiltModel::Table(build_table(t)?),
    })
}

/// Table entries are applied in file order; a later entry overrides an
/// earlier one on the states both match. A pattern only assigns rates in
/// states where the event can fire, so `*` is always safe.
pub fn build_table(spec: &TableSpec) -> Result<TableModel, Error> {
    let candidates = spec.extraction_subsets.iter().map(|v| SiteSet::from_sites(v.iter().copied())).collect();
    let mut table = TableModel::new(spec.lattice, spec.diffusion_pairs.clone(), candidates)?;
    let states: Vec<Configuration> = spec.lattice.states().collect();
    for entry in &spec.rates {
        for c in states.iter().filter(|c| entry.state.matches(c.bits())) {
            match &entry.event {
                TableEvent::Inject { site } if !c.occupied(*site) => table.set_injection(c, *site, entry.rate)?,
                TableEvent::Diffuse { from, to } if c.occupied(*from) && !c.occupied(*to) => {
                    table.set_diffusion(c, *from, *to, entry.rate)?
                }
                TableEvent::Extract { sites } if sites.iter().all(|&x| c.occupied(x)) => {
                    table.set_extraction(c, SiteSet::from_sites(sites.iter().copied()), entry.rate)?
                }
                _ => {}
            }
        }
    }
    let report = validate_model(&table);
    if !report.is_valid() {
        let mut problems = Vec::new();
        if let Some(v) = report.violations.first() {
            problems.push(format!("{} rate violations, first: {v:?}", report.violations.len()));
        }
        if let Some(c) = report.absorbing.first() {
            problems.push(format!("{} absorbing configurations, first: {c}", report.absorbing.len()));
        }
        if report.irreducible == Some(false) {
            problems.push("the chain is not irreducible".into());
        }
        return Err(Error::Domain(format!("rate table is not a valid model: {}", problems.join("; "))));
    }
    Ok(table)
}
