//! One function per CLI mode, each producing a [`Report`].

use latgas_core::lattice::{Configuration, Topology};
use latgas_core::models::{ising_tau_exact, tasep_density, tasep_r_coefficient, tasep_tau_exact, TasepParams};
use latgas_core::oracle::{detailed_balance_check, exact_law, STATIONARY_MAX_SITES};
use latgas_core::simulator::{run_ensemble, RunControl};
use latgas_core::tracker::{Estimates, Tracker};
use latgas_core::Error;

use crate::config::{Mode, ModelSpec, RunConfig, StopSpec};
use crate::model::{build_model, BuiltModel};
use crate::report::{Cell, Report};

/// Relative tolerance between a closed form and the oracle.
pub const CLOSED_FORM_RTOL: f64 = 1e-9;
/// Verdict threshold in standard errors.
pub const VERIFY_SIGMAS: f64 = 3.0;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("invalid model: {0}")]
    Model(Error),
    #[error("{0}")]
    Failed(Error),
}

impl RunError {
    /// Parameter, cap and solvability problems are the model's fault; the
    /// rest (drain budget, ledger corruption) happen while running.
    fn classify(e: Error) -> Self {
        match e {
            Error::InvalidParameter { .. }
            | Error::LatticeSize { .. }
            | Error::SiteOutOfRange { .. }
            | Error::SizeMismatch { .. }
            | Error::CapExceeded { .. }
            | Error::Reducible { .. }
            | Error::NoInflux
            | Error::Absorbing(_) => RunError::Model(e),
            Error::Replica { source, .. } if matches!(*source, Error::Absorbing(_)) => RunError::Model(*source),
            other => RunError::Failed(other),
        }
    }
}

/// A finished mode: the table to write and whether verification passed.
#[derive(Debug)]
pub struct Outcome {
    pub report: Report,
    pub passed: bool,
}

pub fn execute(config: &RunConfig) -> Result<Outcome, RunError> {
    let report = match config.mode {
        Mode::Simulate => simulate(config),
        Mode::Exact => exact(config),
        Mode::VerifyLaw => return verify_law(config),
        Mode::Profile => profile(config),
        Mode::IsingTau => ising_tau(config),
        Mode::Scan => scan(config),
    }?;
    Ok(Outcome { report, passed: true })
}

fn param_cells(spec: &ModelSpec) -> Vec<(&'static str, Cell)> {
    let mut cells = vec![("model", Cell::str(spec.kind())), ("L", Cell::Int(spec.sites() as u64))];
    match spec {
        ModelSpec::Tasep(p) => {
            cells.push(("alpha", Cell::Float(p.alpha)));
            cells.push(("beta", Cell::Float(p.beta)));
        }
        ModelSpec::Ising(p) => {
            cells.push(("coupling", Cell::Float(p.coupling)));
            cells.push(("chemical_potential", Cell::Float(p.chemical_potential)));
            cells.push(("alpha00", Cell::Float(p.alpha[0][0])));
            cells.push(("alpha10", Cell::Float(p.alpha[1][0])));
            cells.push(("alpha01", Cell::Float(p.alpha[0][1])));
            cells.push(("alpha11", Cell::Float(p.alpha[1][1])));
            cells.push(("kawasaki_scale", Cell::Float(p.kawasaki_scale)));
        }
        ModelSpec::Table(t) => {
            let topology = match t.lattice.topology() {
                Topology::Path => "path",
                Topology::Ring => "ring",
            };
            cells.push(("topology", Cell::str(topology)));
            cells.push(("rate_entries", Cell::Int(t.rates.len() as u64)));
        }
    }
    cells
}

/// Starts a report whose leading columns are the mode and model parameters,
/// followed by `rest`.
fn report_for(config: &RunConfig, rest: &[&str]) -> (Report, Vec<Cell>) {
    let params = param_cells(&config.model);
    let columns: Vec<&str> = std::iter::once("mode").chain(params.iter().map(|p| p.0)).chain(rest.iter().copied()).collect();
    let prefix = std::iter::once(Cell::str(config.mode.name())).chain(params.into_iter().map(|p| p.1)).collect();
    (Report::new(columns), prefix)
}

fn row(prefix: &[Cell], rest: impl IntoIterator<Item = Cell>) -> Vec<Cell> {
    prefix.iter().cloned().chain(rest).collect()
}

fn build(config: &RunConfig) -> Result<BuiltModel, RunError> {
    build_model(&config.model).map_err(RunError::Model)
}

fn control(config: &RunConfig) -> Result<(RunControl, Configuration), RunError> {
    let initial = match &config.initial {
        Some(text) => Configuration::parse(text).map_err(RunError::Model)?,
        None => Configuration::empty(config.model.sites()),
    };
    let control = match config.stop {
        StopSpec::MaxJumps(n) => RunControl::jumps(n, initial),
        StopSpec::MaxTime(t) => RunControl::time(t, initial),
    };
    Ok((control.with_seed(config.seed).with_drain(true).with_drain_budget(config.drain_budget), initial))
}

/// Runs the replicas in parallel and returns their estimates in replica order.
fn ensemble(config: &RunConfig, model: &BuiltModel) -> Result<Vec<Estimates>, RunError> {
    let (control, initial) = control(config)?;
    let replicas = run_ensemble(model.rates(), &control, config.replicas, |_| Tracker::new(initial))
        .map_err(RunError::classify)?;
    replicas
        .iter()
        .map(|r| r.observer.estimates().map_err(RunError::classify))
        .collect()
}

fn estimate_cells(e: &Estimates) -> [Cell; 9] {
    [
        Cell::Float(e.rho_hat),
        Cell::Float(e.phi_hat),
        Cell::Float(e.tau_hat),
        Cell::Float(e.stderr_rho),
        Cell::Float(e.stderr_phi),
        Cell::Float(e.stderr_tau),
        Cell::Int(e.n_injected),
        Cell::Int(e.n_completed),
        Cell::Int(e.jumps),
    ]
}

const ESTIMATE_COLUMNS: [&str; 9] = [
    "rho_hat", "phi_hat", "tau_hat", "stderr_rho", "stderr_phi", "stderr_tau", "n_injected", "n_completed", "n_jumps",
];

pub fn simulate(config: &RunConfig) -> Result<Report, RunError> {
    let model = build(config)?;
    let all = ensemble(config, &model)?;
    let mut columns = vec!["replica", "t"];
    columns.extend(ESTIMATE_COLUMNS);
    columns.push("seed");
    let (mut report, prefix) = report_for(config, &columns);
    let pooled = Estimates::pooled(&all);
    let labelled = all.iter().enumerate().map(|(k, e)| (k.to_string(), e)).chain(pooled.iter().map(|e| ("pooled".to_string(), e)));
    for (label, e) in labelled {
        let mut cells = vec![Cell::Str(label), Cell::Float(e.t)];
        cells.extend(estimate_cells(e));
        cells.push(Cell::Int(config.seed));
        report.push(row(&prefix, cells));
    }
    Ok(report)
}

/// Closed-form residence time for the models that have one.
fn closed_tau(spec: &ModelSpec) -> Result<Option<f64>, RunError> {
    Ok(match spec {
        ModelSpec::Tasep(p) => Some(tasep_tau_exact(p).map_err(RunError::Model)?),
        ModelSpec::Ising(p) => Some(ising_tau_exact(p).map_err(RunError::Model)?.tau),
        ModelSpec::Table(_) => None,
    })
}

fn agrees(a: f64, b: f64) -> bool {
    (a - b).abs() <= CLOSED_FORM_RTOL * a.abs().max(b.abs())
}

pub fn exact(config: &RunConfig) -> Result<Report, RunError> {
    let model = build(config)?;
    let sol = exact_law(model.rates()).map_err(RunError::Model)?;
    let balance = detailed_balance_check(model.rates(), &sol.pi).map_err(RunError::Model)?;
    let closed = closed_tau(&config.model)?;
    let (mut report, prefix) =
        report_for(config, &["rho", "phi", "tau", "tau_closed", "residual", "min_q", "reversible", "states"]);
    report.push(row(
        &prefix,
        [
            Cell::Float(sol.rho),
            Cell::Float(sol.phi),
            Cell::Float(sol.tau),
            Cell::opt(closed),
            Cell::Float(sol.residual),
            Cell::Float(sol.min_q),
            Cell::str(balance.reversible.to_string()),
            Cell::Int(sol.pi.len() as u64),
        ],
    ));
    Ok(report)
}

/// Exact law, pooled simulation, and a verdict: every estimate within
/// three standard errors of its exact value, and the closed form (when
/// there is one) equal to the oracle.
pub fn verify_law(config: &RunConfig) -> Result<Outcome, RunError> {
    let model = build(config)?;
    let sol = exact_law(model.rates()).map_err(RunError::Model)?;
    let closed = closed_tau(&config.model)?;
    let all = ensemble(config, &model)?;
    let pooled = Estimates::pooled(&all).expect("at least one replica");
    let within = |hat: f64, se: f64, exact: f64| (hat - exact).abs() <= VERIFY_SIGMAS * se;
    let passed = within(pooled.rho_hat, pooled.stderr_rho, sol.rho)
        && within(pooled.phi_hat, pooled.stderr_phi, sol.phi)
        && within(pooled.tau_hat, pooled.stderr_tau, sol.tau)
        && closed.is_none_or(|c| agrees(c, sol.tau));
    let mut columns = vec!["rho", "phi", "tau", "tau_closed"];
    columns.extend(ESTIMATE_COLUMNS);
    columns.extend(["replicas", "seed", "verdict"]);
    let (mut report, prefix) = report_for(config, &columns);
    let mut cells = vec![Cell::Float(sol.rho), Cell::Float(sol.phi), Cell::Float(sol.tau), Cell::opt(closed)];
    cells.extend(estimate_cells(&pooled));
    cells.push(Cell::Int(config.replicas as u64));
    cells.push(Cell::Int(config.seed));
    cells.push(Cell::str(if passed { "pass" } else { "fail" }));
    report.push(row(&prefix, cells));
    Ok(Outcome { report, passed })
}

fn tasep_params(config: &RunConfig) -> TasepParams {
    match &config.model {
        ModelSpec::Tasep(p) => *p,
        _ => unreachable!("config validation pins the model kind"),
    }
}

/// Stationary density per site, with the oracle marginals alongside on
/// lattices small enough to enumerate.
pub fn profile(config: &RunConfig) -> Result<Report, RunError> {
    let params = tasep_params(config);
    let density = tasep_density(&params).map_err(RunError::Model)?;
    let oracle = if params.sites <= STATIONARY_MAX_SITES {
        let model = build(config)?;
        Some(exact_law(model.rates()).map_err(RunError::Model)?.marginals())
    } else {
        None
    };
    let (mut report, prefix) = report_for(config, &["site", "density", "density_oracle"]);
    for (x, d) in density.iter().enumerate() {
        let o = oracle.as_ref().map(|m| m[x]);
        report.push(row(&prefix, [Cell::Int(x as u64), Cell::Float(*d), Cell::opt(o)]));
    }
    Ok(report)
}

pub fn ising_tau(config: &RunConfig) -> Result<Report, RunError> {
    let ModelSpec::Ising(params) = &config.model else {
        unreachable!("config validation pins the model kind")
    };
    let sol = ising_tau_exact(params).map_err(RunError::Model)?;
    let oracle = if params.sites <= STATIONARY_MAX_SITES {
        let model = build(config)?;
        Some(exact_law(model.rates()).map_err(RunError::Model)?.tau)
    } else {
        None
    };
    let (mut report, prefix) =
        report_for(config, &["t_plus", "t_minus", "r_plus", "r_minus", "a_plus", "a_minus", "tau", "tau_oracle"]);
    report.push(row(
        &prefix,
        [
            Cell::Float(sol.t_plus),
            Cell::Float(sol.t_minus),
            Cell::Float(sol.r_plus),
            Cell::Float(sol.r_minus),
            Cell::Float(sol.a_plus),
            Cell::Float(sol.a_minus),
            Cell::Float(sol.tau),
            Cell::opt(oracle),
        ],
    ));
    Ok(report)
}

/// `tau / L` against its large-lattice limit `r` over the configured grid.
/// `scaled_gap` is `sqrt(L) * |tau / L - r|`.
pub fn scan(config: &RunConfig) -> Result<Report, RunError> {
    let base = tasep_params(config);
    let r = tasep_r_coefficient(base.alpha, base.beta);
    let columns = ["mode", "model", "alpha", "beta", "L", "tau", "tau_over_L", "r_coeff", "gap", "scaled_gap"];
    let mut report = Report::new(columns);
    for &l in &config.scan_sites {
        let tau = tasep_tau_exact(&TasepParams { sites: l, ..base }).map_err(RunError::Model)?;
        let per_site = tau / l as f64;
        let gap = (per_site - r).abs();
        report.push(vec![
            Cell::str(config.mode.name()),
            Cell::str("tasep"),
            Cell::Float(base.alpha),
            Cell::Float(base.beta),
            Cell::Int(l as u64),
            Cell::Float(tau),
            Cell::Float(per_site),
            Cell::Float(r),
            Cell::Float(gap),
            Cell::Float((l as f64).sqrt() * gap),
        ]);
    }
    Ok(report)
}
