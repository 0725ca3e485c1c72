//! Exact computations on the full state space of small lattices.

use nalgebra::{DMatrix, DVector};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

use crate::error::{Error, Result};
use crate::lattice::{enabled_events, Configuration, Event, RateModel};

/// Largest lattice for the dense generator and stationary solve.
pub const STATIONARY_MAX_SITES: usize = 12;
/// Largest lattice for the `L * 2^L` dimensional survival operator.
pub const W_MAX_SITES: usize = 8;

const STATIONARY_RESIDUAL_TOL: f64 = 1e-12;

fn check_cap<M: RateModel + ?Sized>(model: &M, what: &'static str, max: usize) -> Result<usize> {
    let size = model.lattice().size();
    if size > max {
        return Err(Error::CapExceeded { what, size, max });
    }
    Ok(size)
}

/// Dense generator `Q` indexed by configuration bits.
pub fn build_generator<M: RateModel + ?Sized>(model: &M) -> Result<DMatrix<f64>> {
    build_generator_capped(model, STATIONARY_MAX_SITES)
}

pub fn build_generator_capped<M: RateModel + ?Sized>(model: &M, max_sites: usize) -> Result<DMatrix<f64>> {
    check_cap(model, "dense generator", max_sites)?;
    let lattice = model.lattice();
    let n = lattice.state_count();
    let mut q = DMatrix::zeros(n, n);
    for config in lattice.states() {
        let a = config.index();
        let mut total = 0.0;
        for (event, rate) in enabled_events(model, &config) {
            let b = config.flipped(event.flip_set()).index();
            q[(a, b)] += rate;
            total += rate;
        }
        q[(a, a)] = -total;
    }
    Ok(q)
}

/// Largest `|(pi Q)_k|`.
pub fn stationary_residual(q: &DMatrix<f64>, pi: &DVector<f64>) -> f64 {
    (q.transpose() * pi).amax()
}

/// Solves `pi Q = 0`, `sum pi = 1` densely: the last equation of the
/// transposed system is replaced by the normalization, followed by two
/// rounds of iterative refinement.
pub fn stationary_distribution(q: &DMatrix<f64>) -> Result<DVector<f64>> {
    let n = q.nrows();
    if n == 0 || q.ncols() != n {
        return Err(Error::Domain("generator must be a non-empty square matrix".into()));
    }
    let mut a = q.transpose();
    a.row_mut(n - 1).fill(1.0);
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;
    let lu = a.clone().lu();
    let mut pi = lu.solve(&b).ok_or(Error::Reducible { residual: f64::INFINITY })?;
    for _ in 0..2 {
        let r = &b - &a * &pi;
        if let Some(d) = lu.solve(&r) {
            pi += d;
        }
    }
    let residual = stationary_residual(q, &pi);
    let scale = q.amax().max(1.0);
    let normalization = (pi.sum() - 1.0).abs();
    if !pi.iter().all(|p| p.is_finite())
        || residual > STATIONARY_RESIDUAL_TOL * scale
        || normalization > 1e-12
        || pi.iter().any(|&p| p < -1e-14)
    {
        return Err(Error::Reducible { residual });
    }
    Ok(pi)
}

#[derive(Debug, Clone)]
pub struct ExactSolution {
    /// Stationary probabilities indexed by configuration bits.
    pub pi: Vec<f64>,
    pub rho: f64,
    pub phi: f64,
    pub tau: f64,
    /// Smallest total exit rate over the state space.
    pub min_q: f64,
    /// Largest `|(pi Q)_k|`.
    pub residual: f64,
    sites: usize,
}

impl ExactSolution {
    /// Stationary occupation probability of each site.
    pub fn marginals(&self) -> Vec<f64> {
        (0..self.sites)
            .map(|x| {
                self.pi
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| k >> x & 1 == 1)
                    .map(|(_, p)| p)
                    .sum()
            })
            .collect()
    }
}

pub fn exact_law<M: RateModel + ?Sized>(model: &M) -> Result<ExactSolution> {
    exact_law_capped(model, STATIONARY_MAX_SITES)
}

pub fn exact_law_capped<M: RateModel + ?Sized>(model: &M, max_sites: usize) -> Result<ExactSolution> {
    let q = build_generator_capped(model, max_sites)?;
    let pi = stationary_distribution(&q)?;
    let residual = stationary_residual(&q, &pi);
    let lattice = model.lattice();
    let mut rho = 0.0;
    let mut phi = 0.0;
    let mut min_q = f64::INFINITY;
    for config in lattice.states() {
        let p = pi[config.index()];
        rho += config.particle_count() as f64 * p;
        let influx: f64 = (0..lattice.size())
            .filter(|&x| !config.occupied(x))
            .map(|x| model.injection_rate(&config, x).max(0.0))
            .sum();
        phi += influx * p;
        min_q = min_q.min(-q[(config.index(), config.index())]);
    }
    if !(phi > 0.0) {
        return Err(Error::NoInflux);
    }
    Ok(ExactSolution {
        pi: pi.iter().copied().collect(),
        rho,
        phi,
        tau: rho / phi,
        min_q,
        residual,
        sites: lattice.size(),
    })
}

/// Detailed-balance findings. Each violation stores both sides of the
/// balance equation.
#[derive(Debug, Clone)]
pub struct ReversibilityReport {
    pub reversible: bool,
    /// `(subset, configuration, lhs, rhs)`.
    pub extraction_violations: Vec<(crate::lattice::SiteSet, Configuration, f64, f64)>,
    /// `(from, to, configuration, lhs, rhs)`.
    pub diffusion_violations: Vec<(usize, usize, Configuration, f64, f64)>,
    pub relative_tolerance: f64,
    pub absolute_tolerance: f64,
}

pub const BALANCE_RELATIVE_TOL: f64 = 1e-9;
pub const BALANCE_ABSOLUTE_TOL: f64 = 1e-12;

fn balanced(lhs: f64, rhs: f64) -> bool {
    (lhs - rhs).abs() <= BALANCE_ABSOLUTE_TOL.max(BALANCE_RELATIVE_TOL * lhs.abs().max(rhs.abs()))
}

fn rate_if_enabled<M: RateModel + ?Sized>(model: &M, config: &Configuration, event: &Event) -> f64 {
    if event.check(config).is_ok() {
        model.event_rate(config, event).max(0.0)
    } else {
        0.0
    }
}

/// Checks the extraction and diffusion balance conditions against `pi`
/// (indexed by configuration bits).
///
/// Single-site extraction from `eta` must balance injection into
/// `eta` with the site emptied; extraction of several sites at once must
/// have zero rate. Diffusion `x -> y` must balance `y -> x` from the
/// swapped configuration, over all ordered pairs.
pub fn detailed_balance_check<M: RateModel + ?Sized>(model: &M, pi: &[f64]) -> Result<ReversibilityReport> {
    let lattice = model.lattice();
    if pi.len() != lattice.state_count() {
        return Err(Error::SizeMismatch { expected: lattice.state_count(), got: pi.len() });
    }
    let mut extraction_violations = Vec::new();
    let mut diffusion_violations = Vec::new();
    for config in lattice.states() {
        let p = pi[config.index()];
        let singles = config.occupied_sites().iter().map(crate::lattice::SiteSet::single);
        let multi = model.extraction_candidates().iter().copied().filter(|s| {
            s.len() > 1 && config.bits() & s.mask() == s.mask()
        });
        for sites in singles.chain(multi) {
            let rate = rate_if_enabled(model, &config, &Event::Extraction { sites });
            let lhs = rate * p;
            let rhs = match sites.as_single() {
                Some(x) => {
                    let emptied = config.flipped(sites);
                    model.injection_rate(&emptied, x).max(0.0) * pi[emptied.index()]
                }
                None => 0.0,
            };
            if !balanced(lhs, rhs) {
                extraction_violations.push((sites, config, lhs, rhs));
            }
        }
        for (x, y) in lattice.all_pairs() {
            if !(config.occupied(x) && !config.occupied(y)) {
                continue;
            }
            let swapped = config.flipped(crate::lattice::SiteSet::from_sites([x, y]));
            let lhs = rate_if_enabled(model, &config, &Event::Diffusion { from: x, to: y }) * p;
            let rhs = rate_if_enabled(model, &swapped, &Event::Diffusion { from: y, to: x }) * pi[swapped.index()];
            if !balanced(lhs, rhs) {
                diffusion_violations.push((x, y, config, lhs, rhs));
            }
        }
    }
    Ok(ReversibilityReport {
        reversible: extraction_violations.is_empty() && diffusion_violations.is_empty(),
        extraction_violations,
        diffusion_violations,
        relative_tolerance: BALANCE_RELATIVE_TOL,
        absolute_tolerance: BALANCE_ABSOLUTE_TOL,
    })
}

/// Transition matrix of the jump chain, entries `rate / q(eta)`.
pub fn jump_chain_matrix<M: RateModel + ?Sized>(model: &M) -> Result<DMatrix<f64>> {
    check_cap(model, "jump chain matrix", STATIONARY_MAX_SITES)?;
    let lattice = model.lattice();
    let n = lattice.state_count();
    let mut p = DMatrix::zeros(n, n);
    for config in lattice.states() {
        let events = enabled_events(model, &config);
        let q: f64 = events.iter().map(|e| e.1).sum();
        if !(q > 0.0) {
            return Err(Error::Absorbing(config));
        }
        for (event, rate) in events {
            p[(config.index(), config.flipped(event.flip_set()).index())] += rate / q;
        }
    }
    Ok(p)
}

/// The operator acting on functions of (site, configuration) that follows
/// one tagged particle through one jump. Row `(x, eta)` has weight `P(eta,
/// eta')` at `(x, eta')` when site `x` stays occupied, and at `(y, eta')`
/// when the particle at `x` moves to the vacant site `y`. Index `(x, eta)`
/// is `x * 2^L + bits(eta)`.
pub fn w_operator<M: RateModel + ?Sized>(model: &M) -> Result<DMatrix<f64>> {
    let l = check_cap(model, "survival operator", W_MAX_SITES)?;
    let p = jump_chain_matrix(model)?;
    let s = 1usize << l;
    let mut w = DMatrix::zeros(l * s, l * s);
    for a in 0..s {
        for b in 0..s {
            let prob = p[(a, b)];
            if prob == 0.0 {
                continue;
            }
            let bit = |k: usize, x: usize| k >> x & 1 == 1;
            for x in 0..l {
                if !bit(a, x) {
                    continue;
                }
                if bit(b, x) {
                    w[(x * s + a, x * s + b)] += prob;
                } else {
                    for y in (0..l).filter(|&y| y != x && !bit(a, y) && bit(b, y)) {
                        w[(x * s + a, y * s + b)] += prob;
                    }
                }
            }
        }
    }
    Ok(w)
}

/// Spectral radius of [`w_operator`].
///
/// The operator is nonnegative, so its spectrum is the union of the spectra
/// of the diagonal blocks of its strongly connected components. Acyclic
/// components contribute zero; the rest go through a Schur decomposition.
pub fn w_spectral_radius<M: RateModel + ?Sized>(model: &M) -> Result<f64> {
    nonnegative_spectral_radius(&w_operator(model)?)
}

fn nonnegative_spectral_radius(m: &DMatrix<f64>) -> Result<f64> {
    let n = m.nrows();
    let mut graph = DiGraph::<(), ()>::with_capacity(n, 0);
    let nodes: Vec<_> = (0..n).map(|_| graph.add_node(())).collect();
    for i in 0..n {
        for j in 0..n {
            if m[(i, j)] != 0.0 {
                graph.add_edge(nodes[i], nodes[j], ());
            }
        }
    }
    let mut radius = 0.0f64;
    for component in tarjan_scc(&graph) {
        let idx: Vec<usize> = component.iter().map(|v| v.index()).collect();
        if idx.len() == 1 {
            radius = radius.max(m[(idx[0], idx[0])].abs());
            continue;
        }
        let block = DMatrix::from_fn(idx.len(), idx.len(), |r, c| m[(idx[r], idx[c])]);
        let schur = block
            .try_schur(1e-14, 100_000)
            .ok_or(Error::EigenFailure { dim: idx.len() })?;
        let block_radius = schur.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max);
        radius = radius.max(block_radius);
    }
    Ok(radius)
}
