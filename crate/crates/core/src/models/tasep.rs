//! Totally asymmetric simple exclusion process with open boundaries.
//!
//! Sites are `0..L`; particles enter at site 0 with rate `alpha`, hop to the
//! right with rate 1 and leave from site `L-1` with rate `beta`. The closed
//! forms below are written in terms of 1-based site labels `x = 1..=L`, as is
//! customary for the matrix-product solution, and converted at the edges.

use crate::error::{Error, Result};
use crate::lattice::{Configuration, Lattice, RateModel, SiteSet, Topology};
use crate::stats::{log_sum_exp, NeumaierSum};

/// Largest system size accepted by the closed-form evaluators.
pub const TASEP_MAX_SITES: usize = 10_000;

/// Beyond this `x` the ballot numbers no longer fit the exact integer path.
const EXACT_BALLOT_MAX: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TasepParams {
    pub sites: usize,
    pub alpha: f64,
    pub beta: f64,
}

impl TasepParams {
    pub fn validate(&self) -> Result<()> {
        if self.sites < 2 {
            return Err(Error::InvalidParameter {
                name: "L",
                value: self.sites as f64,
                reason: "TASEP needs at least two sites",
            });
        }
        for (name, value) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    value,
                    reason: "must be positive and finite",
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TasepModel {
    params: TasepParams,
    lattice: Lattice,
    pairs: Vec<(usize, usize)>,
    exit: [SiteSet; 1],
}

impl TasepModel {
    pub fn new(params: TasepParams) -> Result<Self> {
        params.validate()?;
        let lattice = Lattice::new(params.sites, Topology::Path)?;
        let l = params.sites;
        Ok(Self {
            params,
            lattice,
            pairs: (0..l - 1).map(|x| (x, x + 1)).collect(),
            exit: [SiteSet::single(l - 1)],
        })
    }

    pub fn params(&self) -> &TasepParams {
        &self.params
    }
}

impl RateModel for TasepModel {
    fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    fn injection_rate(&self, config: &Configuration, site: usize) -> f64 {
        if site == 0 && !config.occupied(0) {
            self.params.alpha
        } else {
            0.0
        }
    }

    fn diffusion_pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    fn diffusion_rate(&self, config: &Configuration, from: usize, to: usize) -> f64 {
        if to == from + 1 && config.occupied(from) && !config.occupied(to) {
            1.0
        } else {
            0.0
        }
    }

    fn extraction_candidates(&self) -> &[SiteSet] {
        &self.exit
    }

    fn extraction_rate(&self, config: &Configuration, sites: SiteSet) -> f64 {
        let last = self.params.sites - 1;
        if sites == self.exit[0] && config.occupied(last) {
            self.params.beta
        } else {
            0.0
        }
    }
}

fn check_ballot_domain(x: usize, k: usize) -> Result<()> {
    if x == 0 || k == 0 || k > x {
        return Err(Error::Domain(format!(
            "ballot number B(x={x}, k={k}) needs 1 <= k <= x"
        )));
    }
    Ok(())
}

/// Ballot number `k (2x-k-1)! / (x! (x-k)!)`, exact for `x <= 60`.
pub fn tasep_b(x: usize, k: usize) -> Result<u128> {
    check_ballot_domain(x, k)?;
    if x > EXACT_BALLOT_MAX {
        return Err(Error::Domain(format!(
            "exact ballot numbers are limited to x <= {EXACT_BALLOT_MAX}; use tasep_b_ln"
        )));
    }
    // k/x * C(2x-k-1, x-1)
    let n = (2 * x - k - 1) as u128;
    let r = (x - 1).min(x - k) as u128;
    let mut binom: u128 = 1;
    for i in 0..r {
        binom = binom * (n - i) / (i + 1);
    }
    Ok(binom * k as u128 / x as u128)
}

/// Natural log of the ballot number, for any size.
pub fn tasep_b_ln(x: usize, k: usize) -> Result<f64> {
    check_ballot_domain(x, k)?;
    let lf = LnFactorials::up_to(2 * x);
    Ok(lf.ln_ballot(x, k))
}

/// Compensated table of `ln n!`.
struct LnFactorials(Vec<f64>);

impl LnFactorials {
    fn up_to(n: usize) -> Self {
        let mut table = Vec::with_capacity(n + 1);
        let mut acc = NeumaierSum::default();
        table.push(0.0);
        for i in 1..=n {
            acc.add((i as f64).ln());
            table.push(acc.value());
        }
        Self(table)
    }

    fn ln_ballot(&self, x: usize, k: usize) -> f64 {
        let lf = &self.0;
        (k as f64).ln() + lf[2 * x - k - 1] - lf[x] - lf[x - k]
    }
}

/// `ln sum_{l=0}^{k} alpha^-l beta^-(k-l)`.
fn ln_boundary_sum(k: usize, ln_inv_alpha: f64, ln_inv_beta: f64) -> f64 {
    let big = ln_inv_alpha.max(ln_inv_beta);
    let ln_ratio = ln_inv_alpha.min(ln_inv_beta) - big;
    let geometric = if ln_ratio == 0.0 {
        ((k + 1) as f64).ln()
    } else {
        // (1 - q^(k+1)) / (1 - q) with q = e^ln_ratio < 1
        let num = -((k + 1) as f64 * ln_ratio).exp_m1();
        let den = -ln_ratio.exp_m1();
        num.ln() - den.ln()
    };
    k as f64 * big + geometric
}

fn check_closed_form(alpha: f64, beta: f64, upto: usize) -> Result<()> {
    for (name, value) in [("alpha", alpha), ("beta", beta)] {
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::InvalidParameter {
                name,
                value,
                reason: "must be positive and finite",
            });
        }
    }
    if upto > TASEP_MAX_SITES {
        return Err(Error::CapExceeded {
            what: "TASEP closed form",
            size: upto,
            max: TASEP_MAX_SITES,
        });
    }
    Ok(())
}

/// `ln Z_x` for `x = 0..=upto`, evaluated entirely in the log domain.
pub fn tasep_ln_z(alpha: f64, beta: f64, upto: usize) -> Result<Vec<f64>> {
    check_closed_form(alpha, beta, upto)?;
    let lf = LnFactorials::up_to(2 * upto.max(1));
    Ok(ln_z_with(&lf, alpha, beta, upto))
}

fn ln_z_with(lf: &LnFactorials, alpha: f64, beta: f64, upto: usize) -> Vec<f64> {
    let (lia, lib) = (-alpha.ln(), -beta.ln());
    let ln_s: Vec<f64> = (0..=upto).map(|k| ln_boundary_sum(k, lia, lib)).collect();
    let mut out = Vec::with_capacity(upto + 1);
    out.push(0.0);
    let mut terms = Vec::with_capacity(upto);
    for x in 1..=upto {
        terms.clear();
        terms.extend((1..=x).map(|k| lf.ln_ballot(x, k) + ln_s[k]));
        out.push(log_sum_exp(&terms));
    }
    out
}

/// `Z_x` for `x = 0..=upto` as plain floats.
///
/// Up to `x = 60` the double sum is evaluated directly with exact ballot
/// numbers, so integer-valued cases (such as `alpha = beta = 1`, where `Z_x`
/// is a Catalan number) come out exact while they fit a double. Larger `x`
/// exponentiate [`tasep_ln_z`] and fail once `Z_x` overflows.
pub fn tasep_z(alpha: f64, beta: f64, upto: usize) -> Result<Vec<f64>> {
    check_closed_form(alpha, beta, upto)?;
    let direct_max = upto.min(EXACT_BALLOT_MAX);
    let mut z = Vec::with_capacity(upto + 1);
    z.push(1.0);
    for x in 1..=direct_max {
        let mut total = 0.0;
        for k in 1..=x {
            let s: f64 = (0..=k)
                .map(|l| alpha.powi(-(l as i32)) * beta.powi(-((k - l) as i32)))
                .sum();
            total += tasep_b(x, k)? as f64 * s;
        }
        z.push(total);
    }
    if upto > direct_max {
        let ln_z = tasep_ln_z(alpha, beta, upto)?;
        z.extend(ln_z[direct_max + 1..].iter().map(|v| v.exp()));
    }
    if let Some(x) = z.iter().position(|v| !v.is_finite()) {
        return Err(Error::Domain(format!(
            "Z_{x} overflows a double for alpha={alpha}, beta={beta}; use tasep_ln_z"
        )));
    }
    Ok(z)
}

/// Stationary occupation probability of every site, site 0 first.
pub fn tasep_density(params: &TasepParams) -> Result<Vec<f64>> {
    params.validate()?;
    check_closed_form(params.alpha, params.beta, params.sites)?;
    let l = params.sites;
    let lf = LnFactorials::up_to(2 * l);
    let ln_z = ln_z_with(&lf, params.alpha, params.beta, l);
    Ok(density_from(&lf, &ln_z, params))
}

fn density_from(lf: &LnFactorials, ln_z: &[f64], params: &TasepParams) -> Vec<f64> {
    let l = params.sites;
    let ln_beta = params.beta.ln();
    let mut terms = Vec::with_capacity(2 * l);
    let mut density = Vec::with_capacity(l);
    for x in 1..l {
        terms.clear();
        for k in 1..=l - x {
            terms.push(ln_z[l - k] + lf.ln_ballot(k, 1));
            terms.push(ln_z[x - 1] + lf.ln_ballot(l - x, k) - (k + 1) as f64 * ln_beta);
        }
        density.push((log_sum_exp(&terms) - ln_z[l]).exp());
    }
    density.push((ln_z[l - 1] - ln_beta - ln_z[l]).exp());
    density
}

/// Exact stationary mean residence time.
pub fn tasep_tau_exact(params: &TasepParams) -> Result<f64> {
    params.validate()?;
    check_closed_form(params.alpha, params.beta, params.sites)?;
    let l = params.sites;
    let lf = LnFactorials::up_to(2 * l);
    let ln_z = ln_z_with(&lf, params.alpha, params.beta, l);
    Ok(tau_from(&lf, &ln_z, params))
}

fn tau_from(lf: &LnFactorials, ln_z: &[f64], params: &TasepParams) -> f64 {
    let l = params.sites;
    let ln_beta = params.beta.ln();
    let mut terms = Vec::with_capacity(l * (l + 1) / 2 + l);
    for x in 1..l {
        terms.push(((l - x) as f64).ln() + ln_z[l - x] + lf.ln_ballot(x, 1));
        for k in 1..=l - x {
            terms.push(ln_z[x - 1] + lf.ln_ballot(l - x, k) - (k + 1) as f64 * ln_beta);
        }
    }
    1.0 / params.beta + (log_sum_exp(&terms) - ln_z[l - 1]).exp()
}

/// Large-`L` slope of the mean residence time, `lim tau / L`.
pub fn tasep_r_coefficient(alpha: f64, beta: f64) -> f64 {
    if alpha >= 0.5 && beta >= 0.5 {
        2.0
    } else if alpha == beta {
        1.0 / (2.0 * alpha * (1.0 - alpha))
    } else if alpha < beta {
        1.0 / (1.0 - alpha)
    } else {
        1.0 / beta
    }
}

/// Everything the closed form says about one parameter set.
#[derive(Debug, Clone)]
pub struct TasepExact {
    /// `ln Z_x` for `x = 0..=L`.
    pub ln_z: Vec<f64>,
    pub density: Vec<f64>,
    pub tau: f64,
    pub r_coeff: f64,
}

impl TasepExact {
    pub fn solve(params: &TasepParams) -> Result<Self> {
        params.validate()?;
        check_closed_form(params.alpha, params.beta, params.sites)?;
        let l = params.sites;
        let lf = LnFactorials::up_to(2 * l);
        let ln_z = ln_z_with(&lf, params.alpha, params.beta, l);
        Ok(Self {
            density: density_from(&lf, &ln_z, params),
            tau: tau_from(&lf, &ln_z, params),
            r_coeff: tasep_r_coefficient(params.alpha, params.beta),
            ln_z,
        })
    }

    pub fn z(&self, x: usize) -> f64 {
        self.ln_z[x].exp()
    }

    /// Stationary influx, equal to the exit current `beta * density(L)`.
    pub fn influx(&self, params: &TasepParams) -> f64 {
        params.beta * self.density[params.sites - 1]
    }
}
