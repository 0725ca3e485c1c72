//! Lattice gas on a ring with nearest-neighbour interaction, Glauber
//! injection/extraction and Kawasaki (Metropolis) hopping.
//!
//! The energy of a configuration is
//! `H = V * sum_x n(x) n(x+1) - mu * sum_x n(x)` and all rates satisfy
//! detailed balance with respect to `exp(-H)`.

use crate::error::{Error, Result};
use crate::lattice::{Configuration, Lattice, RateModel, SiteSet, Topology};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsingParams {
    pub sites: usize,
    /// Nearest-neighbour interaction `V`.
    pub coupling: f64,
    /// Chemical potential `mu`.
    pub chemical_potential: f64,
    /// Injection rates `alpha[left][right]`, indexed by the occupation of the
    /// two neighbours of the target site.
    pub alpha: [[f64; 2]; 2],
    pub kawasaki_scale: f64,
}

impl IsingParams {
    pub fn uniform(sites: usize, coupling: f64, chemical_potential: f64, alpha: f64) -> Self {
        Self {
            sites,
            coupling,
            chemical_potential,
            alpha: [[alpha; 2]; 2],
            kawasaki_scale: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sites < 2 {
            return Err(Error::InvalidParameter {
                name: "L",
                value: self.sites as f64,
                reason: "the ring needs at least two sites",
            });
        }
        for (name, value) in [("V", self.coupling), ("mu", self.chemical_potential)] {
            if !value.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    value,
                    reason: "must be finite",
                });
            }
        }
        let names = [["alpha00", "alpha01"], ["alpha10", "alpha11"]];
        for a in 0..2 {
            for b in 0..2 {
                let value = self.alpha[a][b];
                if !(value.is_finite() && value > 0.0) {
                    return Err(Error::InvalidParameter {
                        name: names[a][b],
                        value,
                        reason: "injection parameters must be positive",
                    });
                }
            }
        }
        if !(self.kawasaki_scale.is_finite() && self.kawasaki_scale > 0.0) {
            return Err(Error::InvalidParameter {
                name: "kawasaki_scale",
                value: self.kawasaki_scale,
                reason: "must be positive",
            });
        }
        Ok(())
    }

    /// Extraction rates `beta[left][right]` fixed by detailed balance.
    pub fn beta(&self) -> [[f64; 2]; 2] {
        let (v, mu) = (self.coupling, self.chemical_potential);
        let a = &self.alpha;
        [
            [a[0][0] * (-mu).exp(), a[0][1] * (v - mu).exp()],
            [a[1][0] * (v - mu).exp(), a[1][1] * (2.0 * v - mu).exp()],
        ]
    }
}

#[derive(Debug, Clone)]
pub struct IsingModel {
    params: IsingParams,
    beta: [[f64; 2]; 2],
    lattice: Lattice,
    pairs: Vec<(usize, usize)>,
    singletons: Vec<SiteSet>,
}

impl IsingModel {
    pub fn new(params: IsingParams) -> Result<Self> {
        params.validate()?;
        let lattice = Lattice::new(params.sites, Topology::Ring)?;
        Ok(Self {
            beta: params.beta(),
            pairs: lattice.neighbor_pairs(),
            singletons: (0..params.sites).map(SiteSet::single).collect(),
            lattice,
            params,
        })
    }

    pub fn params(&self) -> &IsingParams {
        &self.params
    }

    pub fn hamiltonian(&self, config: &Configuration) -> f64 {
        let l = self.params.sites;
        let bits = config.bits();
        let right = (bits >> 1) | ((bits & 1) << (l - 1));
        let bonds = (bits & right).count_ones() as f64;
        self.params.coupling * bonds - self.params.chemical_potential * config.particle_count() as f64
    }

    #[inline]
    fn neighbours(&self, config: &Configuration, site: usize) -> (usize, usize) {
        let l = self.params.sites;
        let left = config.occupied((site + l - 1) % l) as usize;
        let right = config.occupied((site + 1) % l) as usize;
        (left, right)
    }
}

impl RateModel for IsingModel {
    fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    fn injection_rate(&self, config: &Configuration, site: usize) -> f64 {
        if config.occupied(site) {
            return 0.0;
        }
        let (a, b) = self.neighbours(config, site);
        self.params.alpha[a][b]
    }

    fn diffusion_pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    fn diffusion_rate(&self, config: &Configuration, from: usize, to: usize) -> f64 {
        if !config.occupied(from) || config.occupied(to) {
            return 0.0;
        }
        let after = config.flipped(SiteSet::from_sites([from, to]));
        let delta = self.hamiltonian(config) - self.hamiltonian(&after);
        self.params.kawasaki_scale * delta.exp().min(1.0)
    }

    fn extraction_candidates(&self) -> &[SiteSet] {
        &self.singletons
    }

    fn extraction_rate(&self, config: &Configuration, sites: SiteSet) -> f64 {
        match sites.as_single() {
            Some(x) if config.occupied(x) => {
                let (a, b) = self.neighbours(config, x);
                self.beta[a][b]
            }
            _ => 0.0,
        }
    }
}

/// Spectral data of the 2x2 transfer matrix and the resulting mean
/// residence time.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferMatrixSolution {
    pub t_plus: f64,
    pub t_minus: f64,
    pub r_plus: f64,
    pub r_minus: f64,
    pub a_plus: f64,
    pub a_minus: f64,
    pub tau: f64,
    pub projection_plus: [[f64; 2]; 2],
    pub projection_minus: [[f64; 2]; 2],
}

/// Exact mean residence time of the ring, from the spectral decomposition of
/// the transfer matrix `T = [[1, e^(mu/2)], [e^(mu/2), e^(mu-V)]]`.
pub fn ising_tau_exact(params: &IsingParams) -> Result<TransferMatrixSolution> {
    params.validate()?;
    let (v, mu) = (params.coupling, params.chemical_potential);
    let e_mu = mu.exp();
    let diag = (mu - v).exp();
    let off = (mu / 2.0).exp();
    let disc = ((1.0 - diag).powi(2) + 4.0 * e_mu).sqrt();
    let t_plus = (1.0 + diag + disc) / 2.0;
    // product of the eigenvalues is det T; avoids cancellation in t_-
    let t_minus = (diag - e_mu) / t_plus;

    let projection = |t_this: f64, t_other: f64| {
        let w = t_this - t_other;
        [[(1.0 - t_other) / w, off / w], [off / w, (diag - t_other) / w]]
    };
    let projection_plus = projection(t_plus, t_minus);
    let projection_minus = projection(t_minus, t_plus);

    let r = |t: f64| {
        let d = (t - 1.0).powi(2);
        d / (d + e_mu)
    };
    let a = |t: f64| {
        let s = t - 1.0;
        let alpha = &params.alpha;
        (alpha[0][0] + (alpha[1][0] + alpha[0][1]) * s + alpha[1][1] * s * s)
            / (1.0 + (-mu).exp() * s * s)
    };
    let (r_plus, r_minus) = (r(t_plus), r(t_minus));
    let (a_plus, a_minus) = (a(t_plus), a(t_minus));

    // numerator and denominator divided by t_+^(L-2)
    let l = params.sites as i32;
    let ratio = t_minus / t_plus;
    let tau = t_plus * t_plus * (r_plus + r_minus * ratio.powi(l)) / (a_plus + a_minus * ratio.powi(l - 2));

    Ok(TransferMatrixSolution {
        t_plus,
        t_minus,
        r_plus,
        r_minus,
        a_plus,
        a_minus,
        tau,
        projection_plus,
        projection_minus,
    })
}
