//! Models given by explicit per-configuration rate tables.

use rand::Rng;

use crate::error::{Error, Result};
use crate::lattice::{validate_model, Configuration, Lattice, RateModel, SiteSet, Topology};

/// Largest lattice a rate table may describe (256 configurations).
pub const TABLE_MAX_SITES: usize = 8;

/// A rate model stored as one rate per (configuration, event) pair.
#[derive(Debug, Clone)]
pub struct TableModel {
    lattice: Lattice,
    pairs: Vec<(usize, usize)>,
    pair_slot: Vec<Option<usize>>,
    candidates: Vec<SiteSet>,
    injection: Vec<f64>,
    diffusion: Vec<f64>,
    extraction: Vec<f64>,
}

impl TableModel {
    /// An all-zero table with the given diffusion pairs and extraction subsets.
    pub fn new(
        lattice: Lattice,
        pairs: Vec<(usize, usize)>,
        candidates: Vec<SiteSet>,
    ) -> Result<Self> {
        let l = lattice.size();
        if l > TABLE_MAX_SITES {
            return Err(Error::CapExceeded {
                what: "rate table",
                size: l,
                max: TABLE_MAX_SITES,
            });
        }
        let mut pair_slot = vec![None; l * l];
        for (slot, &(x, y)) in pairs.iter().enumerate() {
            for site in [x, y] {
                if site >= l {
                    return Err(Error::SiteOutOfRange { site, size: l });
                }
            }
            if x == y {
                return Err(Error::Domain(format!("diffusion pair ({x}, {y}) is a self-loop")));
            }
            if pair_slot[x * l + y].replace(slot).is_some() {
                return Err(Error::Domain(format!("diffusion pair ({x}, {y}) listed twice")));
            }
        }
        for (i, v) in candidates.iter().enumerate() {
            if v.is_empty() {
                return Err(Error::Domain("extraction subset is empty".into()));
            }
            if let Some(site) = v.iter().find(|&x| x >= l) {
                return Err(Error::SiteOutOfRange { site, size: l });
            }
            if candidates[..i].contains(v) {
                return Err(Error::Domain(format!("extraction subset {v:?} listed twice")));
            }
        }
        let n = lattice.state_count();
        Ok(Self {
            injection: vec![0.0; n * l],
            diffusion: vec![0.0; n * pairs.len()],
            extraction: vec![0.0; n * candidates.len()],
            lattice,
            pairs,
            pair_slot,
            candidates,
        })
    }

    /// Tabulates any enumerable model.
    pub fn tabulate<M: RateModel + ?Sized>(model: &M) -> Result<Self> {
        let lattice = *model.lattice();
        let mut table = Self::new(
            lattice,
            model.diffusion_pairs().to_vec(),
            model.extraction_candidates().to_vec(),
        )?;
        for config in lattice.states() {
            for x in 0..lattice.size() {
                table.set_injection(&config, x, model.injection_rate(&config, x))?;
            }
            for &(x, y) in model.diffusion_pairs() {
                table.set_diffusion(&config, x, y, model.diffusion_rate(&config, x, y))?;
            }
            for &v in model.extraction_candidates() {
                table.set_extraction(&config, v, model.extraction_rate(&config, v))?;
            }
        }
        Ok(table)
    }

    fn check_rate(name: &'static str, rate: f64) -> Result<()> {
        if rate.is_finite() && rate >= 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidParameter {
                name,
                value: rate,
                reason: "rates must be finite and non-negative",
            })
        }
    }

    fn check_config(&self, config: &Configuration) -> Result<()> {
        if config.len() != self.lattice.size() {
            return Err(Error::SizeMismatch {
                expected: self.lattice.size(),
                got: config.len(),
            });
        }
        Ok(())
    }

    pub fn set_injection(&mut self, config: &Configuration, site: usize, rate: f64) -> Result<()> {
        self.check_config(config)?;
        Self::check_rate("injection rate", rate)?;
        let l = self.lattice.size();
        if site >= l {
            return Err(Error::SiteOutOfRange { site, size: l });
        }
        self.injection[config.index() * l + site] = rate;
        Ok(())
    }

    pub fn set_diffusion(
        &mut self,
        config: &Configuration,
        from: usize,
        to: usize,
        rate: f64,
    ) -> Result<()> {
        self.check_config(config)?;
        Self::check_rate("diffusion rate", rate)?;
        let slot = self.slot(from, to).ok_or_else(|| {
            Error::Domain(format!("diffusion pair ({from}, {to}) was not declared"))
        })?;
        self.diffusion[config.index() * self.pairs.len() + slot] = rate;
        Ok(())
    }

    pub fn set_extraction(&mut self, config: &Configuration, sites: SiteSet, rate: f64) -> Result<()> {
        self.check_config(config)?;
        Self::check_rate("extraction rate", rate)?;
        let slot = self
            .candidates
            .iter()
            .position(|v| *v == sites)
            .ok_or_else(|| Error::Domain(format!("extraction subset {sites:?} was not declared")))?;
        self.extraction[config.index() * self.candidates.len() + slot] = rate;
        Ok(())
    }

    fn slot(&self, from: usize, to: usize) -> Option<usize> {
        let l = self.lattice.size();
        if from >= l || to >= l {
            return None;
        }
        self.pair_slot[from * l + to]
    }
}

impl RateModel for TableModel {
    fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    fn injection_rate(&self, config: &Configuration, site: usize) -> f64 {
        self.injection[config.index() * self.lattice.size() + site]
    }

    fn diffusion_pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    fn diffusion_rate(&self, config: &Configuration, from: usize, to: usize) -> f64 {
        match self.slot(from, to) {
            Some(slot) => self.diffusion[config.index() * self.pairs.len() + slot],
            None => 0.0,
        }
    }

    fn extraction_candidates(&self) -> &[SiteSet] {
        &self.candidates
    }

    fn extraction_rate(&self, config: &Configuration, sites: SiteSet) -> f64 {
        match self.candidates.iter().position(|v| *v == sites) {
            Some(slot) => self.extraction[config.index() * self.candidates.len() + slot],
            None => 0.0,
        }
    }
}

/// One site, injection at rate `alpha` when empty and extraction at rate
/// `beta` when full.
pub fn single_site_model(alpha: f64, beta: f64) -> Result<TableModel> {
    for (name, value) in [("alpha", alpha), ("beta", beta)] {
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::InvalidParameter {
                name,
                value,
                reason: "must be positive and finite",
            });
        }
    }
    let lattice = Lattice::new(1, Topology::Path)?;
    let full = SiteSet::single(0);
    let mut model = TableModel::new(lattice, Vec::new(), vec![full])?;
    model.set_injection(&Configuration::from_bits(0, 1)?, 0, alpha)?;
    model.set_extraction(&Configuration::from_bits(1, 1)?, full, beta)?;
    Ok(model)
}

/// Knobs for [`random_table_model`].
#[derive(Debug, Clone)]
pub struct RandomModelOptions {
    /// Probability that an allowed (configuration, event) entry gets a positive rate.
    pub fill: f64,
    /// Probability that an ordered site pair is a diffusion pair.
    pub pair_density: f64,
    /// Probability that a singleton is an extraction subset.
    pub singleton_density: f64,
    /// Number of random multi-site extraction subsets (fewer on tiny lattices).
    pub multi_site_subsets: usize,
    /// Positive rates are drawn uniformly from this range.
    pub rate_range: (f64, f64),
    pub max_attempts: usize,
}

impl Default for RandomModelOptions {
    fn default() -> Self {
        Self {
            fill: 0.7,
            pair_density: 0.5,
            singleton_density: 0.6,
            multi_site_subsets: 2,
            rate_range: (0.2, 2.0),
            max_attempts: 1000,
        }
    }
}

/// Draws a random valid, irreducible table model on `sites` sites, with
/// configuration-dependent rates and multi-site extraction subsets.
pub fn random_table_model<R: Rng + ?Sized>(
    sites: usize,
    rng: &mut R,
    options: &RandomModelOptions,
) -> Result<TableModel> {
    let lattice = Lattice::new(sites, Topology::Path)?;
    let (lo, hi) = options.rate_range;
    for _ in 0..options.max_attempts {
        let pairs: Vec<_> = lattice
            .all_pairs()
            .into_iter()
            .filter(|_| rng.random_bool(options.pair_density))
            .collect();
        let mut candidates: Vec<SiteSet> = (0..sites)
            .filter(|_| rng.random_bool(options.singleton_density))
            .map(SiteSet::single)
            .collect();
        if sites >= 2 {
            for _ in 0..options.multi_site_subsets {
                let mut mask = 0u64;
                while mask.count_ones() < 2 {
                    mask = rng.random::<u64>() & ((1u64 << sites) - 1);
                }
                let v = SiteSet::from_mask(mask);
                if !candidates.contains(&v) {
                    candidates.push(v);
                }
            }
        }
        if candidates.is_empty() {
            continue;
        }
        let mut model = TableModel::new(lattice, pairs.clone(), candidates.clone())?;
        let draw = |rng: &mut R| {
            if rng.random_bool(options.fill) {
                rng.random_range(lo..hi)
            } else {
                0.0
            }
        };
        for config in lattice.states() {
            for x in (0..sites).filter(|&x| !config.occupied(x)) {
                model.set_injection(&config, x, draw(rng))?;
            }
            for &(x, y) in &pairs {
                if config.occupied(x) && !config.occupied(y) {
                    model.set_diffusion(&config, x, y, draw(rng))?;
                }
            }
            for &v in &candidates {
                if config.bits() & v.mask() == v.mask() {
                    model.set_extraction(&config, v, draw(rng))?;
                }
            }
        }
        if validate_model(&model).is_valid() {
            return Ok(model);
        }
    }
    Err(Error::Domain(format!(
        "no irreducible random model on {sites} sites after {} attempts",
        options.max_attempts
    )))
}
