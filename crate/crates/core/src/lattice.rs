//! Lattices, occupancy configurations, jump events and the rate-model contract.
//!
//! A configuration is a bit vector packed into a single `u64`, so lattices
//! hold at most [`MAX_SITES`] sites. Bit `x` is the occupation of site `x`,
//! which makes the packed word double as the state index `0..2^L` used by the
//! exact solvers.

use std::collections::VecDeque;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Largest lattice a [`Configuration`] can hold.
pub const MAX_SITES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Topology {
    Ring,
    Path,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Lattice {
    size: usize,
    topology: Topology,
}

impl Lattice {
    pub fn new(size: usize, topology: Topology) -> Result<Self> {
        if size == 0 || size > MAX_SITES {
            return Err(Error::LatticeSize {
                size,
                max: MAX_SITES,
            });
        }
        Ok(Self { size, topology })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    /// Number of configurations, `2^L`. Only meaningful for enumerable lattices.
    pub fn state_count(&self) -> usize {
        1usize << self.size
    }

    /// Iterates every configuration in state-index order.
    pub fn states(&self) -> impl Iterator<Item = Configuration> {
        let len = self.size as u8;
        (0..self.state_count() as u64).map(move |bits| Configuration { bits, len })
    }

    pub fn empty(&self) -> Configuration {
        Configuration::empty(self.size)
    }

    /// Ordered nearest-neighbour pairs `(x, y)`, without duplicates.
    pub fn neighbor_pairs(&self) -> Vec<(usize, usize)> {
        let l = self.size;
        let mut pairs = Vec::new();
        for x in 0..l {
            let right = match self.topology {
                Topology::Ring => Some((x + 1) % l),
                Topology::Path => (x + 1 < l).then_some(x + 1),
            };
            if let Some(y) = right {
                for p in [(x, y), (y, x)] {
                    if p.0 != p.1 && !pairs.contains(&p) {
                        pairs.push(p);
                    }
                }
            }
        }
        pairs
    }

    /// Every ordered pair of distinct sites.
    pub fn all_pairs(&self) -> Vec<(usize, usize)> {
        let l = self.size;
        (0..l)
            .flat_map(|x| (0..l).filter(move |&y| y != x).map(move |y| (x, y)))
            .collect()
    }

    fn mask(&self) -> u64 {
        low_mask(self.size)
    }
}

fn low_mask(len: usize) -> u64 {
    if len >= 64 {
        u64::MAX
    } else {
        (1u64 << len) - 1
    }
}

/// Occupancy of every site of a lattice.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Configuration {
    bits: u64,
    len: u8,
}

impl Configuration {
    pub fn empty(len: usize) -> Self {
        assert!((1..=MAX_SITES).contains(&len), "lattice size {len}");
        Self {
            bits: 0,
            len: len as u8,
        }
    }

    pub fn from_bits(bits: u64, len: usize) -> Result<Self> {
        if len == 0 || len > MAX_SITES {
            return Err(Error::LatticeSize {
                size: len,
                max: MAX_SITES,
            });
        }
        if bits & !low_mask(len) != 0 {
            return Err(Error::Domain(format!(
                "bits {bits:#x} set beyond a lattice of {len} sites"
            )));
        }
        Ok(Self {
            bits,
            len: len as u8,
        })
    }

    pub fn from_occupancy(occupancy: &[bool]) -> Result<Self> {
        let bits = occupancy
            .iter()
            .enumerate()
            .filter(|(_, &o)| o)
            .fold(0u64, |acc, (x, _)| acc | (1 << x));
        Self::from_bits(bits, occupancy.len())
    }

    /// Parses a string of `0`/`1` characters, site 0 first.
    pub fn parse(text: &str) -> Result<Self> {
        let occupancy = text
            .trim()
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Domain(format!(
                    "invalid occupancy character {other:?} in {text:?}"
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_occupancy(&occupancy)
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.bits == 0
    }

    /// Packed occupancy; also the state index.
    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn index(&self) -> usize {
        self.bits as usize
    }

    #[inline]
    pub fn occupied(&self, site: usize) -> bool {
        debug_assert!(site < self.len());
        (self.bits >> site) & 1 == 1
    }

    #[inline]
    pub fn particle_count(&self) -> u32 {
        self.bits.count_ones()
    }

    /// `η^v`: every site of `v` toggled.
    #[inline]
    pub fn flipped(&self, v: SiteSet) -> Self {
        Self {
            bits: self.bits ^ v.0,
            len: self.len,
        }
    }

    pub fn occupancy(&self) -> Vec<bool> {
        (0..self.len()).map(|x| self.occupied(x)).collect()
    }

    pub fn occupied_sites(&self) -> SiteSet {
        SiteSet(self.bits)
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for x in 0..self.len() {
            f.write_str(if self.occupied(x) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Configuration({self})")
    }
}

/// A set of sites, packed like a configuration.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct SiteSet(u64);

impl SiteSet {
    pub fn from_mask(mask: u64) -> Self {
        Self(mask)
    }

    pub fn single(site: usize) -> Self {
        Self(1 << site)
    }

    pub fn from_sites<I: IntoIterator<Item = usize>>(sites: I) -> Self {
        Self(sites.into_iter().fold(0, |acc, x| acc | (1 << x)))
    }

    pub fn mask(&self) -> u64 {
        self.0
    }

    pub fn contains(&self, site: usize) -> bool {
        (self.0 >> site) & 1 == 1
    }

    pub fn len(&self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    /// Sole member of a singleton set.
    pub fn as_single(&self) -> Option<usize> {
        (self.len() == 1).then(|| self.0.trailing_zeros() as usize)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> {
        let mut rest = self.0;
        std::iter::from_fn(move || {
            if rest == 0 {
                None
            } else {
                let x = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(x)
            }
        })
    }
}

impl fmt::Debug for SiteSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// One transition of the jump chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Event {
    Injection { site: usize },
    Diffusion { from: usize, to: usize },
    Extraction { sites: SiteSet },
}

impl Event {
    /// The set `v` with `η' = η^v`.
    pub fn flip_set(&self) -> SiteSet {
        match *self {
            Event::Injection { site } => SiteSet::single(site),
            Event::Diffusion { from, to } => SiteSet::from_sites([from, to]),
            Event::Extraction { sites } => sites,
        }
    }

    /// Checks the occupancy precondition of the event in `config`.
    pub fn check(&self, config: &Configuration) -> Result<()> {
        let len = config.len();
        let fail = |sites: Vec<usize>, reason| {
            Err(Error::Precondition {
                event: *self,
                config: *config,
                sites,
                reason,
            })
        };
        let out_of_range = self.flip_set().mask() & !low_mask(len);
        if out_of_range != 0 {
            let site = out_of_range.trailing_zeros() as usize;
            return Err(Error::SiteOutOfRange { site, size: len });
        }
        match *self {
            Event::Injection { site } if config.occupied(site) => {
                fail(vec![site], "injection target already occupied")
            }
            Event::Diffusion { from, to } if from == to => {
                fail(vec![from], "diffusion source equals target")
            }
            Event::Diffusion { from, to } => {
                let mut bad = Vec::new();
                if !config.occupied(from) {
                    bad.push(from);
                }
                if config.occupied(to) {
                    bad.push(to);
                }
                if bad.is_empty() {
                    Ok(())
                } else {
                    fail(bad, "diffusion needs an occupied source and an empty target")
                }
            }
            Event::Extraction { sites } if sites.is_empty() => {
                fail(Vec::new(), "extraction subset is empty")
            }
            Event::Extraction { sites } => {
                let empty: Vec<usize> = sites.iter().filter(|&x| !config.occupied(x)).collect();
                if empty.is_empty() {
                    Ok(())
                } else {
                    fail(empty, "extraction subset not completely filled")
                }
            }
            Event::Injection { .. } => Ok(()),
        }
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Event::Injection { site } => write!(f, "Inj{{{site}}}"),
            Event::Diffusion { from, to } => write!(f, "Diff{{{from}->{to}}}"),
            Event::Extraction { sites } => write!(f, "Ext{sites:?}"),
        }
    }
}

/// Rates of a stochastic lattice-gas model.
///
/// Only the diffusion pairs and extraction subsets a model declares are ever
/// queried; all other rates are zero. Rates are consulted only where the
/// event's occupancy precondition holds, so a model that reports a positive
/// rate for a blocked event is ignored by the dynamics and flagged by
/// [`validate_model`].
pub trait RateModel: Send + Sync {
    fn lattice(&self) -> &Lattice;

    fn injection_rate(&self, config: &Configuration, site: usize) -> f64;

    fn diffusion_pairs(&self) -> &[(usize, usize)];

    fn diffusion_rate(&self, config: &Configuration, from: usize, to: usize) -> f64;

    fn extraction_candidates(&self) -> &[SiteSet];

    fn extraction_rate(&self, config: &Configuration, sites: SiteSet) -> f64;

    /// Rate of an arbitrary event, zero outside the declared candidates.
    fn event_rate(&self, config: &Configuration, event: &Event) -> f64 {
        match *event {
            Event::Injection { site } => self.injection_rate(config, site),
            Event::Diffusion { from, to } => {
                if self.diffusion_pairs().contains(&(from, to)) {
                    self.diffusion_rate(config, from, to)
                } else {
                    0.0
                }
            }
            Event::Extraction { sites } => {
                if self.extraction_candidates().contains(&sites) {
                    self.extraction_rate(config, sites)
                } else {
                    0.0
                }
            }
        }
    }
}

/// Appends every enabled event with its strictly positive rate to `out`
/// (cleared first) and returns the total exit rate `q(η)`.
pub fn enabled_events_into<M: RateModel + ?Sized>(
    model: &M,
    config: &Configuration,
    out: &mut Vec<(Event, f64)>,
) -> f64 {
    out.clear();
    let mut total = 0.0;
    let mut push = |event: Event, rate: f64| {
        if rate > 0.0 {
            out.push((event, rate));
            total += rate;
        }
    };
    for site in 0..config.len() {
        if !config.occupied(site) {
            push(Event::Injection { site }, model.injection_rate(config, site));
        }
    }
    for &(from, to) in model.diffusion_pairs() {
        if config.occupied(from) && !config.occupied(to) {
            push(
                Event::Diffusion { from, to },
                model.diffusion_rate(config, from, to),
            );
        }
    }
    for &sites in model.extraction_candidates() {
        if !sites.is_empty() && config.bits() & sites.mask() == sites.mask() {
            push(
                Event::Extraction { sites },
                model.extraction_rate(config, sites),
            );
        }
    }
    total
}

pub fn enabled_events<M: RateModel + ?Sized>(model: &M, config: &Configuration) -> Vec<(Event, f64)> {
    let mut out = Vec::new();
    enabled_events_into(model, config, &mut out);
    out
}

/// Total exit rate `q(η)`.
pub fn total_rate<M: RateModel + ?Sized>(model: &M, config: &Configuration) -> f64 {
    let mut total = 0.0;
    for site in 0..config.len() {
        if !config.occupied(site) {
            total += positive(model.injection_rate(config, site));
        }
    }
    for &(from, to) in model.diffusion_pairs() {
        if config.occupied(from) && !config.occupied(to) {
            total += positive(model.diffusion_rate(config, from, to));
        }
    }
    for &sites in model.extraction_candidates() {
        if !sites.is_empty() && config.bits() & sites.mask() == sites.mask() {
            total += positive(model.extraction_rate(config, sites));
        }
    }
    total
}

#[inline]
fn positive(rate: f64) -> f64 {
    if rate > 0.0 {
        rate
    } else {
        0.0
    }
}

/// Applies `event` to `config`, returning the new configuration.
pub fn apply_event(config: &Configuration, event: &Event) -> Result<Configuration> {
    event.check(config)?;
    Ok(config.flipped(event.flip_set()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    /// Positive rate for an event whose occupancy precondition fails.
    OccupancyConstraint,
    /// Negative, NaN or infinite rate.
    InvalidRate,
    /// Declared extraction subset is empty.
    EmptySubset,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateViolation {
    pub config: Configuration,
    pub event: Event,
    pub rate: f64,
    pub kind: ViolationKind,
}

#[derive(Debug, Clone)]
pub struct ValidationOptions {
    /// Largest lattice whose state space is enumerated.
    pub enumeration_cap: usize,
    /// Random configurations checked on larger lattices.
    pub samples: usize,
    pub seed: u64,
    /// Stop collecting violations past this many.
    pub max_reported: usize,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self {
            enumeration_cap: 16,
            samples: 4096,
            seed: 0,
            max_reported: 64,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub violations: Vec<RateViolation>,
    pub absorbing: Vec<Configuration>,
    /// `None` when the lattice is too large to enumerate.
    pub irreducible: Option<bool>,
    pub exhaustive: bool,
    pub states_checked: usize,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty() && self.absorbing.is_empty() && self.irreducible == Some(true)
    }
}

pub fn validate_model<M: RateModel + ?Sized>(model: &M) -> ValidationReport {
    validate_model_with(model, &ValidationOptions::default())
}

pub fn validate_model_with<M: RateModel + ?Sized>(
    model: &M,
    options: &ValidationOptions,
) -> ValidationReport {
    let lattice = *model.lattice();
    let exhaustive = lattice.size() <= options.enumeration_cap;
    let states: Vec<Configuration> = if exhaustive {
        lattice.states().collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
        let mask = lattice.mask();
        (0..options.samples)
            .map(|_| Configuration {
                bits: rng.random::<u64>() & mask,
                len: lattice.size() as u8,
            })
            .collect()
    };

    let mut violations = Vec::new();
    let mut absorbing = Vec::new();
    let mut note = |v: RateViolation| {
        if violations.len() < options.max_reported {
            violations.push(v);
        }
    };

    for sites in model.extraction_candidates() {
        if sites.is_empty() {
            note(RateViolation {
                config: lattice.empty(),
                event: Event::Extraction { sites: *sites },
                rate: f64::NAN,
                kind: ViolationKind::EmptySubset,
            });
        }
    }

    for config in &states {
        let mut check = |event: Event, rate: f64| {
            let kind = if !rate.is_finite() || rate < 0.0 {
                Some(ViolationKind::InvalidRate)
            } else if rate > 0.0 && event.check(config).is_err() {
                Some(ViolationKind::OccupancyConstraint)
            } else {
                None
            };
            if let Some(kind) = kind {
                note(RateViolation {
                    config: *config,
                    event,
                    rate,
                    kind,
                });
            }
        };
        for site in 0..lattice.size() {
            check(Event::Injection { site }, model.injection_rate(config, site));
        }
        for &(from, to) in model.diffusion_pairs() {
            check(
                Event::Diffusion { from, to },
                model.diffusion_rate(config, from, to),
            );
        }
        for &sites in model.extraction_candidates() {
            if !sites.is_empty() {
                check(Event::Extraction { sites }, model.extraction_rate(config, sites));
            }
        }
        if total_rate(model, config) <= 0.0 {
            absorbing.push(*config);
        }
    }

    let irreducible = exhaustive.then(|| strongly_connected(model, &lattice));

    ValidationReport {
        violations,
        absorbing,
        irreducible,
        exhaustive,
        states_checked: states.len(),
    }
}

/// Strong connectivity of the jump digraph, by a forward and a backward
/// search from the empty configuration.
fn strongly_connected<M: RateModel + ?Sized>(model: &M, lattice: &Lattice) -> bool {
    let n = lattice.state_count();
    let mut forward: Vec<Vec<u32>> = vec![Vec::new(); n];
    let mut backward: Vec<Vec<u32>> = vec![Vec::new(); n];
    let mut buf = Vec::new();
    for config in lattice.states() {
        enabled_events_into(model, &config, &mut buf);
        for (event, _) in &buf {
            let next = config.flipped(event.flip_set()).index();
            forward[config.index()].push(next as u32);
            backward[next].push(config.index() as u32);
        }
    }
    reaches_all(&forward) && reaches_all(&backward)
}

fn reaches_all(adjacency: &[Vec<u32>]) -> bool {
    let mut seen = vec![false; adjacency.len()];
    let mut queue = VecDeque::from([0u32]);
    seen[0] = true;
    let mut count = 1;
    while let Some(s) = queue.pop_front() {
        for &t in &adjacency[s as usize] {
            if !seen[t as usize] {
                seen[t as usize] = true;
                count += 1;
                queue.push_back(t);
            }
        }
    }
    count == adjacency.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{single_site_model, TasepModel, TasepParams};
    use proptest::prelude::*;

    fn tasep(l: usize, alpha: f64, beta: f64) -> TasepModel {
        TasepModel::new(TasepParams { sites: l, alpha, beta }).unwrap()
    }

    fn cfg(s: &str) -> Configuration {
        Configuration::parse(s).unwrap()
    }

    /// Injects everywhere, even on occupied sites.
    struct LeakyInjection {
        lattice: Lattice,
        candidates: Vec<SiteSet>,
    }

    impl RateModel for LeakyInjection {
        fn lattice(&self) -> &Lattice {
            &self.lattice
        }
        fn injection_rate(&self, _: &Configuration, _: usize) -> f64 {
            1.0
        }
        fn diffusion_pairs(&self) -> &[(usize, usize)] {
            &[]
        }
        fn diffusion_rate(&self, _: &Configuration, _: usize, _: usize) -> f64 {
            0.0
        }
        fn extraction_candidates(&self) -> &[SiteSet] {
            &self.candidates
        }
        fn extraction_rate(&self, c: &Configuration, v: SiteSet) -> f64 {
            if c.bits() & v.mask() == v.mask() {
                1.0
            } else {
                0.0
            }
        }
    }

    /// No injection at all: the empty configuration is absorbing.
    struct Frozen {
        lattice: Lattice,
    }

    impl RateModel for Frozen {
        fn lattice(&self) -> &Lattice {
            &self.lattice
        }
        fn injection_rate(&self, _: &Configuration, _: usize) -> f64 {
            0.0
        }
        fn diffusion_pairs(&self) -> &[(usize, usize)] {
            &[]
        }
        fn diffusion_rate(&self, _: &Configuration, _: usize, _: usize) -> f64 {
            0.0
        }
        fn extraction_candidates(&self) -> &[SiteSet] {
            &[]
        }
        fn extraction_rate(&self, _: &Configuration, _: SiteSet) -> f64 {
            0.0
        }
    }

    #[test]
    fn total_rate_examples() {
        let single = single_site_model(1.0, 1.0).unwrap();
        assert_eq!(total_rate(&single, &cfg("0")), 1.0);
        // Injection at the first site is blocked, extraction at the last needs a particle.
        assert_eq!(total_rate(&tasep(2, 1.0, 1.0), &cfg("10")), 1.0);
        assert_eq!(total_rate(&Frozen { lattice: Lattice::new(3, Topology::Path).unwrap() }, &cfg("000")), 0.0);
    }

    #[test]
    fn enabled_event_examples() {
        let single = single_site_model(1.0, 1.0).unwrap();
        assert_eq!(
            enabled_events(&single, &cfg("1")),
            vec![(Event::Extraction { sites: SiteSet::single(0) }, 1.0)]
        );
        let m = tasep(2, 1.0, 1.0);
        assert_eq!(enabled_events(&m, &cfg("00")), vec![(Event::Injection { site: 0 }, 1.0)]);
        assert_eq!(
            enabled_events(&m, &cfg("11")),
            vec![(Event::Extraction { sites: SiteSet::single(1) }, 1.0)]
        );
        assert_eq!(
            enabled_events(&tasep(3, 0.7, 0.4), &cfg("110")),
            vec![(Event::Diffusion { from: 1, to: 2 }, 1.0)]
        );
    }

    #[test]
    fn apply_event_examples() {
        assert_eq!(apply_event(&cfg("01"), &Event::Injection { site: 0 }).unwrap(), cfg("11"));
        assert_eq!(apply_event(&cfg("10"), &Event::Diffusion { from: 0, to: 1 }).unwrap(), cfg("01"));
        assert_eq!(
            apply_event(&cfg("11"), &Event::Extraction { sites: SiteSet::from_sites([0, 1]) }).unwrap(),
            cfg("00")
        );
    }

    #[test]
    fn apply_event_names_offending_sites() {
        let err = apply_event(&cfg("0110"), &Event::Extraction { sites: SiteSet::from_sites([0, 1, 3]) })
            .unwrap_err();
        match err {
            Error::Precondition { sites, .. } => assert_eq!(sites, vec![0, 3]),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            apply_event(&cfg("10"), &Event::Injection { site: 0 }),
            Err(Error::Precondition { .. })
        ));
        assert!(matches!(
            apply_event(&cfg("11"), &Event::Diffusion { from: 0, to: 1 }),
            Err(Error::Precondition { .. })
        ));
        assert!(matches!(
            apply_event(&cfg("11"), &Event::Injection { site: 5 }),
            Err(Error::SiteOutOfRange { site: 5, size: 2 })
        ));
    }

    #[test]
    fn parse_and_display_round_trip() {
        let c = cfg("0010110");
        assert_eq!(c.to_string(), "0010110");
        assert_eq!(c.particle_count(), 3);
        assert!(c.occupied(2) && !c.occupied(0));
        assert!(Configuration::parse("01x").is_err());
        assert!(Configuration::parse("").is_err());
    }

    #[test]
    fn neighbor_pairs_on_small_rings() {
        let ring2 = Lattice::new(2, Topology::Ring).unwrap();
        assert_eq!(ring2.neighbor_pairs(), vec![(0, 1), (1, 0)]);
        let ring4 = Lattice::new(4, Topology::Ring).unwrap();
        assert_eq!(ring4.neighbor_pairs().len(), 8);
        let path4 = Lattice::new(4, Topology::Path).unwrap();
        assert_eq!(path4.neighbor_pairs().len(), 6);
    }

    #[test]
    fn validate_tasep_three_sites() {
        let report = validate_model(&tasep(3, 1.0, 1.0));
        assert!(report.is_valid(), "{report:?}");
        assert_eq!(report.states_checked, 8);
    }

    #[test]
    fn validate_reports_leaky_injection() {
        let model = LeakyInjection {
            lattice: Lattice::new(2, Topology::Path).unwrap(),
            candidates: vec![SiteSet::single(0), SiteSet::single(1)],
        };
        let report = validate_model(&model);
        assert!(!report.is_valid());
        assert!(report
            .violations
            .iter()
            .all(|v| v.kind == ViolationKind::OccupancyConstraint && matches!(v.event, Event::Injection { .. })));
        assert!(!report.violations.is_empty());
        // Dynamics ignore the blocked rate: the chain is still irreducible.
        assert_eq!(report.irreducible, Some(true));
    }

    #[test]
    fn validate_reports_absorbing_state() {
        let report = validate_model(&Frozen { lattice: Lattice::new(3, Topology::Path).unwrap() });
        assert!(report.absorbing.contains(&cfg("000")));
        assert_eq!(report.irreducible, Some(false));
    }

    #[test]
    fn validate_reports_empty_subset() {
        let model = LeakyInjection {
            lattice: Lattice::new(1, Topology::Path).unwrap(),
            candidates: vec![SiteSet::default()],
        };
        let report = validate_model(&model);
        assert!(report.violations.iter().any(|v| v.kind == ViolationKind::EmptySubset));
    }

    #[test]
    fn validate_samples_large_lattices() {
        let report = validate_model(&tasep(40, 0.5, 0.5));
        assert!(!report.exhaustive);
        assert_eq!(report.irreducible, None);
        assert!(report.violations.is_empty() && report.absorbing.is_empty());
    }

    #[test]
    fn enabled_events_respect_preconditions_exhaustively() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for l in 1..=6 {
            let model = crate::models::random_table_model(l, &mut rng, &Default::default()).unwrap();
            for config in model.lattice().states() {
                for (event, rate) in enabled_events(&model, &config) {
                    assert!(rate > 0.0);
                    event.check(&config).unwrap();
                }
            }
        }
    }

    proptest! {
        #[test]
        fn total_rate_matches_enabled_sum(seed in any::<u64>(), l in 1usize..=5, bits in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let model = crate::models::random_table_model(l, &mut rng, &Default::default()).unwrap();
            let config = Configuration::from_bits(bits & low_mask(l), l).unwrap();
            let listed: f64 = enabled_events(&model, &config).iter().map(|(_, r)| r).sum();
            let q = total_rate(&model, &config);
            prop_assert!((listed - q).abs() <= 1e-12 * q.max(1.0));
        }

        #[test]
        fn flipping_twice_is_identity(bits in any::<u64>(), v in any::<u64>(), l in 1usize..=64) {
            let config = Configuration::from_bits(bits & low_mask(l), l).unwrap();
            let set = SiteSet::from_mask(v & low_mask(l));
            prop_assert_eq!(config.flipped(set).flipped(set), config);
        }
    }
}
