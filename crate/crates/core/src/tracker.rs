//! Particle identities along a trajectory and the sample-path estimators of
//! occupancy, influx and mean residence time.
//!
//! Every particle receives an id when it appears (at setup for the initial
//! configuration, on injection afterwards). Diffusion moves the id, extraction
//! closes it. The number of open ids must equal the particle count after every
//! jump; the ledger checks this on each observation.

use crate::error::{Error, Result};
use crate::lattice::{Configuration, Event};
use crate::simulator::{JumpRecord, Observer};
use crate::stats::{batch_means_stderr, ratio_batch_stderr, Mergeable, MergingBatches, RatioBatch};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParticleId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParticleRecord {
    pub id: ParticleId,
    /// Jump index at which the particle entered; 0 for initial particles.
    pub entry_jump: u64,
    pub entry_time: f64,
    pub exit_jump: Option<u64>,
    pub exit_time: Option<f64>,
    /// Present in the initial configuration rather than injected.
    pub initial: bool,
}

impl ParticleRecord {
    pub fn residence(&self) -> Option<f64> {
        self.exit_time.map(|e| e - self.entry_time)
    }
}

#[derive(Debug, Clone)]
pub struct ResidenceLedger {
    site_owner: Vec<Option<ParticleId>>,
    /// Indexed by id, so also ordered by entry.
    records: Vec<ParticleRecord>,
    open_initial: usize,
    open_injected: usize,
    config: Configuration,
    last_jump: u64,
    last_time: f64,
    checks: u64,
}

impl ResidenceLedger {
    pub fn new(initial: Configuration) -> Self {
        let mut ledger = Self {
            site_owner: vec![None; initial.len()],
            records: Vec::new(),
            open_initial: 0,
            open_injected: 0,
            config: initial,
            last_jump: 0,
            last_time: 0.0,
            checks: 0,
        };
        for site in initial.occupied_sites().iter() {
            let id = ledger.open(0, 0.0, true);
            ledger.site_owner[site] = Some(id);
        }
        ledger
    }

    fn open(&mut self, jump: u64, time: f64, initial: bool) -> ParticleId {
        let id = ParticleId(self.records.len() as u64);
        self.records.push(ParticleRecord {
            id,
            entry_jump: jump,
            entry_time: time,
            exit_jump: None,
            exit_time: None,
            initial,
        });
        if initial {
            self.open_initial += 1;
        } else {
            self.open_injected += 1;
        }
        id
    }

    fn corruption(&self, jump: u64, detail: String) -> Error {
        Error::LedgerCorruption { jump, detail }
    }

    /// Applies one jump record. The initial record (index 0) must match the
    /// configuration the ledger was built with.
    pub fn observe(&mut self, record: &JumpRecord) -> Result<()> {
        let j = record.index;
        let event = match record.event {
            None => {
                if j != 0 || record.config != self.config || self.last_jump != 0 {
                    return Err(self.corruption(j, "unexpected initial record".into()));
                }
                return Ok(());
            }
            Some(e) => e,
        };
        if j != self.last_jump + 1 {
            return Err(self.corruption(
                j,
                format!("records out of order, previous jump was {}", self.last_jump),
            ));
        }
        let owner = |ledger: &Self, site: usize| -> Result<Option<ParticleId>> {
            ledger
                .site_owner
                .get(site)
                .copied()
                .ok_or_else(|| ledger.corruption(j, format!("site {site} out of range")))
        };
        match event {
            Event::Injection { site } => {
                if owner(self, site)?.is_some() {
                    return Err(self.corruption(j, format!("injection into owned site {site}")));
                }
                let id = self.open(j, record.time, false);
                self.site_owner[site] = Some(id);
            }
            Event::Diffusion { from, to } => {
                let id = owner(self, from)?
                    .ok_or_else(|| self.corruption(j, format!("diffusion from unowned site {from}")))?;
                if owner(self, to)?.is_some() {
                    return Err(self.corruption(j, format!("diffusion into owned site {to}")));
                }
                self.site_owner[from] = None;
                self.site_owner[to] = Some(id);
            }
            Event::Extraction { sites } => {
                for site in sites.iter() {
                    if owner(self, site)?.is_none() {
                        return Err(self.corruption(j, format!("extraction from unowned site {site}")));
                    }
                }
                for site in sites.iter() {
                    let id = self.site_owner[site].take().expect("checked above");
                    let rec = &mut self.records[id.0 as usize];
                    rec.exit_jump = Some(j);
                    rec.exit_time = Some(record.time);
                    if rec.initial {
                        self.open_initial -= 1;
                    } else {
                        self.open_injected -= 1;
                    }
                }
            }
        }
        self.config = self.config.flipped(event.flip_set());
        if self.config != record.config {
            return Err(self.corruption(
                j,
                format!("ledger occupancy {} but trajectory shows {}", self.config, record.config),
            ));
        }
        let count = record.config.particle_count() as usize;
        if count != self.open_initial + self.open_injected {
            return Err(self.corruption(
                j,
                format!(
                    "{count} particles but {} initial and {} injected open records",
                    self.open_initial, self.open_injected
                ),
            ));
        }
        self.checks += 1;
        self.last_jump = j;
        self.last_time = record.time;
        Ok(())
    }

    pub fn owner(&self, site: usize) -> Option<ParticleId> {
        self.site_owner.get(site).copied().flatten()
    }

    pub fn site_owners(&self) -> &[Option<ParticleId>] {
        &self.site_owner
    }

    pub fn records(&self) -> &[ParticleRecord] {
        &self.records
    }

    pub fn record(&self, id: ParticleId) -> &ParticleRecord {
        &self.records[id.0 as usize]
    }

    pub fn open_initial(&self) -> usize {
        self.open_initial
    }

    pub fn open_injected(&self) -> usize {
        self.open_injected
    }

    /// Jumps at which the particle-count identity was verified.
    pub fn checks(&self) -> u64 {
        self.checks
    }

    pub fn last_jump(&self) -> u64 {
        self.last_jump
    }

    fn counted(&self, cutoff: f64) -> impl Iterator<Item = &ParticleRecord> {
        self.records
            .iter()
            .filter(move |r| !r.initial && r.entry_time <= cutoff)
    }

    /// Residence times of injected particles with entry time `<= cutoff`, in
    /// entry order. Fails if any of them is still inside.
    pub fn residence_times(&self, cutoff: f64) -> Result<Vec<f64>> {
        let open = self.counted(cutoff).filter(|r| r.exit_time.is_none()).count();
        if open > 0 {
            return Err(Error::IncompleteDrain { open });
        }
        Ok(self
            .counted(cutoff)
            .map(|r| r.residence().expect("closed"))
            .collect())
    }

    /// `T_t`: mean residence time of the particles injected by `cutoff`,
    /// zero if there are none.
    pub fn mean_residence_time(&self, cutoff: f64) -> Result<f64> {
        let times = self.residence_times(cutoff)?;
        if times.is_empty() {
            return Ok(0.0);
        }
        Ok(crate::stats::mean(&times))
    }

    /// Injections per unit time up to `t`.
    pub fn influx_estimate(&self, t: f64) -> f64 {
        if !(t > 0.0) {
            return 0.0;
        }
        self.counted(t).count() as f64 / t
    }
}

/// `(1/t) * integral of |eta_s| over [0, t]` for a recorded trajectory.
/// Records past `t` are ignored; the last hold is cut at `t`.
pub fn occupancy_time_average(records: &[JumpRecord], t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::InvalidParameter {
            name: "t",
            value: t,
            reason: "must be positive",
        });
    }
    let Some(first) = records.first() else {
        return Ok(0.0);
    };
    let mut integrator = OccupancyIntegrator::new(first.config.particle_count());
    for r in records.iter().skip(1).take_while(|r| r.time <= t) {
        integrator.advance(r.time, r.config.particle_count());
    }
    Ok(integrator.average(t))
}

/// Running integral of a piecewise-constant particle count.
#[derive(Debug, Clone, Copy)]
pub struct OccupancyIntegrator {
    area: f64,
    last_time: f64,
    count: u32,
}

impl OccupancyIntegrator {
    pub fn new(count: u32) -> Self {
        Self {
            area: 0.0,
            last_time: 0.0,
            count,
        }
    }

    /// The count changes to `count` at `time`; returns the area of the hold
    /// that just ended.
    pub fn advance(&mut self, time: f64, count: u32) -> f64 {
        let piece = (time - self.last_time) * self.count as f64;
        self.area += piece;
        self.last_time = time;
        self.count = count;
        piece
    }

    pub fn area_until(&self, t: f64) -> f64 {
        self.area + (t - self.last_time).max(0.0) * self.count as f64
    }

    pub fn average(&self, t: f64) -> f64 {
        self.area_until(t) / t
    }
}

/// Per-hold contribution to the occupancy and influx batches.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct HoldBatch {
    area: f64,
    duration: f64,
    injections: f64,
}

impl Mergeable for HoldBatch {
    fn merge(&mut self, other: &Self) {
        self.area += other.area;
        self.duration += other.duration;
        self.injections += other.injections;
    }
}

const HOLD_BATCHES: usize = 128;

/// Sample-path estimates from one trajectory, or pooled over several.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimates {
    pub t: f64,
    pub rho_hat: f64,
    pub phi_hat: f64,
    pub tau_hat: f64,
    pub n_injected: u64,
    pub n_completed: u64,
    pub jumps: u64,
    pub stderr_rho: f64,
    pub stderr_phi: f64,
    pub stderr_tau: f64,
}

impl Estimates {
    /// Pools two sets of estimates as if their trajectories were
    /// concatenated: time averages weighted by elapsed time, residence
    /// times by particle count. Associative and commutative up to rounding.
    pub fn merge(&self, other: &Self) -> Self {
        let t = self.t + other.t;
        let n = self.n_injected + other.n_injected;
        let (wa, wb) = if t > 0.0 { (self.t / t, other.t / t) } else { (0.5, 0.5) };
        let (na, nb) = if n > 0 {
            (self.n_injected as f64 / n as f64, other.n_injected as f64 / n as f64)
        } else {
            (0.5, 0.5)
        };
        let pool = |a: f64, b: f64, wa: f64, wb: f64| ((wa * a).powi(2) + (wb * b).powi(2)).sqrt();
        Self {
            t,
            rho_hat: wa * self.rho_hat + wb * other.rho_hat,
            phi_hat: if t > 0.0 { n as f64 / t } else { 0.0 },
            tau_hat: na * self.tau_hat + nb * other.tau_hat,
            n_injected: n,
            n_completed: self.n_completed + other.n_completed,
            jumps: self.jumps + other.jumps,
            stderr_rho: pool(self.stderr_rho, other.stderr_rho, wa, wb),
            stderr_phi: pool(self.stderr_phi, other.stderr_phi, wa, wb),
            stderr_tau: pool(self.stderr_tau, other.stderr_tau, na, nb),
        }
    }

    /// Pools in slice order; `None` for an empty slice.
    pub fn pooled(all: &[Estimates]) -> Option<Estimates> {
        let (first, rest) = all.split_first()?;
        Some(rest.iter().fold(*first, |acc, e| acc.merge(e)))
    }
}

/// Observer that maintains a [`ResidenceLedger`] and the running
/// occupancy and influx statistics up to the horizon.
#[derive(Debug, Clone)]
pub struct Tracker {
    ledger: ResidenceLedger,
    occupancy: OccupancyIntegrator,
    holds: MergingBatches<HoldBatch>,
    horizon: Option<(f64, u64)>,
    /// Injected particles counted by the horizon and still inside.
    tagged_open: usize,
}

impl Tracker {
    pub fn new(initial: Configuration) -> Self {
        Self {
            ledger: ResidenceLedger::new(initial),
            occupancy: OccupancyIntegrator::new(initial.particle_count()),
            holds: MergingBatches::new(HOLD_BATCHES),
            horizon: None,
            tagged_open: 0,
        }
    }

    pub fn ledger(&self) -> &ResidenceLedger {
        &self.ledger
    }

    pub fn horizon(&self) -> Option<f64> {
        self.horizon.map(|h| h.0)
    }

    /// Estimates at the horizon. Requires the run to have been drained.
    pub fn estimates(&self) -> Result<Estimates> {
        let (t, jumps) = self
            .horizon
            .ok_or_else(|| Error::Domain("trajectory has not reached its horizon".into()))?;
        let times = self.ledger.residence_times(t)?;
        let n = times.len() as u64;
        let tau_hat = if times.is_empty() { 0.0 } else { crate::stats::mean(&times) };
        let rho_hat = if t > 0.0 { self.occupancy.average(t) } else { 0.0 };
        let phi_hat = self.ledger.influx_estimate(t);
        let batches = self.holds.batches();
        let ratio = |num: fn(&HoldBatch) -> f64| {
            let rb: Vec<RatioBatch> = batches
                .iter()
                .map(|b| RatioBatch { numerator: num(b), denominator: b.duration })
                .collect();
            ratio_batch_stderr(&rb)
        };
        Ok(Estimates {
            t,
            rho_hat,
            phi_hat,
            tau_hat,
            n_injected: n,
            n_completed: n,
            jumps,
            stderr_rho: ratio(|b| b.area),
            stderr_phi: ratio(|b| b.injections),
            stderr_tau: batch_means_stderr(&times),
        })
    }
}

impl Observer for Tracker {
    fn on_jump(&mut self, record: &JumpRecord) -> Result<()> {
        // owners of the extracted sites, read before the ledger closes them
        let mut leaving = [None; 64];
        let mut n_leaving = 0;
        if let (Some(_), Some(Event::Extraction { sites })) = (self.horizon, record.event) {
            for site in sites.iter() {
                leaving[n_leaving] = self.ledger.owner(site);
                n_leaving += 1;
            }
        }
        self.ledger.observe(record)?;
        let Some(event) = record.event else {
            return Ok(());
        };
        match self.horizon {
            None => {
                let area = self.occupancy.advance(record.time, record.config.particle_count());
                let injected = matches!(event, Event::Injection { .. });
                self.holds.push(HoldBatch {
                    area,
                    duration: record.prev_holding,
                    injections: if injected { 1.0 } else { 0.0 },
                });
            }
            Some((t, _)) => {
                for id in leaving[..n_leaving].iter().flatten() {
                    let r = self.ledger.record(*id);
                    if !r.initial && r.entry_time <= t {
                        self.tagged_open -= 1;
                    }
                }
            }
        }
        Ok(())
    }

    fn on_horizon(&mut self, time: f64, jumps: u64) -> Result<()> {
        self.horizon = Some((time, jumps));
        self.tagged_open = self.ledger.open_injected();
        Ok(())
    }

    fn is_drained(&self) -> bool {
        self.horizon.is_some() && self.tagged_open == 0
    }
}

/// Largest trajectory prefix accepted by [`bruteforce_theta_u`].
pub const THETA_MAX_JUMPS: usize = 32;
pub const THETA_MAX_SITES: usize = 6;

/// Survival indicators `Theta_{i,j}(x)` and injection survival `U_{i,j}`
/// for `1 <= i <= j <= n` over a trajectory prefix of `n` jumps.
///
/// Values are path counts; for a valid trajectory they are 0 or 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThetaU {
    jumps: usize,
    sites: usize,
    theta: Vec<u32>,
    u: Vec<u32>,
}

impl ThetaU {
    fn zeros(jumps: usize, sites: usize) -> Self {
        Self {
            jumps,
            sites,
            theta: vec![0; jumps * jumps * sites],
            u: vec![0; jumps * jumps],
        }
    }

    fn slot(&self, i: usize, j: usize) -> usize {
        assert!(1 <= i && i <= j && j <= self.jumps, "need 1 <= i <= j <= n");
        (i - 1) * self.jumps + (j - 1)
    }

    pub fn jumps(&self) -> usize {
        self.jumps
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn theta(&self, i: usize, j: usize, x: usize) -> u32 {
        self.theta[self.slot(i, j) * self.sites + x]
    }

    pub fn u(&self, i: usize, j: usize) -> u32 {
        self.u[self.slot(i, j)]
    }
}

/// Evaluates `Theta` and `U` straight from their definitions, by summing
/// over site sequences with a backward recursion. `configs` holds
/// `zeta_0, ..., zeta_n`.
pub fn bruteforce_theta_u(configs: &[Configuration]) -> Result<ThetaU> {
    let Some(first) = configs.first() else {
        return Err(Error::Domain("trajectory prefix is empty".into()));
    };
    let n = configs.len() - 1;
    let l = first.len();
    if n > THETA_MAX_JUMPS {
        return Err(Error::CapExceeded { what: "brute-force survival indicators (jumps)", size: n, max: THETA_MAX_JUMPS });
    }
    if l > THETA_MAX_SITES {
        return Err(Error::CapExceeded { what: "brute-force survival indicators", size: l, max: THETA_MAX_SITES });
    }
    if let Some(c) = configs.iter().find(|c| c.len() != l) {
        return Err(Error::SizeMismatch { expected: l, got: c.len() });
    }
    let z = |k: usize, x: usize| u32::from(configs[k].occupied(x));
    let theta_step = |k: usize, x: usize, y: usize| -> u32 {
        if x == y {
            z(k - 1, x) * z(k, x)
        } else {
            z(k - 1, x) * (1 - z(k - 1, y)) * (1 - z(k, x)) * z(k, y)
        }
    };
    let mut out = ThetaU::zeros(n, l);
    for j in 1..=n {
        // next[x] = Theta_{i+1,j}(x), starting from Theta_{j+1,j} = 1
        let mut next = vec![1u32; l];
        for i in (1..=j).rev() {
            let cur: Vec<u32> = (0..l)
                .map(|x| (0..l).map(|y| theta_step(i, x, y) * next[y]).sum())
                .collect();
            let injected = configs[i].particle_count() > configs[i - 1].particle_count();
            let u = if !injected {
                0
            } else if i == j {
                1
            } else {
                (0..l).map(|x| (1 - z(i - 1, x)) * next[x]).sum()
            };
            let s = out.slot(i, j);
            out.theta[s * l..(s + 1) * l].copy_from_slice(&cur);
            out.u[s] = u;
            next = cur;
        }
    }
    Ok(out)
}

/// The same indicators read off particle identities: `Theta_{i,j}(x)` is 1
/// when the particle at `x` in `zeta_{i-1}` is still inside after jump `j`,
/// `U_{i,j}` when jump `i` injected a particle still inside after jump `j`.
/// `records` holds the initial record and the first `n` jumps.
pub fn ledger_theta_u(records: &[JumpRecord]) -> Result<ThetaU> {
    let Some(first) = records.first() else {
        return Err(Error::Domain("trajectory prefix is empty".into()));
    };
    let n = records.len() - 1;
    let l = first.config.len();
    let mut ledger = ResidenceLedger::new(first.config);
    let mut owners = vec![ledger.site_owners().to_vec()];
    for r in records {
        ledger.observe(r)?;
        if r.event.is_some() {
            owners.push(ledger.site_owners().to_vec());
        }
    }
    let alive_after = |id: ParticleId, j: usize| {
        ledger.record(id).exit_jump.is_none_or(|e| e > j as u64)
    };
    let mut out = ThetaU::zeros(n, l);
    for i in 1..=n {
        let injected_id = match records[i].event {
            Some(Event::Injection { site }) => owners[i][site],
            _ => None,
        };
        for j in i..=n {
            let s = out.slot(i, j);
            for x in 0..l {
                if let Some(id) = owners[i - 1][x] {
                    out.theta[s * l + x] = u32::from(alive_after(id, j));
                }
            }
            if let Some(id) = injected_id {
                out.u[s] = u32::from(alive_after(id, j));
            }
        }
    }
    Ok(out)
}
