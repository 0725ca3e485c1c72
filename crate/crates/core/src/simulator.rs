//! Sample paths of the lattice-gas Markov chain by the direct method: an
//! exponential holding time with the total exit rate, then one enabled event
//! picked with probability proportional to its rate.

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::{enabled_events_into, Configuration, Event, RateModel};

/// Default cap on jumps simulated while draining.
pub const DEFAULT_DRAIN_BUDGET: u64 = 1_000_000_000;

/// One visited state of the jump chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpRecord {
    pub index: u64,
    /// Jump time `J_i`; zero for the initial record.
    pub time: f64,
    /// The event that produced this state; `None` for the initial record.
    pub event: Option<Event>,
    pub config: Configuration,
    /// Holding time `H_{i-1}` of the previous state, `J_i - J_{i-1}`.
    pub prev_holding: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopRule {
    MaxJumps(u64),
    MaxTime(f64),
}

#[derive(Debug, Clone)]
pub struct RunControl {
    pub stop: StopRule,
    /// Keep simulating past the horizon until the observer reports drained.
    pub drain: bool,
    pub drain_budget: u64,
    pub seed: u64,
    pub initial: Configuration,
}

impl RunControl {
    pub fn jumps(n: u64, initial: Configuration) -> Self {
        Self {
            stop: StopRule::MaxJumps(n),
            drain: false,
            drain_budget: DEFAULT_DRAIN_BUDGET,
            seed: 0,
            initial,
        }
    }

    pub fn time(t: f64, initial: Configuration) -> Self {
        Self {
            stop: StopRule::MaxTime(t),
            ..Self::jumps(0, initial)
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_drain(mut self, drain: bool) -> Self {
        self.drain = drain;
        self
    }

    pub fn with_drain_budget(mut self, budget: u64) -> Self {
        self.drain_budget = budget;
        self
    }

    fn validate<M: RateModel + ?Sized>(&self, model: &M) -> Result<()> {
        if self.initial.len() != model.lattice().size() {
            return Err(Error::SizeMismatch {
                expected: model.lattice().size(),
                got: self.initial.len(),
            });
        }
        if let StopRule::MaxTime(t) = self.stop {
            if !(t.is_finite() && t >= 0.0) {
                return Err(Error::InvalidParameter {
                    name: "max_time",
                    value: t,
                    reason: "must be finite and non-negative",
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    MaxJumps,
    MaxTime,
    Drained,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    /// Measurement horizon `t`: the stop time, or the time of the last
    /// counted jump for a jump budget.
    pub horizon: f64,
    /// Jumps up to the horizon, `N_t`.
    pub jumps: u64,
    /// Extra jumps simulated while draining.
    pub drain_jumps: u64,
    /// Time of the last simulated jump.
    pub final_time: f64,
    pub termination: Termination,
}

/// Receives the trajectory as it is generated.
pub trait Observer {
    fn on_jump(&mut self, record: &JumpRecord) -> Result<()>;

    /// Called once when the primary stop rule is met.
    fn on_horizon(&mut self, _time: f64, _jumps: u64) -> Result<()> {
        Ok(())
    }

    /// Whether a draining run may stop.
    fn is_drained(&self) -> bool {
        true
    }
}

impl Observer for () {
    fn on_jump(&mut self, _: &JumpRecord) -> Result<()> {
        Ok(())
    }
}

/// Adapts a closure into an [`Observer`].
pub struct FnObserver<F>(pub F);

impl<F: FnMut(&JumpRecord)> Observer for FnObserver<F> {
    fn on_jump(&mut self, record: &JumpRecord) -> Result<()> {
        (self.0)(record);
        Ok(())
    }
}

/// Keeps every record.
#[derive(Debug, Default, Clone)]
pub struct Recorder {
    pub records: Vec<JumpRecord>,
}

impl Observer for Recorder {
    fn on_jump(&mut self, record: &JumpRecord) -> Result<()> {
        self.records.push(*record);
        Ok(())
    }
}

/// Generator for stream `replica` of base seed `seed`.
pub fn replica_rng(seed: u64, replica: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub holding: f64,
    pub event: Event,
    pub next: Configuration,
}

/// Draws one holding time and one event from `config`.
///
/// `buf` is scratch space for the enabled-event list.
pub fn step<M, R>(
    model: &M,
    config: &Configuration,
    rng: &mut R,
    buf: &mut Vec<(Event, f64)>,
) -> Result<Step>
where
    M: RateModel + ?Sized,
    R: Rng + ?Sized,
{
    let q = enabled_events_into(model, config, buf);
    if !(q > 0.0) || buf.is_empty() {
        return Err(Error::Absorbing(*config));
    }
    let u: f64 = rng.sample(Open01);
    let holding = -u.ln() / q;
    let target = rng.random::<f64>() * q;
    let mut acc = 0.0;
    // rounding can leave target just above the accumulated total
    let mut chosen = buf[buf.len() - 1].0;
    for &(event, rate) in buf.iter() {
        acc += rate;
        if target < acc {
            chosen = event;
            break;
        }
    }
    Ok(Step {
        holding,
        event: chosen,
        next: config.flipped(chosen.flip_set()),
    })
}

/// Runs one trajectory with the generator of stream 0 of `control.seed`.
pub fn run<M, O>(model: &M, control: &RunControl, observer: &mut O) -> Result<RunSummary>
where
    M: RateModel + ?Sized,
    O: Observer + ?Sized,
{
    let mut rng = replica_rng(control.seed, 0);
    run_with_rng(model, control, &mut rng, observer)
}

pub fn run_with_rng<M, O, R>(
    model: &M,
    control: &RunControl,
    rng: &mut R,
    observer: &mut O,
) -> Result<RunSummary>
where
    M: RateModel + ?Sized,
    O: Observer + ?Sized,
    R: Rng + ?Sized,
{
    control.validate(model)?;
    let mut buf = Vec::new();
    let mut config = control.initial;
    let mut time = 0.0;
    let mut index = 0u64;
    observer.on_jump(&JumpRecord {
        index,
        time,
        event: None,
        config,
        prev_holding: 0.0,
    })?;

    let advance = |s: Step,
                       config: &mut Configuration,
                       time: &mut f64,
                       index: &mut u64,
                       observer: &mut O|
     -> Result<()> {
        *time += s.holding;
        *index += 1;
        *config = s.next;
        observer.on_jump(&JumpRecord {
            index: *index,
            time: *time,
            event: Some(s.event),
            config: *config,
            prev_holding: s.holding,
        })
    };

    let mut pending = None;
    let (horizon, termination) = match control.stop {
        StopRule::MaxJumps(n) => {
            while index < n {
                let s = step(model, &config, rng, &mut buf)?;
                advance(s, &mut config, &mut time, &mut index, observer)?;
            }
            (time, Termination::MaxJumps)
        }
        StopRule::MaxTime(t) => {
            loop {
                let s = step(model, &config, rng, &mut buf)?;
                if time + s.holding > t {
                    pending = Some(s);
                    break;
                }
                advance(s, &mut config, &mut time, &mut index, observer)?;
            }
            (t, Termination::MaxTime)
        }
    };
    let jumps = index;
    observer.on_horizon(horizon, jumps)?;

    if !control.drain {
        return Ok(RunSummary {
            horizon,
            jumps,
            drain_jumps: 0,
            final_time: time,
            termination,
        });
    }

    let mut drain_jumps = 0u64;
    while !observer.is_drained() {
        if drain_jumps >= control.drain_budget {
            return Err(Error::DrainBudgetExhausted {
                budget: control.drain_budget,
                open: 0,
            });
        }
        let s = match pending.take() {
            Some(s) => s,
            None => step(model, &config, rng, &mut buf)?,
        };
        advance(s, &mut config, &mut time, &mut index, observer)?;
        drain_jumps += 1;
    }
    Ok(RunSummary {
        horizon,
        jumps,
        drain_jumps,
        final_time: time,
        termination: Termination::Drained,
    })
}

/// Outcome of one replica of an ensemble.
#[derive(Debug)]
pub struct Replica<O> {
    pub index: usize,
    pub summary: RunSummary,
    pub observer: O,
}

/// Runs `replicas` independent trajectories in parallel, replica `k` on
/// stream `k` of the base seed, and returns them in replica order.
pub fn run_ensemble<M, O, F>(
    model: &M,
    control: &RunControl,
    replicas: usize,
    make_observer: F,
) -> Result<Vec<Replica<O>>>
where
    M: RateModel + ?Sized,
    O: Observer + Send,
    F: Fn(usize) -> O + Sync,
{
    if replicas == 0 {
        return Err(Error::Domain("an ensemble needs at least one replica".into()));
    }
    let outcomes: Vec<Result<Replica<O>>> = (0..replicas)
        .into_par_iter()
        .map(|index| {
            let mut rng = replica_rng(control.seed, index as u64);
            let mut observer = make_observer(index);
            run_with_rng(model, control, &mut rng, &mut observer).map(|summary| Replica {
                index,
                summary,
                observer,
            })
        })
        .collect();
    outcomes
        .into_iter()
        .enumerate()
        .map(|(index, r)| {
            r.map_err(|e| Error::Replica {
                index,
                source: Box::new(e),
            })
        })
        .collect()
}
