use latgas_core::lattice::{enabled_events, Configuration, RateModel};
use latgas_core::models::{
    ising_tau_exact, random_table_model, IsingModel, IsingParams, TasepModel, TasepParams,
};
use latgas_core::oracle::exact_law;
use latgas_core::simulator::{replica_rng, run, run_ensemble, FnObserver, JumpRecord, Observer, RunControl};
use latgas_core::stats::{mean, sample_variance};
use latgas_core::tracker::{Estimates, Tracker};
use latgas_core::Result;
use rand::Rng;

fn tasep(l: usize, alpha: f64, beta: f64) -> TasepModel {
    TasepModel::new(TasepParams { sites: l, alpha, beta }).unwrap()
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    (mean(values), (sample_variance(values) / values.len() as f64).sqrt())
}

#[test]
fn replica_mean_influx_matches_exact() {
    let model = tasep(5, 0.6, 0.9);
    let exact = exact_law(&model).unwrap();
    let initial = Configuration::empty(5);
    let control = RunControl::time(500.0, initial).with_seed(2024).with_drain(true);
    let replicas = run_ensemble(&model, &control, 100, |_| Tracker::new(initial)).unwrap();
    let phis: Vec<f64> = replicas
        .iter()
        .map(|r| r.observer.estimates().unwrap().phi_hat)
        .collect();
    let (m, se) = mean_and_stderr(&phis);
    assert!((m - exact.phi).abs() <= 3.0 * se, "{m} vs {} (se {se})", exact.phi);
}

#[test]
fn pooled_estimates_satisfy_the_law() {
    let model = tasep(4, 1.0, 0.5);
    let exact = exact_law(&model).unwrap();
    let initial = Configuration::empty(4);
    let control = RunControl::jumps(200_000, initial).with_seed(3).with_drain(true);
    let replicas = run_ensemble(&model, &control, 8, |_| Tracker::new(initial)).unwrap();
    let all: Vec<Estimates> = replicas.iter().map(|r| r.observer.estimates().unwrap()).collect();
    let pooled = Estimates::pooled(&all).unwrap();
    for (hat, se, exact) in [
        (pooled.rho_hat, pooled.stderr_rho, exact.rho),
        (pooled.phi_hat, pooled.stderr_phi, exact.phi),
        (pooled.tau_hat, pooled.stderr_tau, exact.tau),
    ] {
        assert!((hat - exact).abs() <= 3.0 * se, "{hat} vs {exact} (se {se})");
    }
}

#[test]
fn ising_tracker_matches_transfer_matrix() {
    let mut params = IsingParams::uniform(5, 0.8, 0.3, 1.0);
    params.alpha = [[0.7, 1.2], [1.2, 2.0]];
    let closed = ising_tau_exact(&params).unwrap().tau;
    let model = IsingModel::new(params).unwrap();
    let initial = Configuration::empty(5);
    let mut tracker = Tracker::new(initial);
    run(&model, &RunControl::jumps(1_000_000, initial).with_seed(77).with_drain(true), &mut tracker).unwrap();
    let e = tracker.estimates().unwrap();
    assert!((e.tau_hat - closed).abs() <= 3.0 * e.stderr_tau, "{} vs {closed} (se {})", e.tau_hat, e.stderr_tau);
}

/// Fraction of time spent in each state up to the horizon.
struct Occupation {
    time: Vec<f64>,
    current: usize,
    horizon: f64,
}

impl Observer for Occupation {
    fn on_jump(&mut self, r: &JumpRecord) -> Result<()> {
        if r.event.is_some() {
            self.time[self.current] += r.prev_holding;
        }
        self.current = r.config.index();
        Ok(())
    }

    fn on_horizon(&mut self, t: f64, _: u64) -> Result<()> {
        let elapsed: f64 = self.time.iter().sum();
        self.time[self.current] += t - elapsed;
        self.horizon = t;
        Ok(())
    }
}

#[test]
fn time_fractions_match_stationary_law() {
    let mut rng = replica_rng(31, 0);
    for l in [2usize, 3, 4] {
        let model = random_table_model(l, &mut rng, &Default::default()).unwrap();
        let exact = exact_law(&model).unwrap();
        let n = 1usize << l;
        // start each replica from a stationary draw so the time averages are unbiased
        let replicas: Vec<Occupation> = (0..40u64)
            .map(|k| {
                let mut draw = replica_rng(l as u64, 1000 + k);
                let u: f64 = draw.random();
                let mut acc = 0.0;
                let start = (0..n).find(|&s| { acc += exact.pi[s]; u < acc }).unwrap_or(n - 1);
                let initial = Configuration::from_bits(start as u64, l).unwrap();
                let mut occ = Occupation { time: vec![0.0; n], current: start, horizon: 0.0 };
                run(&model, &RunControl::time(2_000.0, initial).with_seed(k), &mut occ).unwrap();
                occ
            })
            .collect();
        for state in 0..n {
            let fractions: Vec<f64> = replicas
                .iter()
                .map(|r| r.time[state] / r.horizon)
                .collect();
            let (m, se) = mean_and_stderr(&fractions);
            assert!((m - exact.pi[state]).abs() <= 3.0 * se, "L={l} state {state}: {m} vs {}", exact.pi[state]);
        }
    }
}

#[test]
fn holding_times_per_state() {
    let model = tasep(2, 1.0, 2.0);
    let mut sums = [0.0f64; 4];
    let mut visits = [0u64; 4];
    let mut prev = None::<usize>;
    let initial = Configuration::empty(2);
    run(
        &model,
        &RunControl::jumps(200_000, initial).with_seed(5),
        &mut FnObserver(|r: &JumpRecord| {
            if let Some(p) = prev {
                assert!(r.prev_holding > 0.0);
                sums[p] += r.prev_holding;
                visits[p] += 1;
            }
            prev = Some(r.config.index());
        }),
    )
    .unwrap();
    for config in model.lattice().states() {
        let s = config.index();
        assert!(visits[s] >= 10_000);
        let q: f64 = enabled_events(&model, &config).iter().map(|e| e.1).sum();
        let m = sums[s] / visits[s] as f64;
        assert!((m - 1.0 / q).abs() <= 3.0 / q / (visits[s] as f64).sqrt());
    }
}
