//! Monte Carlo simulation of the m-fold coupon collector.
//!
//! Two modes:
//!
//! * [`run_until_complete`] draws until every one of the `n` types has at
//!   least `m` copies and reports the stopping time `T` with the count
//!   histogram at `T`.
//! * [`run_fixed_draws`] draws exactly `N` coupons, complete or not.
//!
//! Each trial owns a random stream derived from `(seed, trial_index)`, so a
//! batch gives the same records on any number of workers.

mod histogram;
mod poissonized;
mod schedule;
pub mod stream;
mod urn;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use histogram::CountHistogram;
pub use schedule::{DrawSchedule, MIN_SCHEDULE_N};
use stream::trial_rng;
use urn::Urn;

/// Hard ceiling on draws per trial. Reaching it means a bug, not bad luck.
pub const DRAW_CAP: u64 = 1_000_000_000_000;

/// Default master seed.
pub const DEFAULT_SEED: u64 = 0x6b74_6f6e_2d31;

/// How a run-until-complete trial is produced.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    /// Draw coupons one at a time.
    #[default]
    Direct,
    /// Sample `(T, histogram)` from the Poisson embedding; same law, cost
    /// independent of `n log n`.
    Poissonized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollectorConfig {
    pub n: u64,
    pub m: u32,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default)]
    pub engine: Engine,
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_trials() -> u64 {
    1
}

impl CollectorConfig {
    pub fn new(n: u64, m: u32, seed: u64, trials: u64) -> Result<Self> {
        let config = Self {
            n,
            m,
            seed,
            trials,
            engine: Engine::Direct,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn with_engine(mut self, engine: Engine) -> Self {
        self.engine = engine;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::validation("n", "must be at least 1"));
        }
        if self.n > u32::MAX as u64 {
            return Err(Error::validation("n", format!("must be at most {}", u32::MAX)));
        }
        if self.m == 0 {
            return Err(Error::validation("m", "must be at least 1"));
        }
        if self.trials == 0 {
            return Err(Error::validation("trials", "must be at least 1"));
        }
        Ok(())
    }
}

/// One completed collection.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialRecord {
    #[serde(rename = "trial")]
    pub trial_index: u64,
    /// Stopping time `T`.
    #[serde(rename = "T")]
    pub total_draws: u64,
    #[serde(rename = "hist")]
    pub histogram_at_stop: CountHistogram,
}

impl TrialRecord {
    /// `S_k` at the stopping time.
    pub fn kton(&self, k: u64) -> u64 {
        self.histogram_at_stop.kton_count(k)
    }
}

/// Number of types seen exactly `k` times.
pub fn kton_count(histogram: &CountHistogram, k: u64) -> u64 {
    histogram.kton_count(k)
}

pub fn run_until_complete(config: &CollectorConfig, trial_index: u64) -> Result<TrialRecord> {
    config.validate()?;
    let n = config.n as u32;
    let mut rng = trial_rng(config.seed, trial_index);
    let (total_draws, histogram_at_stop) = match config.engine {
        Engine::Direct => {
            let mut urn = Urn::new(n, config.m);
            urn.run(&mut rng, DRAW_CAP, true);
            if urn.short() > 0 {
                return Err(Error::DrawCap {
                    cap: DRAW_CAP,
                    draws: urn.draws(),
                    n: config.n,
                    m: config.m,
                });
            }
            (urn.draws(), urn.histogram())
        }
        Engine::Poissonized => poissonized::run(n, config.m, &mut rng),
    };
    Ok(TrialRecord {
        trial_index,
        total_draws,
        histogram_at_stop,
    })
}

/// Histogram after exactly `ceil(schedule(n))` draws.
///
/// Uses the same per-trial stream as [`run_until_complete`] with the direct
/// engine, so the two modes see the same draw sequence for a given
/// `(seed, trial_index)`.
pub fn run_fixed_draws(
    n: u64,
    m: u32,
    schedule: &DrawSchedule,
    seed: u64,
    trial_index: u64,
) -> Result<CountHistogram> {
    CollectorConfig::new(n, m, seed, 1)?;
    let draws = schedule.evaluate(n, m)?;
    if draws > DRAW_CAP {
        return Err(Error::DrawCap {
            cap: DRAW_CAP,
            draws,
            n,
            m,
        });
    }
    let mut rng = trial_rng(seed, trial_index);
    let mut urn = Urn::new(n as u32, m);
    urn.run(&mut rng, draws, false);
    Ok(urn.histogram())
}

/// What a batch produces per trial.
#[derive(Debug, Clone, PartialEq)]
pub enum RunMode {
    UntilComplete,
    FixedDraws(DrawSchedule),
}

#[derive(Debug, Clone, PartialEq)]
pub enum BatchOutput {
    Complete(Vec<TrialRecord>),
    Fixed(Vec<CountHistogram>),
}

impl BatchOutput {
    pub fn len(&self) -> usize {
        match self {
            BatchOutput::Complete(v) => v.len(),
            BatchOutput::Fixed(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn in_pool<T: Send>(workers: usize, job: impl FnOnce() -> T + Send) -> Result<T> {
    if workers == 0 {
        return Ok(job());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    Ok(pool.install(job))
}

fn attach(trial: u64) -> impl Fn(Error) -> Error {
    move |e| Error::Trial {
        trial,
        source: Box::new(e),
    }
}

/// All `config.trials` records, ordered by trial index.
///
/// `workers == 0` uses the global rayon pool. The output is identical for
/// every worker count.
pub fn batch_until_complete(config: &CollectorConfig, workers: usize) -> Result<Vec<TrialRecord>> {
    config.validate()?;
    in_pool(workers, || {
        (0..config.trials)
            .into_par_iter()
            .map(|i| run_until_complete(config, i).map_err(attach(i)))
            .collect::<Result<Vec<_>>>()
    })?
}

pub fn batch_fixed_draws(
    config: &CollectorConfig,
    schedule: &DrawSchedule,
    workers: usize,
) -> Result<Vec<CountHistogram>> {
    config.validate()?;
    schedule.evaluate(config.n, config.m)?;
    in_pool(workers, || {
        (0..config.trials)
            .into_par_iter()
            .map(|i| {
                run_fixed_draws(config.n, config.m, schedule, config.seed, i).map_err(attach(i))
            })
            .collect::<Result<Vec<_>>>()
    })?
}

pub fn batch_run(config: &CollectorConfig, mode: &RunMode, workers: usize) -> Result<BatchOutput> {
    match mode {
        RunMode::UntilComplete => batch_until_complete(config, workers).map(BatchOutput::Complete),
        RunMode::FixedDraws(schedule) => {
            batch_fixed_draws(config, schedule, workers).map(BatchOutput::Fixed)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(n: u64, m: u32, trials: u64) -> CollectorConfig {
        CollectorConfig::new(n, m, 42, trials).unwrap()
    }

    #[test]
    fn single_type_completes_on_first_draw() {
        for seed in [0, 1, 99] {
            let cfg = CollectorConfig::new(1, 1, seed, 1).unwrap();
            let rec = run_until_complete(&cfg, 0).unwrap();
            assert_eq!(rec.total_draws, 1);
            assert_eq!(rec.histogram_at_stop.kton_count(1), 1);
            let rec = run_until_complete(&cfg.with_engine(Engine::Poissonized), 0).unwrap();
            assert_eq!(rec.total_draws, 1);
        }
    }

    #[test]
    fn invalid_configs_rejected() {
        assert!(CollectorConfig::new(0, 1, 0, 1).is_err());
        assert!(CollectorConfig::new(3, 0, 0, 1).is_err());
        assert!(CollectorConfig::new(3, 1, 0, 0).is_err());
    }

    #[test]
    fn stop_invariants_hold() {
        for engine in [Engine::Direct, Engine::Poissonized] {
            for (n, m) in [(2, 1), (5, 2), (40, 3), (200, 1)] {
                let cfg = config(n, m, 200).with_engine(engine);
                for rec in batch_until_complete(&cfg, 1).unwrap() {
                    let h = &rec.histogram_at_stop;
                    assert_eq!(h.n_total(), n);
                    assert_eq!(h.draws(), rec.total_draws);
                    assert!(h.min_count() >= m as u64);
                    assert!(h.kton_count(m as u64) >= 1);
                    assert!(rec.total_draws >= n * m as u64);
                }
            }
        }
    }

    #[test]
    fn one_draw_short_leaves_a_type_at_m_minus_one() {
        for (n, m) in [(3, 1), (10, 2), (25, 3)] {
            let cfg = config(n, m, 50);
            for i in 0..cfg.trials {
                let rec = run_until_complete(&cfg, i).unwrap();
                let before = run_fixed_draws(
                    n,
                    m,
                    &DrawSchedule::custom(rec.total_draws - 1),
                    cfg.seed,
                    i,
                )
                .unwrap();
                assert_eq!(before.kton_count(m as u64 - 1), 1);
                assert_eq!(before.min_count(), m as u64 - 1);
                let at = run_fixed_draws(n, m, &DrawSchedule::custom(rec.total_draws), cfg.seed, i)
                    .unwrap();
                assert_eq!(at, rec.histogram_at_stop);
            }
        }
    }

    #[test]
    fn zero_draws_leaves_everything_unseen() {
        let hist = run_fixed_draws(3, 1, &DrawSchedule::custom(0), 5, 0).unwrap();
        assert_eq!(hist.kton_count(0), 3);
        assert_eq!(hist.draws(), 0);
    }

    #[test]
    fn schedule_below_sixteen_is_a_domain_error() {
        let err = run_fixed_draws(8, 1, &DrawSchedule::LemmaM, 0, 0).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }

    #[test]
    fn batches_are_deterministic_across_workers() {
        let cfg = config(30, 2, 10);
        let a = batch_until_complete(&cfg, 1).unwrap();
        let b = batch_until_complete(&cfg, 1).unwrap();
        let c = batch_until_complete(&cfg, 4).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
        assert_eq!(a.len(), 10);
        assert!(a.iter().enumerate().all(|(i, r)| r.trial_index == i as u64));

        let sched = DrawSchedule::OffsetX { x: 0.0 };
        let f1 = batch_run(&config(64, 1, 10), &RunMode::FixedDraws(sched.clone()), 1).unwrap();
        let f4 = batch_run(&config(64, 1, 10), &RunMode::FixedDraws(sched), 4).unwrap();
        assert_eq!(f1, f4);
    }

    #[test]
    fn record_jsonl_shape() {
        let cfg = CollectorConfig::new(1, 1, 0, 1).unwrap();
        let rec = run_until_complete(&cfg, 0).unwrap();
        let line = serde_json::to_string(&rec).unwrap();
        assert_eq!(line, r#"{"trial":0,"T":1,"hist":{"1":1}}"#);
    }
}
