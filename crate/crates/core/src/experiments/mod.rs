//! Preset pipelines that confront simulations and exact values with the
//! limit laws along a ladder of `n` values and return a [`VerdictReport`].
//!
//! Limit statements are checked in trend form: a metric that should vanish
//! must shrink at every step of the ladder. Bound statements are checked
//! rung by rung.

mod oracle_sweep;
mod report;
mod runners;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::limits::MIN_ASYMPTOTIC_N;
use crate::sampler::{DrawSchedule, Engine, DEFAULT_SEED};

pub use report::{
    CheckResult, Direction, ExperimentOutput, RungMetrics, Stream, Trend, TrendVerdict, VerdictReport,
};
pub use runners::{
    run_cor1_exponential, run_cor2_linear, run_er_gumbel_t, run_exact_vs_oracle, run_lem4_fixed_draw,
    run_thm1_joint, run_thm2_part1_poisson, run_thm2_part2_zero, run_thm2_part3_nonzero,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Preset {
    #[serde(rename = "thm1_joint")]
    Thm1Joint,
    #[serde(rename = "cor1_exponential")]
    Cor1Exponential,
    #[serde(rename = "cor2_linear")]
    Cor2Linear,
    #[serde(rename = "thm2_part1_poisson")]
    Thm2Part1Poisson,
    #[serde(rename = "thm2_part2_zero")]
    Thm2Part2Zero,
    #[serde(rename = "thm2_part3_nonzero")]
    Thm2Part3Nonzero,
    #[serde(rename = "lem4_fixed_draw")]
    Lem4FixedDraw,
    #[serde(rename = "exact_vs_oracle")]
    ExactVsOracle,
    #[serde(rename = "er_gumbel_T")]
    ErGumbelT,
}

impl Preset {
    pub const ALL: [Preset; 9] = [
        Preset::ErGumbelT,
        Preset::Thm1Joint,
        Preset::Cor1Exponential,
        Preset::Cor2Linear,
        Preset::Thm2Part1Poisson,
        Preset::Thm2Part2Zero,
        Preset::Thm2Part3Nonzero,
        Preset::Lem4FixedDraw,
        Preset::ExactVsOracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Thm1Joint => "thm1_joint",
            Preset::Cor1Exponential => "cor1_exponential",
            Preset::Cor2Linear => "cor2_linear",
            Preset::Thm2Part1Poisson => "thm2_part1_poisson",
            Preset::Thm2Part2Zero => "thm2_part2_zero",
            Preset::Thm2Part3Nonzero => "thm2_part3_nonzero",
            Preset::Lem4FixedDraw => "lem4_fixed_draw",
            Preset::ExactVsOracle => "exact_vs_oracle",
            Preset::ErGumbelT => "er_gumbel_T",
        }
    }

    pub fn from_name(name: &str) -> Option<Preset> {
        Preset::ALL.into_iter().find(|p| p.name() == name)
    }

    /// Plain statement of the claim the preset tests.
    pub fn claim(self) -> &'static str {
        match self {
            Preset::ErGumbelT => {
                "(T - n log n - (m-1) n log log n)/n converges in distribution to Gumbel(-log((m-1)!), 1)"
            }
            Preset::Thm1Joint => {
                "for k = o(log n) (m = 1) or o(log n / log log n) (m >= 2), (X, k! S_k / (log n)^{k-m+1}) converges to (X, e^{-X})"
            }
            Preset::Cor1Exponential => {
                "k! S_k / (log n)^{k-m+1} converges in distribution to Exp(1/(m-1)!)"
            }
            Preset::Cor2Linear => {
                "the normalized vector (k! S_k / (log n)^{k-m+1})_{k=m..K} converges to e^{-X} (1, ..., 1)"
            }
            Preset::Thm2Part1Poisson => {
                "at k = e log n + ((e-1)(m-1) - 1/2) log log n + d, (X, S_k) converges to (X, Pois(e^{(e-1)X-d}/sqrt(2 pi e)))"
            }
            Preset::Thm2Part2Zero => {
                "at k = e log n + ((e-1)(m-1) - 1/2) log log n + g(n) with g -> infinity, S_k converges to 0 with probability 1"
            }
            Preset::Thm2Part3Nonzero => {
                "at k = e log n + ((e-1)(m-1) - 1/2) log log n - g(n) with g -> infinity, P(S_k = 0) converges to 0"
            }
            Preset::Lem4FixedDraw => {
                "after N = n log n + (m-1) n log log n + f(n) draws, k! S_{k,N} / (log n)^{k-m+1} is asymptotic to e^{-f(n)/n}"
            }
            Preset::ExactVsOracle => {
                "closed-form moments and inclusion-exclusion probabilities agree with exhaustive enumeration"
            }
        }
    }

    fn default_ladder(self) -> Vec<u64> {
        match self {
            Preset::ErGumbelT | Preset::Cor1Exponential => vec![100, 1_000, 10_000, 100_000],
            Preset::Thm1Joint | Preset::Cor2Linear | Preset::Lem4FixedDraw => {
                vec![1_000, 10_000, 100_000]
            }
            Preset::Thm2Part1Poisson => vec![10_000, 1_000_000, 100_000_000],
            Preset::Thm2Part2Zero | Preset::Thm2Part3Nonzero => {
                vec![1_000, 10_000, 100_000, 1_000_000]
            }
            Preset::ExactVsOracle => (1..=12).collect(),
        }
    }

    fn uses_log_log(self) -> bool {
        self != Preset::ExactVsOracle
    }

    fn default_window(self) -> [f64; 2] {
        match self {
            Preset::Thm2Part3Nonzero => [0.0, 2.0],
            _ => [0.0, 1.0],
        }
    }
}

impl std::fmt::Display for Preset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Configuration of one preset run. Unset optional fields take the preset
/// defaults listed on [`ExperimentSpec::resolve`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub preset: Preset,
    #[serde(default)]
    pub ladder: Vec<u64>,
    #[serde(default = "default_m")]
    pub m: u32,
    /// k-ton level; the top level `K` for `cor2_linear`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<u64>,
    /// Threshold offset for `thm2_part1_poisson`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default = "default_engine")]
    pub engine: Engine,
    /// Draw schedule for `lem4_fixed_draw`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<DrawSchedule>,
    /// `c` in `g(n) = c sqrt(log log n)`.
    #[serde(default = "default_g_scale")]
    pub g_scale: f64,
    /// Window `[x, y]` of the normalized stopping time used by the bounds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<[f64; 2]>,
    /// Values of `f/n` for the exact path of `thm2_part1_poisson`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_grid: Option<Vec<f64>>,
    /// Largest rung simulated by `thm2_part1_poisson`.
    #[serde(default = "default_sim_max_n")]
    pub sim_max_n: u64,
    #[serde(default = "default_slice_width")]
    pub slice_width: f64,
    #[serde(default = "default_min_slice_trials")]
    pub min_slice_trials: u64,
    /// Move each threshold rung to the nearest larger `n` whose `d_eff`
    /// matches the target offset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snap: Option<bool>,
    /// Largest `n^N` enumerated by `exact_vs_oracle`.
    #[serde(default = "default_oracle_limit")]
    pub oracle_limit: u64,
    /// Cap on `N` for `n = 1` in `exact_vs_oracle`.
    #[serde(default = "default_oracle_max_draws")]
    pub oracle_max_draws: u64,
}

fn default_m() -> u32 {
    1
}
fn default_seed() -> u64 {
    DEFAULT_SEED
}
fn default_engine() -> Engine {
    Engine::Poissonized
}
fn default_g_scale() -> f64 {
    1.0
}
fn default_sim_max_n() -> u64 {
    1_000_000
}
fn default_slice_width() -> f64 {
    0.5
}
fn default_min_slice_trials() -> u64 {
    200
}
fn default_oracle_limit() -> u64 {
    1_000_000
}
fn default_oracle_max_draws() -> u64 {
    20
}

/// Default trial count per rung.
pub const DEFAULT_TRIALS: u64 = 10_000;

impl ExperimentSpec {
    pub fn new(preset: Preset) -> Self {
        Self {
            preset,
            ladder: Vec::new(),
            m: default_m(),
            k: None,
            d: None,
            trials: None,
            seed: default_seed(),
            output: None,
            engine: default_engine(),
            schedule: None,
            g_scale: default_g_scale(),
            window: None,
            x_grid: None,
            sim_max_n: default_sim_max_n(),
            slice_width: default_slice_width(),
            min_slice_trials: default_min_slice_trials(),
            snap: None,
            oracle_limit: default_oracle_limit(),
            oracle_max_draws: default_oracle_max_draws(),
        }
    }

    /// Fills preset defaults and validates.
    ///
    /// Defaults: the preset ladder, `trials = 10_000`, `k = m` (`K = m + 2`
    /// for `cor2_linear`), `d = 0`, schedule `offset_x` with `x = 0`, window
    /// `[0, 1]` (`[0, 2]` for `thm2_part3_nonzero`), `x_grid = [0]`, and
    /// snapping on for the two `g(n)` presets.
    pub fn resolve(mut self) -> Result<Self> {
        if self.ladder.is_empty() {
            self.ladder = self.preset.default_ladder();
        }
        if self.trials.is_none() {
            self.trials = Some(DEFAULT_TRIALS);
        }
        if self.k.is_none() {
            match self.preset {
                Preset::Thm1Joint | Preset::Cor1Exponential | Preset::Lem4FixedDraw => {
                    self.k = Some(self.m as u64)
                }
                Preset::Cor2Linear => self.k = Some(self.m as u64 + 2),
                _ => {}
            }
        }
        if self.preset == Preset::Thm2Part1Poisson && self.d.is_none() {
            self.d = Some(0.0);
        }
        if self.preset == Preset::Lem4FixedDraw && self.schedule.is_none() {
            self.schedule = Some(DrawSchedule::OffsetX { x: 0.0 });
        }
        if matches!(self.preset, Preset::Thm2Part2Zero | Preset::Thm2Part3Nonzero) {
            self.window.get_or_insert(self.preset.default_window());
            self.snap.get_or_insert(true);
        }
        if self.preset == Preset::Thm2Part1Poisson {
            self.x_grid.get_or_insert_with(|| vec![0.0]);
            self.snap.get_or_insert(false);
        }
        self.validate()?;
        Ok(self)
    }

    pub fn trials(&self) -> u64 {
        self.trials.unwrap_or(DEFAULT_TRIALS)
    }

    pub fn validate(&self) -> Result<()> {
        if self.ladder.is_empty() {
            return Err(Error::validation("ladder", "must not be empty"));
        }
        if self.ladder.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::validation("ladder", "must be strictly increasing"));
        }
        if self.preset.uses_log_log() {
            if let Some(&bad) = self.ladder.iter().find(|&&n| n < MIN_ASYMPTOTIC_N) {
                return Err(Error::validation(
                    "ladder",
                    format!(
                        "n = {bad} is below {MIN_ASYMPTOTIC_N}; preset {} uses log log n",
                        self.preset
                    ),
                ));
            }
        }
        if self.ladder.iter().any(|&n| n == 0 || n > u32::MAX as u64) {
            return Err(Error::validation("ladder", format!("every n must lie in 1..={}", u32::MAX)));
        }
        if self.m == 0 {
            return Err(Error::validation("m", "must be at least 1"));
        }
        if self.trials == Some(0) {
            return Err(Error::validation("trials", "must be at least 1"));
        }
        if let Some(k) = self.k {
            if k < self.m as u64 {
                return Err(Error::validation("k", format!("must be at least m = {}", self.m)));
            }
            if self.preset == Preset::Cor2Linear && k > self.m as u64 + 3 {
                return Err(Error::validation("k", "K must be at most m + 3"));
            }
        }
        if let Some(d) = self.d {
            if !d.is_finite() {
                return Err(Error::validation("d", "must be finite"));
            }
        }
        if !(self.g_scale > 0.0) || !self.g_scale.is_finite() {
            return Err(Error::validation("g_scale", "must be positive"));
        }
        if let Some([x, y]) = self.window {
            if !(x < y) {
                return Err(Error::validation("window", "need x < y"));
            }
        }
        if !(self.slice_width > 0.0) {
            return Err(Error::validation("slice_width", "must be positive"));
        }
        if self.oracle_limit == 0 || self.oracle_limit > crate::exact::ORACLE_LIMIT {
            return Err(Error::validation(
                "oracle_limit",
                format!("must lie in 1..={}", crate::exact::ORACLE_LIMIT),
            ));
        }
        if let Some(s) = &self.schedule {
            if let DrawSchedule::Custom { .. } = s {
                if self.preset == Preset::Lem4FixedDraw {
                    return Err(Error::validation(
                        "schedule",
                        "must be one of offset_x, lemma_m, lemma_m_prime",
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Runs the preset named in `spec` on `workers` threads (0: rayon default).
pub fn run_preset(spec: &ExperimentSpec, workers: usize) -> Result<ExperimentOutput> {
    let spec = spec.clone().resolve()?;
    match spec.preset {
        Preset::ErGumbelT => run_er_gumbel_t(&spec, workers),
        Preset::Thm1Joint => run_thm1_joint(&spec, workers),
        Preset::Cor1Exponential => run_cor1_exponential(&spec, workers),
        Preset::Cor2Linear => run_cor2_linear(&spec, workers),
        Preset::Thm2Part1Poisson => run_thm2_part1_poisson(&spec, workers),
        Preset::Thm2Part2Zero => run_thm2_part2_zero(&spec, workers),
        Preset::Thm2Part3Nonzero => run_thm2_part3_nonzero(&spec, workers),
        Preset::Lem4FixedDraw => run_lem4_fixed_draw(&spec, workers),
        Preset::ExactVsOracle => run_exact_vs_oracle(&spec),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_names_round_trip() {
        for p in Preset::ALL {
            assert_eq!(Preset::from_name(p.name()), Some(p));
            let json = serde_json::to_string(&p).unwrap();
            assert_eq!(json, format!("\"{}\"", p.name()));
        }
    }

    #[test]
    fn resolve_fills_defaults() {
        let s = ExperimentSpec::new(Preset::Lem4FixedDraw).resolve().unwrap();
        assert_eq!(s.ladder, vec![1_000, 10_000, 100_000]);
        assert_eq!(s.k, Some(1));
        assert_eq!(s.trials(), DEFAULT_TRIALS);
        assert_eq!(s.schedule, Some(DrawSchedule::OffsetX { x: 0.0 }));
    }

    #[test]
    fn validation_errors_name_fields() {
        let mut s = ExperimentSpec::new(Preset::ErGumbelT);
        s.ladder = vec![10, 100];
        match s.clone().resolve() {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "ladder"),
            other => panic!("{other:?}"),
        }
        s.ladder = vec![100, 100];
        assert!(s.clone().resolve().is_err());
        let mut s = ExperimentSpec::new(Preset::ExactVsOracle);
        s.ladder = vec![2, 3];
        assert!(s.resolve().is_ok());
        let mut s = ExperimentSpec::new(Preset::Cor2Linear);
        s.k = Some(5);
        assert!(s.resolve().is_err());
    }
}
