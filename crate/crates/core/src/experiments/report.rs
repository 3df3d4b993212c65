use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{ExperimentSpec, Preset};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Decreasing,
    Increasing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trend {
    /// Every step moves in the expected direction.
    Improving,
    /// Mixed steps.
    Flat,
    /// Every step moves against the expected direction.
    Degrading,
}

impl Trend {
    pub fn of(values: &[f64], direction: Direction) -> Trend {
        if values.len() < 2 || values.iter().any(|v| !v.is_finite()) {
            return Trend::Flat;
        }
        let better = |a: f64, b: f64| match direction {
            Direction::Decreasing => b < a,
            Direction::Increasing => b > a,
        };
        if values.windows(2).all(|w| better(w[0], w[1])) {
            Trend::Improving
        } else if values.windows(2).all(|w| better(w[1], w[0])) {
            Trend::Degrading
        } else {
            Trend::Flat
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendVerdict {
    pub metric: String,
    pub direction: Direction,
    pub values: Vec<f64>,
    pub verdict: Trend,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rung: Option<u64>,
    pub passed: bool,
    /// Informational checks are reported but do not decide the verdict.
    pub required: bool,
    pub detail: String,
}

/// Metrics of one ladder rung, keyed by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RungMetrics {
    pub n: u64,
    pub metrics: BTreeMap<String, f64>,
}

impl RungMetrics {
    pub fn new(n: u64) -> Self {
        Self {
            n,
            metrics: BTreeMap::new(),
        }
    }

    /// Records `value`; non-finite values are dropped so reports stay valid JSON.
    pub fn set(&mut self, name: impl Into<String>, value: f64) {
        if value.is_finite() {
            self.metrics.insert(name.into(), value);
        }
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.metrics.get(name).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictReport {
    pub preset: Preset,
    pub claim: String,
    pub seed: u64,
    pub spec: ExperimentSpec,
    pub rungs: Vec<RungMetrics>,
    pub trends: Vec<TrendVerdict>,
    pub checks: Vec<CheckResult>,
    pub passed: bool,
    #[serde(default)]
    pub artifacts: Vec<String>,
}

impl VerdictReport {
    pub(crate) fn new(spec: &ExperimentSpec) -> Self {
        Self {
            preset: spec.preset,
            claim: spec.preset.claim().to_string(),
            seed: spec.seed,
            spec: spec.clone(),
            rungs: Vec::new(),
            trends: Vec::new(),
            checks: Vec::new(),
            passed: false,
            artifacts: Vec::new(),
        }
    }

    /// Adds a trend verdict over the named metric across all rungs that carry it.
    pub(crate) fn trend(&mut self, metric: &str, direction: Direction) {
        let values: Vec<f64> = self.rungs.iter().filter_map(|r| r.get(metric)).collect();
        let verdict = if values.len() == self.rungs.len() {
            Trend::of(&values, direction)
        } else {
            Trend::Flat
        };
        self.trends.push(TrendVerdict {
            metric: metric.to_string(),
            direction,
            values,
            verdict,
        });
    }

    pub(crate) fn check(&mut self, name: &str, rung: Option<u64>, passed: bool, required: bool, detail: String) {
        self.checks.push(CheckResult {
            name: name.to_string(),
            rung,
            passed,
            required,
            detail,
        });
    }

    pub(crate) fn finish(mut self) -> Self {
        self.passed = self.trends.iter().all(|t| t.verdict == Trend::Improving)
            && self.checks.iter().filter(|c| c.required).all(|c| c.passed);
        self
    }

    pub fn rung(&self, n: u64) -> Option<&RungMetrics> {
        self.rungs.iter().find(|r| r.n == n)
    }

    pub fn trend_of(&self, metric: &str) -> Option<&TrendVerdict> {
        self.trends.iter().find(|t| t.metric == metric)
    }

    fn metric_names(&self) -> Vec<String> {
        let set: BTreeSet<&String> = self.rungs.iter().flat_map(|r| r.metrics.keys()).collect();
        set.into_iter().cloned().collect()
    }

    /// One row per rung, one column per metric; missing cells are empty.
    pub fn write_rung_csv<W: Write>(&self, out: W) -> Result<()> {
        let names = self.metric_names();
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["n".to_string()];
        header.extend(names.iter().cloned());
        w.write_record(&header)?;
        for r in &self.rungs {
            let mut row = vec![r.n.to_string()];
            row.extend(names.iter().map(|k| r.get(k).map(|v| format!("{v:e}")).unwrap_or_default()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Long format `rung,metric,value` for plotting.
    pub fn write_long_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["rung", "metric", "value"])?;
        for r in &self.rungs {
            for (k, v) in &r.metrics {
                w.write_record([r.n.to_string(), k.clone(), format!("{v:e}")])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Raw per-rung records, one JSON document per line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stream {
    pub name: String,
    pub lines: Vec<String>,
}

impl Stream {
    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        for line in &self.lines {
            out.write_all(line.as_bytes())?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub report: VerdictReport,
    pub streams: Vec<Stream>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trend_classification() {
        assert_eq!(Trend::of(&[3.0, 2.0, 1.0], Direction::Decreasing), Trend::Improving);
        assert_eq!(Trend::of(&[1.0, 2.0, 3.0], Direction::Decreasing), Trend::Degrading);
        assert_eq!(Trend::of(&[1.0, 2.0, 1.5], Direction::Decreasing), Trend::Flat);
        assert_eq!(Trend::of(&[1.0, 1.0], Direction::Increasing), Trend::Flat);
        assert_eq!(Trend::of(&[0.2, 0.5], Direction::Increasing), Trend::Improving);
    }
}
