//! Configuration loading, result persistence and run manifests.
//!
//! A run directory holds `report.json`, `rungs.csv`, `long.csv`, one JSONL
//! stream per rung and `manifest.json`. The manifest carries the resolved
//! spec, so [`rerun`] regenerates every artifact and the digests must match.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::experiments::{run_preset, ExperimentOutput, ExperimentSpec, VerdictReport};
use crate::sampler::TrialRecord;
use crate::stats::summarize;

pub const REPORT_FILE: &str = "report.json";
pub const RUNGS_FILE: &str = "rungs.csv";
pub const LONG_FILE: &str = "long.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub spec: ExperimentSpec,
    pub seed: u64,
    pub version: String,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    /// SHA-256 hex digest per artifact file name.
    pub digests: BTreeMap<String, String>,
}

/// Reads a JSON experiment spec, fills defaults and validates it.
///
/// Repeated keys and unknown keys are parse errors.
pub fn load_config(path: &Path) -> Result<ExperimentSpec> {
    let text = fs::read_to_string(path)?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<ExperimentSpec> {
    let spec: ExperimentSpec =
        serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    spec.resolve()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn render(output: &ExperimentOutput) -> Result<Vec<(String, Vec<u8>)>> {
    let mut files = Vec::new();
    let mut report = serde_json::to_vec_pretty(&output.report)?;
    report.push(b'\n');
    files.push((REPORT_FILE.to_string(), report));
    let mut rungs = Vec::new();
    output.report.write_rung_csv(&mut rungs)?;
    files.push((RUNGS_FILE.to_string(), rungs));
    let mut long = Vec::new();
    output.report.write_long_csv(&mut long)?;
    files.push((LONG_FILE.to_string(), long));
    for s in &output.streams {
        let mut buf = Vec::new();
        s.write(&mut buf)?;
        files.push((s.name.clone(), buf));
    }
    Ok(files)
}

/// Writes every artifact of `output` into `dir` and returns the manifest,
/// which is also written as `manifest.json`.
pub fn write_outputs(dir: &Path, output: &ExperimentOutput) -> Result<RunManifest> {
    fs::create_dir_all(dir)?;
    let mut digests = BTreeMap::new();
    let mut report = output.report.clone();
    report.artifacts = output.streams.iter().map(|s| s.name.clone()).collect();
    let output = ExperimentOutput {
        report,
        streams: output.streams.clone(),
    };
    for (name, bytes) in render(&output)? {
        fs::write(dir.join(&name), &bytes)?;
        digests.insert(name, sha256_hex(&bytes));
    }
    let manifest = RunManifest {
        spec: output.report.spec.clone(),
        seed: output.report.seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        timestamp: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        digests,
    };
    let mut text = serde_json::to_vec_pretty(&manifest)?;
    text.push(b'\n');
    fs::write(dir.join(MANIFEST_FILE), text)?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<RunManifest> {
    let text = fs::read_to_string(dir.join(MANIFEST_FILE))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn read_report(dir: &Path) -> Result<VerdictReport> {
    let text = fs::read_to_string(dir.join(REPORT_FILE))?;
    Ok(serde_json::from_str(&text)?)
}

/// Recomputes the digests of the files listed in `manifest` from `dir`;
/// returns the names whose content no longer matches.
pub fn verify_digests(dir: &Path, manifest: &RunManifest) -> Result<Vec<String>> {
    let mut bad = Vec::new();
    for (name, digest) in &manifest.digests {
        let bytes = fs::read(dir.join(name))?;
        if &sha256_hex(&bytes) != digest {
            bad.push(name.clone());
        }
    }
    Ok(bad)
}

/// Runs the manifest's spec again and writes the artifacts into `dir`.
pub fn rerun(manifest: &RunManifest, dir: &Path, workers: usize) -> Result<RunManifest> {
    let output = run_preset(&manifest.spec, workers)?;
    write_outputs(dir, &output)
}

/// Default output directory for a preset run.
pub fn default_output_dir(spec: &ExperimentSpec) -> PathBuf {
    spec.output
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("runs/{}-{:x}", spec.preset, spec.seed)))
}

/// Reads a JSONL stream of [`TrialRecord`]s.
pub fn read_trials(path: &Path) -> Result<Vec<TrialRecord>> {
    let file = fs::File::open(path)?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

/// CSV summary of a trial stream: one row per statistic with count, mean and
/// standard error. Rows are `T` followed by `S_1..=S_max_k`.
pub fn write_trial_summary<W: Write>(records: &[TrialRecord], max_k: u64, out: W) -> Result<()> {
    if records.is_empty() {
        return Err(Error::Domain("empty trial stream".into()));
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["statistic", "count", "mean", "std_error", "min", "max"])?;
    let mut columns: Vec<(String, Vec<f64>)> = vec![(
        "T".into(),
        records.iter().map(|r| r.total_draws as f64).collect(),
    )];
    for k in 1..=max_k {
        columns.push((format!("S_{k}"), records.iter().map(|r| r.kton(k) as f64).collect()));
    }
    for (name, values) in columns {
        let s = summarize(&values)?;
        w.write_record([
            name,
            s.count.to_string(),
            format!("{:e}", s.mean),
            format!("{:e}", s.std_error),
            format!("{}", s.min),
            format!("{}", s.max),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::Preset;

    #[test]
    fn minimal_config_gets_defaults() {
        let spec = parse_config(r#"{"preset": "er_gumbel_T"}"#).unwrap();
        assert_eq!(spec.ladder, vec![100, 1_000, 10_000, 100_000]);
        assert_eq!(spec.m, 1);
        assert_eq!(spec.trials, Some(10_000));
        assert_eq!(spec.seed, crate::sampler::DEFAULT_SEED);
    }

    #[test]
    fn config_errors() {
        match parse_config(r#"{"preset": "er_gumbel_T", "ladder": [10, 100]}"#) {
            Err(Error::Validation { field, message }) => {
                assert_eq!(field, "ladder");
                assert!(message.contains("16"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        let dup = parse_config(r#"{"preset": "er_gumbel_T", "m": 1, "m": 2}"#);
        assert!(matches!(dup, Err(Error::InvalidConfig(ref s)) if s.contains("duplicate")), "{dup:?}");
        assert!(parse_config(r#"{"preset": "er_gumbel_T", "bogus": 1}"#).is_err());
        assert!(parse_config(r#"{"preset": "nope"}"#).is_err());
    }

    #[test]
    fn digests_reproduce() {
        let mut spec = ExperimentSpec::new(Preset::Cor1Exponential);
        spec.ladder = vec![20, 40];
        spec.trials = Some(50);
        let dir = tempfile::tempdir().unwrap();
        let out = run_preset(&spec, 2).unwrap();
        let manifest = write_outputs(dir.path(), &out).unwrap();
        assert!(manifest.digests.contains_key("trials_n20.jsonl"));
        assert!(verify_digests(dir.path(), &manifest).unwrap().is_empty());

        let again = tempfile::tempdir().unwrap();
        let m2 = rerun(&read_manifest(dir.path()).unwrap(), again.path(), 1).unwrap();
        assert_eq!(manifest.digests, m2.digests);
        assert_eq!(read_report(again.path()).unwrap(), read_report(dir.path()).unwrap());
    }

    #[test]
    fn trial_summary_table() {
        let recs = crate::sampler::batch_until_complete(
            &crate::sampler::CollectorConfig::new(5, 1, 3, 20).unwrap(),
            1,
        )
        .unwrap();
        let mut buf = Vec::new();
        write_trial_summary(&recs, 2, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("statistic,count,mean"));
    }
}
