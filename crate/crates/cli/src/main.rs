use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use kton::experiments::{run_preset, ExperimentSpec, Preset};
use kton::harness::{self, RunManifest};
use kton::sampler::{self, CollectorConfig, DrawSchedule, Engine};
use kton::{exact, limits, Error};
use serde_json::json;

#[derive(Parser)]
#[command(name = "kton", version, about = "k-ton statistics of the m-fold coupon collector")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Raw sampler runs, one JSON record per trial on stdout.
    Simulate(SimulateArgs),
    /// Single closed-form or inclusion-exclusion queries.
    #[command(subcommand)]
    Exact(ExactCommand),
    /// Preset pipelines; prints the verdict report.
    Experiment(ExperimentArgs),
    /// Re-render tables from a stored run or trial stream.
    Report(ReportArgs),
}

#[derive(Args)]
struct WorkerArgs {
    /// Worker threads; 0 lets the pool decide.
    #[arg(long, env = "KTON_WORKERS", default_value_t = 0)]
    workers: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum EngineArg {
    Direct,
    Poissonized,
}

impl From<EngineArg> for Engine {
    fn from(e: EngineArg) -> Self {
        match e {
            EngineArg::Direct => Engine::Direct,
            EngineArg::Poissonized => Engine::Poissonized,
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    n: u64,
    #[arg(long, default_value_t = 1)]
    m: u32,
    #[arg(long, default_value_t = 1)]
    trials: u64,
    #[arg(long, default_value_t = sampler::DEFAULT_SEED)]
    seed: u64,
    /// Stop after exactly this many draws instead of at completion.
    #[arg(long = "N")]
    draws: Option<u64>,
    #[arg(long, value_enum, default_value = "direct")]
    engine: EngineArg,
    /// Write the stream to this file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    workers: WorkerArgs,
}

#[derive(Subcommand)]
enum ExactCommand {
    /// E(S_{k,N}).
    ExpectedKtons {
        #[arg(long)]
        n: u64,
        #[arg(long = "N")]
        draws: u64,
        #[arg(long)]
        k: u64,
    },
    /// E(S_{k,N}^2).
    SecondMoment {
        #[arg(long)]
        n: u64,
        #[arg(long = "N")]
        draws: u64,
        #[arg(long)]
        k: u64,
    },
    /// Bracket on P(S_{m-1,N} = r1, S_{k,N} = r2).
    Joint {
        #[arg(long)]
        n: u64,
        #[arg(long = "N")]
        draws: u64,
        #[arg(long, default_value_t = 1)]
        m: u64,
        #[arg(long)]
        k: u64,
        #[arg(long)]
        r1: u64,
        #[arg(long)]
        r2: u64,
        /// Truncation order; automatic when absent.
        #[arg(long)]
        depth: Option<u64>,
    },
    /// Bracket on P(S_{k,N} = r).
    Marginal {
        #[arg(long)]
        n: u64,
        #[arg(long = "N")]
        draws: u64,
        #[arg(long)]
        k: u64,
        #[arg(long)]
        r: u64,
        #[arg(long)]
        depth: Option<u64>,
    },
    /// Maximal k-ton threshold at offset d.
    Threshold {
        #[arg(long)]
        n: u64,
        #[arg(long, default_value_t = 1)]
        m: u32,
        #[arg(long, allow_hyphen_values = true)]
        d: f64,
        /// Move n up until the realized offset matches d within this tolerance.
        #[arg(long)]
        snap: Option<f64>,
    },
    /// Mixed Poisson probability of r at offset d.
    MixedPmf {
        #[arg(long)]
        r: u64,
        #[arg(long, allow_hyphen_values = true)]
        d: f64,
        #[arg(long, default_value_t = 1)]
        m: u32,
    },
    /// Exhaustive exact law of (S_0, ..., S_N) after N draws, as CSV.
    Enumerate {
        #[arg(long)]
        n: u64,
        #[arg(long = "N")]
        draws: u64,
    },
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long, value_parser = parse_preset, required_unless_present = "config")]
    preset: Option<Preset>,
    /// JSON spec file; command-line flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated n values.
    #[arg(long, value_delimiter = ',')]
    ladder: Option<Vec<u64>>,
    #[arg(long)]
    m: Option<u32>,
    #[arg(long)]
    k: Option<u64>,
    #[arg(long, allow_hyphen_values = true)]
    d: Option<f64>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    engine: Option<EngineArg>,
    /// Directory for artifacts and the manifest.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    workers: WorkerArgs,
}

#[derive(Args)]
struct ReportArgs {
    /// Run directory holding report.json.
    #[arg(long, conflicts_with = "trials")]
    dir: Option<PathBuf>,
    /// Long (rung, metric, value) table instead of one row per rung.
    #[arg(long)]
    long: bool,
    /// JSONL trial stream to summarize.
    #[arg(long, required_unless_present = "dir")]
    trials: Option<PathBuf>,
    /// Largest k summarized from a trial stream.
    #[arg(long, default_value_t = 3)]
    k: u64,
    /// Regenerate the run from its manifest into this directory and compare digests.
    #[arg(long, requires = "dir")]
    verify: Option<PathBuf>,
}

fn parse_preset(s: &str) -> Result<Preset, String> {
    Preset::from_name(s).ok_or_else(|| {
        let names: Vec<&str> = Preset::ALL.iter().map(|p| p.name()).collect();
        format!("unknown preset {s:?}; expected one of {}", names.join(", "))
    })
}

/// Scalars are printed at 15 significant digits, which hides the last-ulp
/// noise of the log-space evaluation.
fn print_scalar(v: f64) {
    let rounded: f64 = format!("{v:.14e}").parse().unwrap_or(v);
    println!("{rounded}");
}

/// Verdict failure as opposed to an error.
struct Failed;

fn print_json(v: &impl serde::Serialize) -> kton::Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer(&mut out, v)?;
    writeln!(out)?;
    Ok(())
}

fn simulate(a: SimulateArgs) -> kton::Result<()> {
    let config = CollectorConfig::new(a.n, a.m, a.seed, a.trials)?.with_engine(a.engine.into());
    let lines: Vec<String> = match a.draws {
        None => sampler::batch_until_complete(&config, a.workers.workers)?
            .iter()
            .map(serde_json::to_string)
            .collect::<Result<_, _>>()?,
        Some(draws) => sampler::batch_fixed_draws(&config, &DrawSchedule::custom(draws), a.workers.workers)?
            .iter()
            .enumerate()
            .map(|(i, h)| serde_json::to_string(&json!({"trial": i, "N": draws, "hist": h})))
            .collect::<Result<_, _>>()?,
    };
    let mut text = lines.join("\n");
    text.push('\n');
    match a.out {
        Some(path) => std::fs::write(path, text)?,
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn exact_query(c: ExactCommand) -> kton::Result<()> {
    match c {
        ExactCommand::ExpectedKtons { n, draws, k } => print_scalar(exact::expected_ktons(n, draws, k)?),
        ExactCommand::SecondMoment { n, draws, k } => print_scalar(exact::second_moment_ktons(n, draws, k)?),
        ExactCommand::Joint {
            n,
            draws,
            m,
            k,
            r1,
            r2,
            depth,
        } => {
            let spec = exact::JointSpec::new(n, draws, m, k, r1, r2)?;
            let b = match depth {
                Some(d) => exact::joint_prob_bracket(&spec, d)?,
                None => exact::joint_prob(&spec)?,
            };
            print_json(&b)?;
        }
        ExactCommand::Marginal { n, draws, k, r, depth } => {
            print_json(&exact::marginal_prob_bracket(n, draws, k, r, depth)?)?
        }
        ExactCommand::Threshold { n, m, d, snap } => {
            let t = match snap {
                Some(tol) => limits::snap_threshold(n, m, d, tol)?,
                None => limits::kton_threshold(n, m, d)?,
            };
            print_json(&t)?;
        }
        ExactCommand::MixedPmf { r, d, m } => print_scalar(limits::mixed_poisson_pmf(r, d, m)),
        ExactCommand::Enumerate { n, draws } => {
            let stats: Vec<_> = (0..=draws).map(exact::OracleStat::CountAt).collect();
            exact::enumerate_exact(n, draws, 1, &stats)?.write_csv(io::stdout().lock())?;
        }
    }
    Ok(())
}

fn experiment(a: ExperimentArgs) -> kton::Result<Result<(), Failed>> {
    let mut spec = match &a.config {
        Some(path) => harness::load_config(path)?,
        None => ExperimentSpec::new(a.preset.expect("clap enforces preset or config")),
    };
    if let (Some(p), Some(_)) = (a.preset, &a.config) {
        if p != spec.preset {
            return Err(Error::InvalidConfig(format!(
                "--preset {p} disagrees with the config preset {}",
                spec.preset
            )));
        }
    }
    if let Some(l) = a.ladder {
        spec.ladder = l;
    }
    if let Some(m) = a.m {
        spec.m = m;
    }
    if a.k.is_some() {
        spec.k = a.k;
    }
    if a.d.is_some() {
        spec.d = a.d;
    }
    if a.trials.is_some() {
        spec.trials = a.trials;
    }
    if let Some(s) = a.seed {
        spec.seed = s;
    }
    if let Some(e) = a.engine {
        spec.engine = e.into();
    }
    if a.out.is_some() {
        spec.output = a.out;
    }
    let spec = spec.resolve()?;
    let output = run_preset(&spec, a.workers.workers)?;
    if let Some(dir) = &spec.output {
        harness::write_outputs(dir, &output)?;
    }
    print_json(&output.report)?;
    Ok(if output.report.passed { Ok(()) } else { Err(Failed) })
}

fn report(a: ReportArgs) -> kton::Result<Result<(), Failed>> {
    if let Some(path) = a.trials {
        let records = harness::read_trials(&path)?;
        harness::write_trial_summary(&records, a.k, io::stdout().lock())?;
        return Ok(Ok(()));
    }
    let dir = a.dir.expect("clap enforces dir or trials");
    if let Some(target) = a.verify {
        let manifest: RunManifest = harness::read_manifest(&dir)?;
        let again = harness::rerun(&manifest, &target, 0)?;
        let mismatched: Vec<&String> = manifest
            .digests
            .iter()
            .filter(|(k, v)| again.digests.get(*k) != Some(v))
            .map(|(k, _)| k)
            .collect();
        print_json(&json!({"reproduced": mismatched.is_empty(), "mismatched": mismatched}))?;
        return Ok(if mismatched.is_empty() { Ok(()) } else { Err(Failed) });
    }
    let r = harness::read_report(&dir)?;
    if a.long {
        r.write_long_csv(io::stdout().lock())?;
    } else {
        r.write_rung_csv(io::stdout().lock())?;
    }
    Ok(Ok(()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a).map(Ok),
        Command::Exact(c) => exact_query(c).map(Ok),
        Command::Experiment(a) => experiment(a),
        Command::Report(a) => report(a),
    };
    match result {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(Failed)) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
