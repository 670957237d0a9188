//! Command-line runner for the tempo scenarios.
//!
//! `run` executes one scenario and writes its trace CSV files; `compare`
//! executes several named configurations and merges the metric columns into
//! one CSV for side-by-side plotting. All randomness flows from one seed
//! (`--seed`, then the `TEMPO_SEED` environment variable, then 0), so a rerun
//! with the same inputs reproduces its outputs byte for byte. Wall-clock
//! timings go to stderr only, never into the files.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use tempo::online::RunTrace;
use tempo::scenarios::{
    benchmark, distributed_regression, BenchmarkConfig, RegressionConfig, SCENARIO_IDS,
};

#[derive(Parser)]
#[command(name = "tempo", version, about = "Run and compare online-optimization scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write a CSV trace per run into --out.
    Run(RunArgs),
    /// Print the scenario identifiers `run` accepts.
    ListScenarios,
    /// Run several named configurations and merge their metrics into one CSV.
    Compare(CompareArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario identifier; see `list-scenarios`.
    #[arg(long)]
    scenario: String,
    /// JSON file overriding the scenario's default configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory the trace files are written into (created if missing).
    #[arg(long)]
    out: PathBuf,
    /// RNG seed; wins over TEMPO_SEED, which wins over the default 0.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct CompareArgs {
    /// JSON documents, each {"name": ..., "scenario": ..., "seed"?: ..., "config"?: {...}}.
    #[arg(long, num_args = 1.., required = true)]
    configs: Vec<PathBuf>,
    /// Directory the combined compare.csv is written into (created if missing).
    #[arg(long)]
    out: PathBuf,
    /// Fallback seed for documents that carry none.
    #[arg(long)]
    seed: Option<u64>,
}

/// One entry of a `compare` run: a display name, the scenario it runs, and
/// the scenario-specific configuration block.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CompareDoc {
    name: String,
    scenario: String,
    seed: Option<u64>,
    #[serde(default)]
    config: serde_json::Value,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run(args) => run(args),
        Command::ListScenarios => {
            for id in SCENARIO_IDS {
                println!("{id}");
            }
            Ok(())
        }
        Command::Compare(args) => compare(args),
    }
}

fn resolve_seed(flag: Option<u64>) -> Result<u64> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    match std::env::var("TEMPO_SEED") {
        Ok(raw) => raw
            .trim()
            .parse()
            .with_context(|| format!("TEMPO_SEED must be an unsigned integer, got {raw:?}")),
        Err(_) => Ok(0),
    }
}

/// Runs `scenario` and returns the named traces it produces.
fn run_scenario(
    scenario: &str,
    config: serde_json::Value,
    config_origin: &str,
    seed: u64,
) -> Result<Vec<(String, RunTrace)>> {
    let started = Instant::now();
    let traces = match scenario {
        "benchmark" => {
            let cfg: BenchmarkConfig = serde_json::from_value(config)
                .with_context(|| format!("malformed benchmark config {config_origin}"))?;
            let out = benchmark(&cfg)?;
            vec![
                ("correction-only".to_string(), out.correction_only),
                ("prediction-correction".to_string(), out.prediction_correction),
            ]
        }
        "distributed-regression" => {
            let cfg: RegressionConfig = serde_json::from_value(config)
                .with_context(|| format!("malformed regression config {config_origin}"))?;
            let runs = distributed_regression(&cfg, seed)?;
            runs.into_iter().map(|r| (r.label, r.trace)).collect()
        }
        other => bail!("unknown scenario {other:?}; valid ones are {}", SCENARIO_IDS.join(", ")),
    };
    eprintln!("{scenario}: {:.3}s", started.elapsed().as_secs_f64());
    Ok(traces)
}

fn run(args: RunArgs) -> Result<()> {
    let seed = resolve_seed(args.seed)?;
    let config: serde_json::Value = match &args.config {
        None => serde_json::Value::Object(Default::default()),
        Some(p) => {
            let file = File::open(p).with_context(|| format!("cannot open {}", p.display()))?;
            serde_json::from_reader(file).with_context(|| format!("malformed config {}", p.display()))?
        }
    };
    let origin = args.config.as_ref().map_or_else(|| "(defaults)".into(), |p| p.display().to_string());
    let traces = run_scenario(&args.scenario, config, &origin, seed)?;
    fs::create_dir_all(&args.out)
        .with_context(|| format!("cannot create output directory {}", args.out.display()))?;
    for (name, trace) in traces {
        let path = args.out.join(format!("{name}.csv"));
        trace.write_csv(&path).with_context(|| format!("cannot write {}", path.display()))?;
        println!("{}", path.display());
    }
    Ok(())
}

fn fmt_metric(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else {
        format!("{v:.16e}")
    }
}

fn compare(args: CompareArgs) -> Result<()> {
    let fallback = resolve_seed(args.seed)?;
    let mut out = String::from("name,trace,step,time,tracking_error,fixed_point_residual,regret\n");
    let mut seen = Vec::new();
    for path in &args.configs {
        let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
        let doc: CompareDoc = serde_json::from_reader(file)
            .with_context(|| format!("malformed compare document {}", path.display()))?;
        if seen.contains(&doc.name) {
            bail!("duplicate compare name {:?}", doc.name);
        }
        let config = if doc.config.is_null() {
            serde_json::Value::Object(Default::default())
        } else {
            doc.config
        };
        let traces = run_scenario(
            &doc.scenario,
            config,
            &path.display().to_string(),
            doc.seed.unwrap_or(fallback),
        )?;
        for (trace_name, trace) in traces {
            for row in trace.rows() {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    doc.name,
                    trace_name,
                    row.step,
                    fmt_metric(row.time),
                    fmt_metric(row.tracking_error),
                    fmt_metric(row.fixed_point_residual),
                    fmt_metric(row.regret),
                ));
            }
        }
        seen.push(doc.name);
    }
    fs::create_dir_all(&args.out)
        .with_context(|| format!("cannot create output directory {}", args.out.display()))?;
    let path = args.out.join("compare.csv");
    let mut file = BufWriter::new(
        File::create(&path).with_context(|| format!("cannot write {}", path.display()))?,
    );
    file.write_all(out.as_bytes())?;
    file.flush()?;
    println!("{}", path.display());
    Ok(())
}
