use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use stormcpd_core::cpd::{self, CpdError, DetectorConfig};
use stormcpd_core::eval::{evaluate, mean_plus_sigma, upward_crossings};
use stormcpd_core::telemetry::{export_csv, read_labels, read_series, write_series, MetricSeries};
use stormcpd_core::{simulate, Scenario};

const SEED_ENV: &str = "STORMCPD_SEED";

#[derive(Parser)]
#[command(name = "stormcpd", version, about = "Storage-system simulation and online change-point detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write metrics.csv, metrics.labels.csv and manifest.json.
    Simulate {
        /// Scenario TOML, or a manifest.json from an earlier run.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a metrics CSV and write `t,d_bar`.
    Detect {
        #[arg(long)]
        input: PathBuf,
        /// Observations per window.
        #[arg(long)]
        k: usize,
        /// Mini-batch size.
        #[arg(long)]
        n: usize,
        /// Lag between reference and test batches; a multiple of n.
        #[arg(long)]
        l: usize,
        #[arg(long)]
        lr: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Also write `<out stem>.alarms.csv` with upward crossings of this value.
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Compare crossings (or scores) with ground-truth labels.
    Evaluate {
        /// `t,alarm` crossings, or `t,d_bar` scores thresholded at mean + 5 sigma
        /// of the scores before the first label.
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        /// Maximum accepted delay, in the time units of the scores file.
        #[arg(long)]
        tolerance: u64,
    },
}

/// Exit 2 for bad input, 1 for failures while running.
enum Failure {
    Input(anyhow::Error),
    Runtime(anyhow::Error),
}

type Outcome = Result<(), Failure>;

fn input<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Input(e.into())
}

fn runtime<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Runtime(e.into())
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    tool: String,
    version: String,
    seed: u64,
    config_sha256: String,
    config: String,
    metrics: String,
    labels: String,
}

fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

fn seed_override() -> Result<Option<u64>, Failure> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| input(anyhow!("{SEED_ENV}=`{v}` is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}

/// Returns the scenario text, reading through a manifest if given one, and
/// the seed recorded in that manifest.
fn scenario_text(path: &Path) -> Result<(String, Option<u64>), Failure> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(input)?;
    if path.extension().is_some_and(|e| e == "json") {
        let m: Manifest = serde_json::from_str(&text)
            .with_context(|| format!("{} is not a run manifest", path.display()))
            .map_err(input)?;
        if sha256_hex(&m.config) != m.config_sha256 {
            return Err(input(anyhow!("{}: config hash does not match", path.display())));
        }
        return Ok((m.config, Some(m.seed)));
    }
    Ok((text, None))
}

fn cmd_simulate(config: &Path, out: &Path) -> Outcome {
    let (text, recorded_seed) = scenario_text(config)?;
    let mut scenario = Scenario::from_toml(&text)
        .map_err(|e| input(anyhow!("{}: {e}", config.display())))?;
    if let Some(seed) = seed_override()?.or(recorded_seed) {
        scenario = scenario.with_seed(seed);
    }
    let output = simulate(&scenario.config, scenario.seed).map_err(runtime)?;

    std::fs::create_dir_all(out)
        .with_context(|| format!("cannot create {}", out.display()))
        .map_err(runtime)?;
    let metrics = out.join("metrics.csv");
    let labels = export_csv(&output.series, &output.ground_truth, &metrics).map_err(runtime)?;
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed: scenario.seed,
        config_sha256: sha256_hex(&text),
        config: text,
        metrics: "metrics.csv".into(),
        labels: labels.file_name().unwrap().to_string_lossy().into_owned(),
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(runtime)?;
    std::fs::write(out.join("manifest.json"), json + "\n").map_err(runtime)?;

    println!(
        "seed {}: {} requests, {} failed, {} rows x {} channels -> {}",
        scenario.seed,
        output.requests,
        output.failed(),
        output.series.len(),
        output.series.channels.len(),
        out.display()
    );
    Ok(())
}

fn alarms_path_for(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scores".into());
    out.with_file_name(format!("{stem}.alarms.csv"))
}

fn cpd_failure(e: CpdError) -> Failure {
    match e {
        CpdError::InvalidConfig(_) | CpdError::SeriesTooShort { .. } | CpdError::Dimension { .. } | CpdError::NonFinite => {
            input(e)
        }
        _ => runtime(e),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_detect(input_path: &Path, k: usize, n: usize, l: usize, lr: f64, seed: u64, out: &Path, threshold: Option<f64>) -> Outcome {
    let config = DetectorConfig {
        window: k,
        batch: n,
        lag: l,
        learning_rate: lr,
        seed,
        ..DetectorConfig::default()
    };
    config.validate().map_err(cpd_failure)?;
    let series = read_series(input_path).map_err(input)?;
    let points = cpd::run(&series, &config).map_err(cpd_failure)?;

    let mut scores = MetricSeries::new(series.period * n as f64, vec!["d_bar".into()]);
    for p in &points {
        scores.push_row(p.time, vec![p.d_bar]);
    }
    write_series(&scores, out).map_err(runtime)?;
    let peak = points
        .iter()
        .max_by(|a, b| a.d_bar.total_cmp(&b.d_bar))
        .expect("run yields at least one score");
    println!("{} scores -> {}", points.len(), out.display());
    println!("peak d_bar {} at t={}", peak.d_bar, peak.time);

    if let Some(tau) = threshold {
        let pairs: Vec<(f64, f64)> = points.iter().map(|p| (p.time, p.d_bar)).collect();
        let crossings = upward_crossings(&pairs, tau);
        let mut alarms = MetricSeries::new(scores.period, vec!["alarm".into()]);
        for &t in &crossings {
            alarms.push_row(t, vec![1.0]);
        }
        let path = alarms_path_for(out);
        write_series(&alarms, &path).map_err(runtime)?;
        match crossings.first() {
            Some(t) => println!("first crossing of {tau} at t={t} ({} total) -> {}", crossings.len(), path.display()),
            None => println!("no crossing of {tau}"),
        }
    }
    Ok(())
}

fn cmd_evaluate(scores: &Path, labels: &Path, tolerance: u64) -> Outcome {
    let series = read_series(scores).map_err(input)?;
    let truth = read_labels(labels).map_err(input)?;
    let crossings = match series.channels.as_slice() {
        [c] if c == "alarm" => series
            .times
            .iter()
            .zip(&series.rows)
            .filter(|(_, r)| r[0] != 0.0)
            .map(|(t, _)| *t)
            .collect(),
        [c] if c == "d_bar" => {
            let pairs: Vec<(f64, f64)> = series.times.iter().copied().zip(series.column(0)).collect();
            let first = truth.labels.iter().map(|l| l.t_star).fold(f64::INFINITY, f64::min);
            let mut normal: Vec<f64> = pairs.iter().filter(|p| p.0 < first).map(|p| p.1).collect();
            if normal.len() < 2 {
                normal = pairs.iter().map(|p| p.1).collect();
            }
            let tau = mean_plus_sigma(&normal, 5.0);
            println!("threshold {tau} (mean + 5 sigma of {} scores before the first label)", normal.len());
            upward_crossings(&pairs, tau)
        }
        _ => {
            return Err(input(anyhow!(
                "{}: expected columns `t,alarm` or `t,d_bar`",
                scores.display()
            )))
        }
    };
    let report = evaluate(&crossings, &truth.labels, tolerance as f64);
    for d in &report.detections {
        let l = &d.label;
        match d.delay {
            Some(delay) => println!("t*={} {} {}: delay {}", l.t_star, l.component, l.kind, delay),
            None => println!("t*={} {} {}: missed", l.t_star, l.component, l.kind),
        }
    }
    println!("false alarms: {}", report.false_alarms);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate { config, out } => cmd_simulate(config, out),
        Command::Detect {
            input,
            k,
            n,
            l,
            lr,
            seed,
            out,
            threshold,
        } => cmd_detect(input, *k, *n, *l, *lr, *seed, out, *threshold),
        Command::Evaluate {
            scores,
            labels,
            tolerance,
        } => cmd_evaluate(scores, labels, *tolerance),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
