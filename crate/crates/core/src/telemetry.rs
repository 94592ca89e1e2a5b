//! Periodic metric sampling and CSV export.
//!
//! Each row at time `t` summarises the interval `(t - period, t]`:
//!
//! * `cpu_load.<controller>`: busy core-seconds / (cores * period), in [0, 1]
//! * `balancer_request_time.<balancer>`: mean latency of requests completed
//!   in the interval, 0 when none completed
//! * `storage_traffic.<device>`: megabytes moved / period
//! * `used_space_delta.<device>`: change of used space, gigabytes
//!
//! The first row sits at the series start and is all zeros.

use std::fs::File;
use std::io;
use std::path::{Path as FsPath, PathBuf};

use thiserror::Error;

use crate::storage::{ComponentId, Topology};

#[derive(Debug, Error)]
pub enum TelemetryError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("malformed CSV {path}: {reason}")]
    Malformed { path: String, reason: String },
}

pub const GB_BYTES: f64 = 1024.0 * 1024.0 * 1024.0;

#[derive(Debug, Clone, PartialEq)]
pub struct MetricSeries {
    pub period: f64,
    pub channels: Vec<String>,
    pub times: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
}

impl MetricSeries {
    pub fn new(period: f64, channels: Vec<String>) -> Self {
        MetricSeries {
            period,
            channels,
            times: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn start(&self) -> f64 {
        self.times.first().copied().unwrap_or(0.0)
    }

    pub fn push_row(&mut self, t: f64, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.channels.len());
        self.times.push(t);
        self.rows.push(row);
    }

    pub fn channel_index(&self, name: &str) -> Option<usize> {
        self.channels.iter().position(|c| c == name)
    }

    pub fn column(&self, idx: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[idx]).collect()
    }

    /// Keeps only channels whose name starts with one of `prefixes`.
    pub fn select(&self, prefixes: &[&str]) -> MetricSeries {
        let keep: Vec<usize> = (0..self.channels.len())
            .filter(|&i| prefixes.iter().any(|p| self.channels[i].starts_with(p)))
            .collect();
        MetricSeries {
            period: self.period,
            channels: keep.iter().map(|&i| self.channels[i].clone()).collect(),
            times: self.times.clone(),
            rows: self
                .rows
                .iter()
                .map(|r| keep.iter().map(|&i| r[i]).collect())
                .collect(),
        }
    }
}

/// Expected row count for a run of `duration` seconds sampled every `period`.
pub fn expected_rows(duration: f64, period: f64) -> usize {
    (duration / period + 1e-9).floor() as usize + 1
}

#[derive(Debug, Clone, PartialEq)]
pub struct Label {
    pub t_star: f64,
    pub component: String,
    pub kind: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruth {
    pub labels: Vec<Label>,
}

/// Raw accumulators for the interval since the previous tick.
#[derive(Debug, Clone, Default)]
pub struct TickStats {
    /// Indexed by component id; only controller entries are used.
    pub busy_core_seconds: Vec<f64>,
    pub latency_sum: Vec<f64>,
    pub latency_count: Vec<u64>,
    pub moved_mb: Vec<f64>,
    /// Current used space per device, bytes.
    pub used_bytes: Vec<u64>,
}

impl TickStats {
    pub fn new(components: usize) -> Self {
        TickStats {
            busy_core_seconds: vec![0.0; components],
            latency_sum: vec![0.0; components],
            latency_count: vec![0; components],
            moved_mb: vec![0.0; components],
            used_bytes: vec![0; components],
        }
    }

    fn reset_interval(&mut self) {
        self.busy_core_seconds.iter_mut().for_each(|v| *v = 0.0);
        self.latency_sum.iter_mut().for_each(|v| *v = 0.0);
        self.latency_count.iter_mut().for_each(|v| *v = 0);
        self.moved_mb.iter_mut().for_each(|v| *v = 0.0);
    }
}

/// Turns [`TickStats`] into rows of a [`MetricSeries`].
#[derive(Debug, Clone)]
pub struct Sampler {
    controllers: Vec<(ComponentId, u32)>,
    balancers: Vec<ComponentId>,
    devices: Vec<ComponentId>,
    prev_used: Vec<u64>,
    series: MetricSeries,
}

impl Sampler {
    /// Creates the sampler and emits the all-zero row at `start`.
    pub fn new(topo: &Topology, period: f64, start: f64, stats: &TickStats) -> Self {
        assert!(period > 0.0, "sampling period must be positive");
        let controllers: Vec<(ComponentId, u32)> = topo
            .controllers()
            .into_iter()
            .map(|c| (c, topo.cpu(c).map_or(1, |s| s.cores)))
            .collect();
        let balancers = topo.balancers();
        let devices = topo.devices();
        let mut channels = Vec::new();
        channels.extend(controllers.iter().map(|(c, _)| format!("cpu_load.{}", topo.name(*c))));
        channels.extend(balancers.iter().map(|b| format!("balancer_request_time.{}", topo.name(*b))));
        channels.extend(devices.iter().map(|d| format!("storage_traffic.{}", topo.name(*d))));
        channels.extend(devices.iter().map(|d| format!("used_space_delta.{}", topo.name(*d))));
        let mut series = MetricSeries::new(period, channels);
        let width = series.channels.len();
        series.push_row(start, vec![0.0; width]);
        Sampler {
            controllers,
            balancers,
            devices,
            prev_used: stats.used_bytes.clone(),
            series,
        }
    }

    /// Appends the row for time `t` and clears the interval accumulators.
    pub fn sample(&mut self, t: f64, stats: &mut TickStats) {
        let period = self.series.period;
        let mut row = Vec::with_capacity(self.series.channels.len());
        for &(c, cores) in &self.controllers {
            let load = stats.busy_core_seconds[c.0] / (cores as f64 * period);
            row.push(load.clamp(0.0, 1.0));
        }
        for &b in &self.balancers {
            let n = stats.latency_count[b.0];
            row.push(if n == 0 { 0.0 } else { stats.latency_sum[b.0] / n as f64 });
        }
        for &d in &self.devices {
            row.push(stats.moved_mb[d.0].max(0.0) / period);
        }
        for &d in &self.devices {
            let now = stats.used_bytes[d.0] as i128;
            let before = self.prev_used[d.0] as i128;
            row.push((now - before) as f64 / GB_BYTES);
        }
        self.prev_used.clone_from(&stats.used_bytes);
        stats.reset_interval();
        self.series.push_row(t, row);
    }

    pub fn series(&self) -> &MetricSeries {
        &self.series
    }

    pub fn finish(self) -> MetricSeries {
        self.series
    }
}

/// Formats with 9 significant digits, then prints the shortest decimal that
/// parses back to the rounded value. Stable under parse/format cycles.
pub fn format_value(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let rounded: f64 = format!("{v:.8e}").parse().expect("valid float text");
    let mag = rounded.abs();
    if (1e-5..1e15).contains(&mag) {
        format!("{rounded}")
    } else {
        format!("{rounded:e}")
    }
}

/// Companion labels path: `metrics.csv` -> `metrics.labels.csv`.
pub fn labels_path_for(path: &FsPath) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "metrics".into());
    path.with_file_name(format!("{stem}.labels.csv"))
}

pub fn write_series(series: &MetricSeries, path: &FsPath) -> Result<(), TelemetryError> {
    let mut w = csv::Writer::from_writer(File::create(path)?);
    let mut header = vec!["t".to_string()];
    header.extend(series.channels.iter().cloned());
    w.write_record(&header)?;
    for (t, row) in series.times.iter().zip(&series.rows) {
        let mut rec = vec![format_value(*t)];
        rec.extend(row.iter().map(|v| format_value(*v)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_labels(truth: &GroundTruth, path: &FsPath) -> Result<(), TelemetryError> {
    let mut w = csv::Writer::from_writer(File::create(path)?);
    w.write_record(["t_star", "component", "kind"])?;
    for l in &truth.labels {
        w.write_record([format_value(l.t_star), l.component.clone(), l.kind.clone()])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the metrics CSV at `path` and the labels next to it; returns the
/// labels path.
pub fn export_csv(series: &MetricSeries, truth: &GroundTruth, path: &FsPath) -> Result<PathBuf, TelemetryError> {
    write_series(series, path)?;
    let labels = labels_path_for(path);
    write_labels(truth, &labels)?;
    Ok(labels)
}

fn malformed(path: &FsPath, reason: impl Into<String>) -> TelemetryError {
    TelemetryError::Malformed {
        path: path.display().to_string(),
        reason: reason.into(),
    }
}

fn parse_num(path: &FsPath, line: usize, s: &str) -> Result<f64, TelemetryError> {
    s.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| malformed(path, format!("line {line}: `{s}` is not a finite number")))
}

/// Reads a `t,<channel...>` CSV. The period is inferred from the first two
/// timestamps (1.0 for a single row).
pub fn read_series(path: &FsPath) -> Result<MetricSeries, TelemetryError> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header.first().map(String::as_str) != Some("t") {
        return Err(malformed(path, "first column must be `t`"));
    }
    let mut series = MetricSeries::new(1.0, header[1..].to_vec());
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        if rec.len() != header.len() {
            return Err(malformed(path, format!("line {line}: expected {} fields", header.len())));
        }
        let t = parse_num(path, line, &rec[0])?;
        if let Some(&prev) = series.times.last() {
            if t <= prev {
                return Err(malformed(path, format!("line {line}: timestamps must increase")));
            }
        }
        let row = rec.iter().skip(1).map(|s| parse_num(path, line, s)).collect::<Result<_, _>>()?;
        series.push_row(t, row);
    }
    if series.times.len() >= 2 {
        series.period = series.times[1] - series.times[0];
    }
    Ok(series)
}

pub fn read_labels(path: &FsPath) -> Result<GroundTruth, TelemetryError> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != ["t_star", "component", "kind"] {
        return Err(malformed(path, "header must be `t_star,component,kind`"));
    }
    let mut truth = GroundTruth::default();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != 3 {
            return Err(malformed(path, format!("line {}: expected 3 fields", i + 2)));
        }
        truth.labels.push(Label {
            t_star: parse_num(path, i + 2, &rec[0])?,
            component: rec[1].to_string(),
            kind: rec[2].to_string(),
        });
    }
    Ok(truth)
}
