//! TOML scenario documents.
//!
//! ```toml
//! seed = 7
//!
//! [telemetry]
//! period = 1.0
//!
//! [workload]
//! duration = 600.0
//! block_size = 16.0
//! read_fraction = 0.2
//! arrival = { kind = "poisson", rate = 4.0 }
//! file_size = { kind = "uniform", lo = 10.0, hi = 60.0 }
//!
//! [[workload.preload]]
//! name = "base"
//! device = "disk1"
//! size = 512.0
//!
//! [[topology.nodes]]
//! id = "ctrl1"
//! kind = "controller"
//! cores = 2
//! core_speed = 5e8
//!
//! [topology]
//! edges = [["client", "balancer"], ["balancer", "ctrl1"]]
//!
//! [[anomalies]]
//! component = "ctrl1"
//! kind = "breakup"
//! start = 300.0
//! ```
//!
//! Units: sizes of files and blocks in MB, device sizes in GB, bandwidth and
//! disk speeds in MB/s, core speed in flops/s, times in seconds.

use std::ops::Range;
use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use toml::Spanned;

use crate::sim::SimTime;
use crate::simulation::{resolve_anomalies, FlopsPerRequest, SimulationConfig};
use crate::storage::{
    AnomalyEvent, AnomalyKind, ComponentKind, CpuSpec, FileSpec, LinkSpec, ModelError, StorageSpec,
    TopologyBuilder,
};
use crate::workload::{Arrival, BalancerPolicy, LoadScenario, SizeDistribution, StoredFile};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{0}")]
    Syntax(String),
    #[error("line {line}: {message}")]
    Invalid { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDoc {
    #[serde(default)]
    pub seed: u64,
    pub telemetry: TelemetryDoc,
    pub workload: Spanned<WorkloadDoc>,
    pub topology: TopologyDoc,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub anomalies: Vec<Spanned<AnomalyDoc>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TelemetryDoc {
    pub period: Spanned<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadDoc {
    pub duration: f64,
    pub block_size: f64,
    #[serde(default)]
    pub read_fraction: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flops_read: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flops_write: Option<f64>,
    pub arrival: Arrival,
    pub file_size: SizeDistribution,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub preload: Vec<Spanned<PreloadDoc>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreloadDoc {
    pub name: String,
    pub device: String,
    pub size: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block_size: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyDoc {
    pub nodes: Vec<Spanned<NodeDoc>>,
    pub edges: Vec<Spanned<(String, String)>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum NodeDoc {
    Client {
        id: String,
    },
    Balancer {
        id: String,
        #[serde(default)]
        policy: BalancerPolicy,
    },
    Controller {
        id: String,
        cores: i64,
        core_speed: f64,
    },
    Link {
        id: String,
        bandwidth: f64,
        #[serde(default)]
        latency: f64,
    },
    Storage {
        id: String,
        size: f64,
        write_speed: f64,
        read_speed: f64,
        #[serde(default)]
        used: f64,
    },
}

impl NodeDoc {
    pub fn id(&self) -> &str {
        match self {
            NodeDoc::Client { id }
            | NodeDoc::Balancer { id, .. }
            | NodeDoc::Controller { id, .. }
            | NodeDoc::Link { id, .. }
            | NodeDoc::Storage { id, .. } => id,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnomalyKindName {
    Degradation,
    Breakup,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnomalyDoc {
    pub component: String,
    pub kind: AnomalyKindName,
    pub start: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub severity: Option<f64>,
}

/// A validated scenario ready to simulate.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub doc: ScenarioDoc,
    pub config: SimulationConfig,
    pub seed: u64,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of `field = ...` in the table starting at `span`, falling back to
/// the span's first line. Array-of-table spans cover only the header, so the
/// scan runs to the next header.
fn field_line(text: &str, span: Range<usize>, field: &str) -> usize {
    let start = text[..span.start.min(text.len())].rfind('\n').map_or(0, |i| i + 1);
    let mut offset = start;
    for (i, line) in text[start..].split_inclusive('\n').enumerate() {
        let trimmed = line.trim_start();
        if i > 0 && offset >= span.end && trimmed.starts_with('[') && !trimmed.starts_with("[\"") {
            break;
        }
        if let Some(rest) = trimmed.strip_prefix(field) {
            if rest.trim_start().starts_with('=') {
                return line_of(text, offset);
            }
        }
        // inline tables: `arrival = { kind = "poisson", rate = -1 }`
        if line.contains(&format!(" {field} =")) || line.contains(&format!("{{{field} =")) {
            return line_of(text, offset);
        }
        offset += line.len();
    }
    line_of(text, span.start)
}

struct Ctx<'a> {
    text: &'a str,
}

impl Ctx<'_> {
    fn at(&self, span: Range<usize>, message: impl Into<String>) -> ConfigError {
        ConfigError::Invalid {
            line: line_of(self.text, span.start),
            message: message.into(),
        }
    }

    fn at_field(&self, span: Range<usize>, field: &str, message: impl Into<String>) -> ConfigError {
        ConfigError::Invalid {
            line: field_line(self.text, span, field),
            message: message.into(),
        }
    }

    fn model(&self, span: Range<usize>, e: ModelError) -> ConfigError {
        match &e {
            ModelError::InvalidSpec { field, .. } => self.at_field(span, field, e.to_string()),
            _ => self.at(span, e.to_string()),
        }
    }
}

const WORKLOAD_FIELDS: [&str; 11] = [
    "duration",
    "block_size",
    "read_fraction",
    "rate",
    "times",
    "size",
    "lo",
    "hi",
    "mu",
    "sigma",
    "preload",
];

impl ScenarioDoc {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario documents serialize")
    }

    /// Validates every section against the model and assembles a
    /// simulation configuration. `text` is the source used for line numbers.
    pub fn resolve(&self, text: &str) -> Result<SimulationConfig, ConfigError> {
        let cx = Ctx { text };
        let period = &self.telemetry.period;
        if !(period.get_ref().is_finite() && *period.get_ref() > 0.0) {
            return Err(cx.at(
                period.span(),
                format!("`period` must be positive, got {}", period.get_ref()),
            ));
        }

        let mut b = TopologyBuilder::new();
        for node in &self.topology.nodes {
            let span = node.span();
            let kind = match node.get_ref() {
                NodeDoc::Client { .. } => ComponentKind::Client,
                NodeDoc::Balancer { policy, .. } => ComponentKind::Balancer(*policy),
                NodeDoc::Controller { cores, core_speed, .. } => {
                    let cores = u32::try_from(*cores)
                        .ok()
                        .filter(|&c| c >= 1)
                        .ok_or_else(|| cx.at_field(span.clone(), "cores", format!("`cores` must be a positive integer, got {cores}")))?;
                    ComponentKind::Controller(CpuSpec {
                        cores,
                        core_speed: *core_speed,
                    })
                }
                NodeDoc::Link { bandwidth, latency, .. } => ComponentKind::Link(LinkSpec {
                    bandwidth: *bandwidth,
                    latency: *latency,
                }),
                NodeDoc::Storage {
                    size,
                    write_speed,
                    read_speed,
                    used,
                    ..
                } => ComponentKind::Storage(StorageSpec {
                    size: *size,
                    write_speed: *write_speed,
                    read_speed: *read_speed,
                    used: *used,
                }),
            };
            b.add(node.get_ref().id(), kind)
                .map_err(|e| cx.model(span.clone(), e))?;
        }
        for edge in &self.topology.edges {
            let (from, to) = edge.get_ref();
            b.connect(from, to).map_err(|e| cx.model(edge.span(), e))?;
        }
        let anchor = self
            .topology
            .nodes
            .first()
            .map_or(0..0, |n| n.span());
        let topology = b.build().map_err(|e| cx.model(anchor, e))?;

        let w = self.workload.get_ref();
        let wspan = self.workload.span();
        let mut catalog = Vec::new();
        for p in &w.preload {
            let doc = p.get_ref();
            let device = topology.id(&doc.device).map_err(|e| cx.at_field(p.span(), "device", e.to_string()))?;
            if topology.storage(device).is_none() {
                return Err(cx.at_field(
                    p.span(),
                    "device",
                    format!("preload `{}` targets `{}`, which is not a storage device", doc.name, doc.device),
                ));
            }
            let block = doc.block_size.unwrap_or(w.block_size).min(doc.size);
            let file = FileSpec::new(doc.name.clone(), block, doc.size).map_err(|e| cx.model(p.span(), e))?;
            catalog.push(StoredFile { file, device });
        }
        for d in topology.devices() {
            let used = topology.storage(d).unwrap().used * crate::storage::MB_PER_GB;
            let preloaded: f64 = catalog.iter().filter(|f| f.device == d).map(|f| f.file.total_size).sum();
            if preloaded > used {
                let first = w.preload.iter().find(|p| p.get_ref().device == topology.name(d)).unwrap();
                return Err(cx.at(
                    first.span(),
                    format!(
                        "preloaded files on `{}` total {preloaded} MB but its `used` is only {used} MB",
                        topology.name(d)
                    ),
                ));
            }
        }

        let workload = LoadScenario {
            duration: w.duration,
            arrival: w.arrival.clone(),
            file_size: w.file_size.clone(),
            block_size: w.block_size,
            read_fraction: w.read_fraction,
            rng_seed: self.seed,
            catalog,
        };
        if let Err(e) = workload.validate() {
            let msg = e.to_string();
            let field = WORKLOAD_FIELDS.iter().find(|f| msg.contains(*f)).copied().unwrap_or("duration");
            return Err(cx.at_field(wspan, field, msg));
        }
        let defaults = FlopsPerRequest::default();
        let flops = FlopsPerRequest {
            read: w.flops_read.unwrap_or(defaults.read),
            write: w.flops_write.unwrap_or(defaults.write),
        };
        for (field, v) in [("flops_read", flops.read), ("flops_write", flops.write)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(cx.at_field(wspan.clone(), field, format!("`{field}` must be non-negative, got {v}")));
            }
        }

        let mut anomalies = Vec::new();
        for a in &self.anomalies {
            let span = a.span();
            let doc = a.get_ref();
            let time = |field: &str, v: f64| {
                SimTime::new(v).map_err(|_| cx.at_field(span.clone(), field, format!("`{field}` must be a non-negative time, got {v}")))
            };
            let start = time("start", doc.start)?;
            let end = doc.end.map(|e| time("end", e)).transpose()?;
            if doc.start > w.duration {
                return Err(cx.at_field(
                    span.clone(),
                    "start",
                    format!("`start` {} lies after the workload duration {}", doc.start, w.duration),
                ));
            }
            let kind = match (doc.kind, doc.severity) {
                (AnomalyKindName::Degradation, Some(severity)) => AnomalyKind::Degradation { severity },
                (AnomalyKindName::Degradation, None) => {
                    return Err(cx.at(span, "degradation needs a `severity` in (0, 1]"));
                }
                (AnomalyKindName::Breakup, None) => AnomalyKind::Breakup,
                (AnomalyKindName::Breakup, Some(_)) => {
                    return Err(cx.at_field(span, "severity", "breakup does not take a `severity`"));
                }
            };
            anomalies.push(AnomalyEvent {
                component: doc.component.clone(),
                kind,
                start,
                end,
            });
            if let Err(e) = resolve_anomalies(&topology, &anomalies) {
                let field = match e {
                    ModelError::InvalidSpec { .. } => "severity",
                    ModelError::InvalidAnomaly(_) => "end",
                    _ => "component",
                };
                return Err(cx.at_field(span, field, e.to_string()));
            }
        }

        Ok(SimulationConfig {
            topology,
            workload,
            anomalies,
            period: *period.get_ref(),
            flops,
            trace: false,
        })
    }
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let doc = ScenarioDoc::parse(text)?;
        let config = doc.resolve(text)?;
        Ok(Scenario {
            seed: doc.seed,
            doc,
            config,
        })
    }

    pub fn load(path: &FsPath) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    /// Overrides the seed used for both request generation and routing.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.doc.seed = seed;
        self.config.workload.rng_seed = seed;
        self
    }
}
