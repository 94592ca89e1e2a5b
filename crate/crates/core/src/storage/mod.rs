//! Resource blocks, topology and anomalies.

mod anomaly;
pub(crate) mod resources;
mod spec;
mod topology;

use thiserror::Error;

pub use anomaly::{AnomalyEvent, AnomalyKind};
pub use spec::{
    cpu_cost, service_time_link, service_time_storage, Condition, CpuSpec, FileSpec, IoOp,
    LinkSpec, StorageSpec, BYTES_PER_MB, MB_PER_GB,
};
pub(crate) use spec::cpu_job_rate;
pub use topology::{Component, ComponentId, ComponentKind, Path, Topology, TopologyBuilder};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid `{field}`: {reason}")]
    InvalidSpec { field: &'static str, reason: String },
    #[error("invalid topology: {0}")]
    InvalidTopology(String),
    #[error("invalid anomaly: {0}")]
    InvalidAnomaly(String),
    #[error("unknown component `{0}`")]
    UnknownComponent(String),
    #[error("component `{0}` cannot carry anomalies")]
    NotInjectable(String),
    #[error("component `{0}` is offline")]
    ComponentOffline(String),
    #[error("write of {needed_gb} GB exceeds free space {free_gb} GB on `{device}`")]
    CapacityExceeded {
        device: String,
        needed_gb: f64,
        free_gb: f64,
    },
}
