//! Storage-system simulator with online change-point detection over its
//! telemetry.

pub mod cpd;
pub mod eval;
pub mod scenario;
pub mod sim;
pub mod simulation;
pub mod storage;
pub mod telemetry;
pub mod workload;

pub use scenario::{ConfigError, Scenario};
pub use cpd::{CpdError, Detector, DetectorConfig, ScorePoint};
pub use sim::{Engine, EventId, ProcessId, SimError, SimTime};
pub use simulation::{simulate, SimOutput, SimulationConfig, SimulationError};
pub use storage::{AnomalyEvent, AnomalyKind, ComponentId, IoOp, ModelError, Topology, TopologyBuilder};
pub use telemetry::{GroundTruth, Label, MetricSeries, TelemetryError};
pub use workload::{BalancerPolicy, LoadScenario, WorkloadError};
