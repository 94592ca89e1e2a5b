//! Load generation and IO balancer routing.

mod balancer;
mod generate;

use thiserror::Error;

pub use balancer::{BalancerPolicy, RouteView, Router};
pub use generate::{
    generate, Arrival, LoadScenario, RequestSpec, RequestStream, SizeDistribution, StoredFile,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorkloadError {
    #[error("invalid load scenario: {0}")]
    InvalidScenario(String),
    #[error("no online path available")]
    NoPathAvailable,
    #[error("no reachable device has {needed_gb} GB free")]
    CapacityExceeded { needed_gb: f64 },
}
