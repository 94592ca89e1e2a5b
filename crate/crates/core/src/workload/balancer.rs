//! IO balancer routing.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{RequestSpec, WorkloadError};
use crate::storage::{ComponentId, IoOp, Path, Topology};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BalancerPolicy {
    #[default]
    RoundRobin,
    LeastQueue,
    FreeSpaceWeighted,
}

/// Live view of component state consulted when routing.
pub trait RouteView {
    fn is_online(&self, id: ComponentId) -> bool;
    /// Requests currently routed through `id`.
    fn outstanding(&self, id: ComponentId) -> usize;
    /// Unreserved free space of a storage device, gigabytes.
    fn free_gb(&self, device: ComponentId) -> f64;
}

/// Per-balancer routing state (round-robin cursors).
#[derive(Debug, Clone, Default)]
pub struct Router {
    controller_cursor: HashMap<ComponentId, usize>,
    device_cursor: HashMap<ComponentId, usize>,
}

fn distinct(mut ids: Vec<ComponentId>) -> Vec<ComponentId> {
    ids.sort();
    ids.dedup();
    ids
}

fn least_loaded(ids: &[ComponentId], view: &impl RouteView) -> ComponentId {
    // min_by_key keeps the first minimum; ids are sorted so ties go to the lowest id.
    *ids.iter()
        .min_by_key(|&&id| view.outstanding(id))
        .expect("non-empty candidate set")
}

impl Router {
    pub fn new() -> Self {
        Self::default()
    }

    fn cycle(cursor: &mut HashMap<ComponentId, usize>, key: ComponentId, ids: &[ComponentId]) -> ComponentId {
        let c = cursor.entry(key).or_insert(0);
        let pick = ids[*c % ids.len()];
        *c += 1;
        pick
    }

    /// Picks an online balancer -> controller -> link -> device path.
    pub fn route<R: Rng + ?Sized>(
        &mut self,
        req: &RequestSpec,
        topo: &Topology,
        view: &impl RouteView,
        rng: &mut R,
    ) -> Result<Path, WorkloadError> {
        let balancer = topo
            .balancer_of(req.client)
            .ok_or(WorkloadError::NoPathAvailable)?;
        let policy = topo.policy(balancer).unwrap_or_default();
        let need_gb = req.file.size_gb();

        let online: Vec<Path> = topo
            .paths_from(balancer)
            .filter(|p| {
                [p.balancer, p.controller, p.link, p.device]
                    .iter()
                    .all(|&c| view.is_online(c))
            })
            .filter(|p| match req.op {
                IoOp::Read => req.source == Some(p.device),
                IoOp::Write => true,
            })
            .collect();
        if online.is_empty() {
            return Err(WorkloadError::NoPathAvailable);
        }
        let viable: Vec<Path> = match req.op {
            IoOp::Read => online,
            IoOp::Write => online
                .into_iter()
                .filter(|p| view.free_gb(p.device) >= need_gb)
                .collect(),
        };
        if viable.is_empty() {
            return Err(WorkloadError::CapacityExceeded { needed_gb: need_gb });
        }

        let controllers = distinct(viable.iter().map(|p| p.controller).collect());
        let controller = match policy {
            BalancerPolicy::LeastQueue => least_loaded(&controllers, view),
            BalancerPolicy::RoundRobin | BalancerPolicy::FreeSpaceWeighted => {
                Self::cycle(&mut self.controller_cursor, balancer, &controllers)
            }
        };
        let via: Vec<&Path> = viable.iter().filter(|p| p.controller == controller).collect();

        let devices = distinct(via.iter().map(|p| p.device).collect());
        let device = if devices.len() == 1 {
            devices[0]
        } else {
            match policy {
                BalancerPolicy::RoundRobin => Self::cycle(&mut self.device_cursor, balancer, &devices),
                BalancerPolicy::LeastQueue => least_loaded(&devices, view),
                BalancerPolicy::FreeSpaceWeighted => {
                    let weights: Vec<f64> = devices.iter().map(|&d| view.free_gb(d).max(0.0)).collect();
                    let total: f64 = weights.iter().sum();
                    if total > 0.0 {
                        let mut x = rng.random::<f64>() * total;
                        let mut pick = devices[devices.len() - 1];
                        for (&d, &w) in devices.iter().zip(&weights) {
                            if x < w {
                                pick = d;
                                break;
                            }
                            x -= w;
                        }
                        pick
                    } else {
                        devices[0]
                    }
                }
            }
        };

        let links = distinct(
            via.iter()
                .filter(|p| p.device == device)
                .map(|p| p.link)
                .collect(),
        );
        let link = least_loaded(&links, view);
        Ok(Path {
            balancer,
            controller,
            link,
            device,
        })
    }
}
