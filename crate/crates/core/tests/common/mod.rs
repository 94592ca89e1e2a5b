#![allow(dead_code)]

use stormcpd_core::simulation::{FlopsPerRequest, SimulationConfig};
use stormcpd_core::storage::{ComponentKind, CpuSpec, LinkSpec, StorageSpec};
use stormcpd_core::workload::{Arrival, SizeDistribution};
use stormcpd_core::{AnomalyEvent, AnomalyKind, BalancerPolicy, LoadScenario, SimTime, TopologyBuilder};

pub struct Line {
    pub cores: u32,
    pub core_speed: f64,
    pub bandwidth: f64,
    pub latency: f64,
    pub write_speed: f64,
    pub read_speed: f64,
    pub size_gb: f64,
}

impl Default for Line {
    fn default() -> Self {
        Line {
            cores: 1,
            core_speed: 1e9,
            bandwidth: 100.0,
            latency: 0.0,
            write_speed: 50.0,
            read_speed: 50.0,
            size_gb: 1000.0,
        }
    }
}

/// client -> bal -> ctrl{i} -> link{i} -> disk, one chain per controller.
pub fn chains(line: &Line, controllers: usize, policy: BalancerPolicy) -> TopologyBuilder {
    let mut b = TopologyBuilder::new();
    b.add("client", ComponentKind::Client).unwrap();
    b.add("bal", ComponentKind::Balancer(policy)).unwrap();
    b.connect("client", "bal").unwrap();
    b.add(
        "disk",
        ComponentKind::Storage(StorageSpec {
            size: line.size_gb,
            write_speed: line.write_speed,
            read_speed: line.read_speed,
            used: 0.0,
        }),
    )
    .unwrap();
    for i in 0..controllers {
        let (c, l) = (format!("ctrl{i}"), format!("link{i}"));
        b.add(
            &c,
            ComponentKind::Controller(CpuSpec {
                cores: line.cores,
                core_speed: line.core_speed,
            }),
        )
        .unwrap();
        b.add(
            &l,
            ComponentKind::Link(LinkSpec {
                bandwidth: line.bandwidth,
                latency: line.latency,
            }),
        )
        .unwrap();
        b.connect("bal", &c).unwrap();
        b.connect(&c, &l).unwrap();
        b.connect(&l, "disk").unwrap();
    }
    b
}

pub fn writes_at(times: &[f64], size: f64, block: f64, duration: f64) -> LoadScenario {
    LoadScenario {
        duration,
        arrival: Arrival::Schedule { times: times.to_vec() },
        file_size: SizeDistribution::Constant { size },
        block_size: block,
        read_fraction: 0.0,
        rng_seed: 0,
        catalog: vec![],
    }
}

pub fn config(topo: TopologyBuilder, workload: LoadScenario, flops: f64) -> SimulationConfig {
    SimulationConfig {
        topology: topo.build().unwrap(),
        workload,
        anomalies: vec![],
        period: 1.0,
        flops: FlopsPerRequest { read: flops, write: flops },
        trace: false,
    }
}

pub fn anomaly(component: &str, kind: AnomalyKind, start: f64, end: Option<f64>) -> AnomalyEvent {
    AnomalyEvent {
        component: component.into(),
        kind,
        start: SimTime::new(start).unwrap(),
        end: end.map(|e| SimTime::new(e).unwrap()),
    }
}
