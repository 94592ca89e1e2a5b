//! Storage system simulation: requests flow client -> balancer -> controller
//! (CPU stage) -> link (latency, then fair-shared transfer) -> storage device
//! (block-by-block FIFO service). Stages run sequentially per request.
//!
//! A breakup aborts every in-flight request whose path touches the broken
//! component; each such request is retried once on a surviving path and
//! fails otherwise.

use std::collections::{BTreeMap, VecDeque};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::sim::{Engine, EngineCounters, Event, EventId, Handler, ProcessId, SimError, SimTime, TraceEntry};
use crate::storage::resources::{BlockServer, SharedPool};
use crate::storage::{
    cpu_job_rate, AnomalyEvent, AnomalyKind, ComponentId, ComponentKind, Condition, IoOp, ModelError, Path,
    Topology, BYTES_PER_MB,
};
use crate::telemetry::{GroundTruth, Label, MetricSeries, Sampler, TickStats, GB_BYTES};
use crate::workload::{LoadScenario, RequestSpec, RequestStream, RouteView, Router, WorkloadError};

#[derive(Debug, Error)]
pub enum SimulationError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Workload(#[from] WorkloadError),
    #[error(transparent)]
    Engine(#[from] SimError),
    #[error("invalid simulation setup: {0}")]
    Invalid(String),
}

/// Controller work charged per request.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlopsPerRequest {
    pub read: f64,
    pub write: f64,
}

impl Default for FlopsPerRequest {
    fn default() -> Self {
        FlopsPerRequest { read: 1e8, write: 1e8 }
    }
}

impl FlopsPerRequest {
    pub fn for_op(&self, op: IoOp) -> f64 {
        match op {
            IoOp::Read => self.read,
            IoOp::Write => self.write,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub topology: Topology,
    pub workload: LoadScenario,
    pub anomalies: Vec<AnomalyEvent>,
    /// Telemetry sampling period, seconds.
    pub period: f64,
    pub flops: FlopsPerRequest,
    /// Record the `(fire_at, seq, target)` trace of every event.
    pub trace: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompletionRecord {
    pub request: u64,
    pub op: IoOp,
    pub issue_at: f64,
    pub finish_at: f64,
    pub outcome: Outcome,
    /// `finish_at - issue_at`; for failures, time until the failure.
    pub latency: f64,
    /// Path of the final attempt, if one was routed.
    pub path: Option<Path>,
    pub retried: bool,
}

/// Per-device bookkeeping for conservation checks.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceAccount {
    pub device: ComponentId,
    pub size_bytes: u64,
    pub initial_used_bytes: u64,
    pub used_at_horizon_bytes: u64,
    pub final_used_bytes: u64,
    /// Sum of completed write sizes over the whole run.
    pub written_bytes: u64,
    /// Megabytes moved by finished blocks plus partial progress of aborted
    /// blocks, up to the horizon.
    pub transferred_mb_at_horizon: f64,
    pub largest_block_mb: f64,
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub series: MetricSeries,
    pub ground_truth: GroundTruth,
    pub completions: Vec<CompletionRecord>,
    pub requests: usize,
    pub devices: Vec<DeviceAccount>,
    pub counters: EngineCounters,
    pub pending_after_drain: usize,
    pub trace: Option<Vec<TraceEntry>>,
}

impl SimOutput {
    pub fn failed(&self) -> usize {
        self.completions.iter().filter(|c| c.outcome == Outcome::Failed).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Action {
    Issue(usize),
    CpuWake(ComponentId),
    LinkArrive(usize),
    LinkWake(ComponentId),
    DiskWake(ComponentId),
    AnomalyStart(usize),
    AnomalyEnd(usize),
    Tick(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stage {
    Cpu,
    LinkLatency(EventId),
    LinkTransfer,
    Storage,
}

#[derive(Debug, Clone)]
struct InFlight {
    path: Path,
    stage: Stage,
    retried: bool,
    blocks: VecDeque<f64>,
    reserved: u64,
}

#[derive(Debug, Clone)]
struct Disk {
    server: BlockServer<usize>,
    size_bytes: u64,
    used_bytes: u64,
    reserved_bytes: u64,
    initial_used: u64,
    written: u64,
    transferred_mb: f64,
    largest_block: f64,
}

struct View<'a> {
    health: &'a [Condition],
    outstanding: &'a [usize],
    disks: &'a [Option<Disk>],
}

impl RouteView for View<'_> {
    fn is_online(&self, id: ComponentId) -> bool {
        self.health[id.0].is_online()
    }

    fn outstanding(&self, id: ComponentId) -> usize {
        self.outstanding[id.0]
    }

    fn free_gb(&self, device: ComponentId) -> f64 {
        self.disks[device.0].as_ref().map_or(0.0, |d| {
            d.size_bytes.saturating_sub(d.used_bytes + d.reserved_bytes) as f64 / GB_BYTES
        })
    }
}

fn mb_to_bytes(mb: f64) -> u64 {
    (mb * BYTES_PER_MB).round() as u64
}

fn gb_to_bytes(gb: f64) -> u64 {
    (gb * GB_BYTES).round() as u64
}

struct Runtime<'a> {
    cfg: &'a SimulationConfig,
    topo: &'a Topology,
    requests: Vec<RequestSpec>,
    anomalies: Vec<(ComponentId, AnomalyEvent)>,
    rng: ChaCha8Rng,
    router: Router,
    health: Vec<Condition>,
    outstanding: Vec<usize>,
    cpus: Vec<Option<SharedPool<usize>>>,
    links: Vec<Option<SharedPool<usize>>>,
    disks: Vec<Option<Disk>>,
    inflight: BTreeMap<usize, InFlight>,
    stats: TickStats,
    sampler: Sampler,
    horizon: f64,
    ticks: usize,
    completions: Vec<CompletionRecord>,
}

fn pid(id: ComponentId) -> ProcessId {
    ProcessId(id.0 as u32)
}

impl<'a> Runtime<'a> {
    fn telemetry_pid(&self) -> ProcessId {
        ProcessId(self.topo.len() as u32)
    }

    fn injector_pid(&self) -> ProcessId {
        ProcessId(self.topo.len() as u32 + 1)
    }

    fn factor(&self, id: ComponentId) -> f64 {
        self.health[id.0].factor().unwrap_or(0.0)
    }

    // ---- per-resource rates -------------------------------------------------

    fn cpu_rate(&self, id: ComponentId) -> f64 {
        let pool = self.cpus[id.0].as_ref().expect("controller pool");
        let spec = self.topo.cpu(id).expect("controller spec");
        cpu_job_rate(spec, pool.len(), self.factor(id))
    }

    fn link_rate(&self, id: ComponentId) -> f64 {
        let pool = self.links[id.0].as_ref().expect("link pool");
        let spec = self.topo.link(id).expect("link spec");
        spec.bandwidth * self.factor(id) / pool.len().max(1) as f64
    }

    fn disk_rate(&self, id: ComponentId) -> f64 {
        let disk = self.disks[id.0].as_ref().expect("disk state");
        let spec = self.topo.storage(id).expect("storage spec");
        match disk.server.current {
            Some(b) => spec.speed(self.requests[b.key].op) * self.factor(id),
            None => 0.0,
        }
    }

    // ---- advance: integrate progress and accounting up to `now` -------------

    fn advance(&mut self, id: ComponentId, now: f64) {
        match self.topo.kind(id) {
            ComponentKind::Controller(spec) => {
                let rate = self.cpu_rate(id);
                let pool = self.cpus[id.0].as_mut().unwrap();
                let busy = pool.len().min(spec.cores as usize) as f64;
                let dt = pool.advance(now, rate);
                if rate > 0.0 {
                    self.stats.busy_core_seconds[id.0] += dt * busy;
                }
            }
            ComponentKind::Link(_) => {
                let rate = self.link_rate(id);
                self.links[id.0].as_mut().unwrap().advance(now, rate);
            }
            ComponentKind::Storage(_) => {
                let rate = self.disk_rate(id);
                let moved = self.disks[id.0].as_mut().unwrap().server.advance(now, rate);
                self.stats.moved_mb[id.0] += moved;
            }
            ComponentKind::Client | ComponentKind::Balancer(_) => {}
        }
    }

    /// Cancels and re-schedules the next completion event of `id`.
    fn rearm(&mut self, engine: &mut Engine<Action>, id: ComponentId) {
        let (pending, next, action) = match self.topo.kind(id) {
            ComponentKind::Controller(_) => {
                let rate = self.cpu_rate(id);
                let pool = self.cpus[id.0].as_mut().unwrap();
                let next = pool.next_completion(rate);
                (&mut pool.pending, next, Action::CpuWake(id))
            }
            ComponentKind::Link(_) => {
                let rate = self.link_rate(id);
                let pool = self.links[id.0].as_mut().unwrap();
                let next = pool.next_completion(rate);
                (&mut pool.pending, next, Action::LinkWake(id))
            }
            ComponentKind::Storage(_) => {
                let rate = self.disk_rate(id);
                let disk = self.disks[id.0].as_mut().unwrap();
                let next = disk.server.current.filter(|_| rate > 0.0).map(|b| b.remaining / rate);
                (&mut disk.server.pending, next, Action::DiskWake(id))
            }
            ComponentKind::Client | ComponentKind::Balancer(_) => return,
        };
        if let Some(ev) = pending.take() {
            engine.cancel(ev);
        }
        if let Some(dt) = next {
            *pending = Some(engine.schedule_in(dt, pid(id), action).expect("finite delay"));
        }
    }

    // ---- request lifecycle --------------------------------------------------

    fn start_request(&mut self, engine: &mut Engine<Action>, idx: usize, retried: bool) {
        let view = View {
            health: &self.health,
            outstanding: &self.outstanding,
            disks: &self.disks,
        };
        let routed = self.router.route(&self.requests[idx], self.topo, &view, &mut self.rng);
        let path = match routed {
            Ok(p) => p,
            Err(_) => return self.record(engine, idx, Outcome::Failed, None, retried),
        };
        let req = &self.requests[idx];
        let mut reserved = 0;
        if req.op == IoOp::Write {
            let bytes = mb_to_bytes(req.file.total_size);
            let disk = self.disks[path.device.0].as_mut().unwrap();
            if disk.used_bytes + disk.reserved_bytes + bytes > disk.size_bytes {
                return self.record(engine, idx, Outcome::Failed, Some(path), retried);
            }
            disk.reserved_bytes += bytes;
            reserved = bytes;
        }
        for c in [path.balancer, path.controller, path.link, path.device] {
            self.outstanding[c.0] += 1;
        }
        self.inflight.insert(
            idx,
            InFlight {
                path,
                stage: Stage::Cpu,
                retried,
                blocks: req.file.blocks().collect(),
                reserved,
            },
        );
        let flops = self.cfg.flops.for_op(req.op);
        if flops > 0.0 {
            let now = engine.now().seconds();
            self.advance(path.controller, now);
            self.cpus[path.controller.0].as_mut().unwrap().insert(idx, flops);
            self.rearm(engine, path.controller);
        } else {
            self.enter_link(engine, idx);
        }
    }

    fn enter_link(&mut self, engine: &mut Engine<Action>, idx: usize) {
        let link = self.inflight[&idx].path.link;
        let latency = self.topo.link(link).unwrap().latency;
        let ev = engine
            .schedule_in(latency, pid(link), Action::LinkArrive(idx))
            .expect("finite latency");
        self.inflight.get_mut(&idx).unwrap().stage = Stage::LinkLatency(ev);
    }

    fn link_arrive(&mut self, engine: &mut Engine<Action>, idx: usize) {
        let Some(fl) = self.inflight.get_mut(&idx) else { return };
        fl.stage = Stage::LinkTransfer;
        let link = fl.path.link;
        let now = engine.now().seconds();
        self.advance(link, now);
        let size = self.requests[idx].file.total_size;
        self.links[link.0].as_mut().unwrap().insert(idx, size);
        self.rearm(engine, link);
    }

    fn enter_disk(&mut self, engine: &mut Engine<Action>, idx: usize) {
        let fl = self.inflight.get_mut(&idx).unwrap();
        fl.stage = Stage::Storage;
        let device = fl.path.device;
        self.disks[device.0].as_mut().unwrap().server.enqueue(idx);
        self.start_next_block(engine, device);
    }

    fn start_next_block(&mut self, engine: &mut Engine<Action>, device: ComponentId) {
        let disk = self.disks[device.0].as_mut().unwrap();
        if !disk.server.is_idle() {
            return;
        }
        if let Some(key) = disk.server.pop_waiting() {
            let block = self
                .inflight
                .get_mut(&key)
                .and_then(|f| f.blocks.pop_front())
                .expect("queued request has a block left");
            let now = engine.now().seconds();
            disk.largest_block = disk.largest_block.max(block);
            self.advance(device, now);
            self.disks[device.0].as_mut().unwrap().server.start(key, block);
        }
        self.rearm(engine, device);
    }

    fn record(
        &mut self,
        engine: &mut Engine<Action>,
        idx: usize,
        outcome: Outcome,
        path: Option<Path>,
        retried: bool,
    ) {
        let req = &self.requests[idx];
        let now = engine.now().seconds();
        let latency = now - req.issue_at;
        if outcome == Outcome::Ok {
            if let Some(p) = path {
                self.stats.latency_sum[p.balancer.0] += latency;
                self.stats.latency_count[p.balancer.0] += 1;
            }
        }
        self.completions.push(CompletionRecord {
            request: req.id,
            op: req.op,
            issue_at: req.issue_at,
            finish_at: now,
            outcome,
            latency,
            path,
            retried,
        });
    }

    /// Removes `idx` from resource bookkeeping without touching the resource
    /// it is currently queued on.
    fn release(&mut self, idx: usize, commit_write: bool) -> InFlight {
        let fl = self.inflight.remove(&idx).expect("request in flight");
        let p = fl.path;
        for c in [p.balancer, p.controller, p.link, p.device] {
            self.outstanding[c.0] -= 1;
        }
        let disk = self.disks[p.device.0].as_mut().unwrap();
        disk.reserved_bytes -= fl.reserved;
        if commit_write {
            disk.used_bytes += fl.reserved;
            disk.written += fl.reserved;
            self.stats.used_bytes[p.device.0] = disk.used_bytes;
        }
        fl
    }

    fn complete(&mut self, engine: &mut Engine<Action>, idx: usize) {
        let fl = self.release(idx, true);
        self.record(engine, idx, Outcome::Ok, Some(fl.path), fl.retried);
    }

    /// Pulls `idx` off whatever resource currently holds it.
    fn detach(&mut self, engine: &mut Engine<Action>, idx: usize) {
        let fl = &self.inflight[&idx];
        let now = engine.now().seconds();
        match fl.stage {
            Stage::Cpu => {
                let c = fl.path.controller;
                self.advance(c, now);
                self.cpus[c.0].as_mut().unwrap().remove(idx);
                self.rearm(engine, c);
            }
            Stage::LinkLatency(ev) => {
                engine.cancel(ev);
            }
            Stage::LinkTransfer => {
                let l = fl.path.link;
                self.advance(l, now);
                self.links[l.0].as_mut().unwrap().remove(idx);
                self.rearm(engine, l);
            }
            Stage::Storage => {
                let d = fl.path.device;
                self.advance(d, now);
                let disk = self.disks[d.0].as_mut().unwrap();
                if let Some(b) = disk.server.current.filter(|b| b.key == idx) {
                    disk.transferred_mb += b.size - b.remaining;
                }
                if disk.server.remove(idx) {
                    self.start_next_block(engine, d);
                }
            }
        }
    }

    // ---- event handlers -----------------------------------------------------

    fn on_cpu_wake(&mut self, engine: &mut Engine<Action>, id: ComponentId) {
        let now = engine.now().seconds();
        self.cpus[id.0].as_mut().unwrap().pending = None;
        self.advance(id, now);
        let scale = self.cfg.flops.read.max(self.cfg.flops.write);
        let pool = self.cpus[id.0].as_mut().unwrap();
        let mut done = pool.take_finished(scale);
        if done.is_empty() {
            done.extend(pool.take_min());
        }
        for idx in done {
            self.enter_link(engine, idx);
        }
        self.rearm(engine, id);
    }

    fn on_link_wake(&mut self, engine: &mut Engine<Action>, id: ComponentId) {
        let now = engine.now().seconds();
        self.links[id.0].as_mut().unwrap().pending = None;
        self.advance(id, now);
        let pool = self.links[id.0].as_mut().unwrap();
        let mut done = pool.take_finished(1.0);
        if done.is_empty() {
            done.extend(pool.take_min());
        }
        for idx in done {
            self.enter_disk(engine, idx);
        }
        self.rearm(engine, id);
    }

    fn on_disk_wake(&mut self, engine: &mut Engine<Action>, id: ComponentId) {
        let now = engine.now().seconds();
        self.disks[id.0].as_mut().unwrap().server.pending = None;
        self.advance(id, now);
        let disk = self.disks[id.0].as_mut().unwrap();
        let block = disk.server.finish_current().expect("wake with active block");
        disk.transferred_mb += block.size;
        let idx = block.key;
        if self.inflight[&idx].blocks.is_empty() {
            self.complete(engine, idx);
        } else {
            self.disks[id.0].as_mut().unwrap().server.enqueue(idx);
        }
        self.start_next_block(engine, id);
    }

    fn on_anomaly(&mut self, engine: &mut Engine<Action>, which: usize, starting: bool) {
        let (id, ev) = self.anomalies[which].clone();
        let now = engine.now().seconds();
        self.advance(id, now);
        if !starting {
            self.health[id.0] = Condition::HEALTHY;
            self.rearm(engine, id);
            return;
        }
        match ev.kind {
            AnomalyKind::Degradation { severity } => {
                self.health[id.0] = Condition::Online(severity);
                self.rearm(engine, id);
            }
            AnomalyKind::Breakup => {
                self.health[id.0] = Condition::Offline;
                let victims: Vec<usize> = self
                    .inflight
                    .iter()
                    .filter(|(_, f)| f.path.contains(id))
                    .map(|(&k, _)| k)
                    .collect();
                for idx in victims {
                    self.detach(engine, idx);
                    let fl = self.release(idx, false);
                    if fl.retried {
                        self.record(engine, idx, Outcome::Failed, Some(fl.path), true);
                    } else {
                        self.start_request(engine, idx, true);
                    }
                }
                self.rearm(engine, id);
            }
        }
    }

    fn on_tick(&mut self, engine: &mut Engine<Action>, k: usize) {
        let now = engine.now().seconds();
        for c in self.topo.controllers().into_iter().chain(self.topo.devices()) {
            self.advance(c, now);
        }
        self.sampler.sample(now, &mut self.stats);
        if k < self.ticks {
            let at = SimTime::new((k + 1) as f64 * self.cfg.period).expect("finite tick");
            engine
                .schedule(at, self.telemetry_pid(), Action::Tick(k + 1))
                .expect("tick in future");
        }
    }
}

impl Handler<Action> for Runtime<'_> {
    fn handle(&mut self, engine: &mut Engine<Action>, event: Event<Action>) {
        match event.payload {
            Action::Issue(i) => {
                if let Some(next) = self.requests.get(i + 1) {
                    let at = SimTime::new(next.issue_at).expect("validated issue time");
                    engine
                        .schedule(at, pid(next.client), Action::Issue(i + 1))
                        .expect("requests are time-sorted");
                }
                self.start_request(engine, i, false);
            }
            Action::CpuWake(id) => self.on_cpu_wake(engine, id),
            Action::LinkArrive(i) => self.link_arrive(engine, i),
            Action::LinkWake(id) => self.on_link_wake(engine, id),
            Action::DiskWake(id) => self.on_disk_wake(engine, id),
            Action::AnomalyStart(i) => self.on_anomaly(engine, i, true),
            Action::AnomalyEnd(i) => self.on_anomaly(engine, i, false),
            Action::Tick(k) => self.on_tick(engine, k),
        }
    }
}

/// Resolves anomaly components and rejects overlapping anomalies on the
/// same component.
pub fn resolve_anomalies(
    topo: &Topology,
    anomalies: &[AnomalyEvent],
) -> Result<Vec<(ComponentId, AnomalyEvent)>, ModelError> {
    let mut out: Vec<(ComponentId, AnomalyEvent)> = Vec::new();
    for a in anomalies {
        a.validate()?;
        let id = topo.id(&a.component)?;
        if !matches!(
            topo.kind(id),
            ComponentKind::Controller(_) | ComponentKind::Link(_) | ComponentKind::Storage(_)
        ) {
            return Err(ModelError::NotInjectable(a.component.clone()));
        }
        if out.iter().any(|(other, b)| *other == id && a.overlaps(b)) {
            return Err(ModelError::InvalidAnomaly(format!(
                "overlapping anomalies on `{}`",
                a.component
            )));
        }
        out.push((id, a.clone()));
    }
    Ok(out)
}

/// Runs the scenario to its horizon, samples telemetry, then drains all
/// in-flight requests so every request ends in exactly one completion record.
pub fn simulate(cfg: &SimulationConfig, seed: u64) -> Result<SimOutput, SimulationError> {
    let topo = &cfg.topology;
    cfg.workload.validate()?;
    if !(cfg.period.is_finite() && cfg.period > 0.0) {
        return Err(SimulationError::Invalid(format!(
            "telemetry period must be positive, got {}",
            cfg.period
        )));
    }
    if !(cfg.flops.read >= 0.0 && cfg.flops.write >= 0.0 && cfg.flops.read.is_finite() && cfg.flops.write.is_finite()) {
        return Err(SimulationError::Invalid("flops per request must be non-negative".into()));
    }
    let horizon = cfg.workload.duration;
    let anomalies = resolve_anomalies(topo, &cfg.anomalies)?;
    if let Some((_, a)) = anomalies.iter().find(|(_, a)| a.start.seconds() > horizon) {
        return Err(SimulationError::Invalid(format!(
            "anomaly on `{}` starts after the run horizon",
            a.component
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let requests: Vec<RequestSpec> = RequestStream::new(&cfg.workload, topo.clients(), &mut rng).collect();

    let n = topo.len();
    let mut stats = TickStats::new(n);
    let mut disks: Vec<Option<Disk>> = vec![None; n];
    for d in topo.devices() {
        let spec = topo.storage(d).unwrap();
        let used = gb_to_bytes(spec.used);
        let size = (spec.size * GB_BYTES).floor() as u64;
        let preloaded: f64 = cfg
            .workload
            .catalog
            .iter()
            .filter(|f| f.device == d)
            .map(|f| f.file.total_size)
            .sum();
        if mb_to_bytes(preloaded) > used {
            return Err(SimulationError::Invalid(format!(
                "preloaded files on `{}` exceed its used space",
                topo.name(d)
            )));
        }
        stats.used_bytes[d.0] = used;
        disks[d.0] = Some(Disk {
            server: BlockServer::new(),
            size_bytes: size,
            used_bytes: used,
            reserved_bytes: 0,
            initial_used: used,
            written: 0,
            transferred_mb: 0.0,
            largest_block: 0.0,
        });
    }
    for f in &cfg.workload.catalog {
        if topo.storage(f.device).is_none() {
            return Err(SimulationError::Invalid(format!(
                "file `{}` is placed on a non-storage component",
                f.file.name
            )));
        }
    }
    let mut cpus = vec![None; n];
    for c in topo.controllers() {
        cpus[c.0] = Some(SharedPool::new());
    }
    let mut links = vec![None; n];
    for l in topo.links() {
        links[l.0] = Some(SharedPool::new());
    }

    let sampler = Sampler::new(topo, cfg.period, 0.0, &stats);
    let ticks = crate::telemetry::expected_rows(horizon, cfg.period) - 1;
    let ground_truth = GroundTruth {
        labels: anomalies
            .iter()
            .map(|(_, a)| Label {
                t_star: a.start.seconds(),
                component: a.component.clone(),
                kind: a.kind.label().to_string(),
            })
            .collect(),
    };

    let mut rt = Runtime {
        cfg,
        topo,
        requests,
        anomalies,
        rng,
        router: Router::new(),
        health: vec![Condition::HEALTHY; n],
        outstanding: vec![0; n],
        cpus,
        links,
        disks,
        inflight: BTreeMap::new(),
        stats,
        sampler,
        horizon,
        ticks,
        completions: Vec::new(),
    };

    let mut engine = Engine::new();
    if cfg.trace {
        engine.enable_trace();
    }
    if let Some(first) = rt.requests.first() {
        engine.schedule(SimTime::new(first.issue_at)?, pid(first.client), Action::Issue(0))?;
    }
    for (i, (_, a)) in rt.anomalies.iter().enumerate() {
        engine.schedule(a.start, rt.injector_pid(), Action::AnomalyStart(i))?;
        if let Some(end) = a.end {
            engine.schedule(end, rt.injector_pid(), Action::AnomalyEnd(i))?;
        }
    }
    if ticks > 0 {
        engine.schedule(SimTime::new(cfg.period)?, rt.telemetry_pid(), Action::Tick(1))?;
    }

    engine.run_until(SimTime::new(rt.horizon)?, &mut rt);
    let at_horizon: Vec<(u64, f64)> = topo
        .devices()
        .into_iter()
        .map(|d| {
            let disk = rt.disks[d.0].as_ref().unwrap();
            (disk.used_bytes, disk.transferred_mb)
        })
        .collect();
    engine.run_to_completion(&mut rt);

    let devices = topo
        .devices()
        .into_iter()
        .zip(at_horizon)
        .map(|(d, (used_h, moved_h))| {
            let disk = rt.disks[d.0].as_ref().unwrap();
            DeviceAccount {
                device: d,
                size_bytes: disk.size_bytes,
                initial_used_bytes: disk.initial_used,
                used_at_horizon_bytes: used_h,
                final_used_bytes: disk.used_bytes,
                written_bytes: disk.written,
                transferred_mb_at_horizon: moved_h,
                largest_block_mb: disk.largest_block,
            }
        })
        .collect();

    let requests = rt.requests.len();
    let mut completions = std::mem::take(&mut rt.completions);
    completions.sort_by_key(|c| c.request);
    let series = rt.sampler.finish();
    Ok(SimOutput {
        series,
        ground_truth,
        completions,
        requests,
        devices,
        counters: engine.counters(),
        pending_after_drain: engine.pending(),
        trace: engine.trace().map(<[TraceEntry]>::to_vec),
    })
}
