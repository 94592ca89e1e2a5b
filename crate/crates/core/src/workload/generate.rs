use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, LogNormal};
use serde::{Deserialize, Serialize};

use super::WorkloadError;
use crate::storage::{ComponentId, FileSpec, IoOp};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Arrival {
    /// Fixed issue times in seconds.
    Schedule { times: Vec<f64> },
    /// Exponential inter-arrivals with the given rate per second.
    Poisson { rate: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SizeDistribution {
    Constant { size: f64 },
    Uniform { lo: f64, hi: f64 },
    /// Parameters of the underlying normal, in log-megabytes.
    Lognormal { mu: f64, sigma: f64 },
}

impl SizeDistribution {
    fn validate(&self) -> Result<(), WorkloadError> {
        let bad = |m: String| Err(WorkloadError::InvalidScenario(m));
        match *self {
            SizeDistribution::Constant { size } if !(size.is_finite() && size > 0.0) => {
                bad(format!("constant file size must be positive, got {size}"))
            }
            SizeDistribution::Uniform { lo, hi } if !(lo.is_finite() && lo > 0.0 && hi.is_finite()) => {
                bad(format!("uniform bounds must be positive and finite, got [{lo}, {hi}]"))
            }
            SizeDistribution::Uniform { lo, hi } if lo > hi => {
                bad(format!("uniform lo {lo} exceeds hi {hi}"))
            }
            SizeDistribution::Lognormal { mu, sigma }
                if !(mu.is_finite() && sigma.is_finite() && sigma >= 0.0) =>
            {
                bad(format!("lognormal needs finite mu and sigma >= 0, got ({mu}, {sigma})"))
            }
            _ => Ok(()),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            SizeDistribution::Constant { size } => size,
            SizeDistribution::Uniform { lo, hi } if lo == hi => lo,
            SizeDistribution::Uniform { lo, hi } => rng.random_range(lo..=hi),
            SizeDistribution::Lognormal { mu, sigma } => LogNormal::new(mu, sigma)
                .expect("validated lognormal parameters")
                .sample(rng),
        }
    }
}

/// A file that exists on a device before the run starts and can be read.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredFile {
    pub file: FileSpec,
    pub device: ComponentId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadScenario {
    pub duration: f64,
    pub arrival: Arrival,
    pub file_size: SizeDistribution,
    /// Megabytes; clamped to the file size for files smaller than one block.
    pub block_size: f64,
    pub read_fraction: f64,
    pub rng_seed: u64,
    /// Files available for reads.
    pub catalog: Vec<StoredFile>,
}

impl LoadScenario {
    pub fn validate(&self) -> Result<(), WorkloadError> {
        let bad = |m: String| Err(WorkloadError::InvalidScenario(m));
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return bad(format!("duration must be positive, got {}", self.duration));
        }
        if !(self.block_size.is_finite() && self.block_size > 0.0) {
            return bad(format!("block_size must be positive, got {}", self.block_size));
        }
        if !(0.0..=1.0).contains(&self.read_fraction) {
            return bad(format!("read_fraction must lie in [0, 1], got {}", self.read_fraction));
        }
        match &self.arrival {
            Arrival::Poisson { rate } if !(rate.is_finite() && *rate > 0.0) => {
                return bad(format!("poisson rate must be positive, got {rate}"));
            }
            Arrival::Schedule { times } if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) => {
                return bad("schedule times must be finite and non-negative".into());
            }
            _ => {}
        }
        self.file_size.validate()?;
        if self.read_fraction > 0.0 && self.catalog.is_empty() {
            return bad("reads requested but no preloaded files to read".into());
        }
        for f in &self.catalog {
            f.file
                .validate()
                .map_err(|e| WorkloadError::InvalidScenario(format!("file `{}`: {e}", f.file.name)))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RequestSpec {
    pub id: u64,
    pub op: IoOp,
    pub file: FileSpec,
    pub issue_at: f64,
    pub client: ComponentId,
    /// Device holding the file, for reads.
    pub source: Option<ComponentId>,
}

/// Lazily generated, time-sorted request stream.
pub struct RequestStream<'a, R: Rng> {
    scenario: &'a LoadScenario,
    clients: Vec<ComponentId>,
    rng: &'a mut R,
    schedule: Vec<f64>,
    cursor: usize,
    clock: f64,
    next_id: u64,
}

impl<'a, R: Rng> RequestStream<'a, R> {
    pub fn new(scenario: &'a LoadScenario, clients: Vec<ComponentId>, rng: &'a mut R) -> Self {
        assert!(!clients.is_empty(), "request stream needs at least one client");
        let mut schedule = match &scenario.arrival {
            Arrival::Schedule { times } => times
                .iter()
                .copied()
                .filter(|&t| t <= scenario.duration)
                .collect(),
            Arrival::Poisson { .. } => Vec::new(),
        };
        schedule.sort_by(f64::total_cmp);
        RequestStream {
            scenario,
            clients,
            rng,
            schedule,
            cursor: 0,
            clock: 0.0,
            next_id: 0,
        }
    }

    fn next_time(&mut self) -> Option<f64> {
        match &self.scenario.arrival {
            Arrival::Schedule { .. } => {
                let t = self.schedule.get(self.cursor).copied();
                self.cursor += 1;
                t
            }
            Arrival::Poisson { rate } => {
                let gap = Exp::new(*rate).expect("validated rate").sample(self.rng);
                self.clock += gap;
                (self.clock <= self.scenario.duration).then_some(self.clock)
            }
        }
    }
}

impl<R: Rng> Iterator for RequestStream<'_, R> {
    type Item = RequestSpec;

    fn next(&mut self) -> Option<RequestSpec> {
        let issue_at = self.next_time()?;
        let s = self.scenario;
        let client = if self.clients.len() == 1 {
            self.clients[0]
        } else {
            self.clients[self.rng.random_range(0..self.clients.len())]
        };
        let is_read = self.rng.random::<f64>() < s.read_fraction;
        let id = self.next_id;
        self.next_id += 1;
        let (op, file, source) = if is_read {
            let pick = &s.catalog[self.rng.random_range(0..s.catalog.len())];
            (IoOp::Read, pick.file.clone(), Some(pick.device))
        } else {
            let total = s.file_size.sample(self.rng);
            let file = FileSpec {
                name: format!("w{id:06}"),
                block_size: s.block_size.min(total),
                total_size: total,
            };
            (IoOp::Write, file, None)
        };
        Some(RequestSpec {
            id,
            op,
            file,
            issue_at,
            client,
            source,
        })
    }
}

/// Generates the full stream with an RNG seeded from `scenario.rng_seed`.
pub fn generate(scenario: &LoadScenario, clients: Vec<ComponentId>) -> Result<Vec<RequestSpec>, WorkloadError> {
    scenario.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.rng_seed);
    Ok(RequestStream::new(scenario, clients, &mut rng).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base(arrival: Arrival) -> LoadScenario {
        LoadScenario {
            duration: 1000.0,
            arrival,
            file_size: SizeDistribution::Uniform { lo: 10.0, hi: 50.0 },
            block_size: 16.0,
            read_fraction: 0.0,
            rng_seed: 7,
            catalog: vec![],
        }
    }

    const C: ComponentId = ComponentId(0);

    #[test]
    fn fixed_schedule_yields_exact_times() {
        let s = base(Arrival::Schedule { times: vec![2.0, 1.0] });
        let reqs = generate(&s, vec![C]).unwrap();
        assert_eq!(reqs.iter().map(|r| r.issue_at).collect::<Vec<_>>(), vec![1.0, 2.0]);
        assert!(generate(&base(Arrival::Schedule { times: vec![] }), vec![C]).unwrap().is_empty());
    }

    #[test]
    fn poisson_count_is_plausible() {
        let s = base(Arrival::Poisson { rate: 10.0 });
        let reqs = generate(&s, vec![C]).unwrap();
        assert!((9000..=11000).contains(&reqs.len()), "got {}", reqs.len());
        assert!(reqs.windows(2).all(|w| w[0].issue_at <= w[1].issue_at));
        assert!(reqs.last().unwrap().issue_at <= 1000.0);
    }

    #[test]
    fn zero_read_fraction_means_all_writes() {
        let s = base(Arrival::Poisson { rate: 5.0 });
        let reqs = generate(&s, vec![C]).unwrap();
        assert!(reqs.iter().all(|r| r.op == IoOp::Write));
        assert!(reqs
            .iter()
            .all(|r| r.file.total_size >= 10.0 && r.file.total_size <= 50.0));
        assert!(reqs.iter().all(|r| r.file.block_size <= r.file.total_size));
    }

    #[test]
    fn reads_come_from_catalog() {
        let mut s = base(Arrival::Poisson { rate: 5.0 });
        s.read_fraction = 1.0;
        assert!(s.validate().is_err());
        s.catalog.push(StoredFile {
            file: FileSpec::new("seed", 8.0, 64.0).unwrap(),
            device: ComponentId(3),
        });
        let reqs = generate(&s, vec![C]).unwrap();
        assert!(reqs
            .iter()
            .all(|r| r.op == IoOp::Read && r.file.name == "seed" && r.source == Some(ComponentId(3))));
    }

    #[test]
    fn same_seed_same_stream() {
        let mut s = base(Arrival::Poisson { rate: 3.0 });
        s.file_size = SizeDistribution::Lognormal { mu: 3.0, sigma: 0.5 };
        assert_eq!(generate(&s, vec![C, ComponentId(1)]).unwrap(), generate(&s, vec![C, ComponentId(1)]).unwrap());
    }

    #[test]
    fn rejects_invalid_scenarios() {
        let mut s = base(Arrival::Poisson { rate: 0.0 });
        assert!(s.validate().is_err());
        s.arrival = Arrival::Poisson { rate: 1.0 };
        s.file_size = SizeDistribution::Uniform { lo: 5.0, hi: 1.0 };
        assert!(s.validate().is_err());
        s.file_size = SizeDistribution::Constant { size: 1.0 };
        s.read_fraction = 1.5;
        assert!(s.validate().is_err());
    }
}
