//! Resource parameters and the unloaded service-time formulas.
//!
//! Units: transfer sizes and speeds in megabytes, capacities in gigabytes,
//! CPU work in flops. One gigabyte is 1024 megabytes.

use serde::{Deserialize, Serialize};

use super::ModelError;

pub const MB_PER_GB: f64 = 1024.0;
pub const BYTES_PER_MB: f64 = 1024.0 * 1024.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CpuSpec {
    pub cores: u32,
    /// Flops per second of one core.
    pub core_speed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkSpec {
    /// Megabytes per second.
    pub bandwidth: f64,
    /// Seconds.
    pub latency: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StorageSpec {
    /// Gigabytes.
    pub size: f64,
    /// Megabytes per second.
    pub write_speed: f64,
    /// Megabytes per second.
    pub read_speed: f64,
    /// Gigabytes already occupied.
    pub used: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileSpec {
    pub name: String,
    /// Megabytes.
    pub block_size: f64,
    /// Megabytes.
    pub total_size: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IoOp {
    Read,
    Write,
}

/// Health of a component as seen by the service-time formulas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Condition {
    /// Effective speed multiplier in (0, 1]. 1.0 means healthy.
    Online(f64),
    Offline,
}

impl Condition {
    pub const HEALTHY: Condition = Condition::Online(1.0);

    pub fn factor(self) -> Option<f64> {
        match self {
            Condition::Online(f) => Some(f),
            Condition::Offline => None,
        }
    }

    pub fn is_online(self) -> bool {
        matches!(self, Condition::Online(_))
    }
}

fn positive(field: &'static str, v: f64) -> Result<(), ModelError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(ModelError::InvalidSpec {
            field,
            reason: format!("must be positive, got {v}"),
        })
    }
}

fn non_negative(field: &'static str, v: f64) -> Result<(), ModelError> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(ModelError::InvalidSpec {
            field,
            reason: format!("must be non-negative, got {v}"),
        })
    }
}

pub(crate) fn check_factor(v: f64) -> Result<(), ModelError> {
    if v.is_finite() && v > 0.0 && v <= 1.0 {
        Ok(())
    } else {
        Err(ModelError::InvalidSpec {
            field: "severity",
            reason: format!("must lie in (0, 1], got {v}"),
        })
    }
}

impl CpuSpec {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.cores == 0 {
            return Err(ModelError::InvalidSpec {
                field: "cores",
                reason: "must be at least 1".into(),
            });
        }
        positive("core_speed", self.core_speed)
    }
}

impl LinkSpec {
    pub fn validate(&self) -> Result<(), ModelError> {
        positive("bandwidth", self.bandwidth)?;
        non_negative("latency", self.latency)
    }
}

impl StorageSpec {
    pub fn validate(&self) -> Result<(), ModelError> {
        positive("size", self.size)?;
        positive("write_speed", self.write_speed)?;
        positive("read_speed", self.read_speed)?;
        non_negative("used", self.used)?;
        if self.used > self.size {
            return Err(ModelError::InvalidSpec {
                field: "used",
                reason: format!("{} GB exceeds size {} GB", self.used, self.size),
            });
        }
        Ok(())
    }

    pub fn speed(&self, op: IoOp) -> f64 {
        match op {
            IoOp::Read => self.read_speed,
            IoOp::Write => self.write_speed,
        }
    }
}

impl FileSpec {
    pub fn new(name: impl Into<String>, block_size: f64, total_size: f64) -> Result<Self, ModelError> {
        let f = FileSpec {
            name: name.into(),
            block_size,
            total_size,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        positive("block_size", self.block_size)?;
        positive("total_size", self.total_size)?;
        if self.block_size > self.total_size {
            return Err(ModelError::InvalidSpec {
                field: "block_size",
                reason: format!(
                    "{} MB exceeds total size {} MB",
                    self.block_size, self.total_size
                ),
            });
        }
        Ok(())
    }

    pub fn block_count(&self) -> usize {
        let mut n = (self.total_size / self.block_size).ceil().max(1.0) as usize;
        // Rounding can push the ratio just past an integer; drop the sliver.
        if n > 1 && self.total_size - (n - 1) as f64 * self.block_size <= 1e-9 * self.total_size {
            n -= 1;
        }
        n
    }

    /// Block sizes in transfer order: full blocks, then the remainder.
    pub fn blocks(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.block_count();
        (0..n).map(move |i| {
            let done = i as f64 * self.block_size;
            self.block_size.min(self.total_size - done)
        })
    }

    pub fn size_gb(&self) -> f64 {
        self.total_size / MB_PER_GB
    }
}

fn online_factor(cond: Condition, what: &str) -> Result<f64, ModelError> {
    cond.factor()
        .ok_or_else(|| ModelError::ComponentOffline(what.to_string()))
}

/// Unloaded time to move `file` through a storage device.
pub fn service_time_storage(
    file: &FileSpec,
    spec: &StorageSpec,
    op: IoOp,
    cond: Condition,
) -> Result<f64, ModelError> {
    let factor = online_factor(cond, "storage")?;
    if op == IoOp::Write {
        let free = spec.size - spec.used;
        if file.size_gb() > free {
            return Err(ModelError::CapacityExceeded {
                device: String::new(),
                needed_gb: file.size_gb(),
                free_gb: free,
            });
        }
    }
    Ok(file.total_size / (spec.speed(op) * factor))
}

/// Latency plus transfer time; degradation slows the transfer only.
pub fn service_time_link(megabytes: f64, spec: &LinkSpec, cond: Condition) -> Result<f64, ModelError> {
    let factor = online_factor(cond, "link")?;
    Ok(spec.latency + megabytes / (spec.bandwidth * factor))
}

/// Processor-sharing CPU time when `active_jobs` share `spec.cores` cores.
pub fn cpu_cost(
    request_flops: f64,
    spec: &CpuSpec,
    active_jobs: u32,
    cond: Condition,
) -> Result<f64, ModelError> {
    let factor = online_factor(cond, "controller")?;
    Ok(request_flops / cpu_job_rate(spec, active_jobs.max(1) as usize, factor))
}

/// Flops per second granted to each of `active_jobs` jobs.
pub(crate) fn cpu_job_rate(spec: &CpuSpec, active_jobs: usize, factor: f64) -> f64 {
    let share = (spec.cores as f64 / active_jobs.max(1) as f64).min(1.0);
    spec.core_speed * factor * share
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn disk(write: f64) -> StorageSpec {
        StorageSpec {
            size: 1000.0,
            write_speed: write,
            read_speed: 2.0 * write,
            used: 0.0,
        }
    }

    #[test]
    fn storage_time_is_size_over_speed() {
        let f = FileSpec::new("f", 100.0, 100.0).unwrap();
        let t = service_time_storage(&f, &disk(50.0), IoOp::Write, Condition::HEALTHY).unwrap();
        assert_eq!(t, 2.0);
        let t = service_time_storage(&f, &disk(50.0), IoOp::Write, Condition::Online(0.5)).unwrap();
        assert_eq!(t, 4.0);
        let t = service_time_storage(&f, &disk(50.0), IoOp::Read, Condition::HEALTHY).unwrap();
        assert_eq!(t, 1.0);
    }

    #[test]
    fn blocks_enumerate_with_remainder() {
        let f = FileSpec::new("f", 30.0, 100.0).unwrap();
        let blocks: Vec<f64> = f.blocks().collect();
        assert_eq!(blocks, vec![30.0, 30.0, 30.0, 10.0]);
        let per_block: f64 = blocks.iter().map(|b| b / 50.0).sum();
        assert_relative_eq!(per_block, 2.0, epsilon = 1e-12);
        let exact = FileSpec::new("g", 25.0, 100.0).unwrap();
        assert_eq!(exact.blocks().count(), 4);
    }

    #[test]
    fn write_beyond_capacity_fails() {
        let spec = StorageSpec {
            size: 1.0,
            write_speed: 10.0,
            read_speed: 10.0,
            used: 0.95,
        };
        let f = FileSpec::new("big", 100.0, 100.0).unwrap();
        assert!(matches!(
            service_time_storage(&f, &spec, IoOp::Write, Condition::HEALTHY),
            Err(ModelError::CapacityExceeded { .. })
        ));
        // Reads never consume space.
        assert!(service_time_storage(&f, &spec, IoOp::Read, Condition::HEALTHY).is_ok());
    }

    #[test]
    fn offline_components_refuse_work() {
        let f = FileSpec::new("f", 1.0, 1.0).unwrap();
        assert!(matches!(
            service_time_storage(&f, &disk(1.0), IoOp::Read, Condition::Offline),
            Err(ModelError::ComponentOffline(_))
        ));
        let link = LinkSpec { bandwidth: 1.0, latency: 0.0 };
        assert!(service_time_link(1.0, &link, Condition::Offline).is_err());
        let cpu = CpuSpec { cores: 1, core_speed: 1.0 };
        assert!(cpu_cost(1.0, &cpu, 1, Condition::Offline).is_err());
    }

    #[test]
    fn link_time_examples() {
        let l = LinkSpec { bandwidth: 100.0, latency: 0.01 };
        assert_eq!(service_time_link(0.0, &l, Condition::HEALTHY).unwrap(), 0.01);
        let l0 = LinkSpec { bandwidth: 100.0, latency: 0.0 };
        assert_eq!(service_time_link(100.0, &l0, Condition::HEALTHY).unwrap(), 1.0);
        assert_relative_eq!(
            service_time_link(100.0, &l, Condition::Online(0.5)).unwrap(),
            2.01,
            epsilon = 1e-12
        );
    }

    #[test]
    fn cpu_cost_examples() {
        let cpu = CpuSpec { cores: 4, core_speed: 1e9 };
        assert_eq!(cpu_cost(1e9, &cpu, 1, Condition::HEALTHY).unwrap(), 1.0);
        assert_eq!(cpu_cost(1e9, &cpu, 8, Condition::HEALTHY).unwrap(), 2.0);
        assert_eq!(cpu_cost(1e9, &cpu, 1, Condition::Online(0.25)).unwrap(), 4.0);
        assert_eq!(cpu_cost(1e9, &cpu, 4, Condition::HEALTHY).unwrap(), 1.0);
    }

    #[test]
    fn unit_severity_is_identity() {
        let f = FileSpec::new("f", 7.0, 33.0).unwrap();
        let l = LinkSpec { bandwidth: 13.0, latency: 0.2 };
        let cpu = CpuSpec { cores: 3, core_speed: 2e8 };
        let d = disk(17.0);
        assert_eq!(
            service_time_storage(&f, &d, IoOp::Write, Condition::Online(1.0)).unwrap(),
            service_time_storage(&f, &d, IoOp::Write, Condition::HEALTHY).unwrap()
        );
        assert_eq!(
            service_time_link(33.0, &l, Condition::Online(1.0)).unwrap(),
            33.0 / 13.0 + 0.2
        );
        assert_eq!(cpu_cost(1e8, &cpu, 5, Condition::Online(1.0)).unwrap(), 1e8 / (2e8 * 0.6));
    }

    #[test]
    fn spec_validation() {
        assert!(LinkSpec { bandwidth: -1.0, latency: 0.0 }.validate().is_err());
        assert!(LinkSpec { bandwidth: 1.0, latency: -0.1 }.validate().is_err());
        assert!(CpuSpec { cores: 0, core_speed: 1.0 }.validate().is_err());
        let mut d = disk(1.0);
        d.used = 2000.0;
        assert!(d.validate().is_err());
        assert!(FileSpec::new("f", 10.0, 5.0).is_err());
        assert!(FileSpec::new("f", 0.0, 5.0).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            // Stronger degradation never makes any stage faster.
            #[test]
            fn monotone_harm(
                size in 0.1f64..1e4,
                speed in 0.1f64..1e4,
                hi in 0.01f64..=1.0,
                frac in 0.01f64..=1.0,
                jobs in 1u32..64,
            ) {
                let lo = hi * frac;
                let f = FileSpec::new("f", size, size).unwrap();
                let d = StorageSpec { size: 1e9, write_speed: speed, read_speed: speed, used: 0.0 };
                let l = LinkSpec { bandwidth: speed, latency: 0.5 };
                let c = CpuSpec { cores: 4, core_speed: speed };
                prop_assert!(
                    service_time_storage(&f, &d, IoOp::Write, Condition::Online(lo)).unwrap()
                        >= service_time_storage(&f, &d, IoOp::Write, Condition::Online(hi)).unwrap()
                );
                prop_assert!(
                    service_time_link(size, &l, Condition::Online(lo)).unwrap()
                        >= service_time_link(size, &l, Condition::Online(hi)).unwrap()
                );
                prop_assert!(
                    cpu_cost(size, &c, jobs, Condition::Online(lo)).unwrap()
                        >= cpu_cost(size, &c, jobs, Condition::Online(hi)).unwrap()
                );
            }

            #[test]
            fn blocks_sum_to_total(block in 0.5f64..50.0, extra in 0.0f64..500.0) {
                let total = block + extra;
                let f = FileSpec::new("f", block, total).unwrap();
                let sum: f64 = f.blocks().sum();
                prop_assert!((sum - total).abs() <= 1e-9 * total);
                prop_assert!(f.blocks().all(|b| b > 0.0 && b <= block));
            }
        }
    }
}
