//! Inputs shared by the criterion benches.

use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use stormcpd_core::{MetricSeries, Scenario};

pub const SCENARIOS: [&str; 4] = ["controller_failure", "balancer_time", "storage_traffic", "used_space"];

/// Loads one of the scenarios shipped in the repository's `scenarios/` directory.
pub fn bundled(name: &str) -> Scenario {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(format!("../../scenarios/{name}.toml"));
    Scenario::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

/// Unit-variance Gaussian channels whose mean moves by `shift` halfway through.
pub fn shifted_gaussian(rows: usize, dim: usize, shift: f64, seed: u64) -> MetricSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let channels = (0..dim).map(|i| format!("x{i}")).collect();
    let mut series = MetricSeries::new(1.0, channels);
    for i in 0..rows {
        let offset = if i >= rows / 2 { shift } else { 0.0 };
        series.push_row(i as f64, (0..dim).map(|_| normal.sample(&mut rng) + offset).collect());
    }
    series
}
