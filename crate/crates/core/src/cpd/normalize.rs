/// Per-channel running z-score (Welford). Each observation is scaled with
/// statistics that include itself, so only past and present data are used.
#[derive(Debug, Clone)]
pub struct RunningZScore {
    count: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl RunningZScore {
    pub fn new(dim: usize) -> Self {
        RunningZScore {
            count: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    pub fn update(&mut self, x: &[f64]) -> Vec<f64> {
        self.count += 1;
        let n = self.count as f64;
        x.iter()
            .enumerate()
            .map(|(i, &v)| {
                let delta = v - self.mean[i];
                self.mean[i] += delta / n;
                self.m2[i] += delta * (v - self.mean[i]);
                let sd = (self.m2[i] / n).sqrt();
                if sd > 1e-12 {
                    (v - self.mean[i]) / sd
                } else {
                    0.0
                }
            })
            .collect()
    }
}
