//! Online change-point detection loop.
//!
//! Starting at `t = k + n + l` and advancing by `n`, each step scores the
//! reference mini-batch `X(t-l)` against the test mini-batch `X(t)` with the
//! current classifier, updates the running score
//! `d̄(t) = d̄(t-n) + (d(t) - d(t-l-n)) / l`, and only then takes the
//! gradient step(s) on the cross-entropy of the same two batches.

use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::classifier::Mlp;
use super::normalize::RunningZScore;
use super::score::score;
use super::window::window_ending_at;
use super::CpdError;
use crate::telemetry::MetricSeries;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    /// Observations per window vector (`k`).
    pub window: usize,
    /// Mini-batch size (`n`).
    pub batch: usize,
    /// Lag between reference and test batches (`l`), a multiple of `batch`.
    pub lag: usize,
    pub learning_rate: f64,
    pub hidden: usize,
    /// Gradient steps per detector step.
    pub train_steps: usize,
    /// Running z-score normalisation of every input channel.
    pub normalize: bool,
    /// Seeds the classifier initialisation.
    pub seed: u64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            window: 1,
            batch: 20,
            lag: 100,
            learning_rate: 0.1,
            hidden: 32,
            train_steps: 1,
            normalize: true,
            seed: 0,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<(), CpdError> {
        let bad = |m: &str| Err(CpdError::InvalidConfig(m.to_string()));
        if self.window == 0 {
            return bad("k must be at least 1");
        }
        if self.batch == 0 {
            return bad("n must be at least 1");
        }
        if self.lag < self.batch {
            return bad("l must be at least n");
        }
        if !self.lag.is_multiple_of(self.batch) {
            return bad("l must be divisible by n");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning rate must be positive");
        }
        if self.hidden == 0 {
            return bad("hidden width must be at least 1");
        }
        if self.train_steps == 0 {
            return bad("train steps must be at least 1");
        }
        Ok(())
    }

    /// First time index (1-based) at which a score is produced.
    pub fn warm_up(&self) -> usize {
        self.window + self.batch + self.lag
    }
}

#[derive(Debug, Clone)]
pub struct DetectorState {
    /// Time index (1-based) of the next step's newest test window.
    t: usize,
    /// d values on the step grid: `d(t-l), ..., d(t)` after a step.
    history: VecDeque<f64>,
    d_bar: f64,
    classifier: Mlp,
}

impl DetectorState {
    pub fn new(config: &DetectorConfig, dim: usize) -> Result<Self, CpdError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        Ok(DetectorState {
            t: config.warm_up(),
            history: std::iter::repeat_n(0.0, config.lag / config.batch + 1).collect(),
            d_bar: 0.0,
            classifier: Mlp::new(config.window * dim, config.hidden, &mut rng),
        })
    }

    pub fn next_t(&self) -> usize {
        self.t
    }

    pub fn d_bar(&self) -> f64 {
        self.d_bar
    }

    pub fn history(&self) -> &VecDeque<f64> {
        &self.history
    }

    pub fn classifier(&self) -> &Mlp {
        &self.classifier
    }

    pub fn classifier_mut(&mut self) -> &mut Mlp {
        &mut self.classifier
    }

    /// Replaces the running score and stored d values (e.g. to resume).
    pub fn restore(&mut self, d_bar: f64, history: &[f64]) -> Result<(), CpdError> {
        if history.len() != self.history.len() {
            return Err(CpdError::BatchSize {
                expected: self.history.len(),
                got: history.len(),
            });
        }
        self.history = history.iter().copied().collect();
        self.d_bar = d_bar;
        Ok(())
    }

    /// From-scratch running score: `(1/l) Σ` of the stored d values.
    pub fn recompute_d_bar(&self, lag: usize) -> f64 {
        self.history.iter().sum::<f64>() / lag as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutput {
    /// 1-based index of the newest observation in the test batch.
    pub t: usize,
    pub d: f64,
    pub d_bar: f64,
    /// Loss of the batches before the update.
    pub loss: f64,
}

/// Streaming detector: feed one metric row at a time.
#[derive(Debug, Clone)]
pub struct Detector {
    config: DetectorConfig,
    dim: usize,
    state: DetectorState,
    normalizer: Option<RunningZScore>,
    recent: VecDeque<Vec<f64>>,
    windows: VecDeque<Vec<f64>>,
    seen: usize,
}

impl Detector {
    pub fn new(config: DetectorConfig, dim: usize) -> Result<Self, CpdError> {
        if dim == 0 {
            return Err(CpdError::InvalidConfig("observations need at least one channel".into()));
        }
        let state = DetectorState::new(&config, dim)?;
        Ok(Detector {
            normalizer: config.normalize.then(|| RunningZScore::new(dim)),
            recent: VecDeque::with_capacity(config.window),
            windows: VecDeque::with_capacity(config.lag + config.batch),
            seen: 0,
            dim,
            state,
            config,
        })
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.config
    }

    pub fn state(&self) -> &DetectorState {
        &self.state
    }

    pub fn state_mut(&mut self) -> &mut DetectorState {
        &mut self.state
    }

    /// One iteration of the detection loop on explicit batches.
    pub fn step(&mut self, t: usize, reference: &[Vec<f64>], test: &[Vec<f64>]) -> Result<StepOutput, CpdError> {
        let warm = self.config.warm_up();
        if t < warm {
            return Err(CpdError::NotWarmedUp { t, warm_up: warm });
        }
        if t != self.state.t {
            return Err(CpdError::OutOfOrder {
                expected: self.state.t,
                got: t,
            });
        }
        let n = self.config.batch;
        for b in [reference, test] {
            if b.len() != n {
                return Err(CpdError::BatchSize { expected: n, got: b.len() });
            }
        }
        let st = &mut self.state;
        let d = score(&st.classifier, reference, test);
        let expired = st.history.pop_front().unwrap_or(0.0);
        st.history.push_back(d);
        st.d_bar += (d - expired) / self.config.lag as f64;

        let mut first_loss = f64::NAN;
        for i in 0..self.config.train_steps {
            let l = st.classifier.sgd_step(reference, test, self.config.learning_rate);
            if i == 0 {
                first_loss = l;
            }
        }
        st.t += n;
        Ok(StepOutput {
            t,
            d,
            d_bar: st.d_bar,
            loss: first_loss,
        })
    }

    /// Consumes one observation; returns a step result whenever the
    /// observation completes a step on the `n`-spaced grid.
    pub fn push(&mut self, x: &[f64]) -> Result<Option<StepOutput>, CpdError> {
        if x.len() != self.dim {
            return Err(CpdError::Dimension {
                expected: self.dim,
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(CpdError::NonFinite);
        }
        let row = match self.normalizer.as_mut() {
            Some(z) => z.update(x),
            None => x.to_vec(),
        };
        let (k, n, l) = (self.config.window, self.config.batch, self.config.lag);
        self.seen += 1;
        self.recent.push_back(row);
        if self.recent.len() > k {
            self.recent.pop_front();
        }
        if self.recent.len() < k {
            return Ok(None);
        }
        let rows = self.recent.make_contiguous();
        self.windows.push_back(window_ending_at(rows, k - 1, k));
        if self.windows.len() > l + n {
            self.windows.pop_front();
        }
        let t = self.seen;
        if t < self.config.warm_up() || t != self.state.t {
            return Ok(None);
        }
        let windows = self.windows.make_contiguous();
        let (reference, rest) = windows.split_at(n);
        let test = &rest[rest.len() - n..];
        let reference = reference.to_vec();
        let test = test.to_vec();
        self.step(t, &reference, &test).map(Some)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScorePoint {
    /// Timestamp of the newest observation in the test batch.
    pub time: f64,
    pub index: usize,
    pub d: f64,
    pub d_bar: f64,
    pub loss: f64,
}

/// Runs the detector over a whole series.
pub fn run(series: &MetricSeries, config: &DetectorConfig) -> Result<Vec<ScorePoint>, CpdError> {
    config.validate()?;
    if series.len() < config.warm_up() {
        return Err(CpdError::SeriesTooShort {
            len: series.len(),
            needed: config.warm_up(),
        });
    }
    let mut det = Detector::new(config.clone(), series.channels.len())?;
    let mut out = Vec::new();
    for (time, row) in series.times.iter().zip(&series.rows) {
        if let Some(s) = det.push(row)? {
            out.push(ScorePoint {
                time: *time,
                index: s.t,
                d: s.d,
                d_bar: s.d_bar,
                loss: s.loss,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(k: usize, n: usize, l: usize) -> DetectorConfig {
        DetectorConfig {
            window: k,
            batch: n,
            lag: l,
            ..DetectorConfig::default()
        }
    }

    fn batch(v: f64, n: usize) -> Vec<Vec<f64>> {
        vec![vec![v]; n]
    }

    #[test]
    fn config_validation() {
        assert!(cfg(0, 1, 1).validate().is_err());
        assert!(cfg(1, 0, 1).validate().is_err());
        assert!(cfg(1, 20, 10).validate().is_err());
        assert!(cfg(1, 20, 110).validate().is_err());
        assert!(cfg(1, 20, 100).validate().is_ok());
        assert_eq!(cfg(5, 20, 100).warm_up(), 125);
    }

    #[test]
    fn first_step_adds_d_over_l() {
        let mut det = Detector::new(cfg(1, 2, 4), 1).unwrap();
        let out = det.step(7, &batch(-1.0, 2), &batch(1.0, 2)).unwrap();
        assert!((out.d_bar - out.d / 4.0).abs() < 1e-15);
        assert_eq!(det.state().next_t(), 9);
        assert_eq!(det.state().history().len(), 3);
    }

    #[test]
    fn constant_d_keeps_d_bar_fixed() {
        // Zero weights give d = 0 for identical batches; a pre-filled buffer
        // of c with d̄ = c then changes by (0 - c)/l each step, so instead
        // feed identical batches and a zero-filled buffer: d̄ stays at c.
        let c = 0.7;
        let mut det = Detector::new(cfg(1, 1, 3), 1).unwrap();
        *det.state_mut().classifier_mut() = Mlp::zeros(1, 32);
        det.state_mut().restore(c, &[0.0; 4]).unwrap();
        for i in 0..10 {
            let t = det.state().next_t();
            let out = det.step(t, &batch(1.0, 1), &batch(1.0, 1)).unwrap();
            assert_eq!(out.d, 0.0, "step {i}");
            assert!((out.d_bar - c).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_early_or_misaligned_steps() {
        let mut det = Detector::new(cfg(1, 2, 4), 1).unwrap();
        assert!(matches!(
            det.step(6, &batch(0.0, 2), &batch(0.0, 2)),
            Err(CpdError::NotWarmedUp { t: 6, warm_up: 7 })
        ));
        assert!(matches!(
            det.step(9, &batch(0.0, 2), &batch(0.0, 2)),
            Err(CpdError::OutOfOrder { expected: 7, got: 9 })
        ));
        assert!(matches!(
            det.step(7, &batch(0.0, 1), &batch(0.0, 2)),
            Err(CpdError::BatchSize { .. })
        ));
    }

    #[test]
    fn push_emits_on_grid() {
        let mut det = Detector::new(cfg(2, 3, 6), 1).unwrap();
        let mut emitted = Vec::new();
        for i in 0..40 {
            if let Some(s) = det.push(&[(i as f64).sin()]).unwrap() {
                emitted.push(s.t);
            }
        }
        assert_eq!(emitted, vec![11, 14, 17, 20, 23, 26, 29, 32, 35, 38]);
        assert!(matches!(det.push(&[1.0, 2.0]), Err(CpdError::Dimension { .. })));
        assert!(matches!(det.push(&[f64::NAN]), Err(CpdError::NonFinite)));
    }

    #[test]
    fn push_uses_lagged_batches() {
        // Without normalisation, the batches seen by step must be
        // X(t-l-n+1..t-l) and X(t-n+1..t).
        let config = DetectorConfig {
            normalize: false,
            ..cfg(1, 2, 4)
        };
        let mut det = Detector::new(config.clone(), 1).unwrap();
        let mut twin = Detector::new(config, 1).unwrap();
        let xs: Vec<f64> = (1..=7).map(|v| v as f64).collect();
        let mut last = None;
        for &x in &xs {
            last = det.push(&[x]).unwrap().or(last);
        }
        let manual = twin
            .step(7, &[vec![2.0], vec![3.0]], &[vec![6.0], vec![7.0]])
            .unwrap();
        assert_eq!(last.unwrap(), manual);
    }

    #[test]
    fn run_checks_length() {
        let mut s = MetricSeries::new(1.0, vec!["x".into()]);
        for i in 0..10 {
            s.push_row(i as f64, vec![0.0]);
        }
        assert!(matches!(run(&s, &cfg(1, 2, 10)), Err(CpdError::SeriesTooShort { .. })));
        let pts = run(&s, &cfg(1, 2, 4)).unwrap();
        assert_eq!(pts.iter().map(|p| p.time).collect::<Vec<_>>(), vec![6.0, 8.0]);
    }
}
