//! One-hidden-layer perceptron with a logistic output, trained by plain SGD
//! on the reference-vs-test cross-entropy.

use rand::Rng;
use rand_distr::{Distribution, Uniform};

use super::score::{clip, EPS};

/// Anything that maps a window to a probability of belonging to the test set.
pub trait ProbabilisticClassifier {
    /// Raw (unclipped) probability.
    fn prob(&self, x: &[f64]) -> f64;
}

impl<F: Fn(&[f64]) -> f64> ProbabilisticClassifier for F {
    fn prob(&self, x: &[f64]) -> f64 {
        self(x)
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Parameters are stored flat: hidden weights (row-major, `hidden x input`),
/// hidden biases, output weights, output bias.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    input: usize,
    hidden: usize,
    params: Vec<f64>,
}

impl Mlp {
    pub fn param_count(input: usize, hidden: usize) -> usize {
        hidden * input + hidden + hidden + 1
    }

    /// Glorot-uniform initialisation; biases start at zero.
    pub fn new<R: Rng + ?Sized>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let mut m = Self::zeros(input, hidden);
        let a1 = (6.0 / (input + hidden) as f64).sqrt();
        let u1 = Uniform::new_inclusive(-a1, a1).expect("finite bound");
        for w in &mut m.params[..hidden * input] {
            *w = u1.sample(rng);
        }
        let a2 = (6.0 / (hidden + 1) as f64).sqrt();
        let u2 = Uniform::new_inclusive(-a2, a2).expect("finite bound");
        let off = hidden * input + hidden;
        for w in &mut m.params[off..off + hidden] {
            *w = u2.sample(rng);
        }
        m
    }

    /// All-zero weights: outputs exactly 0.5 everywhere.
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Mlp {
            input,
            hidden,
            params: vec![0.0; Self::param_count(input, hidden)],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn forward(&self, x: &[f64], hidden_out: &mut [f64]) -> f64 {
        debug_assert_eq!(x.len(), self.input);
        let (w1, rest) = self.params.split_at(self.hidden * self.input);
        let (b1, rest) = rest.split_at(self.hidden);
        let (w2, b2) = rest.split_at(self.hidden);
        let mut z = b2[0];
        for j in 0..self.hidden {
            let row = &w1[j * self.input..(j + 1) * self.input];
            let a = b1[j] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
            let h = a.tanh();
            hidden_out[j] = h;
            z += w2[j] * h;
        }
        z
    }

    pub fn logit(&self, x: &[f64]) -> f64 {
        let mut h = vec![0.0; self.hidden];
        self.forward(x, &mut h)
    }

    /// Cross-entropy loss (reference labelled 0, test labelled 1) and its
    /// exact gradient, including the zero slope where the output is clipped.
    pub fn loss_and_grad(&self, reference: &[Vec<f64>], test: &[Vec<f64>]) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; self.params.len()];
        let mut h = vec![0.0; self.hidden];
        let mut loss = 0.0;
        let b1_off = self.hidden * self.input;
        let w2_off = b1_off + self.hidden;
        let b2_off = w2_off + self.hidden;
        for (set, label) in [(reference, 0.0), (test, 1.0)] {
            let inv_n = 1.0 / set.len() as f64;
            for x in set {
                let z = self.forward(x, &mut h);
                let p = sigmoid(z);
                let pc = clip(p);
                loss -= inv_n * if label == 1.0 { pc.ln() } else { (1.0 - pc).ln() };
                if p <= EPS || p >= 1.0 - EPS {
                    continue;
                }
                let dz = inv_n * (p - label);
                grad[b2_off] += dz;
                for j in 0..self.hidden {
                    let w2 = self.params[w2_off + j];
                    grad[w2_off + j] += dz * h[j];
                    let da = dz * w2 * (1.0 - h[j] * h[j]);
                    grad[b1_off + j] += da;
                    let row = &mut grad[j * self.input..(j + 1) * self.input];
                    for (g, v) in row.iter_mut().zip(x) {
                        *g += da * v;
                    }
                }
            }
        }
        (loss, grad)
    }

    /// One plain gradient-descent step; returns the loss before the update.
    pub fn sgd_step(&mut self, reference: &[Vec<f64>], test: &[Vec<f64>], lr: f64) -> f64 {
        let (loss, grad) = self.loss_and_grad(reference, test);
        for (p, g) in self.params.iter_mut().zip(&grad) {
            *p -= lr * g;
        }
        loss
    }
}

impl ProbabilisticClassifier for Mlp {
    fn prob(&self, x: &[f64]) -> f64 {
        sigmoid(self.logit(x))
    }
}
