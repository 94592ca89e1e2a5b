//! Cross-entropy loss and the KL-style dissimilarity score between a
//! reference mini-batch and a test mini-batch.
//!
//! With `f` the clipped classifier output and `n` the batch size:
//!
//! ```text
//! L = -(1/n) Σ_ref log(1 - f) - (1/n) Σ_test log f
//! D =  (1/n) Σ_ref log((1 - f)/f) + (1/n) Σ_test log(f/(1 - f))
//! ```

use super::classifier::ProbabilisticClassifier;

/// Output clipping bound: probabilities live in `[EPS, 1 - EPS]`.
pub const EPS: f64 = 1e-6;

pub fn clip(p: f64) -> f64 {
    p.clamp(EPS, 1.0 - EPS)
}

/// `log(f / (1 - f))` of the clipped output; the density-ratio estimate is
/// its exponential.
pub fn log_ratio<C: ProbabilisticClassifier + ?Sized>(clf: &C, x: &[f64]) -> f64 {
    let f = clip(clf.prob(x));
    f.ln() - (1.0 - f).ln()
}

/// Estimated density ratio `w(X) = f / (1 - f)`.
pub fn density_ratio<C: ProbabilisticClassifier + ?Sized>(clf: &C, x: &[f64]) -> f64 {
    let f = clip(clf.prob(x));
    f / (1.0 - f)
}

pub fn loss<C: ProbabilisticClassifier + ?Sized>(clf: &C, reference: &[Vec<f64>], test: &[Vec<f64>]) -> f64 {
    let r: f64 = reference.iter().map(|x| -(1.0 - clip(clf.prob(x))).ln()).sum();
    let t: f64 = test.iter().map(|x| -clip(clf.prob(x)).ln()).sum();
    r / reference.len() as f64 + t / test.len() as f64
}

pub fn score<C: ProbabilisticClassifier + ?Sized>(clf: &C, reference: &[Vec<f64>], test: &[Vec<f64>]) -> f64 {
    // Both sums run over the same per-window log-odds, so identical batches
    // cancel exactly and swapping the batches flips the sign exactly.
    let r: f64 = reference.iter().map(|x| log_ratio(clf, x)).sum();
    let t: f64 = test.iter().map(|x| log_ratio(clf, x)).sum();
    t / test.len() as f64 - r / reference.len() as f64
}
