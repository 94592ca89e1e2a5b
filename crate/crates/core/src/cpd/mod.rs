//! Online change-point detection by direct density-ratio estimation with an
//! incrementally trained binary classifier.

mod classifier;
mod detector;
mod normalize;
mod score;
mod window;

use thiserror::Error;

pub use classifier::{Mlp, ProbabilisticClassifier};
pub use detector::{run, Detector, DetectorConfig, DetectorState, ScorePoint, StepOutput};
pub use normalize::RunningZScore;
pub use score::{clip, density_ratio, log_ratio, loss, score, EPS};
pub use window::{build_windows, WindowVector};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CpdError {
    #[error("invalid detector configuration: {0}")]
    InvalidConfig(String),
    #[error("series has {len} observations, need at least {needed}")]
    SeriesTooShort { len: usize, needed: usize },
    #[error("step at t={t} precedes warm-up end t={warm_up}")]
    NotWarmedUp { t: usize, warm_up: usize },
    #[error("expected step at t={expected}, got t={got}")]
    OutOfOrder { expected: usize, got: usize },
    #[error("mini-batch has {got} windows, expected {expected}")]
    BatchSize { expected: usize, got: usize },
    #[error("observation has {got} channels, expected {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("observation contains a non-finite value")]
    NonFinite,
}
