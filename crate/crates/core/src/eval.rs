//! Threshold crossings and detection-delay scoring against ground truth.

use crate::telemetry::Label;

/// Population mean plus `sigmas` standard deviations.
pub fn mean_plus_sigma(values: &[f64], sigmas: f64) -> f64 {
    if values.is_empty() {
        return f64::INFINITY;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    mean + sigmas * var.sqrt()
}

/// Times at which the score rises to or above `tau` from below. A series
/// that starts above `tau` crosses at its first point.
pub fn upward_crossings(points: &[(f64, f64)], tau: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut above = false;
    for &(t, v) in points {
        let now = v >= tau;
        if now && !above {
            out.push(t);
        }
        above = now;
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub label: Label,
    /// `None` when no crossing fell in `[t*, t* + tolerance]`.
    pub delay: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub detections: Vec<Detection>,
    /// Crossings outside every label's tolerance window.
    pub false_alarms: usize,
}

impl Report {
    pub fn missed(&self) -> usize {
        self.detections.iter().filter(|d| d.delay.is_none()).count()
    }
}

pub fn evaluate(crossings: &[f64], labels: &[Label], tolerance: f64) -> Report {
    let in_window = |c: f64, l: &Label| c >= l.t_star && c <= l.t_star + tolerance;
    let detections = labels
        .iter()
        .map(|l| Detection {
            label: l.clone(),
            delay: crossings
                .iter()
                .copied()
                .filter(|&c| in_window(c, l))
                .min_by(f64::total_cmp)
                .map(|c| c - l.t_star),
        })
        .collect();
    let false_alarms = crossings
        .iter()
        .filter(|&&c| !labels.iter().any(|l| in_window(c, l)))
        .count();
    Report {
        detections,
        false_alarms,
    }
}
