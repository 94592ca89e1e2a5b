//! Scheduled degradation or breakup of a single component.

use serde::{Deserialize, Serialize};

use super::spec::check_factor;
use super::ModelError;
use crate::sim::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AnomalyKind {
    /// Effective speed, bandwidth or core speed is multiplied by `severity`.
    Degradation { severity: f64 },
    /// The component goes offline; in-flight work through it is aborted.
    Breakup,
}

impl AnomalyKind {
    pub fn label(&self) -> &'static str {
        match self {
            AnomalyKind::Degradation { .. } => "degradation",
            AnomalyKind::Breakup => "breakup",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnomalyEvent {
    pub component: String,
    pub kind: AnomalyKind,
    /// Ground-truth change point.
    pub start: SimTime,
    /// `None` leaves the component affected until the end of the run.
    pub end: Option<SimTime>,
}

impl AnomalyEvent {
    pub fn validate(&self) -> Result<(), ModelError> {
        if let Some(end) = self.end {
            if end <= self.start {
                return Err(ModelError::InvalidAnomaly(format!(
                    "end {} must be after start {}",
                    end, self.start
                )));
            }
        }
        if let AnomalyKind::Degradation { severity } = self.kind {
            check_factor(severity)?;
        }
        Ok(())
    }

    /// True while `t` lies in `[start, end)`.
    pub fn active_at(&self, t: f64) -> bool {
        t >= self.start.seconds() && self.end.is_none_or(|e| t < e.seconds())
    }

    pub fn overlaps(&self, other: &AnomalyEvent) -> bool {
        let a_end = self.end.map_or(f64::INFINITY, |e| e.seconds());
        let b_end = other.end.map_or(f64::INFINITY, |e| e.seconds());
        self.start.seconds() < b_end && other.start.seconds() < a_end
    }
}
