use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A maximal closed-eye run, frames inclusive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlinkEvent {
    pub start_frame: usize,
    pub end_frame: usize,
    pub start_s: f64,
    pub duration_s: f64,
}

impl BlinkEvent {
    pub fn new(start_frame: usize, end_frame: usize, fps: f64) -> Self {
        Self {
            start_frame,
            end_frame,
            start_s: start_frame as f64 / fps,
            duration_s: (end_frame - start_frame + 1) as f64 / fps,
        }
    }

    pub fn end_s(&self) -> f64 {
        self.start_s + self.duration_s
    }

    pub fn frames(&self) -> usize {
        self.end_frame - self.start_frame + 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnomalyKind {
    TooShort,
    TooLong,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Anomaly {
    pub kind: AnomalyKind,
    #[serde(flatten)]
    pub event: BlinkEvent,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentConfig {
    /// Enter the closed state at `p ≥ hi`.
    pub hi: f64,
    /// Leave it at `p ≤ lo`.
    pub lo: f64,
    /// Defaults to one frame.
    pub min_duration_s: Option<f64>,
    pub max_duration_s: f64,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        Self {
            hi: 0.6,
            lo: 0.4,
            min_duration_s: None,
            max_duration_s: 0.5,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Segmentation {
    pub blinks: Vec<BlinkEvent>,
    pub anomalies: Vec<Anomaly>,
}

/// Hysteresis run extraction followed by duration gating.
pub fn segment_blinks(p_closed: &[f64], fps: f64, config: &SegmentConfig) -> Result<Segmentation> {
    if !(fps > 0.0) {
        return Err(Error::InvalidArgument(format!("fps must be positive, got {fps}")));
    }
    if !(config.lo <= config.hi) {
        return Err(Error::InvalidArgument(format!(
            "hysteresis needs lo ≤ hi, got lo {} hi {}",
            config.lo, config.hi
        )));
    }
    let mut runs = Vec::new();
    let mut start = None;
    for (t, &p) in p_closed.iter().enumerate() {
        match start {
            None if p >= config.hi => start = Some(t),
            Some(s) if p <= config.lo => {
                runs.push((s, t - 1));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push((s, p_closed.len() - 1));
    }

    let min_dur = config.min_duration_s.unwrap_or(1.0 / fps);
    let mut out = Segmentation::default();
    for (s, e) in runs {
        let event = BlinkEvent::new(s, e, fps);
        if event.duration_s < min_dur {
            out.anomalies.push(Anomaly {
                kind: AnomalyKind::TooShort,
                event,
            });
        } else if event.duration_s > config.max_duration_s {
            out.anomalies.push(Anomaly {
                kind: AnomalyKind::TooLong,
                event,
            });
        } else {
            out.blinks.push(event);
        }
    }
    Ok(out)
}
