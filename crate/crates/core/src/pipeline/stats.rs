use serde::{Deserialize, Serialize};

use super::segment::BlinkEvent;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlinkStatistics {
    pub blink_count: usize,
    pub total_duration_s: f64,
    pub blinks_per_minute: f64,
    /// 0 when there are no blinks.
    pub mean_duration_s: f64,
    /// Longest stretch without a blink, counting the clip ends.
    pub max_blinkless_gap_s: f64,
}

pub fn blink_statistics(events: &[BlinkEvent], total_duration_s: f64) -> Result<BlinkStatistics> {
    if !(total_duration_s > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "total duration must be positive, got {total_duration_s}"
        )));
    }
    let n = events.len();
    let mean = if n == 0 {
        0.0
    } else {
        events.iter().map(|e| e.duration_s).sum::<f64>() / n as f64
    };
    let mut gap: f64 = 0.0;
    let mut last_end = 0.0;
    for e in events {
        gap = gap.max(e.start_s - last_end);
        last_end = e.end_s();
    }
    gap = gap.max(total_duration_s - last_end);
    Ok(BlinkStatistics {
        blink_count: n,
        total_duration_s,
        blinks_per_minute: 60.0 * n as f64 / total_duration_s,
        mean_duration_s: mean,
        max_blinkless_gap_s: gap,
    })
}

/// Fraction of time the eyes are closed, `(rate / 60) · mean duration`,
/// clamped to `[0, 1]`.
pub fn blink_capture_probability(rate_per_min: f64, mean_blink_s: f64) -> f64 {
    (rate_per_min / 60.0 * mean_blink_s).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rates() {
        let fps = 25.0;
        let events: Vec<_> = (0..8).map(|k| BlinkEvent::new(80 * k + 10, 80 * k + 14, fps)).collect();
        let s = blink_statistics(&events, 30.0).unwrap();
        assert_eq!(s.blinks_per_minute, 16.0);
        let none = blink_statistics(&[], 30.0).unwrap();
        assert_eq!((none.blinks_per_minute, none.max_blinkless_gap_s), (0.0, 30.0));
        let e17: Vec<_> = (0..17).map(|k| BlinkEvent::new(80 * k, 80 * k + 3, fps)).collect();
        assert_eq!(blink_statistics(&e17, 60.0).unwrap().blinks_per_minute, 17.0);
    }

    #[test]
    fn gap_includes_clip_ends() {
        let events = [BlinkEvent::new(50, 54, 25.0), BlinkEvent::new(100, 104, 25.0)];
        let s = blink_statistics(&events, 20.0).unwrap();
        assert!((s.max_blinkless_gap_s - (20.0 - 4.2)).abs() < 1e-12);
    }

    #[test]
    fn capture_probability() {
        assert_eq!(blink_capture_probability(0.0, 0.3), 0.0);
        let p = blink_capture_probability(17.0, 0.25);
        assert!((p - 17.0 / 240.0).abs() < 1e-15);
        assert_eq!(blink_capture_probability(60.0, 1.0), 1.0);
        assert_eq!(blink_capture_probability(120.0, 1.0), 1.0);
    }
}
