use std::io::Write;

use serde::{Deserialize, Serialize};

use super::segment::{segment_blinks, Anomaly, BlinkEvent, SegmentConfig};
use super::stats::{blink_capture_probability, blink_statistics, BlinkStatistics};
use super::StateSeries;
use crate::error::{Error, Result};
use crate::geometry::landmarks::EyeSide;

pub const REPORT_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub min_blinks_per_minute: f64,
    pub max_blinkless_gap_s: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            min_blinks_per_minute: 2.0,
            max_blinkless_gap_s: 15.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    AuthenticConsistent,
    Suspect,
}

/// Suspect iff the rate is strictly below the minimum or the longest gap
/// strictly exceeds the maximum.
pub fn render_verdict(stats: &BlinkStatistics, thresholds: &Thresholds) -> Verdict {
    if stats.blinks_per_minute < thresholds.min_blinks_per_minute
        || stats.max_blinkless_gap_s > thresholds.max_blinkless_gap_s
    {
        Verdict::Suspect
    } else {
        Verdict::AuthenticConsistent
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub segment: SegmentConfig,
    pub thresholds: Thresholds,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EyeReport {
    pub eye: EyeSide,
    pub events: Vec<BlinkEvent>,
    pub anomalies: Vec<Anomaly>,
    pub statistics: BlinkStatistics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForensicReport {
    pub format_version: u32,
    pub method: String,
    pub model_checksum: Option<String>,
    pub fps: f64,
    pub frame_count: usize,
    /// Events of the eye-averaged series; these drive the verdict.
    pub events: Vec<BlinkEvent>,
    pub anomalies: Vec<Anomaly>,
    pub statistics: BlinkStatistics,
    pub blink_capture_probability: f64,
    pub verdict: Verdict,
    pub thresholds: Thresholds,
    pub segmentation: SegmentConfig,
    pub per_eye: Vec<EyeReport>,
    #[serde(default)]
    pub config: serde_json::Value,
}

impl ForensicReport {
    pub fn is_suspect(&self) -> bool {
        self.verdict == Verdict::Suspect
    }
}

/// Segments each eye and the eye-averaged series, and renders the verdict
/// from the averaged one.
pub fn analyze(
    per_eye: &[(EyeSide, StateSeries)],
    fps: f64,
    config: &AnalysisConfig,
    model_checksum: Option<String>,
) -> Result<ForensicReport> {
    let series: Vec<StateSeries> = per_eye.iter().map(|(_, s)| s.clone()).collect();
    let fused = StateSeries::fuse(&series)?;
    if fused.is_empty() {
        return Err(Error::InvalidArgument("cannot analyze an empty series".into()));
    }
    let duration = fused.len() as f64 / fps;
    let mut eyes = Vec::with_capacity(per_eye.len());
    for (eye, s) in per_eye {
        let seg = segment_blinks(&s.p_closed, fps, &config.segment)?;
        eyes.push(EyeReport {
            eye: *eye,
            statistics: blink_statistics(&seg.blinks, duration)?,
            events: seg.blinks,
            anomalies: seg.anomalies,
        });
    }
    let seg = segment_blinks(&fused.p_closed, fps, &config.segment)?;
    let statistics = blink_statistics(&seg.blinks, duration)?;
    Ok(ForensicReport {
        format_version: REPORT_FORMAT_VERSION,
        method: fused.method.clone(),
        model_checksum,
        fps,
        frame_count: fused.len(),
        events: seg.blinks,
        anomalies: seg.anomalies,
        blink_capture_probability: blink_capture_probability(statistics.blinks_per_minute, statistics.mean_duration_s),
        verdict: render_verdict(&statistics, &config.thresholds),
        statistics,
        thresholds: config.thresholds,
        segmentation: config.segment,
        per_eye: eyes,
        config: serde_json::Value::Null,
    })
}

/// CSV with columns `frame_index, timestamp_s, p_closed`. Timestamps
/// default to `frame_index / fps`.
pub fn write_series_csv(writer: impl Write, series: &StateSeries, fps: f64, timestamps: Option<&[f64]>) -> Result<()> {
    if let Some(ts) = timestamps {
        if ts.len() != series.len() {
            return Err(Error::shape(
                "series CSV",
                format!("{} timestamps for {} frames", ts.len(), series.len()),
            ));
        }
    }
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["frame_index", "timestamp_s", "p_closed"])?;
    for (t, p) in series.p_closed.iter().enumerate() {
        let ts = timestamps.map_or(t as f64 / fps, |ts| ts[t]);
        w.write_record([t.to_string(), ts.to_string(), p.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats(rate: f64, gap: f64) -> BlinkStatistics {
        BlinkStatistics {
            blink_count: 0,
            total_duration_s: 30.0,
            blinks_per_minute: rate,
            mean_duration_s: 0.2,
            max_blinkless_gap_s: gap,
        }
    }

    #[test]
    fn verdict_rules() {
        let t = Thresholds::default();
        assert_eq!(render_verdict(&stats(0.0, 30.0), &t), Verdict::Suspect);
        assert_eq!(render_verdict(&stats(16.0, 6.0), &t), Verdict::AuthenticConsistent);
        assert_eq!(render_verdict(&stats(2.0, 15.0), &t), Verdict::AuthenticConsistent);
        assert_eq!(render_verdict(&stats(16.0, 15.5), &t), Verdict::Suspect);
    }

    #[test]
    fn fusion_averages_eyes() {
        let l = StateSeries::new("ear", vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let r = StateSeries::new("ear", vec![0.0, 1.0, 0.0, 0.0]).unwrap();
        let rep = analyze(
            &[(EyeSide::Left, l), (EyeSide::Right, r)],
            25.0,
            &AnalysisConfig::default(),
            None,
        )
        .unwrap();
        assert_eq!(rep.events.len(), 1);
        assert_eq!((rep.events[0].start_frame, rep.events[0].end_frame), (1, 2));
        assert_eq!(rep.per_eye[1].events[0].end_frame, 1);
        assert_eq!(rep.per_eye[0].events[0].end_frame, 2);
        assert!(!rep.is_suspect());
    }

    #[test]
    fn csv_columns() {
        let s = StateSeries::new("cnn", vec![0.25, 0.5]).unwrap();
        let mut buf = Vec::new();
        write_series_csv(&mut buf, &s, 4.0, None).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "frame_index,timestamp_s,p_closed\n0,0,0.25\n1,0.25,0.5\n"
        );
    }
}
