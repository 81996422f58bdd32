//! The JSON run configuration. Every section is optional and unknown keys
//! are rejected.

use std::path::Path;

use anyhow::{Context, Result};
use blinkscan_core::compositor::SpliceConfig;
use blinkscan_core::eval::{BenchmarkConfig, CnnTrainConfig, LrcnTrainConfig};
use blinkscan_core::geometry::CropConfig;
use blinkscan_core::pipeline::{AnalysisConfig, EarConfig};
use serde::{Deserialize, Serialize};

/// Version stamped into every JSON artifact the CLI writes.
pub const OUTPUT_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub synth: SynthConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    pub analyze: AnalyzeConfig,
    pub composite: CompositeConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClipSpec {
    pub name: String,
    pub seconds: f64,
    /// Open-eye interval range between blinks; `None` renders no blinks.
    pub blink_interval_s: Option<[f64; 2]>,
    pub blink_frames: [usize; 2],
}

impl Default for ClipSpec {
    fn default() -> Self {
        Self {
            name: "clip".into(),
            seconds: 20.0,
            blink_interval_s: Some([2.0, 6.0]),
            blink_frames: [3, 6],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub benchmark: BenchmarkConfig,
    /// Training sequences are spread over this many videos.
    pub train_videos: usize,
    pub test_videos: usize,
    pub clips: Vec<ClipSpec>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            benchmark: BenchmarkConfig::default(),
            train_videos: 40,
            test_videos: 10,
            clips: vec![
                ClipSpec {
                    name: "blinking".into(),
                    ..Default::default()
                },
                ClipSpec {
                    name: "blink_free".into(),
                    blink_interval_s: None,
                    ..Default::default()
                },
            ],
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stages {
    /// Frame classifier, then the LRCN on top of it.
    #[default]
    Both,
    Cnn,
    /// Needs a frame-classifier checkpoint.
    Lrcn,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub stages: Stages,
    pub cnn: CnnTrainConfig,
    pub lrcn: LrcnTrainConfig,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Empty means every method whose inputs are available.
    pub methods: Vec<String>,
    pub ear: EarConfig,
    /// Gaussian noise added to landmark coordinates before EAR scoring.
    pub landmark_noise_px: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzeConfig {
    pub method: String,
    pub fps: f64,
    pub analysis: AnalysisConfig,
    pub ear: EarConfig,
}

impl Default for AnalyzeConfig {
    fn default() -> Self {
        Self {
            method: "lrcn".into(),
            fps: 25.0,
            analysis: AnalysisConfig::default(),
            ear: EarConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompositeConfig {
    pub splice: SpliceConfig,
    /// Frame of the source clip whose face is pasted.
    pub source_frame: usize,
    pub fps: f64,
    pub crop: CropConfig,
}

impl Default for CompositeConfig {
    fn default() -> Self {
        Self {
            splice: SpliceConfig::default(),
            source_frame: 0,
            fps: 25.0,
            crop: CropConfig::default(),
        }
    }
}
