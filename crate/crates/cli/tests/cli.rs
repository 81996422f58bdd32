use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;

use blinkscan::commands::synth::synthesize;
use blinkscan::config::{RunConfig, SynthConfig};
use blinkscan_core::compositor::{load_pnm, PolygonMask};
use blinkscan_core::eval::dataset::Manifest;
use serde_json::{json, Value};

fn tiny_config() -> Value {
    json!({
        "seed": 3,
        "synth": {
            "benchmark": {
                "train_frames": 60, "test_frames": 20, "train_sequences": 12, "test_sequences": 8,
                "render": { "crop_height": 12, "crop_width": 20 }
            },
            "train_videos": 3, "test_videos": 2,
            "clips": [
                { "name": "blinking", "seconds": 8, "blink_interval_s": [1.0, 2.0] },
                { "name": "blink_free", "seconds": 4, "blink_interval_s": null }
            ]
        },
        "train": {
            "cnn": { "architecture": { "block_channels": [2], "feature_dim": 8, "hidden_dim": 4 }, "epochs": 2 },
            "lrcn": { "hidden_size": 4, "epochs": 2 }
        },
        "composite": { "crop": { "out_height": 12, "out_width": 20 } }
    })
}

fn run(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_blinkscan"))
        .args(args)
        .output()
        .unwrap();
    let text = String::from_utf8_lossy(&out.stdout).into_owned() + &String::from_utf8_lossy(&out.stderr);
    (out.status.code().unwrap(), text)
}

fn run_ok(args: &[&str]) -> String {
    let (code, text) = run(args);
    assert_eq!(code, 0, "blinkscan {}: {text}", args.join(" "));
    text
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_config(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string(v).unwrap()).unwrap();
    p
}

/// A synthesized and trained tiny workspace shared by the tests.
struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
    config: PathBuf,
}

impl Fixture {
    fn manifest(&self) -> PathBuf {
        self.root.join("data/manifest.json")
    }
    fn models(&self) -> PathBuf {
        self.root.join("models")
    }
    fn clip(&self, name: &str) -> PathBuf {
        self.root.join("data/clips").join(name)
    }
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        let config = write_config(&root, "tiny.json", &tiny_config());
        run_ok(&["synth", "--config", s(&config), "--output", s(&root.join("data"))]);
        run_ok(&[
            "train",
            "--config",
            s(&config),
            "--input",
            s(&root.join("data/manifest.json")),
            "--output",
            s(&root.join("models")),
        ]);
        Fixture {
            _dir: dir,
            root,
            config,
        }
    })
}

#[test]
fn manifest_lists_every_written_file() {
    let f = fixture();
    let manifest = Manifest::load(f.manifest()).unwrap();
    let data = f.root.join("data");
    let mut on_disk = Vec::new();
    let mut stack = vec![data.clone()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                on_disk.push(p.strip_prefix(&data).unwrap().to_path_buf());
            }
        }
    }
    on_disk.sort();
    let mut listed = manifest.files.clone();
    listed.sort();
    assert_eq!(listed, on_disk);
    assert_eq!(manifest.clips.len(), 2);
    assert_eq!(manifest.seed, 3);
}

#[test]
fn default_split_is_forty_train_ten_test_videos() {
    let cfg = SynthConfig::default();
    assert_eq!((cfg.train_videos, cfg.test_videos), (40, 10));
    let small = SynthConfig {
        clips: vec![],
        ..serde_json::from_value(tiny_config()["synth"].clone()).unwrap()
    };
    let dir = tempfile::tempdir().unwrap();
    let m = synthesize(&small, 1, dir.path()).unwrap();
    let train = m.videos(blinkscan_core::eval::dataset::Split::Train).count();
    let test = m.videos(blinkscan_core::eval::dataset::Split::Test).count();
    assert_eq!((train, test), (3, 2));
}

#[test]
fn lrcn_stage_needs_a_cnn_checkpoint() {
    let f = fixture();
    let cfg = write_config(&f.root, "lrcn_only.json", &{
        let mut v = tiny_config();
        v["train"]["stages"] = json!("lrcn");
        v
    });
    let out = f.root.join("lrcn_only");
    let (code, text) = run(&[
        "train",
        "--config",
        s(&cfg),
        "--input",
        s(&f.manifest()),
        "--output",
        s(&out),
    ]);
    assert_eq!(code, 1);
    assert!(text.contains("checkpoint"), "{text}");
    run_ok(&[
        "train",
        "--config",
        s(&cfg),
        "--input",
        s(&f.manifest()),
        "--checkpoint",
        s(&f.models().join("cnn.bscp")),
        "--output",
        s(&out),
    ]);
    assert!(out.join("lrcn.bscp").exists());
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.json", &json!({ "train": { "cnn": { "epocs": 3 } } }));
    let (code, text) = run(&["synth", "--config", s(&cfg), "--output", s(&dir.path().join("x"))]);
    assert_eq!(code, 1);
    assert!(text.contains("epocs"), "{text}");
    assert!(serde_json::from_value::<RunConfig>(json!({ "sed": 1 })).is_err());
}

#[test]
fn corrupt_crop_file_reports_the_offset() {
    let f = fixture();
    let bytes = std::fs::read(f.clip("blinking").join("left.ebsq")).unwrap();
    let cut = f.root.join("cut.ebsq");
    std::fs::write(&cut, &bytes[..100]).unwrap();
    let (code, text) = run(&[
        "analyze",
        "--method",
        "ear",
        "--input",
        s(&cut),
        "--output",
        s(&f.root.join("cut_out")),
    ]);
    assert_eq!(code, 1);
    assert!(text.contains("offset 24"), "{text}");
}

#[test]
fn analyze_verdicts_and_exit_codes() {
    let f = fixture();
    let lm = |clip: &str| f.clip(clip).join("landmarks.jsonl");
    let (code, text) = run(&[
        "analyze",
        "--method",
        "ear",
        "--input",
        s(&lm("blinking")),
        "--output",
        s(&f.root.join("a1")),
    ]);
    assert_eq!(code, 0, "{text}");
    let report: Value = serde_json::from_slice(&std::fs::read(f.root.join("a1/report.json")).unwrap()).unwrap();
    assert!(report["statistics"]["blink_count"].as_u64().unwrap() >= 3);
    assert!(f.root.join("a1/series.csv").exists());

    let (code, text) = run(&[
        "analyze",
        "--method",
        "ear",
        "--input",
        s(&lm("blink_free")),
        "--output",
        s(&f.root.join("a2")),
    ]);
    assert_eq!(code, 2, "{text}");

    let (code, _) = run(&[
        "analyze",
        "--method",
        "svm",
        "--input",
        s(&lm("blinking")),
        "--output",
        s(&f.root.join("a3")),
    ]);
    assert_eq!(code, 1);
    let (code, _) = run(&[
        "analyze",
        "--method",
        "cnn",
        "--input",
        s(&lm("blinking")),
        "--output",
        s(&f.root.join("a4")),
    ]);
    assert_eq!(code, 1);

    // Two training epochs give a weak model, so only the report is checked.
    let crops = f.clip("blinking");
    let (code, text) = run(&[
        "analyze",
        "--method",
        "lrcn",
        "--checkpoint",
        s(&f.models().join("lrcn.bscp")),
        "--input",
        s(&crops.join("left.ebsq")),
        "--input",
        s(&crops.join("right.ebsq")),
        "--output",
        s(&f.root.join("a5")),
    ]);
    assert!(code == 0 || code == 2, "{text}");
    assert!(f.root.join("a5/report.json").exists());
}

#[test]
fn eval_writes_one_roc_per_method() {
    let f = fixture();
    let out = f.root.join("eval");
    run_ok(&[
        "eval",
        "--config",
        s(&f.config),
        "--input",
        s(&f.manifest()),
        "--checkpoint",
        s(&f.models().join("cnn.bscp")),
        "--checkpoint",
        s(&f.models().join("lrcn.bscp")),
        "--output",
        s(&out),
    ]);
    let summary: Value = serde_json::from_slice(&std::fs::read(out.join("eval.json")).unwrap()).unwrap();
    let results = summary["results"].as_array().unwrap();
    assert_eq!(results.len(), 3);
    for r in results {
        let csv = std::fs::read_to_string(out.join(r["roc_csv"].as_str().unwrap())).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "threshold,fpr,tpr");
        let rows: Vec<&str> = lines.collect();
        assert!(rows.len() >= 3);
        assert!(rows.first().unwrap().ends_with(",0,0"));
        assert!(rows.last().unwrap().ends_with(",1,1"));
    }
}

#[test]
fn hard_composite_only_touches_the_polygon_and_is_deterministic() {
    let f = fixture();
    let cfg = write_config(&f.root, "hard.json", &{
        let mut v = tiny_config();
        v["composite"]["splice"] = json!({ "blur_sigma": 0.0 });
        v
    });
    let (target, source) = (f.clip("blinking"), f.clip("blink_free"));
    let outs = ["c1", "c2"].map(|n| f.root.join(n));
    for out in &outs {
        run_ok(&[
            "composite",
            "--config",
            s(&cfg),
            "--input",
            s(&target),
            "--input",
            s(&source),
            "--output",
            s(out),
        ]);
    }
    let meta: Value = serde_json::from_slice(&std::fs::read(outs[0].join("composite.json")).unwrap()).unwrap();
    let frames = meta["frames"].as_array().unwrap();
    assert!(!frames.is_empty());
    for fr in frames {
        let name = format!("{:06}.pgm", fr["frame"].as_u64().unwrap());
        let m = &fr["mask"];
        let verts: Vec<[f64; 2]> = serde_json::from_value(m["vertices"].clone()).unwrap();
        let mask = PolygonMask::from_points(
            &verts,
            m["width"].as_u64().unwrap() as usize,
            m["height"].as_u64().unwrap() as usize,
        )
        .unwrap();
        let a = load_pnm(outs[0].join("frames").join(&name)).unwrap();
        let b = load_pnm(target.join("frames").join(&name)).unwrap();
        let mut inside_changed = false;
        for (k, (x, y)) in a.data().iter().zip(b.data()).enumerate() {
            if mask.raster[k] == 0 {
                assert_eq!(x, y, "{name} pixel {k}");
            } else {
                inside_changed |= x != y;
            }
        }
        assert!(inside_changed, "{name}: nothing spliced");
        assert_eq!(
            std::fs::read(outs[0].join("frames").join(&name)).unwrap(),
            std::fs::read(outs[1].join("frames").join(&name)).unwrap()
        );
    }
    for file in ["composite.json", "landmarks.jsonl", "left.ebsq", "right.ebsq"] {
        assert_eq!(
            std::fs::read(outs[0].join(file)).unwrap(),
            std::fs::read(outs[1].join(file)).unwrap(),
            "{file}"
        );
    }
    let (code, text) = run(&[
        "composite",
        "--config",
        s(&cfg),
        "--input",
        s(&target),
        "--output",
        s(&f.root.join("c3")),
    ]);
    assert_eq!(code, 1, "{text}");
}

#[test]
fn missing_output_flag_is_an_error() {
    let (code, text) = run(&["synth"]);
    assert_eq!(code, 1);
    assert!(text.contains("--output"), "{text}");
}
