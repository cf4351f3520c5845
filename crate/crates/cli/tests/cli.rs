//! End-to-end runs of the `hybridsplat` binary.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hybrid_splat_oracle::presets::moving_sphere;
use serde_json::Value;

fn hs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hybridsplat"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = hs(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(p: &Path) -> Value {
    serde_json::from_slice(&fs::read(p).unwrap()).unwrap()
}

/// Relative path → bytes for every file under `root`.
fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for e in fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

fn rgb(p: &Path) -> Vec<f64> {
    image::open(p).unwrap().to_rgb8().into_raw().into_iter().map(|v| v as f64 / 255.0).collect()
}

fn psnr(a: &[f64], b: &[f64]) -> f64 {
    let mse = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64;
    10.0 * (1.0 / mse).log10()
}

const CONFIG: &str = r#"{
  "prepass_iters": 60,
  "hybrid_iters": 60,
  "subsample_stride": 2,
  "holdout_frames": [2],
  "deform": { "hidden_dims": [16, 16] }
}"#;

/// Oracle bundle, config and generated scene in a fresh directory.
struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let spec = moving_sphere(32, 32, 6, 0.12);
        fs::write(dir.path().join("spec.json"), serde_json::to_string_pretty(&spec).unwrap()).unwrap();
        fs::write(dir.path().join("config.json"), CONFIG).unwrap();
        let f = Fixture { dir };
        ok(&["synth", s(&f.p("spec.json")), "--seed", "1", "--out", s(&f.p("bundle"))]);
        ok(&["generate", "--bundle", s(&f.p("bundle")), "--config", s(&f.p("config.json")), "--out", s(&f.p("scene.hspl"))]);
        f
    }

    fn p(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }
}

#[test]
fn full_pipeline() {
    let f = Fixture::new();
    assert!(f.p("bundle/meta.json").is_file());
    assert_eq!(fs::read_dir(f.p("bundle/frames")).unwrap().count(), 6);
    let metrics = json(&f.p("scene.hspl.metrics.json"));
    let stages = metrics["stages"].as_array().unwrap();
    assert_eq!(stages.len(), 2);
    assert_eq!(metrics["training_frames"], serde_json::json!([0, 1, 3, 4, 5]));

    // Rendering the reference poses reproduces the logged training PSNR.
    let poses = f.p("bundle/poses.json");
    ok(&["render", "--scene", s(&f.p("scene.hspl")), "--traj", s(&poses), "--out", s(&f.p("renders"))]);
    assert!(f.p("renders/manifest.json").is_file());
    let train = [0usize, 1, 3, 4, 5];
    let mean: f64 = train
        .iter()
        .map(|i| psnr(&rgb(&f.p(&format!("renders/{i:04}.png"))), &rgb(&f.p(&format!("bundle/frames/{i:04}.png")))))
        .sum::<f64>()
        / train.len() as f64;
    let logged = stages[1]["train_psnr"].as_f64().unwrap();
    assert!((mean - logged).abs() <= 0.01, "rendered {mean} vs logged {logged}");

    ok(&["eval", "--scene", s(&f.p("scene.hspl")), "--bundle", s(&f.p("bundle")), "--holdout", "2", "--out", s(&f.p("eval.json"))]);
    let report = json(&f.p("eval.json"));
    assert_eq!(report["per_frame"].as_array().unwrap().len(), 1);
    assert!(report["summary"]["mean_psnr"].as_f64().unwrap() > 10.0);
    assert!(report["summary"]["decomposition_iou"].is_f64());

    ok(&["plan", "--scene", s(&f.p("scene.hspl")), "--traj", s(&poses), "--out", s(&f.p("plan.json"))]);
    let plan = json(&f.p("plan.json"));
    assert!(plan["final_total"].as_f64().unwrap() <= plan["initial_total"].as_f64().unwrap());
    assert_eq!(plan["trajectory"].as_array().unwrap().len(), 6);
    ok(&["render", "--scene", s(&f.p("scene.hspl")), "--traj", s(&f.p("plan.json")), "--out", s(&f.p("planned"))]);
    assert!(f.p("planned/0005.png").is_file());

    ok(&["decompose-report", "--scene", s(&f.p("scene.hspl")), "--bundle", s(&f.p("bundle")), "--out", s(&f.p("report"))]);
    for rel in ["scores/0000.png", "labels/0005.png", "decomposition.json", "manifest.json"] {
        assert!(f.p("report").join(rel).is_file(), "{rel} missing");
    }
    let dec = json(&f.p("report/decomposition.json"));
    let n = dec["static_count"].as_u64().unwrap() + dec["dynamic_count"].as_u64().unwrap();
    assert_eq!(dec["gaussians"].as_array().unwrap().len() as u64, n);
}

#[test]
fn commands_are_idempotent() {
    let f = Fixture::new();
    ok(&["synth", s(&f.p("spec.json")), "--seed", "1", "--out", s(&f.p("bundle2"))]);
    assert_eq!(tree(&f.p("bundle")), tree(&f.p("bundle2")));

    ok(&["--threads", "2", "generate", "--bundle", s(&f.p("bundle")), "--config", s(&f.p("config.json")), "--out", s(&f.p("scene2.hspl"))]);
    assert_eq!(fs::read(f.p("scene.hspl")).unwrap(), fs::read(f.p("scene2.hspl")).unwrap());
    assert_eq!(fs::read(f.p("scene.hspl.metrics.json")).unwrap(), fs::read(f.p("scene2.hspl.metrics.json")).unwrap());

    let poses = f.p("bundle/poses.json");
    for _ in 0..2 {
        ok(&["render", "--scene", s(&f.p("scene.hspl")), "--traj", s(&poses), "--out", s(&f.p("r1"))]);
    }
    ok(&["render", "--scene", s(&f.p("scene2.hspl")), "--traj", s(&poses), "--out", s(&f.p("r2"))]);
    assert_eq!(tree(&f.p("r1")), tree(&f.p("r2")));

    for out in ["e1.json", "e2.json"] {
        ok(&["eval", "--scene", s(&f.p("scene.hspl")), "--bundle", s(&f.p("bundle")), "--holdout", "2,4", "--out", s(&f.p(out))]);
    }
    assert_eq!(fs::read(f.p("e1.json")).unwrap(), fs::read(f.p("e2.json")).unwrap());

    for out in ["p1.json", "p2.json"] {
        ok(&["plan", "--scene", s(&f.p("scene.hspl")), "--traj", s(&poses), "--out", s(&f.p(out))]);
    }
    assert_eq!(fs::read(f.p("p1.json")).unwrap(), fs::read(f.p("p2.json")).unwrap());

    for out in ["d1", "d2"] {
        ok(&["decompose-report", "--scene", s(&f.p("scene.hspl")), "--bundle", s(&f.p("bundle")), "--out", s(&f.p(out))]);
    }
    assert_eq!(tree(&f.p("d1")), tree(&f.p("d2")));
}

#[test]
fn empty_holdout_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("eval.json");
    let r = hs(&["eval", "--scene", "scene.hspl", "--bundle", "bundle", "--holdout", "", "--out", s(&out)]);
    assert_eq!(code(&r), 2);
    assert!(!out.exists());
}

#[test]
fn unknown_flags_fail() {
    assert_eq!(code(&hs(&["render", "--scene", "a", "--traj", "b", "--out", "c", "--bogus"])), 2);
    assert_eq!(code(&hs(&["frobnicate"])), 2);
}

#[test]
fn help_lists_every_flag() {
    let cases: [(&str, &[&str]); 6] = [
        ("synth", &["--seed", "--out"]),
        ("generate", &["--bundle", "--config", "--out", "--metrics"]),
        ("decompose-report", &["--scene", "--bundle", "--out", "--tau", "--config"]),
        ("render", &["--scene", "--traj", "--out", "--background"]),
        ("eval", &["--scene", "--bundle", "--holdout", "--out", "--background"]),
        ("plan", &["--scene", "--traj", "--out", "--params"]),
    ];
    for (cmd, flags) in cases {
        let out = hs(&[cmd, "--help"]);
        assert_eq!(code(&out), 0);
        let text = String::from_utf8(out.stdout).unwrap();
        for flag in flags.iter().chain(&["--threads"]) {
            assert!(text.contains(flag), "{cmd} --help lacks {flag}");
        }
    }
}

#[test]
fn missing_inputs_are_validation_errors() {
    let dir = tempfile::tempdir().unwrap();
    let r = hs(&["render", "--scene", s(&dir.path().join("none.hspl")), "--traj", "t.json", "--out", s(&dir.path().join("out"))]);
    assert_eq!(code(&r), 2);
    assert!(!dir.path().join("out").exists());
    let r = hs(&["synth", s(&dir.path().join("none.json")), "--out", s(&dir.path().join("b"))]);
    assert_eq!(code(&r), 2);
}

#[test]
fn corrupt_scene_is_rejected_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("bad.hspl");
    fs::write(&scene, b"HSPL garbage").unwrap();
    fs::write(dir.path().join("t.json"), "[]").unwrap();
    let out = dir.path().join("out");
    let r = hs(&["render", "--scene", s(&scene), "--traj", s(&dir.path().join("t.json")), "--out", s(&out)]);
    assert_eq!(code(&r), 2);
    assert!(fs::read_dir(dir.path()).unwrap().all(|e| !e.unwrap().file_name().to_string_lossy().starts_with('.')));
    assert!(!out.exists());
}

#[test]
fn foreign_output_directory_is_kept() {
    let f = Fixture::new();
    let foreign = f.p("mine");
    fs::create_dir(&foreign).unwrap();
    fs::write(foreign.join("notes.txt"), "keep").unwrap();
    let r = hs(&["render", "--scene", s(&f.p("scene.hspl")), "--traj", s(&f.p("bundle/poses.json")), "--out", s(&foreign)]);
    assert_eq!(code(&r), 2);
    assert_eq!(fs::read_to_string(foreign.join("notes.txt")).unwrap(), "keep");
}
