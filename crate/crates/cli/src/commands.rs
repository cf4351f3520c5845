//! Subcommand bodies. Every command validates its inputs before writing.

use std::path::Path;

use anyhow::{Context, Result};
use hybrid_splat::decomposition::{dbscan, threshold_split, DecompositionResult};
use hybrid_splat::dynamics::compose_scene_at_t;
use hybrid_splat::evaluation::{
    evaluate_frames, label_mask, optimize_trajectory, render_trajectory, scene_iou, second_difference_max, trajectory_from_records,
    trajectory_to_records, PlanParams, TrajectoryStep, LABEL_ALPHA_EPS,
};
use hybrid_splat::pipeline::{generate_scene, save_scene, scene_from_bytes, write_atomic, GenerateReport, PipelineConfig};
use hybrid_splat::raster::{render as splat, RenderOptions};
use hybrid_splat::scene::PoseRecord;
use hybrid_splat::{Bundle, Error, Scene};
use hybrid_splat_oracle::{generate_bundle, ingest_bundle, write_bundle, OracleSceneSpec};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::output::{check_parent, json_bytes, read_input, read_json, StagedDir};
use crate::viz;
use crate::{DecomposeArgs, EvalArgs, GenerateArgs, PlanArgs, RenderArgs, SynthArgs};

pub fn is_validation(e: &anyhow::Error) -> bool {
    e.chain().any(|c| c.downcast_ref::<Error>().is_some_and(Error::is_validation))
}

fn invalid(msg: impl Into<String>) -> anyhow::Error {
    Error::invalid(msg).into()
}

fn load_scene(path: &Path) -> Result<Scene> {
    let bytes = read_input(path)?;
    scene_from_bytes(&bytes).with_context(|| format!("reading scene {}", path.display()))
}

fn load_bundle(path: &Path) -> Result<Bundle> {
    ingest_bundle(path).with_context(|| format!("reading bundle {}", path.display()))
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig> {
    match path {
        None => Ok(PipelineConfig::default()),
        Some(p) => {
            let text = String::from_utf8(read_input(p)?).map_err(|_| invalid(format!("{} is not UTF-8", p.display())))?;
            Ok(PipelineConfig::from_json(&text)?)
        }
    }
}

fn parse_color(s: &str) -> Result<[f64; 3]> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| invalid(format!("background {s:?} is not r,g,b")))?;
    match v.as_slice() {
        [r, g, b] if v.iter().all(|c| (0.0..=1.0).contains(c)) => Ok([*r, *g, *b]),
        _ => Err(invalid(format!("background {s:?} must be three values in [0, 1]"))),
    }
}

/// Parses `"i,j,k"` into frame indices.
pub fn parse_holdout(s: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for tok in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let i = tok.parse::<usize>().map_err(|_| invalid(format!("holdout entry {tok:?} is not a frame index")))?;
        if !out.contains(&i) {
            out.push(i);
        }
    }
    if out.is_empty() {
        return Err(invalid("holdout list is empty"));
    }
    Ok(out)
}

/// Trajectory files hold a pose array; `plan` output (an object with a
/// `trajectory` field) is accepted too.
#[derive(Deserialize)]
#[serde(untagged)]
enum TrajectoryFile {
    Steps(Vec<PoseRecord>),
    Plan { trajectory: Vec<PoseRecord> },
}

fn load_trajectory(path: &Path) -> Result<Vec<TrajectoryStep<f64>>> {
    let records = match read_json::<TrajectoryFile>(path)? {
        TrajectoryFile::Steps(r) | TrajectoryFile::Plan { trajectory: r } => r,
    };
    if records.is_empty() {
        return Err(invalid(format!("{}: trajectory is empty", path.display())));
    }
    Ok(trajectory_from_records(&records)?)
}

pub fn synth(a: &SynthArgs) -> Result<()> {
    let text = String::from_utf8(read_input(&a.spec)?).map_err(|_| invalid("spec is not UTF-8"))?;
    let spec = OracleSceneSpec::from_json(&text).with_context(|| format!("spec {}", a.spec.display()))?;
    check_parent(&a.out)?;
    let bundle = generate_bundle(&spec, a.seed)?;
    write_bundle(&bundle, &a.out)?;
    log::info!("stage=synth frames={} size={}x{} out={}", bundle.len(), spec.width, spec.height, a.out.display());
    Ok(())
}

pub fn generate(a: &GenerateArgs) -> Result<()> {
    let config = load_config(a.config.as_deref())?;
    let bundle = load_bundle(&a.bundle)?;
    check_parent(&a.out)?;
    let metrics = a.metrics.clone().unwrap_or_else(|| {
        let mut p = a.out.clone().into_os_string();
        p.push(".metrics.json");
        p.into()
    });
    check_parent(&metrics)?;
    let (scene, report): (Scene, GenerateReport) = generate_scene(&bundle, &config)?;
    save_scene(&scene, &a.out)?;
    write_atomic(&metrics, &json_bytes(&report)?)?;
    Ok(())
}

#[derive(Serialize)]
struct DecompositionReport {
    tau: f64,
    static_count: usize,
    dynamic_count: usize,
    threshold_dynamic: usize,
    cluster_count: usize,
    decomposition_iou: Option<f64>,
    gaussians: Vec<hybrid_splat::decomposition::SidecarEntry>,
}

pub fn decompose_report(a: &DecomposeArgs) -> Result<()> {
    if !(0.0..=1.0).contains(&a.tau) {
        return Err(invalid("tau must be in [0, 1]"));
    }
    let config = load_config(a.config.as_deref())?;
    let scene = load_scene(&a.scene)?;
    let bundle = load_bundle(&a.bundle)?;
    let (h, w) = bundle.dims();
    if bundle.frames.iter().any(|f| f.pose.width != w || f.pose.height != h) {
        return Err(invalid("bundle frames differ in size"));
    }
    let mut out = StagedDir::new(&a.out)?;

    // Canonical order everywhere: static block, then dynamic block.
    let all: Vec<_> = scene.static_gaussians.iter().chain(&scene.dynamic_gaussians).cloned().collect();
    let ns = scene.static_gaussians.len();
    let scores: Vec<f64> = all.iter().map(|g| g.dynamic_score.clamp(0.0, 1.0)).collect();
    let grouped: Vec<bool> = (0..all.len()).map(|i| i >= ns).collect();
    let (clusters, cluster_count) = dbscan(&all, scene.scene_center, scene.scene_scale, &config.clustering)?;
    let result = DecompositionResult {
        threshold_labels: threshold_split(&scores, a.tau),
        scores: scores.clone(),
        grouped_labels: grouped.clone(),
        cluster_ids: clusters,
    };

    let opts = RenderOptions::default().with_payload(true);
    for (i, frame) in bundle.frames.iter().enumerate() {
        let (snap, _) = compose_scene_at_t(&scene, i as f64)?;
        let rendered = splat(&snap.clone().with_payload(scores.clone())?, &frame.pose, &opts)?;
        let s = rendered.scalar.expect("payload requested");
        let alpha = rendered.alpha;
        let eps = LABEL_ALPHA_EPS;
        let img = viz::overlay(&frame.image, &alpha, |r, c| {
            let a = alpha[[r, c]];
            viz::heat(if a > eps { s[[r, c]] / a } else { 0.0 })
        });
        out.write(&format!("scores/{i:04}.png"), &viz::png(&img)?)?;
        let mask = label_mask(snap, &grouped, &frame.pose)?;
        let cover: Array2<f64> = mask.mapv(|m| if m { 1.0 } else { 0.0 });
        let img = viz::overlay(&frame.image, &cover, |_, _| [1.0, 0.0, 0.0]);
        out.write(&format!("labels/{i:04}.png"), &viz::png(&img)?)?;
    }
    let all_frames: Vec<usize> = (0..bundle.len()).collect();
    let report = DecompositionReport {
        tau: a.tau,
        static_count: ns,
        dynamic_count: scene.dynamic_gaussians.len(),
        threshold_dynamic: result.threshold_labels.iter().filter(|l| **l).count(),
        cluster_count,
        decomposition_iou: if bundle.has_masks() { Some(scene_iou(&scene, &bundle, &all_frames)?) } else { None },
        gaussians: result.sidecar(),
    };
    out.write("decomposition.json", &json_bytes(&report)?)?;
    out.commit("decompose-report")?;
    log::info!("stage=decompose_report frames={} dynamic={} out={}", bundle.len(), report.dynamic_count, a.out.display());
    Ok(())
}

pub fn render(a: &RenderArgs) -> Result<()> {
    let bg = parse_color(&a.background)?;
    let scene = load_scene(&a.scene)?;
    let steps = load_trajectory(&a.traj)?;
    let mut out = StagedDir::new(&a.out)?;
    let frames = render_trajectory(&scene, &steps, bg)?;
    for (i, img) in frames.iter().enumerate() {
        out.write(&format!("{i:04}.png"), &viz::png(img)?)?;
    }
    out.commit("render")?;
    log::info!("stage=render frames={} out={}", frames.len(), a.out.display());
    Ok(())
}

pub fn eval(a: &EvalArgs) -> Result<()> {
    let holdout = parse_holdout(&a.holdout)?;
    let bg = parse_color(&a.background)?;
    let scene = load_scene(&a.scene)?;
    let bundle = load_bundle(&a.bundle)?;
    if let Some(&f) = holdout.iter().find(|&&f| f >= bundle.len()) {
        return Err(invalid(format!("holdout frame {f} out of range 0..{}", bundle.len())));
    }
    check_parent(&a.out)?;
    let report = evaluate_frames(&scene, &bundle, &holdout, bg)?;
    write_atomic(&a.out, &json_bytes(&report)?)?;
    log::info!(
        "stage=eval frames={} psnr={:.2} ssim={:.4} iou={}",
        holdout.len(),
        report.summary.mean_psnr,
        report.summary.mean_ssim,
        report.summary.decomposition_iou.map_or("n/a".into(), |v| format!("{v:.3}"))
    );
    Ok(())
}

#[derive(Serialize)]
struct PlanReport {
    trajectory: Vec<PoseRecord>,
    offsets: Vec<f64>,
    initial_costs: Vec<f64>,
    final_costs: Vec<f64>,
    initial_total: f64,
    final_total: f64,
    accepted_moves: usize,
    max_second_difference: f64,
}

pub fn plan(a: &PlanArgs) -> Result<()> {
    let params: PlanParams = match &a.params {
        Some(p) => read_json(p)?,
        None => PlanParams::default(),
    };
    if !(params.smoothness_bound >= 0.0 && params.collision.sigma > 0.0 && params.initial_step > 0.0 && params.min_step > 0.0) {
        return Err(invalid("plan parameters: smoothness_bound ≥ 0 and sigma, initial_step, min_step > 0 required"));
    }
    let scene = load_scene(&a.scene)?;
    let steps = load_trajectory(&a.traj)?;
    check_parent(&a.out)?;
    let res = optimize_trajectory(&scene, &steps, &params)?;
    let centers: Vec<[f64; 3]> = res.trajectory.iter().map(|s| s.pose.center()).collect();
    let report = PlanReport {
        trajectory: trajectory_to_records(&res.trajectory),
        initial_total: res.initial_costs.iter().sum(),
        final_total: res.final_costs.iter().sum(),
        accepted_moves: res.accepted_totals.len() - 1,
        max_second_difference: second_difference_max(&centers),
        offsets: res.offsets,
        initial_costs: res.initial_costs,
        final_costs: res.final_costs,
    };
    write_atomic(&a.out, &json_bytes(&report)?)?;
    log::info!(
        "stage=plan steps={} cost_before={:.4} cost_after={:.4} moves={}",
        report.trajectory.len(),
        report.initial_total,
        report.final_total,
        report.accepted_moves
    );
    Ok(())
}
