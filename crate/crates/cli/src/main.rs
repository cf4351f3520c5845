//! `hybridsplat`: oracle synthesis, scene generation, reports, rendering,
//! evaluation and trajectory planning.

mod commands;
mod output;
mod viz;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Exit code for rejected inputs.
const EXIT_VALIDATION: u8 = 2;
/// Exit code for failures after validation.
const EXIT_RUNTIME: u8 = 1;

#[derive(Debug, Parser)]
#[command(name = "hybridsplat", version, about = "Hybrid static/dynamic 4D Gaussian scenes")]
struct Cli {
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, env = "HYBRIDSPLAT_THREADS", default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render an oracle scene spec into a reference bundle directory.
    Synth(SynthArgs),
    /// Build a hybrid scene from a reference bundle.
    Generate(GenerateArgs),
    /// Write per-frame score/label overlays and the per-Gaussian sidecar.
    DecomposeReport(DecomposeArgs),
    /// Render a scene along a trajectory into a PNG sequence.
    Render(RenderArgs),
    /// PSNR/SSIM on held-out frames, plus decomposition IoU when masks exist.
    Eval(EvalArgs),
    /// Collision costs along a trajectory and a lateral-offset refinement.
    Plan(PlanArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Oracle scene spec (JSON).
    pub spec: PathBuf,
    /// Seed for jitter sampling.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Bundle directory to create or replace.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Reference bundle directory.
    #[arg(long)]
    pub bundle: PathBuf,
    /// Pipeline configuration (JSON); defaults apply to omitted fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Scene file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Stage metrics JSON (default: `<out>.metrics.json`).
    #[arg(long)]
    pub metrics: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    #[arg(long)]
    pub scene: PathBuf,
    #[arg(long)]
    pub bundle: PathBuf,
    /// Report directory to create or replace.
    #[arg(long)]
    pub out: PathBuf,
    /// Score threshold used for the threshold-only labels.
    #[arg(long, default_value_t = 0.5)]
    pub tau: f64,
    /// Pipeline configuration supplying the clustering parameters.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub scene: PathBuf,
    /// Trajectory JSON: an array of poses with `t`.
    #[arg(long)]
    pub traj: PathBuf,
    /// Output directory for `%04d.png`.
    #[arg(long)]
    pub out: PathBuf,
    /// Background color as `r,g,b` in [0, 1].
    #[arg(long, default_value = "0,0,0")]
    pub background: String,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub scene: PathBuf,
    #[arg(long)]
    pub bundle: PathBuf,
    /// Comma-separated held-out frame indices, e.g. "3,9,15".
    #[arg(long)]
    pub holdout: String,
    /// Metrics report JSON.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "0,0,0")]
    pub background: String,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[arg(long)]
    pub scene: PathBuf,
    #[arg(long)]
    pub traj: PathBuf,
    /// Adjusted trajectory plus per-step costs (JSON).
    #[arg(long)]
    pub out: PathBuf,
    /// Planner parameters (JSON); defaults apply to omitted fields.
    #[arg(long)]
    pub params: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_VALIDATION } else { 0 });
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
        log::error!("thread pool: {e}");
        return ExitCode::from(EXIT_RUNTIME);
    }
    let result = match &cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Generate(a) => commands::generate(a),
        Command::DecomposeReport(a) => commands::decompose_report(a),
        Command::Render(a) => commands::render(a),
        Command::Eval(a) => commands::eval(a),
        Command::Plan(a) => commands::plan(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if commands::is_validation(&e) { EXIT_VALIDATION } else { EXIT_RUNTIME })
        }
    }
}
