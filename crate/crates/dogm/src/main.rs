//! Thin CLI over the library pipeline.

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use dogm::pipeline::{ArtifactPolicy, Mode, RunConfigFile, RunSettings};

#[derive(Parser)]
#[command(name = "dogm", version, about = "Dynamic occupancy grid mapping pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario through the pipeline and write artifacts.
    Run(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Run configuration JSON; flags below override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Scenario JSON path or a built-in name (braking, crossing,
    /// static_scene, mixed_roc, ghost_storm, intersection, urban_lead).
    #[arg(long)]
    scenario: Option<String>,
    /// Sensing pipeline: radar, lidar, or both.
    #[arg(long)]
    mode: Option<String>,
    /// Master seed; defaults to the scenario's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for the artifact tree.
    #[arg(long)]
    out: Option<String>,
    /// Worker threads; never changes outputs, only wall time.
    #[arg(long)]
    threads: Option<usize>,
    /// Render policy: none, keyframes, or all.
    #[arg(long)]
    render: Option<String>,
    /// Parameter override file (partial JSON keeps remaining defaults).
    #[arg(long)]
    params: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => match run(args) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(e.exit_code() as u8)
            }
        },
    }
}

fn run(args: RunArgs) -> Result<(), dogm::PipelineError> {
    let config = match &args.config {
        Some(path) => RunConfigFile::from_file(path)?,
        None => RunConfigFile::default(),
    };
    let mode = match args.mode.as_deref() {
        None => None,
        Some(s) => Some(Mode::parse(s).ok_or_else(|| config_err(format!("unknown mode `{s}`")))?),
    };
    let render = match args.render.as_deref() {
        None => None,
        Some(s) => Some(
            ArtifactPolicy::parse(s)
                .ok_or_else(|| config_err(format!("unknown render policy `{s}`")))?,
        ),
    };
    let settings = RunSettings::resolve(
        config,
        args.scenario.as_deref(),
        mode,
        args.seed,
        args.out.as_deref(),
        args.threads,
        render,
        args.params.as_deref(),
    )?;
    let reports = dogm::run_pipeline(&settings)?;
    for r in &reports {
        println!(
            "{} [{}] seed {}: {} frames in {:.2} s",
            r.scenario, r.modality, r.seed, r.frames, r.runtime_s
        );
        match &r.velocity {
            Some(v) => println!(
                "  velocity error: mse {:.4} (m/s)^2, rms {:.4} m/s over {} frames",
                v.mse, v.rms, v.frames_used
            ),
            None => println!("  velocity error: undefined (no labeled mover frames)"),
        }
        if let Some(auc) = r.auc {
            println!("  static/dynamic AUC: {auc:.4}");
        }
        if let Some(c) = r.consistency_fraction {
            println!(
                "  consistency: {:.1}% of {} defined frames",
                c * 100.0,
                r.defined_frames
            );
        }
        println!(
            "  mass audit (max |sum-1|): instant {:.2e}, suppressed {:.2e}, combined {:.2e}",
            r.mass_audit.instant, r.mass_audit.suppressed, r.mass_audit.combined
        );
    }
    if reports.len() == 2 {
        if let (Some(radar), Some(lidar)) = (&reports[0].velocity, &reports[1].velocity) {
            if radar.rms > 0.0 {
                println!(
                    "comparison: lidar/radar rms ratio {:.3}",
                    lidar.rms / radar.rms
                );
            }
        }
    }
    println!("artifacts: {}", settings.out.display());
    Ok(())
}

fn config_err(reason: String) -> dogm::PipelineError {
    dogm::PipelineError::Config(dogm::ConfigError::Invalid {
        path: "flags".into(),
        reason,
    })
}
