use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use autotrack_core::bench::{self, synth};
use autotrack_core::config::{load_config, TrackerConfig, Variant};
use autotrack_core::error::Result;
use autotrack_core::pose::{self, PoseRecord, PoseTracker};
use autotrack_core::tracker::FrameTrace;

#[derive(Parser)]
#[command(
    name = "autotrack",
    version,
    about = "Correlation-filter tracking with automatic spatio-temporal regularization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Track one sequence (OPE) and report its scores.
    Track {
        /// Sequence directory containing img/ and groundtruth_rect.txt.
        seq_dir: PathBuf,
        /// Tracker variant to run.
        #[arg(long, value_parser = parse_variant)]
        variant: Option<Variant>,
        /// key=value config file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Write a JSONL trace, one object per frame.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Evaluate every sequence directory under a dataset root.
    Bench {
        dataset_dir: PathBuf,
        /// Write the JSON report here.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Write per-threshold curves as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long, value_parser = parse_variant)]
        variant: Option<Variant>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Aggregate by pooling frames instead of averaging sequences.
        #[arg(long)]
        per_frame_pooling: bool,
    },
    /// Render a synthetic sequence from a JSON spec.
    Synth {
        spec: PathBuf,
        out_dir: PathBuf,
    },
    /// Four-marker camera-pose estimation over a sequence.
    Pose {
        seq_dir: PathBuf,
        markers: PathBuf,
        camera: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, value_parser = parse_variant)]
        variant: Option<Variant>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn parse_variant(s: &str) -> std::result::Result<Variant, String> {
    Variant::parse(s)
        .ok_or_else(|| format!("unknown variant {s:?} (expected autotrack|strcf|asr|atr)"))
}

fn effective_config(config: Option<&Path>, variant: Option<Variant>) -> Result<TrackerConfig> {
    let mut cfg = load_config(config)?;
    if let Some(v) = variant {
        cfg = cfg.configure_variant(v);
    }
    Ok(cfg)
}

/// The stable JSONL trace schema.
#[derive(serde::Serialize)]
struct TraceRow {
    frame: usize,
    bbox: [f64; 4],
    pi_norm: f64,
    theta: f64,
    learned: bool,
}

impl From<&FrameTrace> for TraceRow {
    fn from(t: &FrameTrace) -> Self {
        TraceRow {
            frame: t.frame,
            bbox: [t.bbox.x, t.bbox.y, t.bbox.w, t.bbox.h],
            pi_norm: t.pi_norm,
            theta: t.theta,
            learned: t.learned,
        }
    }
}

fn cmd_track(
    seq_dir: &Path,
    variant: Option<Variant>,
    config: Option<&Path>,
    trace_out: Option<&Path>,
) -> Result<bool> {
    let cfg = effective_config(config, variant)?;
    let seq = bench::load_sequence(seq_dir)?;
    let report = bench::run_ope(&seq, &cfg);
    if let Some(path) = trace_out {
        let mut text = String::new();
        for t in &report.trace {
            text.push_str(&serde_json::to_string(&TraceRow::from(t))?);
            text.push('\n');
        }
        std::fs::write(path, text)?;
    }
    println!(
        "{}: frames={} precision@20={:.4} auc={:.4} fps={:.1}{}",
        report.name,
        report.frames,
        report.precision_at_20,
        report.auc,
        report.fps,
        if report.failed { " FAILED" } else { "" }
    );
    if let Some(err) = &report.error {
        eprintln!("error: {err}");
    }
    Ok(!report.failed)
}

fn cmd_bench(
    dataset_dir: &Path,
    report_out: Option<&Path>,
    csv_out: Option<&Path>,
    variant: Option<Variant>,
    config: Option<&Path>,
    per_frame_pooling: bool,
) -> Result<bool> {
    let cfg = effective_config(config, variant)?;
    let report = bench::run_benchmark(dataset_dir, &cfg, per_frame_pooling)?;
    for seq in &report.sequences {
        println!(
            "{}: frames={} precision@20={:.4} auc={:.4} fps={:.1}{}",
            seq.name,
            seq.frames,
            seq.precision_at_20,
            seq.auc,
            seq.fps,
            if seq.failed { " FAILED" } else { "" }
        );
    }
    println!(
        "aggregate ({}): precision@20={:.4} auc={:.4} fps={:.1}",
        report.aggregate.mode,
        report.aggregate.precision_at_20,
        report.aggregate.auc,
        report.aggregate.fps
    );
    if let Some(path) = report_out {
        std::fs::write(path, serde_json::to_string_pretty(&report)?)?;
    }
    if let Some(path) = csv_out {
        std::fs::write(path, bench::report_csv(&report))?;
    }
    Ok(report.sequences.iter().all(|s| !s.failed))
}

fn cmd_synth(spec_path: &Path, out_dir: &Path) -> Result<bool> {
    let spec: synth::SynthSpec = serde_json::from_str(&std::fs::read_to_string(spec_path)?)?;
    let seq = synth::make_synthetic(&spec);
    synth::write_synthetic(&seq, out_dir)?;
    println!(
        "{}: wrote {} frames to {}",
        spec.name,
        seq.frames.len(),
        out_dir.display()
    );
    Ok(true)
}

#[derive(serde::Serialize)]
struct PoseReport {
    config: std::collections::BTreeMap<String, String>,
    camera: pose::CameraIntrinsics,
    markers: pose::MarkerConfig,
    mean_rmse_px: f64,
    frames: Vec<PoseRecord>,
}

fn cmd_pose(
    seq_dir: &Path,
    markers_path: &Path,
    camera_path: &Path,
    report_out: Option<&Path>,
    variant: Option<Variant>,
    config: Option<&Path>,
) -> Result<bool> {
    let cfg = effective_config(config, variant)?;
    let markers = pose::MarkerConfig::from_file(markers_path)?;
    let camera = pose::load_camera(camera_path)?;
    let seq = bench::load_sequence(seq_dir)?;

    let first = bench::load_frame(&seq.frame_paths[0])?;
    let mut pipeline = PoseTracker::init(&first, markers.clone(), camera, &cfg)?;
    let mut records = Vec::with_capacity(seq.len());
    let initial = pipeline.estimate_initial()?;
    records.push(PoseRecord::from_estimate(1, &initial));
    for (i, path) in seq.frame_paths.iter().enumerate().skip(1) {
        let frame = bench::load_frame(path)?;
        let est = pipeline.step(&frame)?;
        records.push(PoseRecord::from_estimate(i + 1, &est));
    }
    let mean_rmse = records.iter().map(|r| r.rmse_px).sum::<f64>() / records.len().max(1) as f64;
    println!(
        "{}: frames={} mean reprojection rmse={:.4} px",
        seq.name,
        records.len(),
        mean_rmse
    );
    if let Some(path) = report_out {
        let report = PoseReport {
            config: cfg.echo(),
            camera,
            markers,
            mean_rmse_px: mean_rmse,
            frames: records,
        };
        std::fs::write(path, serde_json::to_string_pretty(&report)?)?;
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Track {
            seq_dir,
            variant,
            config,
            trace,
        } => cmd_track(seq_dir, *variant, config.as_deref(), trace.as_deref()),
        Command::Bench {
            dataset_dir,
            report,
            csv,
            variant,
            config,
            per_frame_pooling,
        } => cmd_bench(
            dataset_dir,
            report.as_deref(),
            csv.as_deref(),
            *variant,
            config.as_deref(),
            *per_frame_pooling,
        ),
        Command::Synth { spec, out_dir } => cmd_synth(spec, out_dir),
        Command::Pose {
            seq_dir,
            markers,
            camera,
            report,
            variant,
            config,
        } => cmd_pose(
            seq_dir,
            markers,
            camera,
            report.as_deref(),
            *variant,
            config.as_deref(),
        ),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
