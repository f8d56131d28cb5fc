//! `mot3d`: simulate synthetic greenhouse scenes, track detections, score
//! trajectories, calibrate the feature gate, and run full experiment grids.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use mot3d_core::association::{calibrate_feature_gate, GateConfig, DEFAULT_POS_GATE};
use mot3d_core::experiment::{run_experiment, simulate_records, ExperimentSpec, ResultTable};
use mot3d_core::io::{
    detections_from_records, labeled_features_from_records, load_config,
    read_detections_file, read_trajectories_file, trajectory_lines, trajectory_set_from_lines,
    write_jsonl_file, ParseMode, ParseWarning,
};
use mot3d_core::metrics::{evaluate, SimilarityConfig};
use mot3d_core::simgen::{order_frames, FrameOrder, OperatingPointName, SceneSpec};
use mot3d_core::tracker::{
    reindex_frames, remap_trajectory_frames, run_sequence, TrackerConfig, DEFAULT_MEAS_VAR,
    DEFAULT_PROCESS_VAR,
};

#[derive(Parser)]
#[command(name = "mot3d", version, about = "3D multi-object tracking and its synthetic benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scene: detections.jsonl and gt.jsonl.
    Simulate {
        /// TOML config with a [scene] section; defaults apply when absent.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Scene seed override.
        #[arg(long)]
        seed: Option<u64>,
        /// Detector operating point preset.
        #[arg(long, value_parser = parse_operating_point)]
        operating_point: Option<OperatingPointName>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Track a detections file and write trajectories.jsonl.
    Track {
        /// Detections JSONL.
        detections: PathBuf,
        /// Position/feature cost mixing weight in [0, 1].
        #[arg(long, default_value_t = 0.5)]
        lambda: f64,
        /// Frame presentation order.
        #[arg(long, value_parser = parse_order, default_value = "sequential")]
        order: FrameOrder,
        /// Shuffle seed for --order random.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Squared-Mahalanobis position gate.
        #[arg(long, default_value_t = DEFAULT_POS_GATE)]
        pos_gate: f64,
        /// Cosine-distance feature gate in [0, 2].
        #[arg(long, default_value_t = 0.5)]
        feat_gate: f64,
        /// Default isotropic measurement sigma for records without pos_cov, meters.
        #[arg(long, default_value_t = DEFAULT_MEAS_VAR.sqrt())]
        sigma_meas: f64,
        /// Isotropic process sigma per step, meters.
        #[arg(long, default_value_t = DEFAULT_PROCESS_VAR.sqrt())]
        sigma_process: f64,
        /// Keep only the most recent N features per track.
        #[arg(long)]
        feature_cap: Option<usize>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Reject unknown record fields instead of warning.
        #[arg(long)]
        strict: bool,
    },
    /// Score predicted trajectories against ground truth.
    Eval {
        /// Ground-truth trajectory JSONL.
        gt: PathBuf,
        /// Predicted trajectory JSONL.
        pred: PathBuf,
        /// Distance at which 3D similarity reaches zero, meters.
        #[arg(long, default_value_t = 0.05)]
        d_max: f64,
        /// Similarity threshold for the MOTA correspondence.
        #[arg(long, default_value_t = 0.5)]
        match_threshold: f64,
        /// Optional output directory for report.json and report.csv.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Reject unknown record fields instead of warning.
        #[arg(long)]
        strict: bool,
    },
    /// Calibrate the feature gate from id-labeled detections.
    CalibrateGate {
        /// Detections JSONL carrying gt_id labels.
        features: PathBuf,
        /// Reject unknown record fields instead of warning.
        #[arg(long)]
        strict: bool,
    },
    /// Run an experiment grid and write results.csv, results.json,
    /// fig6_long.csv and per-run trajectories.
    Experiment {
        /// TOML config with an [experiment] section; defaults apply when absent.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Experiment seed override.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_order(s: &str) -> Result<FrameOrder, String> {
    match s {
        "sequential" => Ok(FrameOrder::Sequential),
        "random" => Ok(FrameOrder::Random),
        other => Err(format!("unknown order \"{other}\" (sequential|random)")),
    }
}

fn parse_operating_point(s: &str) -> Result<OperatingPointName, String> {
    match s {
        "low" => Ok(OperatingPointName::Low),
        "mid" => Ok(OperatingPointName::Mid),
        "high" => Ok(OperatingPointName::High),
        other => Err(format!("unknown operating point \"{other}\" (low|mid|high)")),
    }
}

fn parse_mode(strict: bool) -> ParseMode {
    if strict {
        ParseMode::Strict
    } else {
        ParseMode::Lenient
    }
}

fn report_warnings(path: &Path, warnings: &[ParseWarning]) {
    for w in warnings {
        eprintln!("warning: {}:{}: {}", path.display(), w.line, w.message);
    }
}

fn ensure_dir(path: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(path)
        .with_context(|| format!("creating output directory {}", path.display()))
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Simulate {
            config,
            seed,
            operating_point,
            out,
        } => {
            let mut scene = match &config {
                Some(path) => load_config(path)?
                    .scene
                    .with_context(|| format!("{} has no [scene] section", path.display()))?,
                None => SceneSpec::default(),
            };
            if let Some(seed) = seed {
                scene.seed = seed;
            }
            let (records, gt) = simulate_records(&scene, operating_point)?;
            ensure_dir(&out)?;
            write_jsonl_file(&out.join("detections.jsonl"), &records)?;
            write_jsonl_file(&out.join("gt.jsonl"), &trajectory_lines(&gt))?;
            println!(
                "wrote {} detections over {} viewpoints to {}",
                records.len(),
                scene.path.n_viewpoints(),
                out.display()
            );
            Ok(())
        }
        Command::Track {
            detections,
            lambda,
            order,
            seed,
            pos_gate,
            feat_gate,
            sigma_meas,
            sigma_process,
            feature_cap,
            out,
            strict,
        } => {
            let (records, warnings) = read_detections_file(&detections, parse_mode(strict))?;
            report_warnings(&detections, &warnings);
            let config = TrackerConfig::new(
                GateConfig::new(pos_gate, feat_gate, lambda)?,
                nalgebra_identity(sigma_meas.powi(2)),
                nalgebra_identity(sigma_process.powi(2)),
                feature_cap,
            )?;
            let frames = detections_from_records(&records, &config.meas_cov_default)?;
            let trajectories = match order {
                FrameOrder::Sequential => run_sequence(&frames, &config)?.1,
                FrameOrder::Random => {
                    let shuffled = order_frames(frames, order, seed);
                    let (reindexed, originals) = reindex_frames(shuffled);
                    let (_, logical, _) = run_sequence(&reindexed, &config)?;
                    remap_trajectory_frames(logical, &originals)?
                }
            };
            ensure_dir(&out)?;
            let path = out.join("trajectories.jsonl");
            write_jsonl_file(&path, &trajectory_lines(&trajectories))?;
            println!("wrote {} trajectory records to {}", trajectories.len(), path.display());
            Ok(())
        }
        Command::Eval {
            gt,
            pred,
            d_max,
            match_threshold,
            out,
            strict,
        } => {
            let (gt_lines, gt_warnings) = read_trajectories_file(&gt, parse_mode(strict))?;
            report_warnings(&gt, &gt_warnings);
            let (pred_lines, pred_warnings) = read_trajectories_file(&pred, parse_mode(strict))?;
            report_warnings(&pred, &pred_warnings);
            let gt_set = trajectory_set_from_lines(&gt_lines)?;
            let pred_set = trajectory_set_from_lines(&pred_lines)?;
            let config = SimilarityConfig {
                d_max,
                ..Default::default()
            };
            let report = evaluate(&gt_set, &pred_set, &config, match_threshold)?;
            let json = serde_json::to_string_pretty(&report)?;
            println!("{json}");
            if let Some(out) = out {
                ensure_dir(&out)?;
                std::fs::write(out.join("report.json"), format!("{json}\n"))?;
                let csv = format!(
                    "hota,det_re,det_pr,det_a,ass_a,mota,fp,fn,idsw\n{:.2},{:.2},{:.2},{:.2},{:.2},{:.2},{},{},{}\n",
                    report.hota * 100.0,
                    report.det_re * 100.0,
                    report.det_pr * 100.0,
                    report.det_a * 100.0,
                    report.ass_a * 100.0,
                    report.mota * 100.0,
                    report.fp,
                    report.fn_,
                    report.idsw,
                );
                std::fs::write(out.join("report.csv"), csv)?;
            }
            Ok(())
        }
        Command::CalibrateGate { features, strict } => {
            let (records, warnings) = read_detections_file(&features, parse_mode(strict))?;
            report_warnings(&features, &warnings);
            let labeled = labeled_features_from_records(&records)?;
            if labeled.is_empty() {
                bail!(
                    "{} contains no gt_id-labeled records to calibrate from",
                    features.display()
                );
            }
            let gate = calibrate_feature_gate(&labeled)?;
            println!("{gate:.17}");
            Ok(())
        }
        Command::Experiment { config, seed, out } => {
            let mut spec = match &config {
                Some(path) => load_config(path)?
                    .experiment
                    .with_context(|| format!("{} has no [experiment] section", path.display()))?,
                None => ExperimentSpec::default(),
            };
            if let Some(seed) = seed {
                spec.seed = seed;
            }
            let table = run_experiment(&spec)?;
            for warning in &table.warnings {
                eprintln!("warning: {warning}");
            }
            ensure_dir(&out)?;
            std::fs::write(out.join("results.csv"), table.render_results_csv())?;
            std::fs::write(out.join("fig6_long.csv"), table.render_fig6_csv())?;
            std::fs::write(out.join("results.json"), table.to_json()? + "\n")?;
            for cell in &table.cells {
                let path = out.join(ResultTable::trajectory_file_name(&cell.key));
                write_jsonl_file(&path, &trajectory_lines(&cell.trajectories))?;
            }
            if !table.failures.is_empty() {
                for failure in &table.failures {
                    eprintln!(
                        "failed cell ({}, {}, lambda={}, subset {}): {}",
                        failure.key.order,
                        failure.key.operating_point,
                        failure.key.lambda,
                        failure.key.subset,
                        failure.message
                    );
                }
                bail!("{} experiment cell(s) failed", table.failures.len());
            }
            println!(
                "wrote {} cells and {} aggregate rows to {}",
                table.cells.len(),
                table.aggregates.len(),
                out.display()
            );
            Ok(())
        }
    }
}

fn nalgebra_identity(var: f64) -> nalgebra::Matrix3<f64> {
    nalgebra::Matrix3::identity() * var
}

// nalgebra is reached through mot3d-core's public types.
use mot3d_core::nalgebra;
