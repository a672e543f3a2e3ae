//! Batch-processing frontend for the boxgeom toolkit.
//!
//! Verbosity is controlled by the BOXGEOM_LOG environment variable
//! (error/warn/info/debug/trace). Every subcommand writes a manifest next to
//! its outputs recording the tool version, seed, arguments and input hashes.

mod cmds;
mod draw;
mod manifest;

use boxgeom::box3d::CameraCalib;
use boxgeom::dataset::SplitMode;
use boxgeom::geom::Point2;
use clap::{Parser, Subcommand, ValueEnum};
use cmds::JobConfig;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "boxgeom", version, about = "3D-bounding-box preprocessing and evaluation toolkit")]
struct Cli {
    /// Job configuration file (TOML or JSON); flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Global seed recorded in every manifest.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for record-parallel subcommands (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,

    /// Skip records that fail instead of aborting.
    #[arg(long, global = true)]
    skip_bad: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Hard,
    Medium,
}

#[derive(Clone, Copy, ValueEnum)]
enum RunMode {
    Train,
    Eval,
}

#[derive(Subcommand)]
enum Command {
    /// Unpack annotated vehicles into normalized plane images.
    Unpack {
        #[arg(long)]
        annotations: Option<PathBuf>,
        #[arg(long)]
        images_dir: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Output resolution of the unpacked image.
        #[arg(long)]
        target_size: Option<u32>,
        /// Also store view vectors in the sidecar JSON.
        #[arg(long)]
        view: bool,
        /// Also write rasterized box masks.
        #[arg(long)]
        rast: bool,
        #[arg(long, default_value_t = 128)]
        rast_size: u32,
    },
    /// Augmentation pass over unpacked images (train mode augments, eval
    /// mode passes inputs through unchanged).
    Augment {
        #[arg(long)]
        in_dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        epoch: u64,
        /// Overrides the config's mode.
        #[arg(long, value_enum)]
        mode: Option<RunMode>,
    },
    /// Estimate 3D boxes from contour maps and direction predictions.
    EstimateBb {
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long)]
        contours: PathBuf,
        /// Direction-bin predictions (JSONL).
        #[arg(long)]
        bins: Option<PathBuf>,
        /// Exact direction angles (JSONL), e.g. from gt-directions.
        #[arg(long)]
        gt_angles: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Write debug overlays (annotated box green, estimated red).
        #[arg(long)]
        overlay: Option<PathBuf>,
        #[arg(long)]
        images_dir: Option<PathBuf>,
        /// Contour acceptance threshold.
        #[arg(long, default_value_t = boxgeom::estimate::DEFAULT_CONTOUR_THRESHOLD)]
        threshold: f32,
    },
    /// Emit the direction-angle training file from annotated boxes.
    GtDirections {
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a camera-disjoint train/test split.
    MakeSplits {
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long, value_enum)]
        mode: ModeArg,
        #[arg(long)]
        out: PathBuf,
        /// Fraction of cameras assigned to training.
        #[arg(long, default_value_t = 0.5)]
        train_frac: f64,
    },
    /// Dataset statistics (bbox sizes, class counts, viewpoint histograms).
    Stats {
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        focal: Option<f64>,
        #[arg(long)]
        px: Option<f64>,
        #[arg(long)]
        py: Option<f64>,
    },
    /// Check annotation invariants and report corpus counts.
    Validate {
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Image- and track-level classification accuracy.
    EvalClassification {
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long)]
        split: PathBuf,
        #[arg(long)]
        probs: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Same-type verification: PR curve and average precision.
    EvalVerification {
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long)]
        split: PathBuf,
        #[arg(long)]
        feats: Option<PathBuf>,
        #[arg(long)]
        feats_bxt: Option<PathBuf>,
        #[arg(long)]
        feats_ids: Option<PathBuf>,
        /// Number of track pairs to sample.
        #[arg(long, default_value_t = 10_000)]
        pairs: usize,
        #[arg(long)]
        out: PathBuf,
        /// Optional PR-curve plot (PNG).
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Accuracy improvement binned by train/test viewpoint difference.
    EvalViewpointGap {
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long)]
        split: PathBuf,
        #[arg(long)]
        preds_base: PathBuf,
        #[arg(long)]
        preds_mod: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        focal: Option<f64>,
        #[arg(long)]
        px: Option<f64>,
        #[arg(long)]
        py: Option<f64>,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let config = match &cli.config {
        Some(path) => JobConfig::load(path)?,
        None => JobConfig::default(),
    };
    let seed = cli.seed.or(config.seed).unwrap_or(0);
    let workers = if cli.workers == 0 {
        std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
    } else {
        cli.workers
    };

    match cli.command {
        Command::Unpack {
            annotations,
            images_dir,
            out,
            target_size,
            view,
            rast,
            rast_size,
        } => {
            let annotations = annotations
                .or(config.dataset.clone())
                .ok_or_else(|| anyhow::anyhow!("--annotations (or config dataset) required"))?;
            let out = out
                .or(config.output.clone())
                .ok_or_else(|| anyhow::anyhow!("--out (or config output) required"))?;
            let target = target_size
                .or(config.target_size)
                .unwrap_or(boxgeom::unpack::DEFAULT_TARGET);
            cmds::cmd_unpack(
                &annotations,
                &images_dir,
                &out,
                target,
                view,
                rast,
                rast_size,
                seed,
                workers,
                cli.skip_bad,
            )
        }
        Command::Augment {
            in_dir,
            out,
            epoch,
            mode,
        } => {
            let aug = config.augment.unwrap_or_default();
            let mode = match mode {
                Some(RunMode::Train) => boxgeom::augment::Mode::Train,
                Some(RunMode::Eval) => boxgeom::augment::Mode::Eval,
                None => config.mode.unwrap_or(boxgeom::augment::Mode::Train),
            };
            cmds::cmd_augment(&in_dir, &out, &aug, mode, seed, epoch, workers, cli.skip_bad)
        }
        Command::EstimateBb {
            annotations,
            contours,
            bins,
            gt_angles,
            out,
            overlay,
            images_dir,
            threshold,
        } => cmds::cmd_estimate_bb(
            &annotations,
            &contours,
            bins.as_deref(),
            gt_angles.as_deref(),
            &out,
            overlay.as_deref(),
            images_dir.as_deref(),
            threshold,
            workers,
            cli.skip_bad,
        ),
        Command::GtDirections { annotations, out } => {
            cmds::cmd_gt_directions(&annotations, &out, workers, cli.skip_bad)
        }
        Command::MakeSplits {
            annotations,
            mode,
            out,
            train_frac,
        } => {
            let mode = match mode {
                ModeArg::Hard => SplitMode::Hard,
                ModeArg::Medium => SplitMode::Medium,
            };
            cmds::cmd_make_splits(&annotations, mode, seed, train_frac, &out)
        }
        Command::Stats {
            annotations,
            out,
            focal,
            px,
            py,
        } => {
            let calib = match (focal, px, py) {
                (Some(f), Some(x), Some(y)) => Some(CameraCalib::new(Point2::new(x, y), f)?),
                _ => None,
            };
            cmds::cmd_stats(&annotations, &out, calib)
        }
        Command::Validate { annotations, out } => {
            cmds::cmd_validate(&annotations, out.as_deref())
        }
        Command::EvalClassification {
            annotations,
            split,
            probs,
            out,
        } => cmds::cmd_eval_classification(&annotations, &split, &probs, &out),
        Command::EvalVerification {
            annotations,
            split,
            feats,
            feats_bxt,
            feats_ids,
            pairs,
            out,
            plot,
        } => cmds::cmd_eval_verification(
            &annotations,
            &split,
            feats.as_deref(),
            feats_bxt.as_deref(),
            feats_ids.as_deref(),
            pairs,
            seed,
            &out,
            plot.as_deref(),
        ),
        Command::EvalViewpointGap {
            annotations,
            split,
            preds_base,
            preds_mod,
            out,
            focal,
            px,
            py,
        } => {
            let principal = match (px, py) {
                (Some(x), Some(y)) => Some((x, y)),
                _ => None,
            };
            cmds::cmd_eval_viewpoint_gap(
                &annotations,
                &split,
                &preds_base,
                &preds_mod,
                &out,
                focal,
                principal,
            )
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("BOXGEOM_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(cmds::exit_code_for(&e) as u8)
        }
    }
}
