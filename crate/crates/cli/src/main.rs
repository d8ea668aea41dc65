use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use maskfuse::codec::{self, MaskFormat, ReportFormat};
use maskfuse::Jobs;
use maskfuse_cli::cache::FuseCache;
use maskfuse_cli::sweep::default_thresholds;
use maskfuse_cli::{
    cmd_colorize, cmd_eval, cmd_fuse, cmd_gtbox_study, cmd_sweep_order, cmd_sweep_threshold, cmd_synth, exit,
    CommandError, CommandResult, EvalArgs, FuseArgs, GtBoxArgs, Outcome, SweepArgs, SynthConfig,
};

#[derive(Parser)]
#[command(
    name = "maskfuse",
    version,
    about = "Ordered mask fusion and segmentation evaluation"
)]
struct Cli {
    /// Worker threads (1 = sequential).
    #[arg(long, global = true, env = "MASKFUSE_JOBS")]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => ReportFormat::Csv,
            Format::Json => ReportFormat::Json,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MaskKind {
    Png,
    Rle,
}

#[derive(Args)]
struct RunFlags {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Drop detections with score <= threshold.
    #[arg(long, default_value_t = 0.2)]
    threshold: f64,
    /// `ordered:<c1>,<c2>,...` or `random:<seed>`.
    #[arg(long, default_value = "ordered:ship,land,oil_spill,look_alike")]
    strategy: String,
    /// Intersect each mask with its detection box before fusing.
    #[arg(long)]
    clip_to_box: bool,
    /// Directory for cached fused maps.
    #[arg(long)]
    cache: Option<PathBuf>,
}

impl RunFlags {
    fn cache(&self) -> FuseCache {
        self.cache.clone().map(FuseCache::at).unwrap_or_default()
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset.
    Synth {
        #[arg(long)]
        out: PathBuf,
        /// JSON file with generator settings; flags below override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        images: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value_t = MaskKind::Png)]
        mask_format: MaskKind,
    },
    /// Fuse per-instance masks into one semantic map per image.
    Fuse {
        #[command(flatten)]
        run: RunFlags,
    },
    /// Score predicted maps against the ground truth.
    Eval {
        #[arg(long)]
        manifest: PathBuf,
        /// Directory of `<image_id>.png` label maps.
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[arg(long, default_value = "prediction")]
        label: String,
    },
    /// One row per fusion order.
    SweepOrder {
        #[command(flatten)]
        run: RunFlags,
        /// `all` or `;`-separated strategies.
        #[arg(long, default_value = "all")]
        orders: String,
        /// Seed of the random baseline.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// One row per score threshold.
    SweepThreshold {
        #[command(flatten)]
        run: RunFlags,
        /// Comma-separated thresholds (default 0.0 to 0.9 in steps of 0.1).
        #[arg(long, value_delimiter = ',')]
        thresholds: Vec<f64>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Exact versus jittered ground-truth boxes through the oracle segmenter.
    Gtbox {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "ordered:ship,land,oil_spill,look_alike")]
        strategy: String,
        #[arg(long, value_delimiter = ',', default_value = "5")]
        sigmas: Vec<f64>,
        #[arg(long, default_value_t = 5)]
        ensemble: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        min_area: u64,
        #[arg(long, default_value_t = 0)]
        morph_radius: i32,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Colour PNGs of predicted maps.
    Colorize {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
        /// JSON object of class name to `[r, g, b]`.
        #[arg(long)]
        palette: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn sweep_args(run: &RunFlags, seed: u64, format: Format, jobs: Jobs) -> SweepArgs {
    SweepArgs {
        manifest: run.manifest.clone(),
        strategy: run.strategy.clone(),
        threshold: run.threshold,
        seed,
        clip_to_box: run.clip_to_box,
        out: run.out.clone(),
        format: format.into(),
        jobs,
        cache: run.cache(),
    }
}

fn prepare_out(dir: &std::path::Path) -> CommandResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CommandError::Internal(anyhow::anyhow!("creating {}: {e}", dir.display())))
}

fn run(cli: Cli) -> CommandResult<Outcome> {
    let jobs = cli.jobs.map(Jobs::new).unwrap_or_default();
    match cli.command {
        Command::Synth {
            out,
            config,
            images,
            seed,
            mask_format,
        } => {
            let mut cfg: SynthConfig = match config {
                Some(path) => codec::read_json(&path).map_err(|e| CommandError::Config(e.into()))?,
                None => SynthConfig::default(),
            };
            if let Some(n) = images {
                cfg.images = n;
            }
            if let Some(s) = seed {
                cfg.seed = s;
                cfg.noise.seed = s;
            }
            let fmt = match mask_format {
                MaskKind::Png => MaskFormat::Png,
                MaskKind::Rle => MaskFormat::Rle,
            };
            prepare_out(&out)?;
            cmd_synth(&cfg, &out, fmt, jobs)
        }
        Command::Fuse { run } => cmd_fuse(&FuseArgs {
            manifest: run.manifest.clone(),
            strategy: run.strategy.clone(),
            threshold: run.threshold,
            clip_to_box: run.clip_to_box,
            out: run.out.clone(),
            jobs,
            cache: run.cache(),
        }),
        Command::Eval {
            manifest,
            predictions,
            out,
            format,
            label,
        } => {
            prepare_out(&out)?;
            cmd_eval(&EvalArgs {
                manifest,
                predictions,
                out,
                format: format.into(),
                label,
                jobs,
            })
        }
        Command::SweepOrder {
            run,
            orders,
            seed,
            format,
        } => {
            prepare_out(&run.out)?;
            cmd_sweep_order(&sweep_args(&run, seed, format, jobs), &orders)
        }
        Command::SweepThreshold {
            run,
            thresholds,
            format,
        } => {
            prepare_out(&run.out)?;
            let grid = if thresholds.is_empty() {
                default_thresholds()
            } else {
                thresholds
            };
            cmd_sweep_threshold(&sweep_args(&run, 0, format, jobs), &grid)
        }
        Command::Gtbox {
            manifest,
            out,
            strategy,
            sigmas,
            ensemble,
            seed,
            min_area,
            morph_radius,
            format,
        } => {
            prepare_out(&out)?;
            cmd_gtbox_study(&GtBoxArgs {
                manifest,
                strategy,
                sigmas,
                ensemble,
                seed,
                min_area,
                morph_radius,
                out,
                format: format.into(),
                jobs,
            })
        }
        Command::Colorize {
            manifest,
            predictions,
            palette,
            out,
        } => {
            prepare_out(&out)?;
            cmd_colorize(&manifest, &predictions, &palette, &out, jobs)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(outcome) => {
            for line in &outcome.summary {
                println!("{line}");
            }
            for f in &outcome.failures {
                eprintln!("failed: {f}");
            }
            outcome.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(u8::try_from(code).unwrap_or(exit::INTERNAL as u8))
}
