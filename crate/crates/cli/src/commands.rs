use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use maskfuse::codec::{self, DatasetManifest, Palette, ReportFormat, ReportRow, ReportTable};
use maskfuse::{
    fuse_pipeline, metrics, seed, ClassRegistry, ConfusionMatrix, FilterConfig, FusionStrategy, Jobs, PipelineConfig,
    SemanticMap,
};
use serde::Serialize;

use crate::cache::FuseCache;
use crate::dataset::{self, ImageInputs};
use crate::{CommandError, CommandResult, Outcome};

#[derive(Debug, Clone)]
pub struct FuseArgs {
    pub manifest: PathBuf,
    /// `ordered:<names>` or `random:<seed>`.
    pub strategy: String,
    pub threshold: f64,
    pub clip_to_box: bool,
    pub out: PathBuf,
    pub jobs: Jobs,
    pub cache: FuseCache,
}

/// The strategy actually applied to one image: a random run seed becomes a
/// per-image seed derived from the image id.
pub fn image_strategy(strategy: &FusionStrategy, image_id: &str) -> FusionStrategy {
    match strategy {
        FusionStrategy::Random { seed: run_seed } => FusionStrategy::Random {
            seed: seed::per_image(*run_seed, image_id),
        },
        ordered => ordered.clone(),
    }
}

/// Fuses one image under `cfg`, going through `cache`.
pub fn fuse_image(
    inputs: &ImageInputs,
    cfg: &PipelineConfig,
    registry: &ClassRegistry,
    cache: &FuseCache,
) -> maskfuse::Result<SemanticMap> {
    let strategy = image_strategy(&cfg.strategy, &inputs.image.image_id);
    let per_image = PipelineConfig {
        strategy,
        ..cfg.clone()
    };
    let key = FuseCache::key(
        &inputs.digest,
        &per_image.strategy.describe(registry),
        cfg.filter.score_threshold(),
        cfg.clip_to_box,
    );
    cache.get_or_insert_with(&key, registry, || {
        fuse_pipeline(&inputs.detections, &inputs.masks, &per_image, inputs.canvas)
    })
}

#[derive(Debug, Serialize)]
struct FuseSummary<'a> {
    strategy: String,
    threshold: f64,
    clip_to_box: bool,
    images: usize,
    fused: usize,
    detections_total: usize,
    detections_kept: usize,
    failures: &'a [String],
}

pub(crate) fn parse_run(
    manifest: &DatasetManifest,
    strategy: &str,
    threshold: f64,
) -> CommandResult<(FusionStrategy, FilterConfig)> {
    let strategy = FusionStrategy::parse(strategy, &manifest.registry).map_err(CommandError::config)?;
    let filter = FilterConfig::new(threshold).map_err(CommandError::config)?;
    Ok((strategy, filter))
}

/// Writes one semantic map per image into `out` plus `fuse_summary.json`.
pub fn cmd_fuse(args: &FuseArgs) -> CommandResult<Outcome> {
    let (manifest, detections) = dataset::load_manifest(&args.manifest).map_err(CommandError::config)?;
    let (strategy, filter) = parse_run(&manifest, &args.strategy, args.threshold)?;
    let cfg = PipelineConfig {
        filter,
        strategy,
        clip_to_box: args.clip_to_box,
    };
    let registry = &manifest.registry;
    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))
        .map_err(CommandError::internal)?;

    let results = maskfuse::exec::map(&manifest.images, args.jobs, |img| -> Result<usize, String> {
        let dets = detections.get(&img.image_id).cloned().unwrap_or_default();
        let inputs =
            dataset::load_image(&manifest, img, dets, false).map_err(|e| format!("{}: {e:#}", img.image_id))?;
        let map = fuse_image(&inputs, &cfg, registry, &args.cache).map_err(|e| format!("{}: {e}", img.image_id))?;
        codec::write_semantic(&map, &args.out.join(format!("{}.png", img.image_id)))
            .map_err(|e| format!("{}: {e}", img.image_id))?;
        Ok(maskfuse::fusion::surviving_indices(&inputs.detections, &cfg.filter).len())
    });

    let mut failures = Vec::new();
    let mut kept = 0;
    let mut fused = 0;
    for r in results {
        match r {
            Ok(k) => {
                kept += k;
                fused += 1;
            }
            Err(e) => failures.push(e),
        }
    }
    let summary = FuseSummary {
        strategy: cfg.strategy.describe(registry),
        threshold: filter.score_threshold(),
        clip_to_box: args.clip_to_box,
        images: manifest.images.len(),
        fused,
        detections_total: detections.values().map(Vec::len).sum(),
        detections_kept: kept,
        failures: &failures,
    };
    codec::write_json(&summary, &args.out.join("fuse_summary.json")).map_err(CommandError::internal)?;
    Ok(Outcome {
        summary: vec![
            format!("strategy: {}", summary.strategy),
            format!("images fused: {fused}/{}", summary.images),
            format!("detections kept: {kept}/{}", summary.detections_total),
        ],
        failures,
    })
}

#[derive(Debug, Clone)]
pub struct EvalArgs {
    pub manifest: PathBuf,
    pub predictions: PathBuf,
    pub out: PathBuf,
    pub format: ReportFormat,
    pub label: String,
    pub jobs: Jobs,
}

#[derive(Debug, Serialize)]
struct EvalOutput<'a> {
    label: &'a str,
    report: &'a metrics::MetricsReport,
    confusion: &'a ConfusionMatrix,
    images_evaluated: usize,
    skipped: &'a [String],
}

pub(crate) fn report_extension(format: ReportFormat) -> &'static str {
    match format {
        ReportFormat::Csv => "csv",
        ReportFormat::Json => "json",
    }
}

fn eval_image(manifest: &DatasetManifest, predictions: &Path, image_id: &str) -> Result<ConfusionMatrix, String> {
    let img = manifest.image(image_id).expect("image from manifest");
    let registry = &manifest.registry;
    let gt_path = manifest
        .gt_path(img)
        .ok_or_else(|| format!("{image_id}: no ground truth in manifest"))?;
    let gt = codec::read_semantic(&gt_path, registry).map_err(|e| format!("{image_id}: {e}"))?;
    let pred_path = predictions.join(format!("{image_id}.png"));
    if !pred_path.is_file() {
        return Err(format!("{image_id}: missing prediction {}", pred_path.display()));
    }
    let pred = codec::read_semantic(&pred_path, registry).map_err(|e| format!("{image_id}: {e}"))?;
    ConfusionMatrix::of(&pred, &gt, registry.len()).map_err(|e| format!("{image_id}: {e}"))
}

/// Dataset-level metrics for a directory of predicted maps
/// (`<image_id>.png`). Writes `report.<fmt>` and `metrics.json`.
pub fn cmd_eval(args: &EvalArgs) -> CommandResult<Outcome> {
    let manifest = DatasetManifest::read(&args.manifest).map_err(CommandError::config)?;
    let registry = &manifest.registry;
    let ids: Vec<&str> = manifest.images.iter().map(|i| i.image_id.as_str()).collect();
    let results = maskfuse::exec::map(&ids, args.jobs, |id| eval_image(&manifest, &args.predictions, id));

    let mut total = ConfusionMatrix::new(registry.len());
    let mut skipped = Vec::new();
    let mut evaluated = 0;
    for r in results {
        match r {
            Ok(cm) => {
                total.merge(&cm).map_err(CommandError::internal)?;
                evaluated += 1;
            }
            Err(e) => skipped.push(e),
        }
    }
    let report = match metrics::summarize(&total, registry) {
        Ok(r) => r,
        Err(maskfuse::Error::NoData) => {
            return Err(CommandError::config(anyhow!(
                "no data: none of {} images could be evaluated ({})",
                ids.len(),
                skipped.join("; ")
            )))
        }
        Err(e) => return Err(CommandError::internal(e)),
    };
    let mut table = ReportTable::new(registry);
    table.rows.push(ReportRow::from_report(args.label.clone(), &report));
    codec::write_report(
        &table,
        &args.out.join(format!("report.{}", report_extension(args.format))),
        args.format,
    )
    .map_err(CommandError::internal)?;
    let output = EvalOutput {
        label: &args.label,
        report: &report,
        confusion: &total,
        images_evaluated: evaluated,
        skipped: &skipped,
    };
    codec::write_json(&output, &args.out.join("metrics.json")).map_err(CommandError::internal)?;
    Ok(Outcome {
        summary: vec![
            format!("images evaluated: {evaluated}/{}", ids.len()),
            format!("mIoU: {:.2}", report.miou * 100.0),
            format!("mF1: {:.2}", report.mf1 * 100.0),
        ],
        failures: skipped,
    })
}

/// Colour exports of every `<image_id>.png` in `predictions`.
pub fn cmd_colorize(
    manifest: &Path,
    predictions: &Path,
    palette: &Path,
    out: &Path,
    jobs: Jobs,
) -> CommandResult<Outcome> {
    let manifest = DatasetManifest::read(manifest).map_err(CommandError::config)?;
    let palette = Palette::read(palette).map_err(CommandError::config)?;
    let registry = &manifest.registry;
    let results = maskfuse::exec::map(&manifest.images, jobs, |img| -> Result<(), String> {
        let id = &img.image_id;
        let map =
            codec::read_semantic(&predictions.join(format!("{id}.png")), registry).map_err(|e| format!("{id}: {e}"))?;
        codec::write_colorized(&map, registry, &palette, &out.join(format!("{id}.png")))
            .map_err(|e| format!("{id}: {e}"))
    });
    let failures: Vec<String> = results.into_iter().filter_map(Result::err).collect();
    Ok(Outcome {
        summary: vec![format!(
            "colorized: {}/{}",
            manifest.images.len() - failures.len(),
            manifest.images.len()
        )],
        failures,
    })
}
