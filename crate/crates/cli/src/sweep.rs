//! Ablation sweeps: fusion order, score threshold, and ground-truth boxes.

use std::collections::{BTreeMap, HashSet};
use std::path::PathBuf;

use anyhow::anyhow;
use maskfuse::codec::{self, ReportFormat, ReportRow, ReportTable};
use maskfuse::oracle::{self, NoiseSpec};
use maskfuse::{
    metrics, seed, ClassRegistry, ConfusionMatrix, FilterConfig, FusionOrder, FusionStrategy, Jobs, LabeledMask,
    PipelineConfig,
};

use crate::cache::FuseCache;
use crate::commands::{fuse_image, image_strategy, parse_run, report_extension};
use crate::dataset::{self, ImageInputs};
use crate::{CommandError, CommandResult, Outcome};

/// Threshold singled out in threshold-sweep output.
pub const REFERENCE_THRESHOLD: f64 = 0.2;

pub fn default_thresholds() -> Vec<f64> {
    (0..10).map(|i| f64::from(i) / 10.0).collect()
}

#[derive(Debug, Clone)]
pub struct SweepArgs {
    pub manifest: PathBuf,
    /// Strategy held fixed in the threshold sweep.
    pub strategy: String,
    /// Threshold held fixed in the order sweep.
    pub threshold: f64,
    /// Run seed for the random strategy.
    pub seed: u64,
    pub clip_to_box: bool,
    pub out: PathBuf,
    pub format: ReportFormat,
    pub jobs: Jobs,
    pub cache: FuseCache,
}

/// Parses `all` or a `;`-separated list of strategies. Entries without a
/// `kind:` prefix are comma-separated orders.
pub fn parse_order_list(spec: &str, registry: &ClassRegistry, seed: u64) -> maskfuse::Result<Vec<FusionStrategy>> {
    if spec.trim() == "all" {
        let mut all: Vec<FusionStrategy> = FusionOrder::all(registry)
            .into_iter()
            .map(FusionStrategy::Ordered)
            .collect();
        all.push(FusionStrategy::Random { seed });
        return Ok(all);
    }
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for entry in spec.split(';').map(str::trim).filter(|e| !e.is_empty()) {
        let strategy = if entry.contains(':') {
            FusionStrategy::parse(entry, registry)?
        } else {
            FusionStrategy::parse(&format!("ordered:{entry}"), registry)?
        };
        if !seen.insert(strategy.clone()) {
            return Err(maskfuse::Error::InvalidStrategy(format!(
                "duplicate strategy `{entry}`"
            )));
        }
        out.push(strategy);
    }
    if out.is_empty() {
        return Err(maskfuse::Error::InvalidStrategy(spec.to_string()));
    }
    Ok(out)
}

fn load_with_gt(
    args_manifest: &std::path::Path,
    jobs: Jobs,
) -> CommandResult<(maskfuse::codec::DatasetManifest, Vec<ImageInputs>, Vec<String>)> {
    let (manifest, detections) = dataset::load_manifest(args_manifest).map_err(CommandError::config)?;
    let (loaded, mut failures) = dataset::load_all(&manifest, &detections, true, jobs);
    let mut usable = Vec::new();
    for img in loaded {
        if img.gt.is_none() {
            failures.push(format!("{}: no ground truth in manifest", img.image.image_id));
        } else {
            usable.push(img);
        }
    }
    if usable.is_empty() {
        return Err(CommandError::config(anyhow!("no images with ground truth to evaluate")));
    }
    Ok((manifest, usable, failures))
}

/// Dataset confusion matrix of one pipeline configuration. Images that fail
/// to fuse are reported in the error list.
fn evaluate(
    images: &[ImageInputs],
    cfg: &PipelineConfig,
    registry: &ClassRegistry,
    cache: &FuseCache,
    jobs: Jobs,
) -> (ConfusionMatrix, Vec<String>) {
    let per_image = maskfuse::exec::map(images, jobs, |img| -> Result<ConfusionMatrix, String> {
        let map = fuse_image(img, cfg, registry, cache).map_err(|e| format!("{}: {e}", img.image.image_id))?;
        let gt = img.gt.as_ref().expect("filtered to images with gt");
        ConfusionMatrix::of(&map, gt, registry.len()).map_err(|e| format!("{}: {e}", img.image.image_id))
    });
    let mut total = ConfusionMatrix::new(registry.len());
    let mut failures = Vec::new();
    for r in per_image {
        match r {
            Ok(cm) => total += &cm,
            Err(e) => failures.push(e),
        }
    }
    (total, failures)
}

fn row_for(label: String, cm: &ConfusionMatrix, registry: &ClassRegistry) -> CommandResult<ReportRow> {
    let report = metrics::summarize(cm, registry).map_err(CommandError::internal)?;
    Ok(ReportRow::from_report(label, &report))
}

fn strategy_label(strategy: &FusionStrategy, registry: &ClassRegistry) -> String {
    match strategy {
        FusionStrategy::Ordered(order) => order.names(registry).join(", "),
        FusionStrategy::Random { seed } => format!("Random (seed {seed})"),
    }
}

fn dedup(mut v: Vec<String>) -> Vec<String> {
    let mut seen = HashSet::new();
    v.retain(|s| seen.insert(s.clone()));
    v
}

/// One metrics row per fusion strategy, sorted by mIoU (descending). Rows
/// whose dataset confusion matrices are identical share an
/// `equivalence_class`.
pub fn cmd_sweep_order(args: &SweepArgs, orders: &str) -> CommandResult<Outcome> {
    let (manifest, images, mut failures) = load_with_gt(&args.manifest, args.jobs)?;
    let registry = &manifest.registry;
    let strategies = parse_order_list(orders, registry, args.seed).map_err(CommandError::config)?;
    let filter = FilterConfig::new(args.threshold).map_err(CommandError::config)?;

    let mut rows: Vec<(ReportRow, ConfusionMatrix)> = Vec::new();
    for strategy in &strategies {
        let cfg = PipelineConfig {
            filter,
            strategy: strategy.clone(),
            clip_to_box: args.clip_to_box,
        };
        let (cm, errs) = evaluate(&images, &cfg, registry, &args.cache, args.jobs);
        failures.extend(errs);
        let mut row = row_for(strategy_label(strategy, registry), &cm, registry)?;
        row.extra.insert("strategy".into(), strategy.describe(registry));
        rows.push((row, cm));
    }
    rows.sort_by(|a, b| b.0.miou.total_cmp(&a.0.miou));

    let mut classes: Vec<&ConfusionMatrix> = Vec::new();
    let mut class_sizes: BTreeMap<usize, usize> = BTreeMap::new();
    let mut assigned = Vec::with_capacity(rows.len());
    for (_, cm) in &rows {
        let id = match classes.iter().position(|c| *c == cm) {
            Some(i) => i,
            None => {
                classes.push(cm);
                classes.len() - 1
            }
        };
        *class_sizes.entry(id).or_default() += 1;
        assigned.push(id);
    }
    let mut table = ReportTable::new(registry);
    for ((mut row, _), id) in rows.into_iter().zip(assigned) {
        row.extra.insert("equivalence_class".into(), (id + 1).to_string());
        table.rows.push(row);
    }
    let path = args.out.join(format!("sweep_order.{}", report_extension(args.format)));
    codec::write_report(&table, &path, args.format).map_err(CommandError::internal)?;

    let best = &table.rows[0];
    let worst = table.rows.last().expect("at least one strategy");
    Ok(Outcome {
        summary: vec![
            format!("strategies: {}", table.rows.len()),
            format!("distinct results: {}", class_sizes.len()),
            format!("best: {} ({:.2})", best.label, best.miou * 100.0),
            format!("worst: {} ({:.2})", worst.label, worst.miou * 100.0),
            format!("table: {}", path.display()),
        ],
        failures: dedup(failures),
    })
}

/// mIoU and surviving-detection count per threshold (ascending).
pub fn cmd_sweep_threshold(args: &SweepArgs, thresholds: &[f64]) -> CommandResult<Outcome> {
    let (manifest, images, mut failures) = load_with_gt(&args.manifest, args.jobs)?;
    let registry = &manifest.registry;
    let (strategy, _) = parse_run(&manifest, &args.strategy, 0.0)?;
    let mut filters = thresholds
        .iter()
        .map(|&t| FilterConfig::new(t))
        .collect::<maskfuse::Result<Vec<_>>>()
        .map_err(CommandError::config)?;
    if filters.is_empty() {
        return Err(CommandError::config(anyhow!("no thresholds given")));
    }
    filters.sort_by(|a, b| a.score_threshold().total_cmp(&b.score_threshold()));
    filters.dedup();

    let mut table = ReportTable::new(registry);
    let mut last_kept = usize::MAX;
    for filter in filters {
        let kept: usize = images
            .iter()
            .map(|i| maskfuse::fusion::surviving_indices(&i.detections, &filter).len())
            .sum();
        if kept > last_kept {
            return Err(CommandError::internal(anyhow!(
                "surviving detections increased at threshold {}",
                filter.score_threshold()
            )));
        }
        last_kept = kept;
        let cfg = PipelineConfig {
            filter,
            strategy: strategy.clone(),
            clip_to_box: args.clip_to_box,
        };
        let (cm, errs) = evaluate(&images, &cfg, registry, &args.cache, args.jobs);
        failures.extend(errs);
        let t = filter.score_threshold();
        let mut row = row_for(format!("threshold {t:.2}"), &cm, registry)?;
        row.extra.insert("threshold".into(), format!("{t:.2}"));
        row.extra.insert("detections_kept".into(), kept.to_string());
        let is_reference = (t - REFERENCE_THRESHOLD).abs() < 1e-9;
        row.extra
            .insert("reference".into(), if is_reference { "yes" } else { "" }.into());
        table.rows.push(row);
    }
    let path = args
        .out
        .join(format!("sweep_threshold.{}", report_extension(args.format)));
    codec::write_report(&table, &path, args.format).map_err(CommandError::internal)?;
    let peak = table
        .rows
        .iter()
        .reduce(|best, r| if r.miou > best.miou { r } else { best })
        .expect("nonempty");
    Ok(Outcome {
        summary: vec![
            format!("thresholds: {}", table.rows.len()),
            format!("peak: {} ({:.2})", peak.label, peak.miou * 100.0),
            format!("table: {}", path.display()),
        ],
        failures: dedup(failures),
    })
}

#[derive(Debug, Clone)]
pub struct GtBoxArgs {
    pub manifest: PathBuf,
    pub strategy: String,
    /// Box jitter sigmas (pixels); 0 is always included as the exact-box row.
    pub sigmas: Vec<f64>,
    /// Number of jitter seeds per sigma.
    pub ensemble: usize,
    pub seed: u64,
    pub min_area: u64,
    /// Oracle segmenter morphology (0 = exact masks).
    pub morph_radius: i32,
    pub out: PathBuf,
    pub format: ReportFormat,
    pub jobs: Jobs,
}

/// Confusion matrix of the gt-box pipeline on one image for one jitter draw.
pub fn gtbox_image(
    gt: &maskfuse::SemanticMap,
    image_id: &str,
    strategy: &FusionStrategy,
    noise: &NoiseSpec,
    min_area: u64,
    registry: &ClassRegistry,
) -> maskfuse::Result<ConfusionMatrix> {
    let exact = oracle::extract_gt_boxes(gt, image_id, min_area);
    let boxes = oracle::perturb_detections(&exact, noise, gt.canvas())?;
    let masks = boxes
        .iter()
        .enumerate()
        .map(|(i, d)| {
            Ok(LabeledMask {
                mask: oracle::oracle_segment(gt, d, noise)?,
                category: d.category,
                score: d.score,
                source_index: i,
            })
        })
        .collect::<maskfuse::Result<Vec<_>>>()?;
    let fused = maskfuse::fuse(&masks, &image_strategy(strategy, image_id), gt.canvas())?;
    ConfusionMatrix::of(&fused, gt, registry.len())
}

/// Exact ground-truth boxes versus jittered boxes, all segmented by the
/// oracle. The exact row is expected to dominate.
pub fn cmd_gtbox_study(args: &GtBoxArgs) -> CommandResult<Outcome> {
    let (manifest, images, mut failures) = load_with_gt(&args.manifest, args.jobs)?;
    let registry = &manifest.registry;
    let (strategy, _) = parse_run(&manifest, &args.strategy, 0.0)?;
    let mut sigmas: Vec<f64> = args.sigmas.clone();
    if let Some(bad) = sigmas.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
        return Err(CommandError::config(anyhow!("invalid sigma {bad}")));
    }
    sigmas.push(0.0);
    sigmas.sort_by(f64::total_cmp);
    sigmas.dedup();
    let ensemble = args.ensemble.max(1);

    let mut table = ReportTable::new(registry);
    let mut exact_miou = None;
    let mut dominated = true;
    for sigma in sigmas {
        let draws = if sigma == 0.0 { 1 } else { ensemble };
        let work: Vec<(usize, usize)> = (0..draws)
            .flat_map(|k| (0..images.len()).map(move |i| (k, i)))
            .collect();
        let per = maskfuse::exec::map(&work, args.jobs, |&(k, i)| {
            let img = &images[i];
            let id = &img.image.image_id;
            let noise = NoiseSpec {
                morph_radius: args.morph_radius,
                box_jitter_sigma: sigma,
                seed: seed::derive(args.seed, &["gtbox", &k.to_string(), id]),
                ..NoiseSpec::none(0)
            };
            gtbox_image(
                img.gt.as_ref().expect("gt"),
                id,
                &strategy,
                &noise,
                args.min_area,
                registry,
            )
            .map_err(|e| format!("{id}: {e}"))
        });
        let mut total = ConfusionMatrix::new(registry.len());
        for r in per {
            match r {
                Ok(cm) => total += &cm,
                Err(e) => failures.push(e),
            }
        }
        let label = if sigma == 0.0 {
            "gt_box (exact)".to_string()
        } else {
            format!("gt_box jitter sigma={sigma}")
        };
        let mut row = row_for(label, &total, registry)?;
        row.extra.insert("box_jitter_sigma".into(), format!("{sigma}"));
        row.extra.insert("ensemble".into(), draws.to_string());
        match exact_miou {
            None => exact_miou = Some(row.miou),
            Some(e) => dominated &= row.miou < e,
        }
        table.rows.push(row);
    }
    let path = args.out.join(format!("gtbox_study.{}", report_extension(args.format)));
    codec::write_report(&table, &path, args.format).map_err(CommandError::internal)?;
    let mut summary: Vec<String> = table
        .rows
        .iter()
        .map(|r| format!("{}: mIoU {:.2}", r.label, r.miou * 100.0))
        .collect();
    summary.push(format!(
        "exact boxes dominate every jittered row: {}",
        if dominated { "yes" } else { "NO" }
    ));
    summary.push(format!("table: {}", path.display()));
    Ok(Outcome {
        summary,
        failures: dedup(failures),
    })
}
