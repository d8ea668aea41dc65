//! Synthetic datasets in the canonical on-disk layout.
//!
//! Each image gets a generated ground-truth scene, one detection per
//! ground-truth component (jittered box, noisy score) with an oracle mask,
//! plus optional low-score mislabelled detections that reuse a real object's
//! mask under a wrong category.

use std::path::{Path, PathBuf};

use maskfuse::codec::{self, DatasetManifest, ManifestImage, MaskFormat};
use maskfuse::oracle::{self, NoiseSpec, SceneSpec, ShapeKinds};
use maskfuse::{seed, BinaryMask, ClassId, ClassRegistry, Detection, Jobs, SemanticMap};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{CommandError, CommandResult, Outcome};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub images: usize,
    pub width: u32,
    pub height: u32,
    pub shapes_per_class: Vec<u32>,
    pub class_scale: Vec<f64>,
    pub overlap_bias: f64,
    pub shape_kinds: ShapeKinds,
    pub seed: u64,
    pub noise: NoiseSpec,
    /// Score of a correct detection before score noise.
    pub true_score: f64,
    /// Mislabelled detections added per image.
    pub false_detections: usize,
    /// Mislabelled detections draw scores uniformly from `[0, false_score_max)`.
    pub false_score_max: f64,
    pub min_area: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            images: 20,
            width: 64,
            height: 48,
            shapes_per_class: vec![2, 2, 2, 1],
            class_scale: Vec::new(),
            overlap_bias: 0.5,
            shape_kinds: ShapeKinds::Mixed,
            seed: 0,
            noise: NoiseSpec::none(0),
            true_score: 0.9,
            false_detections: 0,
            false_score_max: 0.3,
            min_area: 1,
        }
    }
}

/// One generated image, in memory.
#[derive(Debug, Clone)]
pub struct SynthImage {
    pub image_id: String,
    pub gt: SemanticMap,
    pub detections: Vec<Detection>,
    pub masks: Vec<BinaryMask>,
}

pub fn image_id(index: usize) -> String {
    format!("img{index:04}")
}

pub fn synthesize_image(cfg: &SynthConfig, registry: &ClassRegistry, index: usize) -> maskfuse::Result<SynthImage> {
    let id = image_id(index);
    let scene = SceneSpec {
        width: cfg.width,
        height: cfg.height,
        shapes_per_class: cfg.shapes_per_class.clone(),
        shape_kinds: cfg.shape_kinds,
        class_scale: cfg.class_scale.clone(),
        overlap_bias: cfg.overlap_bias,
        seed: seed::derive(cfg.seed, &["synth-scene", &id]),
    };
    let gt = oracle::generate_scene(&scene, registry)?;
    let noise = NoiseSpec {
        seed: seed::derive(cfg.noise.seed, &["synth-noise", &id]),
        ..cfg.noise.clone()
    };
    let exact: Vec<Detection> = oracle::extract_gt_boxes(&gt, &id, cfg.min_area)
        .into_iter()
        .map(|d| Detection {
            score: cfg.true_score,
            ..d
        })
        .collect();
    let mut detections = oracle::perturb_detections(&exact, &noise, gt.canvas())?;
    let mut masks = detections
        .iter()
        .map(|d| oracle::oracle_segment(&gt, d, &noise))
        .collect::<maskfuse::Result<Vec<_>>>()?;

    let n_fg = registry.num_foreground();
    if cfg.false_detections > 0 && !exact.is_empty() && n_fg > 1 {
        let mut rng = seed::rng(seed::derive(cfg.seed, &["synth-false", &id]));
        for _ in 0..cfg.false_detections {
            let source = rng.random_range(0..detections.len().min(exact.len()));
            let real = detections[source].clone();
            // any foreground class except the real one
            let offset = rng.random_range(1..n_fg) as ClassId;
            let wrong = ((real.category - 1 + offset) % n_fg as ClassId) + 1;
            let score = rng.random_range(0.0..cfg.false_score_max.max(f64::MIN_POSITIVE));
            masks.push(masks[source].clone());
            detections.push(Detection {
                category: wrong,
                score,
                ..real
            });
        }
    }
    Ok(SynthImage {
        image_id: id,
        gt,
        detections,
        masks,
    })
}

pub fn synthesize(cfg: &SynthConfig, registry: &ClassRegistry, jobs: Jobs) -> maskfuse::Result<Vec<SynthImage>> {
    let indices: Vec<usize> = (0..cfg.images).collect();
    maskfuse::exec::map(&indices, jobs, |&i| synthesize_image(cfg, registry, i))
        .into_iter()
        .collect()
}

/// Writes a dataset (`manifest.json`, `gt/`, `detections.jsonl`, `masks/`)
/// under `out` and returns the manifest path.
pub fn write_dataset(
    images: &[SynthImage],
    registry: &ClassRegistry,
    out: &Path,
    mask_format: MaskFormat,
    jobs: Jobs,
) -> maskfuse::Result<PathBuf> {
    let mut manifest = DatasetManifest::new(registry.clone(), out);
    manifest.detections = Some("detections.jsonl".into());
    manifest.masks_dir = Some("masks".into());
    let written = maskfuse::exec::map(images, jobs, |img| -> maskfuse::Result<()> {
        codec::write_semantic(&img.gt, &out.join("gt").join(format!("{}.png", img.image_id)))?;
        for (i, m) in img.masks.iter().enumerate() {
            codec::write_mask(
                m,
                &out.join("masks")
                    .join(codec::mask_file_name(&img.image_id, i, mask_format)),
            )?;
        }
        Ok(())
    });
    written.into_iter().collect::<maskfuse::Result<Vec<()>>>()?;
    let all: Vec<Detection> = images.iter().flat_map(|i| i.detections.iter().cloned()).collect();
    codec::write_detections(&all, registry, &out.join("detections.jsonl"))?;
    manifest.images = images
        .iter()
        .map(|i| ManifestImage {
            image_id: i.image_id.clone(),
            width: i.gt.width(),
            height: i.gt.height(),
            gt: Some(format!("gt/{}.png", i.image_id)),
        })
        .collect();
    let path = out.join("manifest.json");
    manifest.write(&path)?;
    Ok(path)
}

pub fn cmd_synth(cfg: &SynthConfig, out: &Path, mask_format: MaskFormat, jobs: Jobs) -> CommandResult<Outcome> {
    let registry = ClassRegistry::m4d();
    if cfg.shapes_per_class.len() > registry.num_foreground() {
        return Err(CommandError::config(anyhow::anyhow!(
            "{} shape counts given for {} foreground classes",
            cfg.shapes_per_class.len(),
            registry.num_foreground()
        )));
    }
    cfg.noise.validate().map_err(CommandError::config)?;
    let images = synthesize(cfg, &registry, jobs).map_err(CommandError::config)?;
    let manifest = write_dataset(&images, &registry, out, mask_format, jobs).map_err(CommandError::internal)?;
    codec::write_json(cfg, &out.join("synth_config.json")).map_err(CommandError::internal)?;
    let n_dets: usize = images.iter().map(|i| i.detections.len()).sum();
    Ok(Outcome {
        summary: vec![
            format!("images: {}", images.len()),
            format!("detections: {n_dets}"),
            format!("manifest: {}", manifest.display()),
        ],
        failures: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthesis_is_seeded_and_parallel_safe() {
        let reg = ClassRegistry::m4d();
        let cfg = SynthConfig {
            images: 6,
            false_detections: 2,
            noise: NoiseSpec {
                box_jitter_sigma: 1.0,
                score_noise_sigma: 0.1,
                morph_radius: 1,
                ..NoiseSpec::none(3)
            },
            ..SynthConfig::default()
        };
        let a = synthesize(&cfg, &reg, Jobs::SEQUENTIAL).unwrap();
        let b = synthesize(&cfg, &reg, Jobs::new(4)).unwrap();
        assert_eq!(a.len(), 6);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.gt, y.gt);
            assert_eq!(x.detections, y.detections);
            assert_eq!(x.masks, y.masks);
            assert_eq!(x.detections.len(), x.masks.len());
        }
        let wrong = a[0].detections.iter().rev().take(2);
        for d in wrong {
            assert!(d.score < cfg.false_score_max);
        }
    }
}
