//! Per-image inputs resolved from a manifest.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use anyhow::Context;
use maskfuse::codec::{self, DatasetManifest, ManifestImage};
use maskfuse::{BinaryMask, Canvas, Detection, Jobs, SemanticMap};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone)]
pub struct ImageInputs {
    pub image: ManifestImage,
    pub canvas: Canvas,
    pub detections: Vec<Detection>,
    /// Keyed by detection index within the image.
    pub masks: HashMap<usize, BinaryMask>,
    pub missing_masks: Vec<usize>,
    pub gt: Option<SemanticMap>,
    /// Hex SHA-256 over the detections and masks (not the ground truth).
    pub digest: String,
}

pub fn load_manifest(path: &Path) -> anyhow::Result<(DatasetManifest, BTreeMap<String, Vec<Detection>>)> {
    let manifest = DatasetManifest::read(path).with_context(|| format!("reading manifest {}", path.display()))?;
    let dets = manifest.load_detections()?;
    Ok((manifest, dets))
}

fn digest(dets: &[Detection], masks: &HashMap<usize, BinaryMask>) -> String {
    let mut h = Sha256::new();
    for d in dets {
        h.update(d.image_id.as_bytes());
        h.update([d.category]);
        for v in d.bbox.to_array() {
            h.update(v.to_le_bytes());
        }
        h.update(d.score.to_bits().to_le_bytes());
    }
    let mut keys: Vec<_> = masks.keys().copied().collect();
    keys.sort_unstable();
    for k in keys {
        let m = &masks[&k];
        h.update((k as u64).to_le_bytes());
        h.update(m.width().to_le_bytes());
        h.update(m.height().to_le_bytes());
        h.update((m.runs().len() as u64).to_le_bytes());
        for r in m.runs() {
            h.update(r.to_le_bytes());
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Loads masks (and the ground truth when `with_gt`) for one image. Missing
/// masks are recorded, not fatal; a mask of the wrong size is.
pub fn load_image(
    manifest: &DatasetManifest,
    image: &ManifestImage,
    detections: Vec<Detection>,
    with_gt: bool,
) -> anyhow::Result<ImageInputs> {
    let canvas = image.image_ref()?.canvas();
    let mut masks = HashMap::new();
    let mut missing_masks = Vec::new();
    for i in 0..detections.len() {
        match manifest.mask_path(&image.image_id, i) {
            Some(path) => {
                let mask = codec::read_mask(&path)?;
                if mask.canvas() != canvas {
                    anyhow::bail!("{}: mask is {} but image is {}", path.display(), mask.canvas(), canvas);
                }
                masks.insert(i, mask);
            }
            None => missing_masks.push(i),
        }
    }
    let gt = match (with_gt, manifest.gt_path(image)) {
        (true, Some(path)) => {
            let map = codec::read_semantic(&path, &manifest.registry)?;
            if map.canvas() != canvas {
                anyhow::bail!(
                    "{}: ground truth is {} but image is {}",
                    path.display(),
                    map.canvas(),
                    canvas
                );
            }
            Some(map)
        }
        _ => None,
    };
    let digest = digest(&detections, &masks);
    Ok(ImageInputs {
        image: image.clone(),
        canvas,
        detections,
        masks,
        missing_masks,
        gt,
        digest,
    })
}

/// Loads every image; returns the loaded ones plus a failure line per image
/// that could not be loaded.
pub fn load_all(
    manifest: &DatasetManifest,
    detections: &BTreeMap<String, Vec<Detection>>,
    with_gt: bool,
    jobs: Jobs,
) -> (Vec<ImageInputs>, Vec<String>) {
    let results = maskfuse::exec::map(&manifest.images, jobs, |img| {
        let dets = detections.get(&img.image_id).cloned().unwrap_or_default();
        load_image(manifest, img, dets, with_gt).map_err(|e| format!("{}: {e:#}", img.image_id))
    });
    let mut ok = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(i) => ok.push(i),
            Err(e) => failures.push(e),
        }
    }
    (ok, failures)
}
