//! Synthetic stand-ins for the neural parts of a detector + segmenter
//! pipeline: ground-truth scene generation, ground-truth box extraction, a
//! noisy oracle segmenter and detection perturbation.
//!
//! All randomness is drawn from explicit seeds; identical seeds give
//! bit-identical outputs.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::components::components;
use crate::error::{Error, Result};
use crate::morphology;
use crate::seed;
use crate::types::{BinaryMask, BoundingBox, Canvas, ClassId, ClassRegistry, Detection, SemanticMap, BACKGROUND};

const SCENE_ATTEMPTS: usize = 32;
const MIN_SCENE_SIDE: u32 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ShapeKinds {
    Rectangles,
    Ellipses,
    #[default]
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub width: u32,
    pub height: u32,
    /// Shape count per foreground class; entry `i` belongs to class id `i + 1`.
    pub shapes_per_class: Vec<u32>,
    pub shape_kinds: ShapeKinds,
    /// Per-class size multiplier (same indexing as `shapes_per_class`); empty means 1.0.
    #[serde(default)]
    pub class_scale: Vec<f64>,
    /// 0 places shapes uniformly; larger values centre more shapes inside
    /// earlier shapes. The probability of an anchored placement is `b / (1 + b)`.
    pub overlap_bias: f64,
    pub seed: u64,
}

impl SceneSpec {
    pub fn new(width: u32, height: u32, shapes_per_class: Vec<u32>, seed: u64) -> Self {
        SceneSpec {
            width,
            height,
            shapes_per_class,
            shape_kinds: ShapeKinds::Mixed,
            class_scale: Vec::new(),
            overlap_bias: 0.0,
            seed,
        }
    }

    fn validate(&self, registry: &ClassRegistry) -> Result<()> {
        if self.width < MIN_SCENE_SIDE || self.height < MIN_SCENE_SIDE {
            return Err(Error::InvalidScene(format!(
                "canvas {}x{} is smaller than {MIN_SCENE_SIDE}x{MIN_SCENE_SIDE}",
                self.width, self.height
            )));
        }
        if self.shapes_per_class.len() > registry.num_foreground() {
            return Err(Error::InvalidScene(format!(
                "{} shape counts for {} foreground classes",
                self.shapes_per_class.len(),
                registry.num_foreground()
            )));
        }
        if !self.class_scale.is_empty() && self.class_scale.len() != self.shapes_per_class.len() {
            return Err(Error::InvalidScene(
                "class_scale length must match shapes_per_class".into(),
            ));
        }
        if self.class_scale.iter().any(|&s| !(s.is_finite() && s > 0.0)) {
            return Err(Error::InvalidScene("class_scale entries must be positive".into()));
        }
        if !(self.overlap_bias.is_finite() && self.overlap_bias >= 0.0) {
            return Err(Error::InvalidScene("overlap_bias must be >= 0".into()));
        }
        Ok(())
    }

    fn scale(&self, class_index: usize) -> f64 {
        self.class_scale.get(class_index).copied().unwrap_or(1.0)
    }
}

#[derive(Debug, Clone, Copy)]
enum Shape {
    Rect { x0: i64, y0: i64, x1: i64, y1: i64 },
    Ellipse { cx: f64, cy: f64, rx: f64, ry: f64 },
}

impl Shape {
    fn covers(&self, x: i64, y: i64) -> bool {
        match *self {
            Shape::Rect { x0, y0, x1, y1 } => x >= x0 && x < x1 && y >= y0 && y < y1,
            Shape::Ellipse { cx, cy, rx, ry } => {
                let dx = (x as f64 + 0.5 - cx) / rx;
                let dy = (y as f64 + 0.5 - cy) / ry;
                dx * dx + dy * dy <= 1.0
            }
        }
    }

    fn extent(&self) -> (f64, f64, f64, f64) {
        match *self {
            Shape::Rect { x0, y0, x1, y1 } => (x0 as f64, y0 as f64, x1 as f64, y1 as f64),
            Shape::Ellipse { cx, cy, rx, ry } => (cx - rx, cy - ry, cx + rx, cy + ry),
        }
    }
}

/// Generates a single-valued ground-truth map. Shapes are painted in draw
/// order and a later shape overwrites an earlier one.
pub fn generate_scene(spec: &SceneSpec, registry: &ClassRegistry) -> Result<SemanticMap> {
    spec.validate(registry)?;
    let canvas = Canvas::new(spec.width, spec.height)?;
    if spec.shapes_per_class.iter().all(|&n| n == 0) {
        return Ok(SemanticMap::background(canvas));
    }
    for attempt in 0..SCENE_ATTEMPTS {
        let map = draw_scene(spec, canvas, seed::derive(spec.seed, &["scene", &attempt.to_string()]));
        let complete = spec
            .shapes_per_class
            .iter()
            .enumerate()
            .filter(|(_, &n)| n > 0)
            .all(|(i, _)| map.labels().contains(&((i + 1) as ClassId)));
        if complete {
            return Ok(map);
        }
    }
    Err(Error::ScenePlacement(SCENE_ATTEMPTS))
}

fn draw_scene(spec: &SceneSpec, canvas: Canvas, seed: u64) -> SemanticMap {
    let mut rng = seed::rng(seed);
    let mut draws: Vec<usize> = spec
        .shapes_per_class
        .iter()
        .enumerate()
        .flat_map(|(i, &n)| std::iter::repeat_n(i, n as usize))
        .collect();
    // interleave classes so paint order is not grouped by class
    for i in (1..draws.len()).rev() {
        let j = rng.random_range(0..=i);
        draws.swap(i, j);
    }

    let (w, h) = (f64::from(canvas.width), f64::from(canvas.height));
    let base = w.min(h);
    let anchor_prob = spec.overlap_bias / (1.0 + spec.overlap_bias);
    let mut placed: Vec<Shape> = Vec::with_capacity(draws.len());
    let mut painted: Vec<(ClassId, Shape)> = Vec::with_capacity(draws.len());
    for class_index in draws {
        let scale = spec.scale(class_index);
        let lo = (base * 0.04 * scale).max(1.0);
        let hi = (base * 0.16 * scale).max(lo + 1.0);
        let rx = rng.random_range(lo..hi);
        let ry = rng.random_range(lo..hi);
        let (cx, cy) = if !placed.is_empty() && rng.random_bool(anchor_prob) {
            let anchor = placed[rng.random_range(0..placed.len())];
            let (ax0, ay0, ax1, ay1) = anchor.extent();
            (
                rng.random_range(ax0.max(0.0)..ax1.min(w).max(ax0.max(0.0) + 1.0)),
                rng.random_range(ay0.max(0.0)..ay1.min(h).max(ay0.max(0.0) + 1.0)),
            )
        } else {
            (rng.random_range(0.0..w), rng.random_range(0.0..h))
        };
        let ellipse = match spec.shape_kinds {
            ShapeKinds::Rectangles => false,
            ShapeKinds::Ellipses => true,
            ShapeKinds::Mixed => rng.random_bool(0.5),
        };
        let shape = if ellipse {
            Shape::Ellipse { cx, cy, rx, ry }
        } else {
            let x0 = (cx - rx).round().clamp(0.0, w - 1.0) as i64;
            let y0 = (cy - ry).round().clamp(0.0, h - 1.0) as i64;
            let x1 = ((cx + rx).round() as i64).clamp(x0 + 1, canvas.width as i64);
            let y1 = ((cy + ry).round() as i64).clamp(y0 + 1, canvas.height as i64);
            Shape::Rect { x0, y0, x1, y1 }
        };
        placed.push(shape);
        painted.push(((class_index + 1) as ClassId, shape));
    }

    let mut map = SemanticMap::background(canvas);
    for (class, shape) in painted {
        let (ex0, ey0, ex1, ey1) = shape.extent();
        let x_range = (ex0.floor().max(0.0) as u32)..(ex1.ceil().min(w) as u32);
        let y_range = (ey0.floor().max(0.0) as u32)..(ey1.ceil().min(h) as u32);
        for y in y_range {
            for x in x_range.clone() {
                if shape.covers(i64::from(x), i64::from(y)) {
                    map.set(x, y, class);
                }
            }
        }
    }
    map
}

/// One score-1.0 detection per 8-connected component of each foreground
/// class, with the component's tight box. Components smaller than
/// `min_area` are dropped. Sorted by (class, y0, x0).
pub fn extract_gt_boxes(gt: &SemanticMap, image_id: &str, min_area: u64) -> Vec<Detection> {
    let mut comps = components(gt, |c| c != BACKGROUND);
    comps.retain(|c| c.area >= min_area);
    comps.sort_by_key(|c| (c.class, c.bbox.y0, c.bbox.x0, c.bbox.y1, c.bbox.x1));
    comps
        .into_iter()
        .map(|c| Detection {
            image_id: image_id.to_string(),
            category: c.class,
            bbox: c.bbox,
            score: 1.0,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Negative erodes, positive dilates (square element of side `2|r| + 1`).
    pub morph_radius: i32,
    pub boundary_flip_prob: f64,
    pub box_jitter_sigma: f64,
    pub score_noise_sigma: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn none(seed: u64) -> Self {
        NoiseSpec {
            morph_radius: 0,
            boundary_flip_prob: 0.0,
            box_jitter_sigma: 0.0,
            score_noise_sigma: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.boundary_flip_prob) {
            return Err(Error::InvalidNoise(format!(
                "boundary_flip_prob {} outside [0, 1]",
                self.boundary_flip_prob
            )));
        }
        for (name, sigma) in [
            ("box_jitter_sigma", self.box_jitter_sigma),
            ("score_noise_sigma", self.score_noise_sigma),
        ] {
            if !(sigma.is_finite() && sigma >= 0.0) {
                return Err(Error::InvalidNoise(format!("{name} must be >= 0, got {sigma}")));
            }
        }
        Ok(())
    }
}

/// Mask a box-prompted segmenter would return if it were the ground truth:
/// pixels inside `det.bbox` labelled `det.category`, then optional
/// morphology and boundary flips.
pub fn oracle_segment(gt: &SemanticMap, det: &Detection, noise: &NoiseSpec) -> Result<BinaryMask> {
    noise.validate()?;
    let canvas = gt.canvas();
    if !det.bbox.fits(canvas) {
        return Err(Error::BoxOutOfBounds { bbox: det.bbox, canvas });
    }
    let (w, h) = (canvas.width as usize, canvas.height as usize);
    let mut bits = vec![false; canvas.area()];
    for y in det.bbox.y0..det.bbox.y1 {
        for x in det.bbox.x0..det.bbox.x1 {
            let idx = y as usize * w + x as usize;
            bits[idx] = gt.labels()[idx] == det.category;
        }
    }
    let mut bits = morphology::morph(&bits, w, h, noise.morph_radius);
    if noise.boundary_flip_prob > 0.0 {
        let edge = morphology::boundary(&bits, w, h);
        let mut rng = seed::rng(seed::derive(
            noise.seed,
            &[
                "segment",
                &det.image_id,
                &det.category.to_string(),
                &format!("{:?}", det.bbox.to_array()),
            ],
        ));
        for (bit, on_edge) in bits.iter_mut().zip(edge) {
            // one draw per pixel keeps the stream independent of the edge layout
            let flip = rng.random_bool(noise.boundary_flip_prob);
            if on_edge && flip {
                *bit = !*bit;
            }
        }
    }
    BinaryMask::encode(canvas.width, canvas.height, &bits)
}

/// Gaussian jitter on each box edge and on the score. Boxes stay nonempty and
/// inside `canvas`; scores stay in [0, 1]. Zero sigmas return the input.
pub fn perturb_detections(dets: &[Detection], noise: &NoiseSpec, canvas: Canvas) -> Result<Vec<Detection>> {
    noise.validate()?;
    let jitter =
        (noise.box_jitter_sigma > 0.0).then(|| Normal::new(0.0, noise.box_jitter_sigma).expect("validated sigma"));
    let score_noise =
        (noise.score_noise_sigma > 0.0).then(|| Normal::new(0.0, noise.score_noise_sigma).expect("validated sigma"));
    dets.iter()
        .enumerate()
        .map(|(i, d)| {
            let mut rng = seed::rng(seed::derive(noise.seed, &["perturb", &d.image_id, &i.to_string()]));
            let mut out = d.clone();
            if let Some(normal) = &jitter {
                let (w, h) = (i64::from(canvas.width), i64::from(canvas.height));
                let mut shift = |v: u32| i64::from(v) + normal.sample(&mut rng).round() as i64;
                let x0 = shift(d.bbox.x0).clamp(0, w - 1);
                let y0 = shift(d.bbox.y0).clamp(0, h - 1);
                let x1 = shift(d.bbox.x1).clamp(x0 + 1, w);
                let y1 = shift(d.bbox.y1).clamp(y0 + 1, h);
                out.bbox = BoundingBox::within(x0 as u32, y0 as u32, x1 as u32, y1 as u32, canvas)?;
            }
            if let Some(normal) = &score_noise {
                out.score = (d.score + normal.sample(&mut rng)).clamp(0.0, 1.0);
            }
            Ok(out)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reg() -> ClassRegistry {
        ClassRegistry::m4d()
    }

    #[test]
    fn empty_spec_is_background() {
        let spec = SceneSpec::new(16, 16, vec![0, 0, 0, 0], 1);
        let map = generate_scene(&spec, &reg()).unwrap();
        assert!(map.labels().iter().all(|&l| l == 0));
    }

    #[test]
    fn scene_is_seeded() {
        let spec = SceneSpec::new(48, 32, vec![2, 2, 3, 1], 11);
        let a = generate_scene(&spec, &reg()).unwrap();
        let b = generate_scene(&spec, &reg()).unwrap();
        assert_eq!(a, b);
        for class in 1..=4u8 {
            assert!(a.labels().contains(&class));
        }
        let other = generate_scene(&SceneSpec { seed: 12, ..spec }, &reg()).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn single_rectangle_is_one_component() {
        for s in 0..20 {
            let mut spec = SceneSpec::new(32, 32, vec![0, 0, 1, 0], s);
            spec.shape_kinds = ShapeKinds::Rectangles;
            let map = generate_scene(&spec, &reg()).unwrap();
            let comps = components(&map, |c| c != 0);
            assert_eq!(comps.len(), 1);
            assert_eq!(comps[0].class, 3);
        }
    }

    #[test]
    fn scene_validation() {
        assert!(generate_scene(&SceneSpec::new(7, 20, vec![1], 0), &reg()).is_err());
        assert!(generate_scene(&SceneSpec::new(20, 20, vec![1; 5], 0), &reg()).is_err());
        let mut spec = SceneSpec::new(20, 20, vec![1], 0);
        spec.overlap_bias = -1.0;
        assert!(generate_scene(&spec, &reg()).is_err());
    }

    #[test]
    fn gt_box_of_rectangle() {
        let canvas = Canvas::new(10, 8).unwrap();
        let mut map = SemanticMap::background(canvas);
        for y in 2..5 {
            for x in 2..7 {
                map.set(x, y, 3);
            }
        }
        let dets = extract_gt_boxes(&map, "img1", 1);
        assert_eq!(dets.len(), 1);
        assert_eq!(dets[0].bbox, BoundingBox::new(2, 2, 7, 5).unwrap());
        assert_eq!(dets[0].score, 1.0);
        assert_eq!(dets[0].category, 3);
        assert!(extract_gt_boxes(&map, "img1", 16).is_empty());
        assert!(extract_gt_boxes(&SemanticMap::background(canvas), "x", 1).is_empty());
    }

    #[test]
    fn gt_boxes_sorted() {
        let map = SemanticMap::from_labels(4, 3, vec![2, 0, 0, 1, 0, 0, 0, 0, 1, 0, 2, 0]).unwrap();
        let dets = extract_gt_boxes(&map, "i", 1);
        let keys: Vec<_> = dets.iter().map(|d| (d.category, d.bbox.y0, d.bbox.x0)).collect();
        assert_eq!(keys, vec![(1, 0, 3), (1, 2, 0), (2, 0, 0), (2, 2, 2)]);
    }

    #[test]
    fn zero_noise_segment_is_exact() {
        let spec = SceneSpec::new(40, 40, vec![2, 2, 2, 2], 5);
        let gt = generate_scene(&spec, &reg()).unwrap();
        for det in extract_gt_boxes(&gt, "s", 1) {
            let m = oracle_segment(&gt, &det, &NoiseSpec::none(0)).unwrap();
            let bits = m.decode();
            for (idx, &b) in bits.iter().enumerate() {
                let (x, y) = ((idx % 40) as u32, (idx / 40) as u32);
                let expected = det.bbox.contains(x, y) && gt.get(x, y) == det.category;
                assert_eq!(b, expected);
            }
        }
    }

    #[test]
    fn dilation_of_single_pixel() {
        let canvas = Canvas::new(7, 7).unwrap();
        let mut gt = SemanticMap::background(canvas);
        gt.set(3, 3, 1);
        let det = Detection::new("x", 1, BoundingBox::new(3, 3, 4, 4).unwrap(), 1.0).unwrap();
        let noise = NoiseSpec {
            morph_radius: 1,
            ..NoiseSpec::none(0)
        };
        let m = oracle_segment(&gt, &det, &noise).unwrap();
        assert_eq!(m.area(), 9);
        let bits = m.decode();
        for y in 2..5 {
            for x in 2..5 {
                assert!(bits[y * 7 + x]);
            }
        }
        let eroded = oracle_segment(
            &gt,
            &det,
            &NoiseSpec {
                morph_radius: -1,
                ..noise
            },
        )
        .unwrap();
        assert!(eroded.is_empty());
    }

    #[test]
    fn box_without_category_gives_empty_mask() {
        let gt = SemanticMap::from_labels(3, 3, vec![0, 0, 0, 0, 2, 0, 0, 0, 0]).unwrap();
        let det = Detection::new("x", 1, BoundingBox::new(0, 0, 3, 3).unwrap(), 1.0).unwrap();
        assert!(oracle_segment(&gt, &det, &NoiseSpec::none(9)).unwrap().is_empty());
    }

    #[test]
    fn boundary_flips_are_seeded_and_local() {
        let spec = SceneSpec::new(32, 32, vec![1, 1, 1, 1], 2);
        let gt = generate_scene(&spec, &reg()).unwrap();
        let det = &extract_gt_boxes(&gt, "s", 1)[0];
        let noise = NoiseSpec {
            boundary_flip_prob: 0.5,
            ..NoiseSpec::none(4)
        };
        let a = oracle_segment(&gt, det, &noise).unwrap();
        assert_eq!(a, oracle_segment(&gt, det, &noise).unwrap());
        let clean = oracle_segment(&gt, det, &NoiseSpec::none(4)).unwrap().decode();
        let edge = morphology::boundary(&clean, 32, 32);
        for ((&x, &c), &e) in a.decode().iter().zip(&clean).zip(&edge) {
            if x != c {
                assert!(e);
            }
        }
    }

    #[test]
    fn perturb_identity_and_bounds() {
        let canvas = Canvas::new(20, 20).unwrap();
        let dets = vec![
            Detection::new("a", 1, BoundingBox::new(10, 10, 20, 20).unwrap(), 0.7).unwrap(),
            Detection::new("a", 2, BoundingBox::new(0, 0, 3, 3).unwrap(), 0.1).unwrap(),
        ];
        assert_eq!(perturb_detections(&dets, &NoiseSpec::none(3), canvas).unwrap(), dets);
        let noise = NoiseSpec {
            box_jitter_sigma: 5.0,
            score_noise_sigma: 0.3,
            ..NoiseSpec::none(0)
        };
        for s in 0..1000 {
            let noise = NoiseSpec {
                seed: s,
                ..noise.clone()
            };
            let out = perturb_detections(&dets, &noise, canvas).unwrap();
            assert_eq!(out, perturb_detections(&dets, &noise, canvas).unwrap());
            for d in &out {
                assert!(d.bbox.fits(canvas));
                assert!((0.0..=1.0).contains(&d.score));
            }
        }
    }

    #[test]
    fn noise_validation() {
        let bad = NoiseSpec {
            boundary_flip_prob: 1.5,
            ..NoiseSpec::none(0)
        };
        assert!(bad.validate().is_err());
        let bad = NoiseSpec {
            box_jitter_sigma: -1.0,
            ..NoiseSpec::none(0)
        };
        assert!(bad.validate().is_err());
    }
}
