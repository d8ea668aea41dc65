//! Score filtering and mask fusion.
//!
//! Both fusion strategies share one first-wins fill over a background
//! canvas: masks are visited in sequence and each pixel keeps the category of
//! the first mask that covers it. [`ordered_mask_fusion`] visits masks by
//! category priority, [`random_mask_fusion`] in a seeded random permutation.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};
use std::fmt;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::seed;
use crate::types::{
    BinaryMask, Canvas, ClassId, ClassRegistry, Detection, FusionOrder, LabeledMask, SemanticMap, BACKGROUND,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterConfig {
    score_threshold: f64,
}

impl FilterConfig {
    pub fn new(score_threshold: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&score_threshold) {
            return Err(Error::InvalidThreshold(score_threshold));
        }
        Ok(FilterConfig { score_threshold })
    }

    pub fn score_threshold(&self) -> f64 {
        self.score_threshold
    }

    /// Strictly greater: a score equal to the threshold is dropped.
    pub fn keeps(&self, score: f64) -> bool {
        score > self.score_threshold
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum FusionStrategy {
    Ordered(FusionOrder),
    Random { seed: u64 },
}

impl FusionStrategy {
    /// Parses `ordered:<name>,<name>,...` or `random:<seed>`.
    pub fn parse(spec: &str, registry: &ClassRegistry) -> Result<Self> {
        let (kind, arg) = spec
            .split_once(':')
            .ok_or_else(|| Error::InvalidStrategy(spec.to_string()))?;
        match kind.trim() {
            "ordered" => {
                let names: Vec<&str> = arg.split(',').map(str::trim).collect();
                Ok(FusionStrategy::Ordered(FusionOrder::from_names(&names, registry)?))
            }
            "random" => arg
                .trim()
                .parse()
                .map(|seed| FusionStrategy::Random { seed })
                .map_err(|_| Error::InvalidStrategy(spec.to_string())),
            _ => Err(Error::InvalidStrategy(spec.to_string())),
        }
    }

    /// Inverse of [`FusionStrategy::parse`].
    pub fn describe(&self, registry: &ClassRegistry) -> String {
        match self {
            FusionStrategy::Ordered(order) => format!("ordered:{}", order.describe(registry)),
            FusionStrategy::Random { seed } => format!("random:{seed}"),
        }
    }
}

impl fmt::Display for FusionStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FusionStrategy::Ordered(order) => write!(f, "ordered:{:?}", order.priority()),
            FusionStrategy::Random { seed } => write!(f, "random:{seed}"),
        }
    }
}

/// Indices of the detections that pass `cfg`, in input order.
pub fn surviving_indices(dets: &[Detection], cfg: &FilterConfig) -> Vec<usize> {
    dets.iter()
        .enumerate()
        .filter(|(_, d)| cfg.keeps(d.score))
        .map(|(i, _)| i)
        .collect()
}

/// Detections with score strictly above the threshold, order preserved.
pub fn filter_detections(dets: &[Detection], cfg: &FilterConfig) -> Vec<Detection> {
    dets.iter().filter(|d| cfg.keeps(d.score)).cloned().collect()
}

fn check_dims(masks: &[LabeledMask], canvas: Canvas) -> Result<()> {
    for m in masks {
        if m.mask.canvas() != canvas {
            return Err(Error::DimensionMismatch {
                expected: canvas,
                actual: m.mask.canvas(),
            });
        }
    }
    Ok(())
}

fn fill_first_wins<'a>(sequence: impl Iterator<Item = &'a LabeledMask>, canvas: Canvas) -> SemanticMap {
    let mut out = SemanticMap::background(canvas);
    let labels = out.labels_mut();
    for m in sequence {
        for span in m.mask.foreground_spans() {
            for label in &mut labels[span] {
                if *label == BACKGROUND {
                    *label = m.category;
                }
            }
        }
    }
    out
}

/// Fuses labelled masks by category priority.
///
/// Masks are stably sorted by the rank of their category in `order`, then by
/// descending score, then by ascending `source_index`; each pixel takes the
/// category of the first covering mask. The tie-break inside a category never
/// changes the output.
pub fn ordered_mask_fusion(masks: &[LabeledMask], order: &FusionOrder, canvas: Canvas) -> Result<SemanticMap> {
    check_dims(masks, canvas)?;
    let mut keyed = Vec::with_capacity(masks.len());
    for m in masks {
        let rank = order.rank(m.category).ok_or(Error::CategoryNotInOrder(m.category))?;
        keyed.push((rank, m));
    }
    keyed.sort_by(|(ra, a), (rb, b)| {
        ra.cmp(rb)
            .then_with(|| b.score.total_cmp(&a.score))
            .then_with(|| a.source_index.cmp(&b.source_index))
    });
    Ok(fill_first_wins(keyed.into_iter().map(|(_, m)| m), canvas))
}

/// Fuses labelled masks in a seeded pseudorandom sequence.
pub fn random_mask_fusion(masks: &[LabeledMask], seed: u64, canvas: Canvas) -> Result<SemanticMap> {
    check_dims(masks, canvas)?;
    if let Some(m) = masks.iter().find(|m| m.category == BACKGROUND) {
        return Err(Error::CategoryNotInOrder(m.category));
    }
    let mut sequence: Vec<&LabeledMask> = masks.iter().collect();
    // shuffle a canonical arrangement so the result does not depend on caller order
    sequence.sort_by_key(|m| m.source_index);
    sequence.shuffle(&mut seed::rng(seed));
    Ok(fill_first_wins(sequence.into_iter(), canvas))
}

pub fn fuse(masks: &[LabeledMask], strategy: &FusionStrategy, canvas: Canvas) -> Result<SemanticMap> {
    match strategy {
        FusionStrategy::Ordered(order) => ordered_mask_fusion(masks, order, canvas),
        FusionStrategy::Random { seed } => random_mask_fusion(masks, *seed, canvas),
    }
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub filter: FilterConfig,
    pub strategy: FusionStrategy,
    /// Zero mask pixels outside the detection box before fusing.
    pub clip_to_box: bool,
}

/// Filter, pair each surviving detection with its mask, fuse.
///
/// `masks` is keyed by the detection's index in `dets`; only surviving
/// detections need a mask.
pub fn fuse_pipeline(
    dets: &[Detection],
    masks: &HashMap<usize, BinaryMask>,
    cfg: &PipelineConfig,
    canvas: Canvas,
) -> Result<SemanticMap> {
    let labeled = surviving_indices(dets, &cfg.filter)
        .into_iter()
        .map(|i| {
            let mask = masks.get(&i).ok_or(Error::MissingMask(i))?;
            let det = &dets[i];
            let mask = if cfg.clip_to_box {
                mask.clipped_to(&det.bbox)
            } else {
                mask.clone()
            };
            Ok(LabeledMask {
                mask,
                category: det.category,
                score: det.score,
                source_index: i,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    fuse(&labeled, &cfg.strategy, canvas)
}

fn spans_intersect(a: &BinaryMask, b: &BinaryMask) -> bool {
    let mut ia = a.foreground_spans().peekable();
    let mut ib = b.foreground_spans().peekable();
    while let (Some(sa), Some(sb)) = (ia.peek(), ib.peek()) {
        if sa.start < sb.end && sb.start < sa.end {
            return true;
        }
        match sa.end.cmp(&sb.end) {
            Ordering::Less => {
                ia.next();
            }
            _ => {
                ib.next();
            }
        }
    }
    false
}

/// Unordered category pairs `(a, b)` with `a < b` whose masks share at least
/// one pixel.
pub fn contested_pairs(masks: &[LabeledMask]) -> BTreeSet<(ClassId, ClassId)> {
    let mut pairs = BTreeSet::new();
    for (i, a) in masks.iter().enumerate() {
        for b in &masks[i + 1..] {
            if a.category == b.category {
                continue;
            }
            let key = (a.category.min(b.category), a.category.max(b.category));
            if !pairs.contains(&key) && spans_intersect(&a.mask, &b.mask) {
                pairs.insert(key);
            }
        }
    }
    pairs
}

/// True when both orders rank every contested pair the same way, which
/// implies identical fusion output.
pub fn orders_agree_on(a: &FusionOrder, b: &FusionOrder, contested: &BTreeSet<(ClassId, ClassId)>) -> bool {
    contested.iter().all(|&(x, y)| a.prefers(x, y) == b.prefers(x, y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::BoundingBox;

    fn mask_from(canvas: Canvas, pixels: &[(u32, u32)]) -> BinaryMask {
        let mut bits = vec![false; canvas.area()];
        for &(r, c) in pixels {
            bits[(r * canvas.width + c) as usize] = true;
        }
        BinaryMask::encode(canvas.width, canvas.height, &bits).unwrap()
    }

    fn labeled(mask: BinaryMask, category: ClassId, idx: usize) -> LabeledMask {
        LabeledMask {
            mask,
            category,
            score: 0.5,
            source_index: idx,
        }
    }

    fn det(score: f64) -> Detection {
        Detection::new("img", 1, BoundingBox::new(0, 0, 1, 1).unwrap(), score).unwrap()
    }

    #[test]
    fn filter_is_strict() {
        let dets: Vec<_> = [0.1, 0.2, 0.25, 0.9].iter().map(|&s| det(s)).collect();
        let kept = filter_detections(&dets, &FilterConfig::new(0.2).unwrap());
        let scores: Vec<f64> = kept.iter().map(|d| d.score).collect();
        assert_eq!(scores, vec![0.25, 0.9]);
        assert!(filter_detections(&[], &FilterConfig::new(0.5).unwrap()).is_empty());
        let all: Vec<_> = [0.01, 0.5, 1.0].iter().map(|&s| det(s)).collect();
        assert_eq!(filter_detections(&all, &FilterConfig::new(0.0).unwrap()), all);
        assert!(FilterConfig::new(1.01).is_err());
        assert!(FilterConfig::new(-0.1).is_err());
    }

    #[test]
    fn algorithm_order_example() {
        let reg = ClassRegistry::m4d();
        let canvas = Canvas::new(4, 4).unwrap();
        let look_alike = labeled(mask_from(canvas, &[(0, 0), (0, 1)]), 2, 0);
        let ship = labeled(mask_from(canvas, &[(0, 1), (0, 2)]), 3, 1);
        let order = FusionOrder::from_names(&["ship", "land", "oil_spill", "look_alike"], &reg).unwrap();
        let out = ordered_mask_fusion(&[look_alike, ship], &order, canvas).unwrap();
        // get() takes (x, y); the scene above is given as (row, col)
        assert_eq!(out.get(1, 0), 3);
        assert_eq!(out.get(0, 0), 2);
        assert_eq!(out.get(2, 0), 3);
        let fg = out.labels().iter().filter(|&&l| l != 0).count();
        assert_eq!(fg, 3);
    }

    #[test]
    fn no_masks_is_background() {
        let reg = ClassRegistry::m4d();
        let canvas = Canvas::new(3, 2).unwrap();
        let out = ordered_mask_fusion(&[], &FusionOrder::identity(&reg), canvas).unwrap();
        assert_eq!(out, SemanticMap::background(canvas));
        assert_eq!(random_mask_fusion(&[], 3, canvas).unwrap(), out);
    }

    #[test]
    fn disjoint_masks_are_order_free() {
        let reg = ClassRegistry::m4d();
        let canvas = Canvas::new(5, 5).unwrap();
        let masks = vec![
            labeled(mask_from(canvas, &[(0, 0), (0, 1)]), 1, 0),
            labeled(mask_from(canvas, &[(2, 2)]), 2, 1),
            labeled(mask_from(canvas, &[(4, 4), (3, 4)]), 3, 2),
            labeled(mask_from(canvas, &[(4, 0)]), 4, 3),
        ];
        let reference = ordered_mask_fusion(&masks, &FusionOrder::identity(&reg), canvas).unwrap();
        for order in FusionOrder::all(&reg) {
            assert_eq!(ordered_mask_fusion(&masks, &order, canvas).unwrap(), reference);
        }
        for seed in 0..20 {
            assert_eq!(random_mask_fusion(&masks, seed, canvas).unwrap(), reference);
        }
        assert!(contested_pairs(&masks).is_empty());
    }

    #[test]
    fn random_single_mask() {
        let canvas = Canvas::new(3, 3).unwrap();
        let m = mask_from(canvas, &[(1, 1), (2, 2)]);
        let out = random_mask_fusion(&[labeled(m, 4, 0)], 99, canvas).unwrap();
        assert_eq!(out.get(1, 1), 4);
        assert_eq!(out.get(2, 2), 4);
        assert_eq!(out.labels().iter().filter(|&&l| l == 0).count(), 7);
    }

    #[test]
    fn dimension_mismatch() {
        let reg = ClassRegistry::m4d();
        let m = labeled(BinaryMask::empty(Canvas::new(2, 2).unwrap()), 1, 0);
        let canvas = Canvas::new(3, 3).unwrap();
        assert!(matches!(
            ordered_mask_fusion(std::slice::from_ref(&m), &FusionOrder::identity(&reg), canvas),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            random_mask_fusion(&[m], 1, canvas),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn category_outside_order() {
        let reg = ClassRegistry::m4d();
        let canvas = Canvas::new(2, 2).unwrap();
        let m = labeled(BinaryMask::empty(canvas), 7, 0);
        assert!(matches!(
            ordered_mask_fusion(&[m], &FusionOrder::identity(&reg), canvas),
            Err(Error::CategoryNotInOrder(7))
        ));
    }

    #[test]
    fn pipeline_missing_mask() {
        let reg = ClassRegistry::m4d();
        let canvas = Canvas::new(2, 2).unwrap();
        let dets = vec![det(0.9), det(0.1)];
        let mut masks = HashMap::new();
        let cfg = PipelineConfig {
            filter: FilterConfig::new(0.2).unwrap(),
            strategy: FusionStrategy::Ordered(FusionOrder::identity(&reg)),
            clip_to_box: false,
        };
        assert!(matches!(
            fuse_pipeline(&dets, &masks, &cfg, canvas),
            Err(Error::MissingMask(0))
        ));
        // the filtered-out detection needs no mask
        masks.insert(0, mask_from(canvas, &[(1, 1)]));
        let out = fuse_pipeline(&dets, &masks, &cfg, canvas).unwrap();
        assert_eq!(out.get(1, 1), 1);
    }

    #[test]
    fn pipeline_clip_to_box() {
        let reg = ClassRegistry::m4d();
        let canvas = Canvas::new(3, 3).unwrap();
        let d = Detection::new("img", 2, BoundingBox::new(0, 0, 2, 2).unwrap(), 0.9).unwrap();
        let masks = HashMap::from([(0, mask_from(canvas, &[(0, 0), (2, 2)]))]);
        let mut cfg = PipelineConfig {
            filter: FilterConfig::new(0.0).unwrap(),
            strategy: FusionStrategy::Ordered(FusionOrder::identity(&reg)),
            clip_to_box: false,
        };
        let unclipped = fuse_pipeline(std::slice::from_ref(&d), &masks, &cfg, canvas).unwrap();
        assert_eq!(unclipped.get(2, 2), 2);
        cfg.clip_to_box = true;
        let clipped = fuse_pipeline(&[d], &masks, &cfg, canvas).unwrap();
        assert_eq!(clipped.get(2, 2), 0);
        assert_eq!(clipped.get(0, 0), 2);
    }

    #[test]
    fn strategy_parsing() {
        let reg = ClassRegistry::m4d();
        let s = FusionStrategy::parse("ordered:ship, land,oil_spill,look_alike", &reg).unwrap();
        assert_eq!(s.describe(&reg), "ordered:ship,land,oil_spill,look_alike");
        let r = FusionStrategy::parse("random:42", &reg).unwrap();
        assert_eq!(r, FusionStrategy::Random { seed: 42 });
        assert_eq!(r.describe(&reg), "random:42");
        assert!(FusionStrategy::parse("random:x", &reg).is_err());
        assert!(FusionStrategy::parse("greedy:1", &reg).is_err());
        assert!(FusionStrategy::parse("ordered:ship,land", &reg).is_err());
        assert!(FusionStrategy::parse("ship", &reg).is_err());
    }

    #[test]
    fn contested_and_agreement() {
        let reg = ClassRegistry::m4d();
        let canvas = Canvas::new(4, 4).unwrap();
        let masks = vec![
            labeled(mask_from(canvas, &[(0, 0), (0, 1)]), 2, 0),
            labeled(mask_from(canvas, &[(0, 1), (0, 2)]), 3, 1),
            labeled(mask_from(canvas, &[(3, 3)]), 1, 2),
        ];
        let contested = contested_pairs(&masks);
        assert_eq!(contested, BTreeSet::from([(2, 3)]));
        let a = FusionOrder::from_names(&["ship", "land", "oil_spill", "look_alike"], &reg).unwrap();
        let b = FusionOrder::from_names(&["land", "ship", "look_alike", "oil_spill"], &reg).unwrap();
        let c = FusionOrder::from_names(&["look_alike", "ship", "land", "oil_spill"], &reg).unwrap();
        assert!(orders_agree_on(&a, &b, &contested));
        assert!(!orders_agree_on(&a, &c, &contested));
    }
}
