//! Pixel confusion matrices and the derived IoU / F1 summaries.
//!
//! Metrics are computed from one dataset-level matrix (the cellwise sum of
//! per-image matrices). Classes whose union is empty are excluded from the
//! means; the report also carries the absent-as-zero variant for comparison.

use std::ops::AddAssign;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{ClassId, ClassRegistry, SemanticMap};

/// `cells[g * n + p]` counts pixels with ground truth `g` predicted as `p`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    n_classes: usize,
    cells: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(n_classes: usize) -> Self {
        ConfusionMatrix {
            n_classes,
            cells: vec![0; n_classes * n_classes],
        }
    }

    pub fn from_cells(n_classes: usize, cells: Vec<u64>) -> Result<Self> {
        if cells.len() != n_classes * n_classes {
            return Err(Error::GridSizeMismatch {
                expected: n_classes * n_classes,
                actual: cells.len(),
            });
        }
        Ok(ConfusionMatrix { n_classes, cells })
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn cells(&self) -> &[u64] {
        &self.cells
    }

    pub fn get(&self, gt: ClassId, pred: ClassId) -> u64 {
        self.cells[usize::from(gt) * self.n_classes + usize::from(pred)]
    }

    pub fn total(&self) -> u64 {
        self.cells.iter().sum()
    }

    /// Adds one image's pixels.
    pub fn accumulate(&mut self, pred: &SemanticMap, gt: &SemanticMap) -> Result<()> {
        if pred.canvas() != gt.canvas() {
            return Err(Error::DimensionMismatch {
                expected: gt.canvas(),
                actual: pred.canvas(),
            });
        }
        let n = self.n_classes;
        if let Some(&bad) = gt.labels().iter().chain(pred.labels()).find(|&&l| usize::from(l) >= n) {
            return Err(Error::UnknownClassId(bad));
        }
        for (&g, &p) in gt.labels().iter().zip(pred.labels()) {
            self.cells[usize::from(g) * n + usize::from(p)] += 1;
        }
        Ok(())
    }

    /// Matrix of a single image pair.
    pub fn of(pred: &SemanticMap, gt: &SemanticMap, n_classes: usize) -> Result<Self> {
        let mut cm = ConfusionMatrix::new(n_classes);
        cm.accumulate(pred, gt)?;
        Ok(cm)
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.n_classes != self.n_classes {
            return Err(Error::ClassCountMismatch {
                expected: self.n_classes,
                actual: other.n_classes,
            });
        }
        for (a, b) in self.cells.iter_mut().zip(&other.cells) {
            *a += b;
        }
        Ok(())
    }

    /// (true positives, false positives, false negatives) for `class`.
    pub fn counts(&self, class: usize) -> (u64, u64, u64) {
        let n = self.n_classes;
        let tp = self.cells[class * n + class];
        let predicted: u64 = (0..n).map(|g| self.cells[g * n + class]).sum();
        let actual: u64 = self.cells[class * n..(class + 1) * n].iter().sum();
        (tp, predicted - tp, actual - tp)
    }
}

impl AddAssign<&ConfusionMatrix> for ConfusionMatrix {
    /// Panics when the class counts differ; use [`ConfusionMatrix::merge`] to get an error instead.
    fn add_assign(&mut self, rhs: &ConfusionMatrix) {
        self.merge(rhs).expect("confusion matrices of equal size");
    }
}

/// Per-class IoU; `None` where the class has an empty union.
pub fn iou_per_class(cm: &ConfusionMatrix) -> Vec<Option<f64>> {
    (0..cm.n_classes())
        .map(|c| {
            let (tp, fp, fn_) = cm.counts(c);
            let denom = tp + fp + fn_;
            (denom > 0).then(|| tp as f64 / denom as f64)
        })
        .collect()
}

/// Dice/F1 from IoU: `2·iou / (1 + iou)`.
pub fn f1_from_iou(iou: f64) -> f64 {
    if iou <= 0.0 {
        0.0
    } else {
        2.0 * iou / (1.0 + iou)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScore {
    pub class_id: ClassId,
    pub name: String,
    pub iou: Option<f64>,
    pub f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_class: Vec<ClassScore>,
    pub miou: f64,
    pub mf1: f64,
    pub evaluated_classes: Vec<ClassId>,
    /// How classes with an empty union enter the means. Always `"exclude"`
    /// for `miou`/`mf1`; the `*_absent_as_zero` fields show the alternative.
    pub absent_class_policy: String,
    pub miou_absent_as_zero: f64,
    pub mf1_absent_as_zero: f64,
    pub total_pixels: u64,
}

impl MetricsReport {
    /// Builds a report straight from per-class IoUs, e.g. a published table row.
    pub fn from_ious(registry: &ClassRegistry, ious: &[Option<f64>], total_pixels: u64) -> Result<Self> {
        if ious.len() != registry.len() {
            return Err(Error::ClassCountMismatch {
                expected: registry.len(),
                actual: ious.len(),
            });
        }
        let per_class: Vec<ClassScore> = ious
            .iter()
            .enumerate()
            .map(|(i, &iou)| ClassScore {
                class_id: i as ClassId,
                name: registry.name(i as ClassId).unwrap_or("?").to_string(),
                iou,
                f1: iou.map(f1_from_iou),
            })
            .collect();
        let evaluated_classes: Vec<ClassId> = per_class
            .iter()
            .filter(|s| s.iou.is_some())
            .map(|s| s.class_id)
            .collect();
        if evaluated_classes.is_empty() {
            return Err(Error::NoData);
        }
        let defined = evaluated_classes.len() as f64;
        let all = per_class.len() as f64;
        let iou_sum: f64 = per_class.iter().filter_map(|s| s.iou).sum();
        let f1_sum: f64 = per_class.iter().filter_map(|s| s.f1).sum();
        Ok(MetricsReport {
            miou: iou_sum / defined,
            mf1: f1_sum / defined,
            miou_absent_as_zero: iou_sum / all,
            mf1_absent_as_zero: f1_sum / all,
            per_class,
            evaluated_classes,
            absent_class_policy: "exclude".to_string(),
            total_pixels,
        })
    }

    pub fn ious(&self) -> Vec<Option<f64>> {
        self.per_class.iter().map(|s| s.iou).collect()
    }
}

/// Dataset-level report. Background is one of the averaged classes.
pub fn summarize(cm: &ConfusionMatrix, registry: &ClassRegistry) -> Result<MetricsReport> {
    if cm.n_classes() != registry.len() {
        return Err(Error::ClassCountMismatch {
            expected: registry.len(),
            actual: cm.n_classes(),
        });
    }
    let total = cm.total();
    if total == 0 {
        return Err(Error::NoData);
    }
    MetricsReport::from_ious(registry, &iou_per_class(cm), total)
}
