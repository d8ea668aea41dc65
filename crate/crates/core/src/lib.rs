//! Ordered mask fusion for detector + promptable-segmenter pipelines.
//!
//! A detector yields categories, boxes and scores; a box-prompted segmenter
//! yields one category-agnostic binary mask per box. This crate filters the
//! detections by score, fuses the labelled masks into a semantic map (by
//! category priority or in a seeded random sequence), scores the result
//! against ground truth, and provides synthetic oracles so the whole chain
//! can be exercised without neural models.

pub mod codec;
pub mod components;
pub mod error;
pub mod exec;
pub mod fusion;
pub mod metrics;
pub mod morphology;
pub mod oracle;
pub mod seed;
pub mod types;

pub use error::{Error, Result};
pub use exec::Jobs;
pub use fusion::{
    filter_detections, fuse, fuse_pipeline, ordered_mask_fusion, random_mask_fusion, FilterConfig, FusionStrategy,
    PipelineConfig,
};
pub use metrics::{f1_from_iou, iou_per_class, summarize, ConfusionMatrix, MetricsReport};
pub use types::{
    BinaryMask, BoundingBox, Canvas, ClassId, ClassRegistry, Detection, FusionOrder, ImageRef, LabeledMask,
    SemanticMap, BACKGROUND,
};
