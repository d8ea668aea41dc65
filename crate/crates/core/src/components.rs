//! 8-connected component labelling of single-class regions.

use std::collections::VecDeque;

use crate::types::{BoundingBox, ClassId, SemanticMap};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    pub class: ClassId,
    pub bbox: BoundingBox,
    pub area: u64,
}

/// Components of every class in `classes`, discovered in raster order of
/// their first pixel.
pub fn components(map: &SemanticMap, mut wanted: impl FnMut(ClassId) -> bool) -> Vec<Component> {
    let w = map.width() as usize;
    let h = map.height() as usize;
    let labels = map.labels();
    let mut seen = vec![false; labels.len()];
    let mut queue = VecDeque::new();
    let mut out = Vec::new();
    for start in 0..labels.len() {
        let class = labels[start];
        if seen[start] || !wanted(class) {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
        let mut area = 0u64;
        while let Some(idx) = queue.pop_front() {
            let (x, y) = (idx % w, idx / w);
            area += 1;
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x + 1);
            y1 = y1.max(y + 1);
            for ny in y.saturating_sub(1)..(y + 2).min(h) {
                for nx in x.saturating_sub(1)..(x + 2).min(w) {
                    let n = ny * w + nx;
                    if !seen[n] && labels[n] == class {
                        seen[n] = true;
                        queue.push_back(n);
                    }
                }
            }
        }
        out.push(Component {
            class,
            bbox: BoundingBox {
                x0: x0 as u32,
                y0: y0 as u32,
                x1: x1 as u32,
                y1: y1 as u32,
            },
            area,
        });
    }
    out
}
