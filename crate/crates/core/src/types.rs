//! Domain values shared by every other module.
//!
//! Everything here is an immutable value once constructed; constructors
//! validate the invariants so downstream code can rely on them.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Class identifier. Id 0 is always the background class.
pub type ClassId = u8;

pub const BACKGROUND: ClassId = 0;

/// Ordered set of class names; the position of a name is its [`ClassId`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RegistryRepr", into = "RegistryRepr")]
pub struct ClassRegistry {
    names: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct RegistryRepr {
    classes: Vec<String>,
}

impl TryFrom<RegistryRepr> for ClassRegistry {
    type Error = Error;

    fn try_from(repr: RegistryRepr) -> Result<Self, Error> {
        let background = repr.classes.first().cloned().ok_or(Error::EmptyRegistry)?;
        ClassRegistry::new(&repr.classes, &background)
    }
}

impl From<ClassRegistry> for RegistryRepr {
    fn from(reg: ClassRegistry) -> Self {
        RegistryRepr { classes: reg.names }
    }
}

impl ClassRegistry {
    /// Builds a registry: `background_name` gets id 0 and the remaining names
    /// get ids 1..n in the order given.
    pub fn new<S: AsRef<str>>(names: &[S], background_name: &str) -> Result<Self, Error> {
        let mut seen = HashSet::new();
        for name in names {
            let name = name.as_ref();
            if name.is_empty() {
                return Err(Error::EmptyClassName);
            }
            if !seen.insert(name) {
                return Err(Error::DuplicateClass(name.to_string()));
            }
        }
        if !seen.contains(background_name) {
            return Err(Error::MissingBackground(background_name.to_string()));
        }
        if names.len() > usize::from(ClassId::MAX) + 1 {
            return Err(Error::TooManyClasses(names.len()));
        }
        let mut ordered = vec![background_name.to_string()];
        ordered.extend(
            names
                .iter()
                .map(|n| n.as_ref())
                .filter(|n| *n != background_name)
                .map(str::to_string),
        );
        Ok(ClassRegistry { names: ordered })
    }

    /// The five-class oil-spill registry: sea surface (background), oil
    /// spill, look-alike, ship, land.
    pub fn m4d() -> Self {
        ClassRegistry::new(
            &["sea_surface", "oil_spill", "look_alike", "ship", "land"],
            "sea_surface",
        )
        .expect("static registry is valid")
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn background_id(&self) -> ClassId {
        BACKGROUND
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, id: ClassId) -> Option<&str> {
        self.names.get(usize::from(id)).map(String::as_str)
    }

    pub fn id(&self, name: &str) -> Option<ClassId> {
        self.names.iter().position(|n| n == name).map(|i| i as ClassId)
    }

    pub fn contains(&self, id: ClassId) -> bool {
        usize::from(id) < self.names.len()
    }

    pub fn foreground_ids(&self) -> impl Iterator<Item = ClassId> + '_ {
        (1..self.names.len()).map(|i| i as ClassId)
    }

    pub fn num_foreground(&self) -> usize {
        self.names.len().saturating_sub(1)
    }
}

/// Image metadata. Pixel content is never read by the engine.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ImageRef {
    pub image_id: String,
    pub width: u32,
    pub height: u32,
}

impl ImageRef {
    pub fn new(image_id: impl Into<String>, width: u32, height: u32) -> Result<Self, Error> {
        let image_id = image_id.into();
        if image_id.is_empty() {
            return Err(Error::EmptyImageId);
        }
        if width == 0 || height == 0 {
            return Err(Error::EmptyCanvas { width, height });
        }
        Ok(ImageRef {
            image_id,
            width,
            height,
        })
    }

    pub fn canvas(&self) -> Canvas {
        Canvas {
            width: self.width,
            height: self.height,
        }
    }
}

/// Width × height of an image grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Canvas {
    pub width: u32,
    pub height: u32,
}

impl Canvas {
    pub fn new(width: u32, height: u32) -> Result<Self, Error> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyCanvas { width, height });
        }
        Ok(Canvas { width, height })
    }

    pub fn area(&self) -> usize {
        self.width as usize * self.height as usize
    }
}

impl fmt::Display for Canvas {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.width, self.height)
    }
}

/// Half-open pixel box `[x0, x1) × [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

impl BoundingBox {
    /// Checks only that the box is nonempty.
    pub fn new(x0: u32, y0: u32, x1: u32, y1: u32) -> Result<Self, Error> {
        if x0 >= x1 || y0 >= y1 {
            return Err(Error::InvalidBox { x0, y0, x1, y1 });
        }
        Ok(BoundingBox { x0, y0, x1, y1 })
    }

    /// Nonempty and inside `canvas`.
    pub fn within(x0: u32, y0: u32, x1: u32, y1: u32, canvas: Canvas) -> Result<Self, Error> {
        let b = Self::new(x0, y0, x1, y1)?;
        if !b.fits(canvas) {
            return Err(Error::BoxOutOfBounds { bbox: b, canvas });
        }
        Ok(b)
    }

    pub fn fits(&self, canvas: Canvas) -> bool {
        self.x0 < self.x1 && self.y0 < self.y1 && self.x1 <= canvas.width && self.y1 <= canvas.height
    }

    pub fn width(&self) -> u32 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> u32 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> u64 {
        u64::from(self.width()) * u64::from(self.height())
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }

    pub fn to_array(&self) -> [u32; 4] {
        [self.x0, self.y0, self.x1, self.y1]
    }
}

/// One detected object: category, box and classification score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub image_id: String,
    pub category: ClassId,
    pub bbox: BoundingBox,
    pub score: f64,
}

impl Detection {
    pub fn new(image_id: impl Into<String>, category: ClassId, bbox: BoundingBox, score: f64) -> Result<Self, Error> {
        let det = Detection {
            image_id: image_id.into(),
            category,
            bbox,
            score,
        };
        det.check()?;
        Ok(det)
    }

    fn check(&self) -> Result<(), Error> {
        if self.category == BACKGROUND {
            return Err(Error::BackgroundDetection);
        }
        if !(0.0..=1.0).contains(&self.score) {
            return Err(Error::InvalidScore(self.score));
        }
        Ok(())
    }

    /// Full check against a registry (and optionally the image bounds).
    pub fn validate(&self, registry: &ClassRegistry, canvas: Option<Canvas>) -> Result<(), Error> {
        self.check()?;
        if !registry.contains(self.category) {
            return Err(Error::UnknownClassId(self.category));
        }
        if let Some(canvas) = canvas {
            if !self.bbox.fits(canvas) {
                return Err(Error::BoxOutOfBounds {
                    bbox: self.bbox,
                    canvas,
                });
            }
        }
        Ok(())
    }
}

/// A binary mask stored as canonical row-major run lengths.
///
/// Runs alternate background/foreground starting with background. The
/// leading run may be 0 (mask starts with foreground); every other run is
/// at least 1 and the runs sum to `width * height`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    runs: Vec<u32>,
}

impl BinaryMask {
    /// Accepts only canonical runs.
    pub fn from_runs(width: u32, height: u32, runs: Vec<u32>) -> Result<Self, Error> {
        let canvas = Canvas::new(width, height)?;
        let total: u64 = runs.iter().map(|&r| u64::from(r)).sum();
        if total != canvas.area() as u64 {
            return Err(Error::RunSumMismatch {
                expected: canvas.area() as u64,
                actual: total,
            });
        }
        if let Some(pos) = runs.iter().skip(1).position(|&r| r == 0) {
            return Err(Error::ZeroRun(pos + 1));
        }
        Ok(BinaryMask { width, height, runs })
    }

    /// Accepts any runs with the right sum and merges zero-length interior
    /// runs into canonical form.
    pub fn canonicalize(width: u32, height: u32, runs: &[u32]) -> Result<Self, Error> {
        let canvas = Canvas::new(width, height)?;
        let total: u64 = runs.iter().map(|&r| u64::from(r)).sum();
        if total != canvas.area() as u64 {
            return Err(Error::RunSumMismatch {
                expected: canvas.area() as u64,
                actual: total,
            });
        }
        let mut out: Vec<u32> = Vec::with_capacity(runs.len());
        // parity of the value the next pushed run represents
        let mut value = false;
        for (i, &r) in runs.iter().enumerate() {
            let run_value = i % 2 == 1;
            if r == 0 {
                continue;
            }
            if out.is_empty() {
                if run_value {
                    out.push(0);
                }
                out.push(r);
                value = run_value;
            } else if run_value == value {
                *out.last_mut().unwrap() += r;
            } else {
                out.push(r);
                value = run_value;
            }
        }
        Ok(BinaryMask {
            width,
            height,
            runs: out,
        })
    }

    pub fn empty(canvas: Canvas) -> Self {
        BinaryMask {
            width: canvas.width,
            height: canvas.height,
            runs: vec![canvas.width * canvas.height],
        }
    }

    /// Encodes a row-major bit grid.
    pub fn encode(width: u32, height: u32, bits: &[bool]) -> Result<Self, Error> {
        let canvas = Canvas::new(width, height)?;
        if bits.len() != canvas.area() {
            return Err(Error::GridSizeMismatch {
                expected: canvas.area(),
                actual: bits.len(),
            });
        }
        let mut runs = Vec::new();
        let mut current = false;
        let mut count = 0u32;
        for &b in bits {
            if b != current {
                runs.push(count);
                count = 0;
                current = b;
            }
            count += 1;
        }
        runs.push(count);
        Ok(BinaryMask { width, height, runs })
    }

    pub fn decode(&self) -> Vec<bool> {
        let mut bits = Vec::with_capacity(self.canvas().area());
        let mut value = false;
        for &r in &self.runs {
            bits.extend(std::iter::repeat_n(value, r as usize));
            value = !value;
        }
        bits
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn canvas(&self) -> Canvas {
        Canvas {
            width: self.width,
            height: self.height,
        }
    }

    pub fn runs(&self) -> &[u32] {
        &self.runs
    }

    /// Foreground pixel count.
    pub fn area(&self) -> u64 {
        self.runs.iter().skip(1).step_by(2).map(|&r| u64::from(r)).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.runs.len() <= 1
    }

    /// Half-open flat index ranges of foreground pixels.
    pub fn foreground_spans(&self) -> impl Iterator<Item = std::ops::Range<usize>> + '_ {
        let mut offset = 0usize;
        self.runs.iter().enumerate().filter_map(move |(i, &r)| {
            let start = offset;
            offset += r as usize;
            (i % 2 == 1).then_some(start..offset)
        })
    }

    /// Zeroes every pixel outside `bbox`.
    pub fn clipped_to(&self, bbox: &BoundingBox) -> BinaryMask {
        let w = self.width as usize;
        let mut bits = self.decode();
        for (idx, b) in bits.iter_mut().enumerate() {
            if *b && !bbox.contains((idx % w) as u32, (idx / w) as u32) {
                *b = false;
            }
        }
        BinaryMask::encode(self.width, self.height, &bits).expect("same dimensions")
    }
}

/// A binary mask paired with the category and score of its detection.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledMask {
    pub mask: BinaryMask,
    pub category: ClassId,
    pub score: f64,
    pub source_index: usize,
}

/// Dense per-pixel class ids, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SemanticMap {
    width: u32,
    height: u32,
    labels: Vec<ClassId>,
}

impl SemanticMap {
    pub fn background(canvas: Canvas) -> Self {
        SemanticMap {
            width: canvas.width,
            height: canvas.height,
            labels: vec![BACKGROUND; canvas.area()],
        }
    }

    pub fn from_labels(width: u32, height: u32, labels: Vec<ClassId>) -> Result<Self, Error> {
        let canvas = Canvas::new(width, height)?;
        if labels.len() != canvas.area() {
            return Err(Error::GridSizeMismatch {
                expected: canvas.area(),
                actual: labels.len(),
            });
        }
        Ok(SemanticMap { width, height, labels })
    }

    pub fn validate(&self, registry: &ClassRegistry) -> Result<(), Error> {
        match self.labels.iter().find(|&&l| !registry.contains(l)) {
            Some(&bad) => Err(Error::UnknownClassId(bad)),
            None => Ok(()),
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn canvas(&self) -> Canvas {
        Canvas {
            width: self.width,
            height: self.height,
        }
    }

    pub fn labels(&self) -> &[ClassId] {
        &self.labels
    }

    pub fn labels_mut(&mut self) -> &mut [ClassId] {
        &mut self.labels
    }

    pub fn get(&self, x: u32, y: u32) -> ClassId {
        self.labels[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, class: ClassId) {
        let w = self.width as usize;
        self.labels[y as usize * w + x as usize] = class;
    }

    /// Binary mask of the pixels labelled `class`.
    pub fn class_mask(&self, class: ClassId) -> BinaryMask {
        let bits: Vec<bool> = self.labels.iter().map(|&l| l == class).collect();
        BinaryMask::encode(self.width, self.height, &bits).expect("same dimensions")
    }
}

/// Priority permutation over the foreground classes, highest first.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FusionOrder {
    priority: Vec<ClassId>,
    /// rank[class] = position in `priority`; background and unknown ids map to `usize::MAX`.
    rank: Vec<usize>,
}

impl FusionOrder {
    pub fn new(priority: Vec<ClassId>, registry: &ClassRegistry) -> Result<Self, Error> {
        let mut rank = vec![usize::MAX; registry.len()];
        for (pos, &class) in priority.iter().enumerate() {
            if class == BACKGROUND || !registry.contains(class) {
                return Err(Error::InvalidOrder(format!(
                    "class id {class} is not a foreground class"
                )));
            }
            if rank[usize::from(class)] != usize::MAX {
                return Err(Error::InvalidOrder(format!(
                    "class {} listed twice",
                    registry.name(class).unwrap_or("?")
                )));
            }
            rank[usize::from(class)] = pos;
        }
        if let Some(missing) = registry.foreground_ids().find(|&c| rank[usize::from(c)] == usize::MAX) {
            return Err(Error::InvalidOrder(format!(
                "class {} missing from order",
                registry.name(missing).unwrap_or("?")
            )));
        }
        Ok(FusionOrder { priority, rank })
    }

    pub fn from_names<S: AsRef<str>>(names: &[S], registry: &ClassRegistry) -> Result<Self, Error> {
        let ids = names
            .iter()
            .map(|n| {
                let n = n.as_ref().trim();
                registry.id(n).ok_or_else(|| Error::UnknownClassName(n.to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(ids, registry)
    }

    /// Registry order of the foreground classes (1, 2, ..., n).
    pub fn identity(registry: &ClassRegistry) -> Self {
        Self::new(registry.foreground_ids().collect(), registry).expect("identity is a permutation")
    }

    /// All permutations of the foreground classes in lexicographic order of ids.
    pub fn all(registry: &ClassRegistry) -> Vec<FusionOrder> {
        let mut current: Vec<ClassId> = registry.foreground_ids().collect();
        let mut out = vec![Self::new(current.clone(), registry).expect("permutation")];
        while next_permutation(&mut current) {
            out.push(Self::new(current.clone(), registry).expect("permutation"));
        }
        out
    }

    pub fn priority(&self) -> &[ClassId] {
        &self.priority
    }

    /// Position of `class` in the order; `None` for background or unknown ids.
    pub fn rank(&self, class: ClassId) -> Option<usize> {
        self.rank.get(usize::from(class)).copied().filter(|&r| r != usize::MAX)
    }

    /// True when `a` takes precedence over `b`.
    pub fn prefers(&self, a: ClassId, b: ClassId) -> bool {
        match (self.rank(a), self.rank(b)) {
            (Some(ra), Some(rb)) => ra < rb,
            _ => false,
        }
    }

    pub fn names(&self, registry: &ClassRegistry) -> Vec<String> {
        self.priority
            .iter()
            .map(|&c| registry.name(c).unwrap_or("?").to_string())
            .collect()
    }

    pub fn describe(&self, registry: &ClassRegistry) -> String {
        self.names(registry).join(",")
    }
}

fn next_permutation(v: &mut [ClassId]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn m4d_registry_ids() {
        let reg = ClassRegistry::new(
            &["sea_surface", "oil_spill", "look_alike", "ship", "land"],
            "sea_surface",
        )
        .unwrap();
        assert_eq!(reg, ClassRegistry::m4d());
        for (i, name) in ["sea_surface", "oil_spill", "look_alike", "ship", "land"]
            .iter()
            .enumerate()
        {
            assert_eq!(reg.id(name), Some(i as ClassId));
        }
        assert_eq!(reg.background_id(), 0);
        assert_eq!(reg.num_foreground(), 4);
    }

    #[test]
    fn background_moves_to_front() {
        let reg = ClassRegistry::new(&["a", "bg", "b"], "bg").unwrap();
        assert_eq!(reg.names(), &["bg", "a", "b"]);
    }

    #[test]
    fn degenerate_registry() {
        let reg = ClassRegistry::new(&["bg"], "bg").unwrap();
        assert_eq!(reg.len(), 1);
        assert_eq!(reg.foreground_ids().count(), 0);
    }

    #[test]
    fn registry_errors() {
        assert!(matches!(
            ClassRegistry::new(&["a", "b", "a"], "a"),
            Err(Error::DuplicateClass(n)) if n == "a"
        ));
        assert!(matches!(
            ClassRegistry::new(&["a", "b"], "c"),
            Err(Error::MissingBackground(_))
        ));
        assert!(matches!(
            ClassRegistry::new(&["a", ""], "a"),
            Err(Error::EmptyClassName)
        ));
    }

    #[test]
    fn registry_json_shape() {
        let json = serde_json::to_string(&ClassRegistry::m4d()).unwrap();
        assert_eq!(
            json,
            r#"{"classes":["sea_surface","oil_spill","look_alike","ship","land"]}"#
        );
        let back: ClassRegistry = serde_json::from_str(&json).unwrap();
        assert_eq!(back, ClassRegistry::m4d());
        assert!(serde_json::from_str::<ClassRegistry>(r#"{"classes":["a","a"]}"#).is_err());
    }

    #[test]
    fn rle_examples() {
        let empty = BinaryMask::encode(3, 3, &[false; 9]).unwrap();
        assert_eq!(empty.runs(), &[9]);
        let full = BinaryMask::encode(2, 2, &[true; 4]).unwrap();
        assert_eq!(full.runs(), &[0, 4]);
        let diag = BinaryMask::encode(2, 2, &[true, false, false, true]).unwrap();
        assert_eq!(diag.runs(), &[0, 1, 2, 1]);
        assert_eq!(diag.decode(), vec![true, false, false, true]);
        assert_eq!(diag.area(), 2);
    }

    #[test]
    fn rle_rejects_bad_runs() {
        assert!(matches!(
            BinaryMask::from_runs(2, 2, vec![1, 2]),
            Err(Error::RunSumMismatch { expected: 4, actual: 3 })
        ));
        assert!(matches!(
            BinaryMask::from_runs(2, 2, vec![1, 0, 3]),
            Err(Error::ZeroRun(1))
        ));
        assert!(BinaryMask::from_runs(2, 2, vec![0, 4]).is_ok());
    }

    #[test]
    fn canonicalize_merges_zero_runs() {
        let m = BinaryMask::canonicalize(2, 2, &[1, 0, 3]).unwrap();
        assert_eq!(m.runs(), &[4]);
        let m = BinaryMask::canonicalize(2, 2, &[0, 0, 0, 2, 2]).unwrap();
        assert_eq!(m.runs(), &[0, 2, 2]);
        let m = BinaryMask::canonicalize(2, 2, &[0, 1, 2, 1, 0]).unwrap();
        assert_eq!(m.runs(), &[0, 1, 2, 1]);
    }

    #[test]
    fn spans_and_clip() {
        let m = BinaryMask::encode(3, 2, &[true, true, false, false, true, true]).unwrap();
        let spans: Vec<_> = m.foreground_spans().collect();
        assert_eq!(spans, vec![0..2, 4..6]);
        let clipped = m.clipped_to(&BoundingBox::new(1, 0, 3, 2).unwrap());
        assert_eq!(clipped.decode(), vec![false, true, false, false, true, true]);
    }

    #[test]
    fn boxes() {
        let canvas = Canvas::new(10, 10).unwrap();
        assert!(BoundingBox::new(2, 2, 2, 5).is_err());
        assert!(BoundingBox::within(2, 2, 11, 5, canvas).is_err());
        let b = BoundingBox::within(2, 2, 7, 5, canvas).unwrap();
        assert_eq!((b.width(), b.height(), b.area()), (5, 3, 15));
        assert!(b.contains(2, 2) && !b.contains(7, 2) && !b.contains(2, 5));
    }

    #[test]
    fn detection_invariants() {
        let b = BoundingBox::new(0, 0, 1, 1).unwrap();
        assert!(Detection::new("x", 0, b, 0.5).is_err());
        assert!(Detection::new("x", 1, b, 1.5).is_err());
        assert!(Detection::new("x", 1, b, f64::NAN).is_err());
        let d = Detection::new("x", 9, b, 0.5).unwrap();
        assert!(matches!(
            d.validate(&ClassRegistry::m4d(), None),
            Err(Error::UnknownClassId(9))
        ));
    }

    #[test]
    fn order_validation() {
        let reg = ClassRegistry::m4d();
        let paper = FusionOrder::from_names(&["ship", "land", "oil_spill", "look_alike"], &reg).unwrap();
        assert_eq!(paper.priority(), &[3, 4, 1, 2]);
        assert_eq!(paper.rank(3), Some(0));
        assert_eq!(paper.rank(0), None);
        assert!(paper.prefers(3, 2));
        assert!(FusionOrder::new(vec![1, 2, 3], &reg).is_err());
        assert!(FusionOrder::new(vec![1, 2, 3, 3], &reg).is_err());
        assert!(FusionOrder::new(vec![0, 1, 2, 3, 4], &reg).is_err());
        assert!(FusionOrder::new(vec![1, 2, 3, 4, 5], &reg).is_err());
        assert!(FusionOrder::from_names(&["ship", "land", "oil", "look_alike"], &reg).is_err());
    }

    #[test]
    fn all_orders() {
        let reg = ClassRegistry::m4d();
        let all = FusionOrder::all(&reg);
        assert_eq!(all.len(), 24);
        let distinct: HashSet<_> = all.iter().map(|o| o.priority().to_vec()).collect();
        assert_eq!(distinct.len(), 24);
        assert_eq!(all[0].priority(), &[1, 2, 3, 4]);
        assert_eq!(all[23].priority(), &[4, 3, 2, 1]);
    }
}
