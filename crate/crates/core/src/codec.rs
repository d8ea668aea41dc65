//! File formats.
//!
//! * Detections: JSON Lines, one `{"image_id", "category", "bbox", "score"}`
//!   object per line. `category` is a class name (written) or id (accepted).
//! * Binary masks: 8-bit grayscale PNG with values {0, 255}, or RLE JSON
//!   `{"size": [h, w], "runs": [...]}` in canonical row-major form.
//! * Semantic maps: 8-bit grayscale PNG holding class ids.
//! * Reports: CSV (percentages, two decimals) or JSON.
//! * Dataset manifest: one JSON document with paths relative to itself.
//!
//! Writers are atomic (temp file in the target directory, then rename).

use std::collections::{BTreeMap, HashSet};
use std::io::{Cursor, Write};
use std::path::{Component, Path, PathBuf};

use image::{DynamicImage, GrayImage, ImageFormat, RgbImage};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::MetricsReport;
use crate::types::{BinaryMask, BoundingBox, ClassRegistry, Detection, ImageRef, SemanticMap};

const MEMORY: &str = "<memory>";

/// Writes `bytes` to a temp file next to `path` and renames it into place.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

fn read_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------- detections

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum CategoryRef {
    Id(u8),
    Name(String),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DetectionRecord {
    image_id: String,
    category: CategoryRef,
    bbox: [u32; 4],
    score: f64,
}

fn record_to_detection(rec: DetectionRecord, registry: &ClassRegistry) -> std::result::Result<Detection, String> {
    let category = match rec.category {
        CategoryRef::Name(name) => registry.id(&name).ok_or_else(|| format!("unknown category `{name}`"))?,
        CategoryRef::Id(id) => {
            if !registry.contains(id) {
                return Err(format!("unknown category id {id}"));
            }
            id
        }
    };
    if rec.image_id.is_empty() {
        return Err("empty image_id".into());
    }
    let [x0, y0, x1, y1] = rec.bbox;
    let bbox = BoundingBox::new(x0, y0, x1, y1).map_err(|e| e.to_string())?;
    Detection::new(rec.image_id, category, bbox, rec.score).map_err(|e| e.to_string())
}

/// Parses JSON Lines detections. Blank lines are skipped.
pub fn parse_detections(text: &str, registry: &ClassRegistry, origin: &Path) -> Result<Vec<Detection>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: origin.to_path_buf(),
            line: n + 1,
            message,
        };
        let rec: DetectionRecord = serde_json::from_str(line).map_err(|e| parse_err(e.to_string()))?;
        out.push(record_to_detection(rec, registry).map_err(parse_err)?);
    }
    Ok(out)
}

pub fn format_detections(dets: &[Detection], registry: &ClassRegistry) -> Result<String> {
    let mut out = String::new();
    for d in dets {
        let name = registry.name(d.category).ok_or(Error::UnknownClassId(d.category))?;
        let rec = DetectionRecord {
            image_id: d.image_id.clone(),
            category: CategoryRef::Name(name.to_string()),
            bbox: d.bbox.to_array(),
            score: d.score,
        };
        out.push_str(&serde_json::to_string(&rec).expect("record serializes"));
        out.push('\n');
    }
    Ok(out)
}

pub fn read_detections(path: &Path, registry: &ClassRegistry) -> Result<Vec<Detection>> {
    parse_detections(&read_string(path)?, registry, path)
}

pub fn write_detections(dets: &[Detection], registry: &ClassRegistry, path: &Path) -> Result<()> {
    atomic_write(path, format_detections(dets, registry)?.as_bytes())
}

// --------------------------------------------------------------------- masks

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RleRecord {
    /// [height, width]
    size: [u32; 2],
    runs: Vec<u32>,
}

pub fn mask_to_rle_json(mask: &BinaryMask) -> String {
    serde_json::to_string(&RleRecord {
        size: [mask.height(), mask.width()],
        runs: mask.runs().to_vec(),
    })
    .expect("rle serializes")
}

pub fn mask_from_rle_json(text: &str) -> Result<BinaryMask> {
    mask_from_rle_json_at(text, Path::new(MEMORY))
}

fn mask_from_rle_json_at(text: &str, origin: &Path) -> Result<BinaryMask> {
    let rec: RleRecord = serde_json::from_str(text).map_err(|e| Error::format(origin, e.to_string()))?;
    let [h, w] = rec.size;
    BinaryMask::from_runs(w, h, rec.runs).map_err(|e| Error::format(origin, e.to_string()))
}

fn decode_gray(bytes: &[u8], origin: &Path) -> Result<GrayImage> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)
        .map_err(|e| Error::format(origin, e.to_string()))?;
    match img {
        DynamicImage::ImageLuma8(gray) => Ok(gray),
        other => Err(Error::format(
            origin,
            format!("expected 8-bit single-channel image, got {:?}", other.color()),
        )),
    }
}

fn encode_png(img: DynamicImage) -> Vec<u8> {
    let mut buf = Cursor::new(Vec::new());
    img.write_to(&mut buf, ImageFormat::Png)
        .expect("png encoding to memory");
    buf.into_inner()
}

pub fn mask_to_png(mask: &BinaryMask) -> Vec<u8> {
    let pixels: Vec<u8> = mask.decode().into_iter().map(|b| if b { 255 } else { 0 }).collect();
    let img = GrayImage::from_raw(mask.width(), mask.height(), pixels).expect("buffer matches dims");
    encode_png(DynamicImage::ImageLuma8(img))
}

pub fn mask_from_png(bytes: &[u8]) -> Result<BinaryMask> {
    mask_from_png_at(bytes, Path::new(MEMORY))
}

fn mask_from_png_at(bytes: &[u8], origin: &Path) -> Result<BinaryMask> {
    let gray = decode_gray(bytes, origin)?;
    let mut bits = Vec::with_capacity(gray.as_raw().len());
    for &v in gray.as_raw() {
        match v {
            0 => bits.push(false),
            255 => bits.push(true),
            other => {
                return Err(Error::format(
                    origin,
                    format!("binary mask value {other} is not 0 or 255"),
                ))
            }
        }
    }
    BinaryMask::encode(gray.width(), gray.height(), &bits)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskFormat {
    Png,
    Rle,
}

impl MaskFormat {
    pub fn extension(&self) -> &'static str {
        match self {
            MaskFormat::Png => "png",
            MaskFormat::Rle => "json",
        }
    }

    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "png" => Some(MaskFormat::Png),
            "json" => Some(MaskFormat::Rle),
            _ => None,
        }
    }
}

/// Reads a mask; the format follows the extension (`.png` or `.json`).
pub fn read_mask(path: &Path) -> Result<BinaryMask> {
    match MaskFormat::from_path(path) {
        Some(MaskFormat::Png) => mask_from_png_at(&read_bytes(path)?, path),
        Some(MaskFormat::Rle) => mask_from_rle_json_at(&read_string(path)?, path),
        None => Err(Error::format(path, "unsupported mask extension (want .png or .json)")),
    }
}

pub fn write_mask(mask: &BinaryMask, path: &Path) -> Result<()> {
    match MaskFormat::from_path(path) {
        Some(MaskFormat::Png) => atomic_write(path, &mask_to_png(mask)),
        Some(MaskFormat::Rle) => atomic_write(path, mask_to_rle_json(mask).as_bytes()),
        None => Err(Error::format(path, "unsupported mask extension (want .png or .json)")),
    }
}

// ------------------------------------------------------------ semantic maps

pub fn semantic_to_png(map: &SemanticMap) -> Vec<u8> {
    let img = GrayImage::from_raw(map.width(), map.height(), map.labels().to_vec()).expect("buffer matches dims");
    encode_png(DynamicImage::ImageLuma8(img))
}

pub fn semantic_from_png(bytes: &[u8], registry: &ClassRegistry) -> Result<SemanticMap> {
    semantic_from_png_at(bytes, registry, Path::new(MEMORY))
}

fn semantic_from_png_at(bytes: &[u8], registry: &ClassRegistry, origin: &Path) -> Result<SemanticMap> {
    let gray = decode_gray(bytes, origin)?;
    let (w, h) = gray.dimensions();
    let map = SemanticMap::from_labels(w, h, gray.into_raw())?;
    map.validate(registry)
        .map_err(|e| Error::format(origin, e.to_string()))?;
    Ok(map)
}

pub fn read_semantic(path: &Path, registry: &ClassRegistry) -> Result<SemanticMap> {
    semantic_from_png_at(&read_bytes(path)?, registry, path)
}

pub fn write_semantic(map: &SemanticMap, path: &Path) -> Result<()> {
    atomic_write(path, &semantic_to_png(map))
}

/// Display colours for colorized exports: a JSON object mapping class name
/// to `[r, g, b]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Palette {
    pub colors: BTreeMap<String, [u8; 3]>,
}

impl Palette {
    pub fn read(path: &Path) -> Result<Self> {
        serde_json::from_str(&read_string(path)?).map_err(|e| Error::format(path, e.to_string()))
    }

    fn lookup(&self, registry: &ClassRegistry) -> Result<Vec<[u8; 3]>> {
        registry
            .names()
            .iter()
            .map(|n| {
                self.colors
                    .get(n)
                    .copied()
                    .ok_or_else(|| Error::UnknownClassName(format!("{n} (no palette colour)")))
            })
            .collect()
    }

    pub fn colorize(&self, map: &SemanticMap, registry: &ClassRegistry) -> Result<RgbImage> {
        let table = self.lookup(registry)?;
        map.validate(registry)?;
        let mut pixels = Vec::with_capacity(map.labels().len() * 3);
        for &l in map.labels() {
            pixels.extend_from_slice(&table[usize::from(l)]);
        }
        Ok(RgbImage::from_raw(map.width(), map.height(), pixels).expect("buffer matches dims"))
    }
}

pub fn write_colorized(map: &SemanticMap, registry: &ClassRegistry, palette: &Palette, path: &Path) -> Result<()> {
    let img = palette.colorize(map, registry)?;
    atomic_write(path, &encode_png(DynamicImage::ImageRgb8(img)))
}

// ------------------------------------------------------------------ reports

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            _ => Err(Error::format(MEMORY, format!("unknown report format `{s}`"))),
        }
    }
}

/// One labelled row: per-class IoU (fractions) plus the means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub label: String,
    pub per_class_iou: Vec<Option<f64>>,
    pub miou: f64,
    pub mf1: f64,
    /// Extra columns (e.g. detection counts, equivalence class), written after mF1.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, String>,
}

impl ReportRow {
    pub fn from_report(label: impl Into<String>, report: &MetricsReport) -> Self {
        ReportRow {
            label: label.into(),
            per_class_iou: report.ious(),
            miou: report.miou,
            mf1: report.mf1,
            extra: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportTable {
    pub classes: Vec<String>,
    pub rows: Vec<ReportRow>,
}

impl ReportTable {
    pub fn new(registry: &ClassRegistry) -> Self {
        ReportTable {
            classes: registry.names().to_vec(),
            rows: Vec::new(),
        }
    }

    fn extra_columns(&self) -> Vec<String> {
        let mut cols: Vec<String> = self
            .rows
            .iter()
            .flat_map(|r| r.extra.keys().cloned())
            .collect::<HashSet<_>>()
            .into_iter()
            .collect();
        cols.sort();
        cols
    }
}

fn pct(v: f64) -> String {
    format!("{:.2}", v * 100.0)
}

pub fn report_to_csv(table: &ReportTable) -> String {
    let extras = table.extra_columns();
    let mut wtr = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["row_label".to_string()];
    header.extend(table.classes.iter().cloned());
    header.push("mIoU".into());
    header.push("mF1".into());
    header.extend(extras.iter().cloned());
    wtr.write_record(&header).expect("in-memory csv");
    for row in &table.rows {
        let mut rec = vec![row.label.clone()];
        rec.extend(row.per_class_iou.iter().map(|v| v.map(pct).unwrap_or_default()));
        rec.push(pct(row.miou));
        rec.push(pct(row.mf1));
        rec.extend(extras.iter().map(|k| row.extra.get(k).cloned().unwrap_or_default()));
        wtr.write_record(&rec).expect("in-memory csv");
    }
    String::from_utf8(wtr.into_inner().expect("in-memory csv")).expect("utf8 csv")
}

/// Reads a table written by [`report_to_csv`] (values back as fractions).
pub fn report_from_csv(text: &str) -> Result<ReportTable> {
    let origin = Path::new(MEMORY);
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::format(origin, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let miou_col = header
        .iter()
        .position(|h| h == "mIoU")
        .ok_or_else(|| Error::format(origin, "missing mIoU column"))?;
    if header.first().map(String::as_str) != Some("row_label")
        || header.get(miou_col + 1).map(String::as_str) != Some("mF1")
    {
        return Err(Error::format(origin, "header must be row_label, classes..., mIoU, mF1"));
    }
    let classes = header[1..miou_col].to_vec();
    let extras = header[miou_col + 2..].to_vec();
    let parse_pct = |s: &str, line: usize| -> Result<f64> {
        s.parse::<f64>().map(|v| v / 100.0).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            line,
            message: format!("`{s}`: {e}"),
        })
    };
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            line,
            message: e.to_string(),
        })?;
        if rec.len() != header.len() {
            return Err(Error::Parse {
                path: origin.to_path_buf(),
                line,
                message: format!("{} fields, expected {}", rec.len(), header.len()),
            });
        }
        let per_class_iou = (1..miou_col)
            .map(|c| match &rec[c] {
                "" => Ok(None),
                s => parse_pct(s, line).map(Some),
            })
            .collect::<Result<Vec<_>>>()?;
        let extra = extras
            .iter()
            .enumerate()
            .filter(|(j, _)| !rec[miou_col + 2 + j].is_empty())
            .map(|(j, k)| (k.clone(), rec[miou_col + 2 + j].to_string()))
            .collect();
        rows.push(ReportRow {
            label: rec[0].to_string(),
            per_class_iou,
            miou: parse_pct(&rec[miou_col], line)?,
            mf1: parse_pct(&rec[miou_col + 1], line)?,
            extra,
        });
    }
    Ok(ReportTable { classes, rows })
}

pub fn write_report(table: &ReportTable, path: &Path, format: ReportFormat) -> Result<()> {
    let text = match format {
        ReportFormat::Csv => report_to_csv(table),
        ReportFormat::Json => serde_json::to_string_pretty(table).expect("table serializes") + "\n",
    };
    atomic_write(path, text.as_bytes())
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::format(path, e.to_string()))? + "\n";
    atomic_write(path, text.as_bytes())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_string(path)?).map_err(|e| Error::format(path, e.to_string()))
}

// ----------------------------------------------------------------- manifest

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestImage {
    pub image_id: String,
    pub width: u32,
    pub height: u32,
    /// Ground-truth semantic map, relative to the manifest.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt: Option<String>,
}

impl ManifestImage {
    pub fn image_ref(&self) -> Result<ImageRef> {
        ImageRef::new(self.image_id.clone(), self.width, self.height)
    }
}

/// Dataset inventory. Masks live in `masks_dir` named
/// `<image_id>__<index>.png` or `.json`, where `index` is the detection's
/// position among that image's lines in the detections file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub registry: ClassRegistry,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detections: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub masks_dir: Option<String>,
    pub images: Vec<ManifestImage>,
    #[serde(skip)]
    base_dir: PathBuf,
}

fn check_relative(p: &str, origin: &Path) -> Result<()> {
    let path = Path::new(p);
    if p.is_empty() || path.is_absolute() || path.components().any(|c| matches!(c, Component::ParentDir)) {
        return Err(Error::format(
            origin,
            format!("path `{p}` must be relative and inside the dataset"),
        ));
    }
    Ok(())
}

pub fn mask_file_name(image_id: &str, index: usize, format: MaskFormat) -> String {
    format!("{image_id}__{index}.{}", format.extension())
}

impl DatasetManifest {
    pub fn new(registry: ClassRegistry, base_dir: impl Into<PathBuf>) -> Self {
        DatasetManifest {
            registry,
            detections: None,
            masks_dir: None,
            images: Vec::new(),
            base_dir: base_dir.into(),
        }
    }

    pub fn parse(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let base_dir = base_dir.into();
        let mut m: DatasetManifest = serde_json::from_str(text).map_err(|e| Error::format(&base_dir, e.to_string()))?;
        m.base_dir = base_dir;
        m.validate()?;
        Ok(m)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let text = read_string(path)?;
        Self::parse(&text, base).map_err(|e| match e {
            Error::Format { message, .. } => Error::format(path, message),
            other => other,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        self.validate()?;
        write_json(self, path)
    }

    pub fn validate(&self) -> Result<()> {
        let origin = &self.base_dir;
        let mut ids = HashSet::new();
        let mut files = HashSet::new();
        for p in self.detections.iter().chain(&self.masks_dir) {
            check_relative(p, origin)?;
            files.insert(p.clone());
        }
        for img in &self.images {
            img.image_ref()?;
            if img.image_id.contains(['/', '\\']) {
                return Err(Error::format(
                    origin,
                    format!("image id `{}` contains a path separator", img.image_id),
                ));
            }
            if !ids.insert(img.image_id.as_str()) {
                return Err(Error::DuplicateImage(img.image_id.clone()));
            }
            if let Some(gt) = &img.gt {
                check_relative(gt, origin)?;
                if !files.insert(gt.clone()) {
                    return Err(Error::format(origin, format!("file `{gt}` referenced twice")));
                }
            }
        }
        Ok(())
    }

    pub fn base_dir(&self) -> &Path {
        &self.base_dir
    }

    pub fn set_base_dir(&mut self, dir: impl Into<PathBuf>) {
        self.base_dir = dir.into();
    }

    pub fn resolve(&self, rel: &str) -> PathBuf {
        self.base_dir.join(rel)
    }

    pub fn image(&self, image_id: &str) -> Option<&ManifestImage> {
        self.images.iter().find(|i| i.image_id == image_id)
    }

    pub fn gt_path(&self, image: &ManifestImage) -> Option<PathBuf> {
        image.gt.as_deref().map(|g| self.resolve(g))
    }

    /// Existing mask file for detection `index` of `image_id`, PNG preferred.
    pub fn mask_path(&self, image_id: &str, index: usize) -> Option<PathBuf> {
        let dir = self.resolve(self.masks_dir.as_deref()?);
        [MaskFormat::Png, MaskFormat::Rle]
            .into_iter()
            .map(|f| dir.join(mask_file_name(image_id, index, f)))
            .find(|p| p.is_file())
    }

    /// All detections grouped per image in manifest order; each image's list
    /// keeps file order, which defines the mask index.
    pub fn load_detections(&self) -> Result<BTreeMap<String, Vec<Detection>>> {
        let mut grouped: BTreeMap<String, Vec<Detection>> =
            self.images.iter().map(|i| (i.image_id.clone(), Vec::new())).collect();
        let Some(rel) = &self.detections else {
            return Ok(grouped);
        };
        let path = self.resolve(rel);
        for det in read_detections(&path, &self.registry)? {
            let Some(img) = self.image(&det.image_id) else {
                return Err(Error::format(
                    &path,
                    format!("detection for unknown image `{}`", det.image_id),
                ));
            };
            det.validate(&self.registry, Some(img.image_ref()?.canvas()))
                .map_err(|e| Error::format(&path, e.to_string()))?;
            grouped.get_mut(&det.image_id).expect("seeded above").push(det);
        }
        Ok(grouped)
    }
}
