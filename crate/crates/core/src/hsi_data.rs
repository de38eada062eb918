//! Hyperspectral cubes, ground truth rasters and per-class sampling.
//!
//! Cubes are stored band-sequential: all of band 0 in row-major order, then
//! band 1, and so on. Each binary file has a JSON sidecar with the same stem.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{EsmlrError, Result};

/// JSON sidecar describing a raw raster file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RasterHeader {
    pub height: usize,
    pub width: usize,
    pub bands: usize,
    pub interleave: String,
    pub dtype: String,
}

impl RasterHeader {
    pub fn f32_bsq(height: usize, width: usize, bands: usize) -> Self {
        RasterHeader {
            height,
            width,
            bands,
            interleave: "bsq".into(),
            dtype: "f32le".into(),
        }
    }

    pub fn u16_labels(height: usize, width: usize) -> Self {
        RasterHeader {
            height,
            width,
            bands: 1,
            interleave: "bsq".into(),
            dtype: "u16le".into(),
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| EsmlrError::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| EsmlrError::Format(format!("{}: {e}", path.display())))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("header serializes");
        fs::write(path, text).map_err(|e| EsmlrError::io(path, e))
    }
}

/// Path of the JSON sidecar paired with a raster file: `<name>.json`, or
/// `<name>.<ext>.json` when that file exists (useful when a cube and its
/// labels share a stem).
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut full = path.as_os_str().to_owned();
    full.push(".json");
    let full = PathBuf::from(full);
    if full.is_file() {
        full
    } else {
        path.with_extension("json")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HsiCube {
    height: usize,
    width: usize,
    bands: usize,
    values: Vec<f64>,
    normalized: bool,
}

impl HsiCube {
    pub fn new(height: usize, width: usize, bands: usize, values: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || bands == 0 {
            return Err(EsmlrError::InvalidInput(
                "cube dimensions must be positive".into(),
            ));
        }
        if values.len() != height * width * bands {
            return Err(EsmlrError::Dimension(format!(
                "{} values for a {height}x{width}x{bands} cube",
                values.len()
            )));
        }
        Ok(HsiCube {
            height,
            width,
            bands,
            values,
            normalized: false,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Band-sequential sample values.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn band(&self, b: usize) -> &[f64] {
        let n = self.pixels();
        &self.values[b * n..(b + 1) * n]
    }

    pub fn value(&self, row: usize, col: usize, band: usize) -> f64 {
        self.values[band * self.pixels() + row * self.width + col]
    }

    /// Spectrum of one pixel by raster index.
    pub fn spectrum(&self, pixel: usize) -> Vec<f64> {
        let n = self.pixels();
        (0..self.bands).map(|b| self.values[b * n + pixel]).collect()
    }

    /// All pixels as a `bands x pixels` matrix, columns in raster order.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        let n = self.pixels();
        DMatrix::from_fn(self.bands, n, |b, p| self.values[b * n + p])
    }
}

pub fn load_cube(path: &Path) -> Result<HsiCube> {
    let header = RasterHeader::read(&sidecar_path(path))?;
    if header.interleave != "bsq" || header.dtype != "f32le" {
        return Err(EsmlrError::Format(format!(
            "{}: expected bsq/f32le, header says {}/{}",
            path.display(),
            header.interleave,
            header.dtype
        )));
    }
    let bytes = fs::read(path).map_err(|e| EsmlrError::io(path, e))?;
    let expected = header.height * header.width * header.bands * 4;
    if bytes.len() != expected {
        return Err(EsmlrError::Format(format!(
            "{}: {} bytes, header implies {expected}",
            path.display(),
            bytes.len()
        )));
    }
    let values = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    HsiCube::new(header.height, header.width, header.bands, values)
}

pub fn write_cube(cube: &HsiCube, path: &Path) -> Result<()> {
    let mut bytes = Vec::with_capacity(cube.values.len() * 4);
    for v in &cube.values {
        bytes.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| EsmlrError::io(path, e))?;
    RasterHeader::f32_bsq(cube.height, cube.width, cube.bands).write(&sidecar_path(path))
}

/// Divides every value by the global maximum of the cube (all bands jointly).
pub fn normalize_unit_max(cube: HsiCube) -> Result<HsiCube> {
    if cube.normalized {
        return Ok(cube);
    }
    let mut max = f64::NEG_INFINITY;
    for &v in &cube.values {
        if !v.is_finite() {
            return Err(EsmlrError::InvalidInput("non-finite sample in cube".into()));
        }
        if v < 0.0 {
            return Err(EsmlrError::InvalidInput(format!(
                "negative sample {v}; radiance must be non-negative"
            )));
        }
        max = max.max(v);
    }
    if max <= 0.0 {
        return Err(EsmlrError::InvalidInput(
            "cube maximum is not positive".into(),
        ));
    }
    let values = cube.values.iter().map(|v| v / max).collect();
    Ok(HsiCube {
        values,
        normalized: true,
        ..cube
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruth {
    height: usize,
    width: usize,
    labels: Vec<u16>,
    class_count: usize,
}

impl GroundTruth {
    /// Builds a ground-truth raster; 0 marks unlabeled pixels.
    pub fn new(height: usize, width: usize, labels: Vec<u16>) -> Result<Self> {
        if labels.len() != height * width {
            return Err(EsmlrError::Dimension(format!(
                "{} labels for a {height}x{width} raster",
                labels.len()
            )));
        }
        let class_count = labels.iter().copied().max().unwrap_or(0) as usize;
        if class_count == 0 {
            return Err(EsmlrError::InvalidInput(
                "ground truth has no labeled pixel".into(),
            ));
        }
        let mut seen = vec![false; class_count + 1];
        for &l in &labels {
            seen[l as usize] = true;
        }
        if let Some(missing) = (1..=class_count).find(|&k| !seen[k]) {
            return Err(EsmlrError::InvalidInput(format!(
                "class {missing} has no labeled pixel"
            )));
        }
        Ok(GroundTruth {
            height,
            width,
            labels,
            class_count,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn labels(&self) -> &[u16] {
        &self.labels
    }

    pub fn label(&self, row: usize, col: usize) -> u16 {
        self.labels[row * self.width + col]
    }

    pub fn labeled_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l != 0).count()
    }
}

/// Reads a raw `u16le` label raster, or a `row,col,label` CSV when the path
/// ends in `.csv`. Both need the JSON sidecar for the raster size.
pub fn load_ground_truth(path: &Path) -> Result<GroundTruth> {
    let header = RasterHeader::read(&sidecar_path(path))?;
    if header.bands != 1 {
        return Err(EsmlrError::Format(format!(
            "{}: label raster must have one band, header says {}",
            path.display(),
            header.bands
        )));
    }
    let (h, w) = (header.height, header.width);
    let is_csv = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let labels = if is_csv {
        let text = fs::read_to_string(path).map_err(|e| EsmlrError::io(path, e))?;
        parse_label_csv(&text, h, w)?
    } else {
        if header.dtype != "u16le" {
            return Err(EsmlrError::Format(format!(
                "{}: expected u16le labels, header says {}",
                path.display(),
                header.dtype
            )));
        }
        let bytes = fs::read(path).map_err(|e| EsmlrError::io(path, e))?;
        if bytes.len() != h * w * 2 {
            return Err(EsmlrError::Dimension(format!(
                "{}: {} bytes, header implies {}",
                path.display(),
                bytes.len(),
                h * w * 2
            )));
        }
        bytes
            .chunks_exact(2)
            .map(|c| u16::from_le_bytes([c[0], c[1]]))
            .collect()
    };
    GroundTruth::new(h, w, labels)
}

fn parse_label_csv(text: &str, height: usize, width: usize) -> Result<Vec<u16>> {
    let mut labels = vec![0u16; height * width];
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(EsmlrError::Format(format!(
                "label csv line {}: expected row,col,label",
                lineno + 1
            )));
        }
        let parsed: Vec<i64> = match fields.iter().map(|f| f.parse::<i64>()).collect() {
            Ok(p) => p,
            // header row
            Err(_) if lineno == 0 => continue,
            Err(e) => {
                return Err(EsmlrError::Format(format!(
                    "label csv line {}: {e}",
                    lineno + 1
                )))
            }
        };
        let (r, c, l) = (parsed[0], parsed[1], parsed[2]);
        if l < 0 {
            return Err(EsmlrError::Format(format!(
                "label csv line {}: negative label {l}",
                lineno + 1
            )));
        }
        if r < 0 || c < 0 || r as usize >= height || c as usize >= width {
            return Err(EsmlrError::Dimension(format!(
                "label csv line {}: pixel ({r},{c}) outside {height}x{width}",
                lineno + 1
            )));
        }
        let l = u16::try_from(l).map_err(|_| {
            EsmlrError::Format(format!("label csv line {}: label too large", lineno + 1))
        })?;
        labels[r as usize * width + c as usize] = l;
    }
    Ok(labels)
}

pub fn write_ground_truth(gt: &GroundTruth, path: &Path) -> Result<()> {
    let mut bytes = Vec::with_capacity(gt.labels.len() * 2);
    for l in &gt.labels {
        bytes.extend_from_slice(&l.to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| EsmlrError::io(path, e))?;
    RasterHeader::u16_labels(gt.height, gt.width).write(&sidecar_path(path))
}

/// Labeled pixels as columns of a `bands x n` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub features: DMatrix<f64>,
    /// Class labels in `1..=class_count`.
    pub labels: Vec<usize>,
    /// `(row, col)` of the pixel behind each column.
    pub pixel_index: Vec<(usize, usize)>,
    pub class_count: usize,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn class_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.class_count];
        for &l in &self.labels {
            sizes[l - 1] += 1;
        }
        sizes
    }
}

/// Collects every labeled pixel in raster-scan order.
pub fn flatten_labeled(cube: &HsiCube, gt: &GroundTruth) -> Result<LabeledDataset> {
    if cube.height != gt.height || cube.width != gt.width {
        return Err(EsmlrError::Dimension(format!(
            "cube is {}x{}, ground truth is {}x{}",
            cube.height, cube.width, gt.height, gt.width
        )));
    }
    if !cube.normalized {
        return Err(EsmlrError::InvalidInput(
            "cube must be normalized before flattening".into(),
        ));
    }
    let pixels: Vec<usize> = (0..cube.pixels()).filter(|&p| gt.labels[p] != 0).collect();
    let n = cube.pixels();
    let features = DMatrix::from_fn(cube.bands, pixels.len(), |b, j| {
        cube.values[b * n + pixels[j]]
    });
    Ok(LabeledDataset {
        features,
        labels: pixels.iter().map(|&p| gt.labels[p] as usize).collect(),
        pixel_index: pixels.iter().map(|&p| (p / cube.width, p % cube.width)).collect(),
        class_count: gt.class_count,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    /// The same count `Q` from every class.
    PerClass(usize),
    /// One training count per class, in class order.
    Explicit(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub mode: SplitMode,
    pub seed: u64,
    /// Cap training at half of each class (floor).
    pub cap_rule: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
}

/// Per-class training counts of the common 515-sample Indian Pines protocol.
pub const INDIAN_PINES_TRAIN_COUNTS: [usize; 16] =
    [3, 71, 41, 11, 24, 37, 3, 24, 3, 48, 123, 30, 10, 64, 19, 4];

/// Training counts per class for the Pavia University protocol.
pub const PAVIA_TRAIN_COUNTS: [usize; 9] = [548, 540, 392, 542, 265, 532, 375, 514, 231];

/// Draws training samples uniformly without replacement inside each class.
///
/// The remaining samples of the class go to the test set. Both index lists
/// come back sorted; the draw is fully determined by `spec.seed`.
pub fn split_per_class(ds: &LabeledDataset, spec: &SplitSpec) -> Result<Split> {
    let m = ds.class_count;
    let requested: Vec<usize> = match &spec.mode {
        SplitMode::PerClass(q) => vec![*q; m],
        SplitMode::Explicit(counts) => {
            if counts.len() != m {
                return Err(EsmlrError::Config(format!(
                    "{} per-class counts for {m} classes",
                    counts.len()
                )));
            }
            counts.clone()
        }
    };
    if requested.iter().any(|&c| c == 0) {
        return Err(EsmlrError::Config(
            "every per-class training count must be at least 1".into(),
        ));
    }

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); m];
    for (j, &l) in ds.labels.iter().enumerate() {
        members[l - 1].push(j);
    }

    // A dedicated stream keeps splits independent of feature-map draws that
    // share the same trial seed.
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(1);

    let mut train_idx = Vec::new();
    let mut test_idx = Vec::new();
    for (k, idx) in members.iter_mut().enumerate() {
        let size = idx.len();
        if size < 2 {
            return Err(EsmlrError::InvalidInput(format!(
                "class {} has {size} samples; at least 2 are needed",
                k + 1
            )));
        }
        let mut count = requested[k];
        if spec.cap_rule {
            count = count.min(size / 2);
        } else if count > size {
            return Err(EsmlrError::InvalidInput(format!(
                "class {} has {size} samples, {count} requested for training",
                k + 1
            )));
        }
        let (chosen, rest) = idx.partial_shuffle(&mut rng, count);
        train_idx.extend_from_slice(chosen);
        test_idx.extend_from_slice(rest);
    }
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    Ok(Split {
        train_idx,
        test_idx,
    })
}

/// Selects columns of a matrix by index.
pub fn select_columns(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), idx.len(), |r, j| m[(r, idx[j])])
}
