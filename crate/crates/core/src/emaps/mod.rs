//! Extended multi-attribute profiles.
//!
//! The cube is reduced by PCA, each retained component is quantized to an
//! 8-bit image, and area thickenings/thinnings at increasing thresholds are
//! stacked around the original component image.

pub(crate) mod maxtree;
mod pca;

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use maxtree::{Connectivity, MaxTree};
pub use pca::{pca_fit, pca_project_to_images, PcaModel, DEFAULT_SHARE};

use crate::error::{EsmlrError, Result};
use crate::feature_maps::{BlockTag, FeatureBlock};
use crate::hsi_data::HsiCube;

/// Real-valued image in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GrayImage {
    pub height: usize,
    pub width: usize,
    pub levels: Vec<u8>,
}

impl GrayImage {
    pub fn new(height: usize, width: usize, levels: Vec<u8>) -> Result<Self> {
        if levels.len() != height * width {
            return Err(EsmlrError::Dimension(format!(
                "{} levels for a {height}x{width} image",
                levels.len()
            )));
        }
        Ok(GrayImage {
            height,
            width,
            levels,
        })
    }

    pub fn invert(&self) -> GrayImage {
        GrayImage {
            height: self.height,
            width: self.width,
            levels: self.levels.iter().map(|v| 255 - v).collect(),
        }
    }
}

/// Maps `[min, max]` affinely onto `0..=255`, rounding half up. A constant
/// raster maps to 0.
pub fn quantize(raster: &Raster) -> GrayImage {
    let (min, max) = raster
        .data
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let span = max - min;
    let levels = raster
        .data
        .iter()
        .map(|&v| {
            if span > 0.0 {
                ((v - min) / span * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8
            } else {
                0
            }
        })
        .collect();
    GrayImage {
        height: raster.height,
        width: raster.width,
        levels,
    }
}

/// Area opening: removes bright components smaller than `lambda` pixels.
pub fn area_thinning(img: &GrayImage, lambda: usize, conn: Connectivity) -> GrayImage {
    GrayImage {
        height: img.height,
        width: img.width,
        levels: MaxTree::build(img, conn).area_filter(lambda),
    }
}

/// Area closing, the dual of [`area_thinning`].
pub fn area_thickening(img: &GrayImage, lambda: usize, conn: Connectivity) -> GrayImage {
    area_thinning(&img.invert(), lambda, conn).invert()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApSpec {
    pub thresholds: Vec<usize>,
    #[serde(default)]
    pub connectivity: Connectivity,
}

impl Default for ApSpec {
    fn default() -> Self {
        ApSpec {
            thresholds: vec![100, 200, 500, 1000],
            connectivity: Connectivity::Four,
        }
    }
}

impl ApSpec {
    pub fn validate(&self) -> Result<()> {
        if self.thresholds.is_empty() {
            return Err(EsmlrError::Config("no area thresholds given".into()));
        }
        if self.thresholds[0] == 0 {
            return Err(EsmlrError::Config("area thresholds must be >= 1".into()));
        }
        if self.thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(EsmlrError::Config(
                "area thresholds must be strictly ascending".into(),
            ));
        }
        Ok(())
    }

    /// Images per profile: `2p + 1`.
    pub fn profile_len(&self) -> usize {
        2 * self.thresholds.len() + 1
    }
}

/// Attribute profile ordered as thickenings at descending thresholds, the
/// original, then thinnings at ascending thresholds.
pub fn build_ap(img: &GrayImage, spec: &ApSpec) -> Result<Vec<GrayImage>> {
    spec.validate()?;
    let conn = spec.connectivity;
    let bright = MaxTree::build(img, conn);
    let dark = MaxTree::build(&img.invert(), conn);
    let wrap = |levels| GrayImage {
        height: img.height,
        width: img.width,
        levels,
    };
    let mut out = Vec::with_capacity(spec.profile_len());
    for &t in spec.thresholds.iter().rev() {
        out.push(wrap(dark.area_filter(t)).invert());
    }
    out.push(img.clone());
    for &t in &spec.thresholds {
        out.push(wrap(bright.area_filter(t)));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileKind {
    Thickening,
    Original,
    Thinning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmapLayer {
    pub component: usize,
    pub position: usize,
    pub kind: ProfileKind,
    pub threshold: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmapStack {
    pub height: usize,
    pub width: usize,
    pub images: Vec<GrayImage>,
    pub layout: Vec<EmapLayer>,
}

/// Builds the area-attribute EMAP stack of a normalized cube.
///
/// A cube with no variance yields a single all-zero component.
pub fn build_emaps(cube: &HsiCube, spec: &ApSpec, share: f64) -> Result<EmapStack> {
    if !cube.is_normalized() {
        return Err(EsmlrError::InvalidInput(
            "EMAPs are computed from a normalized cube".into(),
        ));
    }
    spec.validate()?;
    let rasters = match pca_fit(&cube.to_matrix(), share) {
        Ok(model) => pca_project_to_images(&model, cube)?,
        Err(EsmlrError::InvalidInput(_)) if cube.pixels() >= 2 => vec![Raster {
            height: cube.height(),
            width: cube.width(),
            data: vec![0.0; cube.pixels()],
        }],
        Err(e) => return Err(e),
    };

    let p = spec.thresholds.len();
    let mut images = Vec::with_capacity(rasters.len() * spec.profile_len());
    let mut layout = Vec::with_capacity(images.capacity());
    for (k, r) in rasters.iter().enumerate() {
        let profile = build_ap(&quantize(r), spec)?;
        for (pos, img) in profile.into_iter().enumerate() {
            let (kind, threshold) = if pos < p {
                (ProfileKind::Thickening, Some(spec.thresholds[p - 1 - pos]))
            } else if pos == p {
                (ProfileKind::Original, None)
            } else {
                (ProfileKind::Thinning, Some(spec.thresholds[pos - p - 1]))
            };
            layout.push(EmapLayer {
                component: k,
                position: pos,
                kind,
                threshold,
            });
            images.push(img);
        }
    }
    Ok(EmapStack {
        height: cube.height(),
        width: cube.width(),
        images,
        layout,
    })
}

impl EmapStack {
    pub fn feature_count(&self) -> usize {
        self.images.len()
    }

    /// Every pixel as a column, gray levels scaled by 1/255.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        let n = self.height * self.width;
        DMatrix::from_fn(self.images.len(), n, |i, p| {
            self.images[i].levels[p] as f64 / 255.0
        })
    }

    /// Spatial features for the given pixels, scaled by 1/255.
    pub fn feature_block(&self, pixels: &[(usize, usize)]) -> FeatureBlock {
        let h = DMatrix::from_fn(self.images.len(), pixels.len(), |i, j| {
            let (r, c) = pixels[j];
            self.images[i].levels[r * self.width + c] as f64 / 255.0
        });
        FeatureBlock::raw(h, BlockTag::Spatial)
    }

    /// Writes the stack as consecutive row-major `f32le` images (scaled by
    /// 1/255) plus a JSON manifest next to it.
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut bytes = Vec::with_capacity(self.images.len() * self.height * self.width * 4);
        for img in &self.images {
            for &v in &img.levels {
                bytes.extend_from_slice(&(v as f32 / 255.0).to_le_bytes());
            }
        }
        fs::write(path, bytes).map_err(|e| EsmlrError::io(path, e))?;
        let manifest = EmapManifest {
            height: self.height,
            width: self.width,
            bands: self.images.len(),
            interleave: "bsq".into(),
            dtype: "f32le".into(),
            layers: self.layout.clone(),
        };
        let mpath = crate::hsi_data::sidecar_path(path);
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(&mpath, text).map_err(|e| EsmlrError::io(&mpath, e))
    }
}

/// Sidecar for an EMAP dump; a superset of the raster header.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmapManifest {
    pub height: usize,
    pub width: usize,
    pub bands: usize,
    pub interleave: String,
    pub dtype: String,
    pub layers: Vec<EmapLayer>,
}
