use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{argmax_labels, lorsal_train, one_hot_targets, ridge_init, LorsalConfig, Regressor, RidgeConfig};
use crate::error::{EsmlrError, Result};
use crate::feature_maps::{
    apply_map, concat_mfl, generate_map, rbf_features, ActivationKind, BlockTag, FeatureBlock,
    KernelConfig, RandomFeatureMap,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "smlr")]
    Smlr,
    #[serde(rename = "k-smlr")]
    KSmlr,
    #[serde(rename = "esmlr")]
    Esmlr,
    #[serde(rename = "k-esmlr")]
    KEsmlr,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Smlr, Variant::KSmlr, Variant::Esmlr, Variant::KEsmlr];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Smlr => "smlr",
            Variant::KSmlr => "k-smlr",
            Variant::Esmlr => "esmlr",
            Variant::KEsmlr => "k-esmlr",
        }
    }

    pub fn is_kernel(self) -> bool {
        matches!(self, Variant::KSmlr | Variant::KEsmlr)
    }

    /// Whether the regressor starts from the closed-form ridge solution.
    pub fn ridge_initialized(self) -> bool {
        matches!(self, Variant::Esmlr | Variant::KEsmlr)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = EsmlrError;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace('_', "-");
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == norm || v.name().replace('-', "") == norm)
            .ok_or_else(|| EsmlrError::Config(format!("unknown variant '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureMode {
    Spectral,
    Emaps,
    Mfl,
}

impl FeatureMode {
    pub const ALL: [FeatureMode; 3] = [FeatureMode::Spectral, FeatureMode::Emaps, FeatureMode::Mfl];

    pub fn name(self) -> &'static str {
        match self {
            FeatureMode::Spectral => "spectral",
            FeatureMode::Emaps => "emaps",
            FeatureMode::Mfl => "mfl",
        }
    }

    pub fn needs_spectral(self) -> bool {
        matches!(self, FeatureMode::Spectral | FeatureMode::Mfl)
    }

    pub fn needs_spatial(self) -> bool {
        matches!(self, FeatureMode::Emaps | FeatureMode::Mfl)
    }
}

impl fmt::Display for FeatureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureMode {
    type Err = EsmlrError;

    fn from_str(s: &str) -> Result<Self> {
        FeatureMode::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| EsmlrError::Config(format!("unknown feature mode '{s}'")))
    }
}

/// What the RBF kernel of K-ESMLR compares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelInput {
    /// Raw inputs of the active feature mode, as K-SMLR does.
    #[default]
    Raw,
    /// Outputs of the random feature map.
    Mapped,
}

/// Everything needed to rebuild the feature pipeline and rerun training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineSpec {
    pub variant: Variant,
    pub mode: FeatureMode,
    pub activation: ActivationKind,
    /// Random feature dimension `L`.
    pub hidden: usize,
    pub map_seed: u64,
    pub sigma: f64,
    pub ridge: RidgeConfig,
    pub lorsal: LorsalConfig,
    #[serde(default)]
    pub kernel_input: KernelInput,
}

impl PipelineSpec {
    pub fn validate(&self) -> Result<()> {
        if self.variant.is_kernel() && self.mode == FeatureMode::Mfl {
            return Err(EsmlrError::Config(format!(
                "{} cannot be combined with linear MFL",
                self.variant
            )));
        }
        if self.variant.is_kernel() && !(self.sigma > 0.0) {
            return Err(EsmlrError::Config(format!("σ must be > 0, got {}", self.sigma)));
        }
        if matches!(self.variant, Variant::Esmlr)
            || (self.variant == Variant::KEsmlr && self.kernel_input == KernelInput::Mapped)
        {
            if self.hidden == 0 {
                return Err(EsmlrError::Config("L must be >= 1".into()));
            }
        }
        self.lorsal.validate()
    }

    fn uses_map(&self) -> bool {
        self.variant == Variant::Esmlr
            || (self.variant == Variant::KEsmlr && self.kernel_input == KernelInput::Mapped)
    }
}

/// Raw per-sample inputs of each feature family.
#[derive(Debug, Clone, Copy, Default)]
pub struct TrainInput<'a> {
    pub spectral: Option<&'a DMatrix<f64>>,
    pub spatial: Option<&'a DMatrix<f64>>,
}

fn need<'m>(m: Option<&'m DMatrix<f64>>, mode: FeatureMode, what: &str) -> Result<&'m DMatrix<f64>> {
    m.ok_or_else(|| EsmlrError::Config(format!("{mode} mode needs {what} features")))
}

impl TrainInput<'_> {
    /// The input matrix of a feature mode; MFL stacks spectral over spatial rows.
    pub fn assemble(&self, mode: FeatureMode) -> Result<DMatrix<f64>> {
        let need = |m, what| need(m, mode, what);
        match mode {
            FeatureMode::Spectral => Ok(need(self.spectral, "spectral")?.clone()),
            FeatureMode::Emaps => Ok(need(self.spatial, "spatial")?.clone()),
            FeatureMode::Mfl => {
                let spe = FeatureBlock::raw(need(self.spectral, "spectral")?.clone(), BlockTag::Spectral);
                let spa = FeatureBlock::raw(need(self.spatial, "spatial")?.clone(), BlockTag::Spatial);
                Ok(concat_mfl(&spe, &spa)?.h)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub regressor: Regressor,
    pub pipeline: PipelineSpec,
    pub class_count: usize,
    pub input_dim: usize,
    map: Option<RandomFeatureMap>,
    /// Kernel anchors, in the space the kernel compares.
    anchors: Option<DMatrix<f64>>,
}

fn round_to_f32(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.map(|v| v as f32 as f64)
}

impl TrainedModel {
    /// Output dimension `L'` of the feature pipeline.
    pub fn feature_dim(&self) -> usize {
        self.regressor.features()
    }

    pub fn anchors(&self) -> Option<&DMatrix<f64>> {
        self.anchors.as_ref()
    }

    /// Applies the feature pipeline to raw inputs of the model's mode.
    pub fn features(&self, x: &DMatrix<f64>) -> Result<FeatureBlock> {
        if x.nrows() != self.input_dim {
            return Err(EsmlrError::Dimension(format!(
                "model expects {} input rows, got {}",
                self.input_dim,
                x.nrows()
            )));
        }
        build_features(&self.pipeline, self.map.as_ref(), self.anchors.as_ref(), x)
    }

    /// Raw class scores `W H`, `(M-1) x n`.
    pub fn scores(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let block = self.features(x)?;
        Ok(&self.regressor.w * &block.h)
    }
}

fn build_features(
    spec: &PipelineSpec,
    map: Option<&RandomFeatureMap>,
    anchors: Option<&DMatrix<f64>>,
    x: &DMatrix<f64>,
) -> Result<FeatureBlock> {
    let mapped = |x: &DMatrix<f64>| -> Result<FeatureBlock> {
        let map = map.expect("feature map present for mapped pipelines");
        apply_map(map, x)
    };
    match spec.variant {
        Variant::Smlr => Ok(FeatureBlock::raw(x.clone(), BlockTag::Spectral).with_bias_row()),
        Variant::Esmlr => mapped(x),
        Variant::KSmlr | Variant::KEsmlr => {
            let anchors = anchors.expect("anchors present for kernel pipelines").clone();
            let cfg = KernelConfig {
                sigma: spec.sigma,
                anchors,
            };
            match spec.kernel_input {
                KernelInput::Mapped if spec.variant == Variant::KEsmlr => {
                    rbf_features(&cfg, &mapped(x)?.body())
                }
                _ => rbf_features(&cfg, x),
            }
        }
    }
}

/// Fits a model on training inputs of the pipeline's feature mode.
pub fn train(
    spec: &PipelineSpec,
    x: &DMatrix<f64>,
    labels: &[usize],
    class_count: usize,
) -> Result<TrainedModel> {
    spec.validate()?;
    if labels.len() != x.ncols() {
        return Err(EsmlrError::Dimension(format!(
            "{} labels for {} samples",
            labels.len(),
            x.ncols()
        )));
    }
    let map = if spec.uses_map() {
        Some(generate_map(spec.hidden, x.nrows(), spec.activation, spec.map_seed)?)
    } else {
        None
    };
    let anchors = if spec.variant.is_kernel() {
        let a = match (spec.variant, spec.kernel_input) {
            (Variant::KEsmlr, KernelInput::Mapped) => {
                apply_map(map.as_ref().expect("map generated"), x)?.body()
            }
            _ => x.clone(),
        };
        Some(round_to_f32(&a))
    } else {
        None
    };
    let block = build_features(spec, map.as_ref(), anchors.as_ref(), x)?;
    let h = &block.h;

    let w0 = if spec.variant.ridge_initialized() {
        let y = one_hot_targets(labels, class_count)?;
        ridge_init(h, &y, &spec.ridge)?
    } else {
        Regressor::zeros(class_count, h.nrows())
    };
    let fit = lorsal_train(h, labels, &w0, &spec.lorsal)?;
    let regressor = Regressor {
        w: round_to_f32(&fit.regressor.w),
    };
    Ok(TrainedModel {
        regressor,
        pipeline: spec.clone(),
        class_count,
        input_dim: x.nrows(),
        map,
        anchors,
    })
}

/// Most probable class (1-based) of every column; ties go to the smallest label.
pub fn predict(model: &TrainedModel, x: &DMatrix<f64>) -> Result<Vec<usize>> {
    Ok(argmax_labels(&model.scores(x)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ModelDescriptor {
    pipeline: PipelineSpec,
    class_count: usize,
    input_dim: usize,
    feature_dim: usize,
    /// `(M-1) x L'` regressor, row-major `f32le`.
    weights_file: String,
    /// `d_a x n_a` anchors, column-major `f32le`.
    anchors_file: Option<String>,
    anchors_shape: Option<(usize, usize)>,
}

fn write_f32(path: &Path, values: impl Iterator<Item = f64>) -> Result<()> {
    let bytes: Vec<u8> = values.flat_map(|v| (v as f32).to_le_bytes()).collect();
    fs::write(path, bytes).map_err(|e| EsmlrError::io(path, e))
}

fn read_f32(path: &Path, expected: usize) -> Result<Vec<f64>> {
    let bytes = fs::read(path).map_err(|e| EsmlrError::io(path, e))?;
    if bytes.len() != expected * 4 {
        return Err(EsmlrError::Format(format!(
            "{}: {} bytes, expected {}",
            path.display(),
            bytes.len(),
            expected * 4
        )));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect())
}

fn sibling(json: &Path, suffix: &str) -> PathBuf {
    let stem = json.file_stem().and_then(|s| s.to_str()).unwrap_or("model");
    json.with_file_name(format!("{stem}.{suffix}"))
}

impl TrainedModel {
    /// Writes `<stem>.json`, `<stem>.w.f32` and, for kernel models,
    /// `<stem>.anchors.f32`.
    pub fn save(&self, json_path: &Path) -> Result<()> {
        let w_path = sibling(json_path, "w.f32");
        let w = &self.regressor.w;
        write_f32(&w_path, (0..w.nrows()).flat_map(|i| (0..w.ncols()).map(move |j| w[(i, j)])))?;
        let (anchors_file, anchors_shape) = match &self.anchors {
            Some(a) => {
                let p = sibling(json_path, "anchors.f32");
                write_f32(&p, a.iter().copied())?;
                (file_name(&p), Some(a.shape()))
            }
            None => (None, None),
        };
        let desc = ModelDescriptor {
            pipeline: self.pipeline.clone(),
            class_count: self.class_count,
            input_dim: self.input_dim,
            feature_dim: self.feature_dim(),
            weights_file: file_name(&w_path).unwrap_or_default(),
            anchors_file,
            anchors_shape,
        };
        let text = serde_json::to_string_pretty(&desc).expect("descriptor serializes");
        fs::write(json_path, text).map_err(|e| EsmlrError::io(json_path, e))
    }

    pub fn load(json_path: &Path) -> Result<Self> {
        let text = fs::read_to_string(json_path).map_err(|e| EsmlrError::io(json_path, e))?;
        let desc: ModelDescriptor = serde_json::from_str(&text)
            .map_err(|e| EsmlrError::Format(format!("{}: {e}", json_path.display())))?;
        desc.pipeline.validate()?;
        let dir = json_path.parent().unwrap_or(Path::new("."));
        let rows = desc.class_count.saturating_sub(1);
        let w = read_f32(&dir.join(&desc.weights_file), rows * desc.feature_dim)?;
        let regressor = Regressor {
            w: DMatrix::from_row_slice(rows, desc.feature_dim, &w),
        };
        let anchors = match (&desc.anchors_file, desc.anchors_shape) {
            (Some(f), Some((r, c))) => {
                let v = read_f32(&dir.join(f), r * c)?;
                Some(DMatrix::from_column_slice(r, c, &v))
            }
            (None, None) => None,
            _ => return Err(EsmlrError::Format("anchors file and shape must come together".into())),
        };
        let map = if desc.pipeline.uses_map() {
            Some(generate_map(
                desc.pipeline.hidden,
                desc.input_dim,
                desc.pipeline.activation,
                desc.pipeline.map_seed,
            )?)
        } else {
            None
        };
        if desc.pipeline.variant.is_kernel() != anchors.is_some() {
            return Err(EsmlrError::Format("kernel models need anchors".into()));
        }
        Ok(TrainedModel {
            regressor,
            pipeline: desc.pipeline,
            class_count: desc.class_count,
            input_dim: desc.input_dim,
            map,
            anchors,
        })
    }
}

fn file_name(p: &Path) -> Option<String> {
    p.file_name().and_then(|s| s.to_str()).map(str::to_owned)
}
