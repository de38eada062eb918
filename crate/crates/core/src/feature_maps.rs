//! Feature representations fed to the multinomial model: random hidden-layer
//! projections, RBF kernel features and the linear multiple-feature stack.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::distr::Uniform;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{EsmlrError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivationKind {
    /// `aᵀx + b`
    Linear,
    /// `1 / (1 + exp(-(aᵀx + b)))`
    #[default]
    Sigmoid,
    /// `exp(-b ‖aᵀx‖²)`, with `aᵀx` a scalar.
    Gaussian,
    /// `1` if `aᵀx ≥ 0`, else `0`; the bias is unused.
    Hardlimit,
    /// `(‖x - a‖² + b²)²`
    Multiquadric,
}

impl ActivationKind {
    pub const ALL: [ActivationKind; 5] = [
        ActivationKind::Linear,
        ActivationKind::Sigmoid,
        ActivationKind::Gaussian,
        ActivationKind::Hardlimit,
        ActivationKind::Multiquadric,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ActivationKind::Linear => "linear",
            ActivationKind::Sigmoid => "sigmoid",
            ActivationKind::Gaussian => "gaussian",
            ActivationKind::Hardlimit => "hardlimit",
            ActivationKind::Multiquadric => "multiquadric",
        }
    }

    /// Evaluates the activation from the projection `aᵀx`, the bias `b` and,
    /// for the multiquadric form, the squared distance `‖x - a‖²`.
    pub fn eval(self, proj: f64, bias: f64, dist_sq: f64) -> f64 {
        match self {
            ActivationKind::Linear => proj + bias,
            ActivationKind::Sigmoid => 1.0 / (1.0 + (-(proj + bias)).exp()),
            ActivationKind::Gaussian => (-bias * proj * proj).exp(),
            ActivationKind::Hardlimit => {
                if proj >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ActivationKind::Multiquadric => {
                let inner = dist_sq + bias * bias;
                inner * inner
            }
        }
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ActivationKind {
    type Err = EsmlrError;

    fn from_str(s: &str) -> Result<Self> {
        ActivationKind::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| EsmlrError::Config(format!("unknown activation '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockTag {
    Spectral,
    Spatial,
    Kernel,
    Mfl,
    Mapped,
}

/// Feature matrix with one column per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBlock {
    pub h: DMatrix<f64>,
    pub tag: BlockTag,
    /// Row 0 is the constant 1 when set.
    pub bias_row: bool,
}

impl FeatureBlock {
    /// Wraps raw inputs (no bias row).
    pub fn raw(h: DMatrix<f64>, tag: BlockTag) -> Self {
        FeatureBlock {
            h,
            tag,
            bias_row: false,
        }
    }

    pub fn rows(&self) -> usize {
        self.h.nrows()
    }

    pub fn samples(&self) -> usize {
        self.h.ncols()
    }

    /// Returns a copy with a constant-1 row prepended, unless one is present.
    pub fn with_bias_row(self) -> Self {
        if self.bias_row {
            return self;
        }
        let (r, n) = self.h.shape();
        let h = DMatrix::from_fn(r + 1, n, |i, j| if i == 0 { 1.0 } else { self.h[(i - 1, j)] });
        FeatureBlock {
            h,
            tag: self.tag,
            bias_row: true,
        }
    }

    /// Rows excluding the bias row.
    pub fn body(&self) -> DMatrix<f64> {
        if self.bias_row {
            self.h.rows(1, self.h.nrows() - 1).into_owned()
        } else {
            self.h.clone()
        }
    }
}

/// Randomly drawn hidden layer: weights uniform on `[-1, 1]`, biases
/// uniform on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomFeatureMap {
    /// `L x d`, row `i` is `a_i`.
    pub weights: DMatrix<f64>,
    pub biases: DVector<f64>,
    pub activation: ActivationKind,
    pub seed: u64,
    pub add_bias_row: bool,
}

impl RandomFeatureMap {
    pub fn output_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.weights.ncols()
    }
}

pub fn generate_map(
    l: usize,
    d: usize,
    activation: ActivationKind,
    seed: u64,
) -> Result<RandomFeatureMap> {
    if l == 0 || d == 0 {
        return Err(EsmlrError::InvalidInput(format!(
            "feature map needs L >= 1 and d >= 1, got L={l}, d={d}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weight_dist = Uniform::new_inclusive(-1.0, 1.0).expect("valid range");
    let bias_dist = Uniform::new_inclusive(0.0, 1.0).expect("valid range");
    // Row-major fill so the draw order does not depend on matrix storage.
    let mut w = vec![0.0; l * d];
    for v in w.iter_mut() {
        *v = rng.sample(weight_dist);
    }
    let biases = DVector::from_fn(l, |_, _| rng.sample(bias_dist));
    Ok(RandomFeatureMap {
        weights: DMatrix::from_row_slice(l, d, &w),
        biases,
        activation,
        seed,
        add_bias_row: true,
    })
}

/// Evaluates `H[i][j] = activation(a_iᵀ x_j + b_i)`.
pub fn apply_map(map: &RandomFeatureMap, x: &DMatrix<f64>) -> Result<FeatureBlock> {
    let d = map.input_dim();
    if x.nrows() != d {
        return Err(EsmlrError::Dimension(format!(
            "map expects {d} input rows, got {}",
            x.nrows()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(EsmlrError::InvalidInput("non-finite map input".into()));
    }
    let l = map.output_dim();
    let offset = usize::from(map.add_bias_row);
    let proj = &map.weights * x;
    let mut h = DMatrix::zeros(l + offset, x.ncols());
    for j in 0..x.ncols() {
        let col = x.column(j);
        if offset == 1 {
            h[(0, j)] = 1.0;
        }
        for i in 0..l {
            let dist_sq = if map.activation == ActivationKind::Multiquadric {
                map.weights
                    .row(i)
                    .iter()
                    .zip(col.iter())
                    .map(|(a, v)| (v - a) * (v - a))
                    .sum()
            } else {
                0.0
            };
            let v = map.activation.eval(proj[(i, j)], map.biases[i], dist_sq);
            if !v.is_finite() {
                return Err(EsmlrError::Numerical(format!(
                    "{} activation overflowed at feature {i}, sample {j}",
                    map.activation
                )));
            }
            h[(i + offset, j)] = v;
        }
    }
    Ok(FeatureBlock {
        h,
        tag: BlockTag::Mapped,
        bias_row: map.add_bias_row,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelConfig {
    pub sigma: f64,
    /// `d x n_a`, usually the training samples.
    pub anchors: DMatrix<f64>,
}

/// `H[0][j] = 1`, `H[i][j] = exp(-‖x_j - anchor_i‖² / (2σ²))`.
pub fn rbf_features(cfg: &KernelConfig, x: &DMatrix<f64>) -> Result<FeatureBlock> {
    if !(cfg.sigma > 0.0) {
        return Err(EsmlrError::InvalidInput(format!(
            "RBF width must be positive, got {}",
            cfg.sigma
        )));
    }
    if cfg.anchors.ncols() == 0 {
        return Err(EsmlrError::InvalidInput("RBF kernel needs anchors".into()));
    }
    if cfg.anchors.nrows() != x.nrows() {
        return Err(EsmlrError::Dimension(format!(
            "anchors have {} rows, inputs {}",
            cfg.anchors.nrows(),
            x.nrows()
        )));
    }
    let na = cfg.anchors.ncols();
    let scale = 1.0 / (2.0 * cfg.sigma * cfg.sigma);
    let mut h = DMatrix::zeros(na + 1, x.ncols());
    for j in 0..x.ncols() {
        let xj = x.column(j);
        h[(0, j)] = 1.0;
        for i in 0..na {
            let dist_sq: f64 = cfg
                .anchors
                .column(i)
                .iter()
                .zip(xj.iter())
                .map(|(a, v)| (v - a) * (v - a))
                .sum();
            h[(i + 1, j)] = (-dist_sq * scale).exp();
        }
    }
    Ok(FeatureBlock {
        h,
        tag: BlockTag::Kernel,
        bias_row: true,
    })
}

/// Row-stacks a spectral and a spatial block, keeping at most one bias row.
pub fn concat_mfl(spe: &FeatureBlock, spa: &FeatureBlock) -> Result<FeatureBlock> {
    if spe.samples() != spa.samples() {
        return Err(EsmlrError::Dimension(format!(
            "spectral block has {} samples, spatial {}",
            spe.samples(),
            spa.samples()
        )));
    }
    let bias = spe.bias_row || spa.bias_row;
    let a = spe.body();
    let b = spa.body();
    let offset = usize::from(bias);
    let rows = offset + a.nrows() + b.nrows();
    let h = DMatrix::from_fn(rows, spe.samples(), |i, j| {
        if i < offset {
            1.0
        } else if i - offset < a.nrows() {
            a[(i - offset, j)]
        } else {
            b[(i - offset - a.nrows(), j)]
        }
    });
    Ok(FeatureBlock {
        h,
        tag: BlockTag::Mfl,
        bias_row: bias,
    })
}
