//! Multinomial logistic regression with the last class gauge-fixed to zero.
//!
//! Shapes used throughout: regressor `W` is `(M-1) x L'`, features `H` are
//! `L' x n` (one column per sample), targets `Y` are `(M-1) x n`.

mod lorsal;
mod model;
mod ridge;

pub use lorsal::{lorsal_train, LorsalConfig, LorsalFit};
pub use model::{predict, train, FeatureMode, KernelInput, PipelineSpec, TrainInput, TrainedModel, Variant};
pub use ridge::{ridge_dual, ridge_init, ridge_primal, RidgeConfig};

use nalgebra::DMatrix;

use crate::error::{EsmlrError, Result};

/// Coefficients of the first `M-1` classes; class `M` is implicitly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Regressor {
    pub w: DMatrix<f64>,
}

impl Regressor {
    pub fn zeros(class_count: usize, features: usize) -> Self {
        Regressor {
            w: DMatrix::zeros(class_count.saturating_sub(1), features),
        }
    }

    pub fn class_count(&self) -> usize {
        self.w.nrows() + 1
    }

    pub fn features(&self) -> usize {
        self.w.ncols()
    }

    pub fn nnz(&self) -> usize {
        self.w.iter().filter(|&&v| v != 0.0).count()
    }

    pub fn l1_norm(&self) -> f64 {
        self.w.iter().map(|v| v.abs()).sum()
    }
}

/// One-hot targets without the last class row.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetMatrix {
    pub y: DMatrix<f64>,
}

pub fn one_hot_targets(labels: &[usize], class_count: usize) -> Result<TargetMatrix> {
    if class_count < 2 {
        return Err(EsmlrError::InvalidInput(format!(
            "need at least 2 classes, got {class_count}"
        )));
    }
    check_labels(labels, class_count)?;
    let mut y = DMatrix::zeros(class_count - 1, labels.len());
    for (i, &l) in labels.iter().enumerate() {
        if l < class_count {
            y[(l - 1, i)] = 1.0;
        }
    }
    Ok(TargetMatrix { y })
}

fn check_labels(labels: &[usize], class_count: usize) -> Result<()> {
    match labels.iter().find(|&&l| l == 0 || l > class_count) {
        Some(bad) => Err(EsmlrError::InvalidInput(format!(
            "label {bad} outside 1..={class_count}"
        ))),
        None => Ok(()),
    }
}

fn check_shapes(w: &Regressor, h: &DMatrix<f64>) -> Result<()> {
    if w.features() != h.nrows() {
        return Err(EsmlrError::Dimension(format!(
            "regressor has {} features, H has {} rows",
            w.features(),
            h.nrows()
        )));
    }
    Ok(())
}

/// Log of `1 + Σ exp(s_k)`, evaluated with the running maximum removed.
fn log_partition(scores: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = scores.clone().fold(0.0f64, f64::max);
    let sum: f64 = (-max).exp() + scores.map(|s| (s - max).exp()).sum::<f64>();
    max + sum.ln()
}

/// Class posteriors, `M x n`; every column sums to one.
pub fn mlr_posteriors(w: &Regressor, h: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_shapes(w, h)?;
    if h.iter().any(|v| !v.is_finite()) {
        return Err(EsmlrError::InvalidInput("non-finite features".into()));
    }
    let m = w.class_count();
    let scores = &w.w * h;
    let mut p = DMatrix::zeros(m, h.ncols());
    for j in 0..h.ncols() {
        let col = scores.column(j);
        let max = col.iter().copied().fold(0.0f64, f64::max);
        let mut denom = (-max).exp();
        for &s in col.iter() {
            denom += (s - max).exp();
        }
        for k in 0..m - 1 {
            p[(k, j)] = (col[k] - max).exp() / denom;
        }
        p[(m - 1, j)] = (-max).exp() / denom;
    }
    Ok(p)
}

/// Multinomial log-likelihood `Σ_i (w^{(y_i)}·h_i - log(1 + Σ_k exp(w^{(k)}·h_i)))`.
pub fn log_likelihood(w: &Regressor, h: &DMatrix<f64>, labels: &[usize]) -> Result<f64> {
    check_shapes(w, h)?;
    if labels.len() != h.ncols() {
        return Err(EsmlrError::Dimension(format!(
            "{} labels for {} samples",
            labels.len(),
            h.ncols()
        )));
    }
    let m = w.class_count();
    check_labels(labels, m)?;
    let scores = &w.w * h;
    Ok(log_likelihood_from_scores(&scores, labels))
}

pub(crate) fn log_likelihood_from_scores(scores: &DMatrix<f64>, labels: &[usize]) -> f64 {
    let m = scores.nrows() + 1;
    labels
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            let col = scores.column(i);
            let own = if l < m { col[l - 1] } else { 0.0 };
            own - log_partition(col.iter().copied())
        })
        .sum()
}

/// `∇ℓ(W) = (Y - P_{1..M-1}) Hᵀ`.
pub fn log_likelihood_gradient(
    w: &Regressor,
    h: &DMatrix<f64>,
    labels: &[usize],
) -> Result<DMatrix<f64>> {
    let y = one_hot_targets(labels, w.class_count())?;
    let p = mlr_posteriors(w, h)?;
    let residual = y.y - p.rows(0, w.class_count() - 1);
    Ok(residual * h.transpose())
}

/// `ℓ(W) - λ‖W‖₁`.
pub fn map_objective(w: &Regressor, h: &DMatrix<f64>, labels: &[usize], lambda: f64) -> Result<f64> {
    Ok(log_likelihood(w, h, labels)? - lambda * w.l1_norm())
}

pub fn soft_threshold(v: f64, t: f64) -> f64 {
    v.signum() * (v.abs() - t).max(0.0)
}

/// Argmax of `[s_1, …, s_{M-1}, 0]` per column, ties to the smallest class.
/// Labels are 1-based.
pub fn argmax_labels(scores: &DMatrix<f64>) -> Vec<usize> {
    let m = scores.nrows() + 1;
    (0..scores.ncols())
        .map(|j| {
            let col = scores.column(j);
            let score = |k: usize| if k < m - 1 { col[k] } else { 0.0 };
            let mut best = 0;
            for k in 1..m {
                if score(k) > score(best) {
                    best = k;
                }
            }
            best + 1
        })
        .collect()
}
