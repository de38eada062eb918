//! ℓ1-regularized MLR by variable splitting and an augmented Lagrangian.
//!
//! Each outer step replaces the log-likelihood by Böhning's quadratic lower
//! bound around the current iterate, with curvature
//! `R(Δ) = ½ (I - 11ᵀ/M) Δ (H Hᵀ)`, and runs ADMM sweeps on
//! `max_W q(W) - λ‖U‖₁  s.t.  W = U`. Since the bound touches the
//! likelihood at the current iterate, any candidate that raises the bound
//! also raises the true objective; a candidate is only accepted when it does.
//!
//! `(R + μI)` is block-diagonal in the eigenbasis of `I - 11ᵀ/M`
//! (eigenvalue `1/M` along the all-ones direction and `1` elsewhere), so two
//! Cholesky factorizations of `L' x L'` matrices are computed once per call.

use nalgebra::{Cholesky, DMatrix, Dyn};
use serde::{Deserialize, Serialize};

use super::{check_labels, log_likelihood_from_scores, one_hot_targets, soft_threshold, Regressor};
use crate::error::{EsmlrError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorsalConfig {
    pub lambda: f64,
    /// Augmented-Lagrangian penalty. `None` picks it from the data, see
    /// [`LorsalConfig::penalty`].
    #[serde(default)]
    pub mu: Option<f64>,
    pub max_iter: usize,
    /// Stop once the relative objective change drops below this.
    pub tol: f64,
    /// ADMM sweeps per bound update.
    pub admm_sweeps: usize,
}

impl LorsalConfig {
    /// Data-driven penalty, 200 outer iterations, tolerance `1e-6`.
    pub fn new(lambda: f64) -> Self {
        LorsalConfig {
            lambda,
            mu: None,
            max_iter: 200,
            tol: 1e-6,
            admm_sweeps: 10,
        }
    }

    /// `λ = 2^b`.
    pub fn from_exponent(b: i32) -> Self {
        Self::new(2f64.powi(b))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(EsmlrError::Config(format!("λ must be >= 0, got {}", self.lambda)));
        }
        if let Some(mu) = self.mu {
            if !(mu > 0.0) || !mu.is_finite() {
                return Err(EsmlrError::Config(format!("μ must be > 0, got {mu}")));
            }
        }
        if self.max_iter == 0 || self.admm_sweeps == 0 {
            return Err(EsmlrError::Config(
                "iteration counts must be >= 1".into(),
            ));
        }
        if !(self.tol > 0.0) {
            return Err(EsmlrError::Config(format!("tolerance must be > 0, got {}", self.tol)));
        }
        Ok(())
    }

    /// The explicit `μ`, or else the larger of `0.1λ` (at least `1e-4`;
    /// `1e-2` when `λ = 0`) and 1% of the mean diagonal of the bound
    /// curvature `½ H Hᵀ`. A penalty far below the curvature scale makes the
    /// splitting crawl.
    pub fn penalty(&self, h: &DMatrix<f64>) -> f64 {
        if let Some(mu) = self.mu {
            return mu;
        }
        let base = if self.lambda == 0.0 {
            1e-2
        } else {
            (0.1 * self.lambda).max(1e-4)
        };
        // trace(H Hᵀ) is the squared Frobenius norm of H
        let curvature = 0.5 * h.norm_squared() / h.nrows().max(1) as f64;
        base.max(0.01 * curvature)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LorsalFit {
    pub regressor: Regressor,
    /// Objective at the start point followed by one entry per accepted step.
    pub objective_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// `a K + μI` for one scale `a`, factored either directly (`L' x L'`) or,
/// when `H` has fewer samples than rows, through the Woodbury identity
/// `(μI + a H Hᵀ)⁻¹ = (I - H (HᵀH + (μ/a) I)⁻¹ Hᵀ) / μ` on `n x n` systems.
enum ScaledFactor {
    Dense(Cholesky<f64, Dyn>),
    LowRank(Cholesky<f64, Dyn>),
}

struct BoundSystem {
    class_count: usize,
    mu: f64,
    /// `H`, kept when the low-rank path is used.
    h: Option<DMatrix<f64>>,
    /// `K = H Hᵀ`, kept when the dense path is used.
    gram: Option<DMatrix<f64>>,
    /// Factor for `½K/M + μI`, the all-ones direction.
    along_ones: ScaledFactor,
    /// Factor for `½K + μI`; absent for two classes.
    orthogonal: Option<ScaledFactor>,
}

fn not_pd() -> EsmlrError {
    EsmlrError::Numerical("bound matrix is not positive definite".into())
}

impl BoundSystem {
    fn new(h: &DMatrix<f64>, class_count: usize, mu: f64) -> Result<Self> {
        let low_rank = h.ncols() < h.nrows();
        let inner = if low_rank { h.transpose() * h } else { h * h.transpose() };
        let factor = |a: f64| -> Result<ScaledFactor> {
            if low_rank {
                let mut g = inner.clone();
                for i in 0..g.nrows() {
                    g[(i, i)] += mu / a;
                }
                g.cholesky().map(ScaledFactor::LowRank).ok_or_else(not_pd)
            } else {
                let mut g = &inner * a;
                for i in 0..g.nrows() {
                    g[(i, i)] += mu;
                }
                g.cholesky().map(ScaledFactor::Dense).ok_or_else(not_pd)
            }
        };
        let along_ones = factor(0.5 / class_count as f64)?;
        let orthogonal = if class_count > 2 { Some(factor(0.5)?) } else { None };
        Ok(BoundSystem {
            class_count,
            mu,
            h: low_rank.then(|| h.clone()),
            gram: (!low_rank).then_some(inner),
            along_ones,
            orthogonal,
        })
    }

    /// `(a K + μI)⁻¹ cols`, column by column.
    fn apply_inverse(&self, f: &ScaledFactor, cols: &DMatrix<f64>) -> DMatrix<f64> {
        match f {
            ScaledFactor::Dense(ch) => ch.solve(cols),
            ScaledFactor::LowRank(ch) => {
                let h = self.h.as_ref().expect("low-rank path keeps H");
                let inner = ch.solve(&(h.tr_mul(cols)));
                (cols - h * inner) / self.mu
            }
        }
    }

    /// `X` with `R(X) + μX = rhs`.
    fn solve(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        let r = rhs.nrows();
        let mean = rhs.row_mean();
        let mean_col = DMatrix::from_column_slice(rhs.ncols(), 1, mean.as_slice());
        let x_mean = self.apply_inverse(&self.along_ones, &mean_col);
        let mut x = DMatrix::zeros(r, rhs.ncols());
        for i in 0..r {
            x.row_mut(i).copy_from_slice(x_mean.as_slice());
        }
        if let Some(orth) = &self.orthogonal {
            let mut perp = rhs.clone();
            for i in 0..r {
                let mut row = perp.row_mut(i);
                row -= &mean;
            }
            x += self.apply_inverse(orth, &perp.transpose()).transpose();
        }
        x
    }

    /// `R(X) = ½ (I - 11ᵀ/M) X K`.
    fn curvature(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let xk = match (&self.gram, &self.h) {
            (Some(k), _) => x * k,
            (None, Some(h)) => (x * h) * h.transpose(),
            _ => unreachable!("one representation is always kept"),
        };
        let col_sum = xk.row_sum() / self.class_count as f64;
        let mut out = xk;
        for i in 0..out.nrows() {
            let mut row = out.row_mut(i);
            row -= &col_sum;
        }
        out * 0.5
    }
}

fn objective(w: &DMatrix<f64>, h: &DMatrix<f64>, labels: &[usize], lambda: f64) -> f64 {
    let scores = w * h;
    log_likelihood_from_scores(&scores, labels) - lambda * w.iter().map(|v| v.abs()).sum::<f64>()
}

/// Rounds of `admm_sweeps` tried before an outer step is declared stalled.
const MAX_ROUNDS: usize = 5;

pub fn lorsal_train(
    h: &DMatrix<f64>,
    labels: &[usize],
    w0: &Regressor,
    cfg: &LorsalConfig,
) -> Result<LorsalFit> {
    cfg.validate()?;
    let m = w0.class_count();
    if m < 2 {
        return Err(EsmlrError::InvalidInput("need at least 2 classes".into()));
    }
    if w0.features() != h.nrows() {
        return Err(EsmlrError::Dimension(format!(
            "initial regressor has {} features, H has {} rows",
            w0.features(),
            h.nrows()
        )));
    }
    if labels.len() != h.ncols() {
        return Err(EsmlrError::Dimension(format!(
            "{} labels for {} samples",
            labels.len(),
            h.ncols()
        )));
    }
    check_labels(labels, m)?;
    if h.iter().any(|v| !v.is_finite()) || w0.w.iter().any(|v| !v.is_finite()) {
        return Err(EsmlrError::InvalidInput("non-finite solver input".into()));
    }

    let y = one_hot_targets(labels, m)?.y;
    let mu = cfg.penalty(h);
    let system = BoundSystem::new(h, m, mu)?;
    let threshold = cfg.lambda / mu;

    let mut w = w0.w.clone();
    let mut u = w.clone();
    let mut d = DMatrix::zeros(w.nrows(), w.ncols());
    let mut f = objective(&w, h, labels, cfg.lambda);
    let mut history = vec![f];
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..cfg.max_iter {
        let scores = &w * h;
        let mut p = DMatrix::zeros(m - 1, h.ncols());
        for j in 0..h.ncols() {
            let col = scores.column(j);
            let max = col.iter().copied().fold(0.0f64, f64::max);
            let denom = (-max).exp() + col.iter().map(|s| (s - max).exp()).sum::<f64>();
            for k in 0..m - 1 {
                p[(k, j)] = (col[k] - max).exp() / denom;
            }
        }
        let grad = (&y - p) * h.transpose();
        let base = grad + system.curvature(&w);

        let mut accepted = None;
        for _ in 0..MAX_ROUNDS {
            for _ in 0..cfg.admm_sweeps {
                let w_next = system.solve(&(&base + (&u + &d) * mu));
                u = (&w_next - &d).map(|v| soft_threshold(v, threshold));
                d -= &w_next - &u;
            }
            if u.iter().any(|v| !v.is_finite()) {
                return Err(EsmlrError::Numerical("solver iterate is not finite".into()));
            }
            let fc = objective(&u, h, labels, cfg.lambda);
            if fc >= f {
                accepted = Some(fc);
                break;
            }
        }
        let Some(fc) = accepted else {
            // no ascent left at this bound: a fixed point up to ADMM accuracy
            converged = true;
            break;
        };
        iterations += 1;
        let rel = (fc - f) / f.abs().max(1.0);
        w.copy_from(&u);
        f = fc;
        history.push(f);
        if rel < cfg.tol {
            converged = true;
            break;
        }
    }

    Ok(LorsalFit {
        regressor: Regressor { w },
        objective_history: history,
        iterations,
        converged,
    })
}
