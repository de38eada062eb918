//! Closed-form regularized least-squares initialization.
//!
//! Minimizes `½‖W‖²_F + (C/2) Σ_i ‖W h_i - y_i‖²`, whose solution is
//! `W = Y Hᵀ (H Hᵀ + I/C)⁻¹ = Y (Hᵀ H + I/C)⁻¹ Hᵀ`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{Regressor, TargetMatrix};
use crate::error::{EsmlrError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RidgeConfig {
    pub c: f64,
}

impl RidgeConfig {
    /// `C = 2^a`.
    pub fn from_exponent(a: i32) -> Self {
        RidgeConfig { c: 2f64.powi(a) }
    }
}

/// Solves `(G + I/C) Z = rhs` for symmetric positive semidefinite `G`.
fn regularized_solve(mut g: DMatrix<f64>, c: f64, rhs: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let ridge = 1.0 / c;
    for i in 0..g.nrows() {
        g[(i, i)] += ridge;
    }
    let z = match g.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => g
            .lu()
            .solve(&rhs)
            .ok_or_else(|| EsmlrError::Numerical("ridge system is singular".into()))?,
    };
    if z.iter().any(|v| !v.is_finite()) {
        return Err(EsmlrError::Numerical(
            "ridge solve produced non-finite values".into(),
        ));
    }
    Ok(z)
}

fn check(h: &DMatrix<f64>, y: &TargetMatrix, cfg: &RidgeConfig) -> Result<()> {
    if !(cfg.c > 0.0) || !cfg.c.is_finite() {
        return Err(EsmlrError::Config(format!(
            "ridge weight C must be positive and finite, got {}",
            cfg.c
        )));
    }
    if h.ncols() != y.y.ncols() {
        return Err(EsmlrError::Dimension(format!(
            "H has {} samples, Y has {}",
            h.ncols(),
            y.y.ncols()
        )));
    }
    if h.iter().any(|v| !v.is_finite()) {
        return Err(EsmlrError::InvalidInput("non-finite features".into()));
    }
    Ok(())
}

/// `W = Y Hᵀ (H Hᵀ + I/C)⁻¹`, an `L' x L'` solve.
pub fn ridge_primal(h: &DMatrix<f64>, y: &TargetMatrix, cfg: &RidgeConfig) -> Result<Regressor> {
    check(h, y, cfg)?;
    let gram = h * h.transpose();
    let z = regularized_solve(gram, cfg.c, h * y.y.transpose())?;
    Ok(Regressor { w: z.transpose() })
}

/// `W = Y (Hᵀ H + I/C)⁻¹ Hᵀ`, an `n x n` solve.
pub fn ridge_dual(h: &DMatrix<f64>, y: &TargetMatrix, cfg: &RidgeConfig) -> Result<Regressor> {
    check(h, y, cfg)?;
    let gram = h.transpose() * h;
    let z = regularized_solve(gram, cfg.c, y.y.transpose())?;
    Ok(Regressor {
        w: z.transpose() * h.transpose(),
    })
}

/// Picks the smaller of the two equivalent systems.
pub fn ridge_init(h: &DMatrix<f64>, y: &TargetMatrix, cfg: &RidgeConfig) -> Result<Regressor> {
    if h.nrows() <= h.ncols() {
        ridge_primal(h, y, cfg)
    } else {
        ridge_dual(h, y, cfg)
    }
}
