use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{EsmlrError, Result};
use crate::hsi_data::HsiCube;

use super::Raster;

#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub mean: DVector<f64>,
    /// `d x c`, orthonormal columns ordered by decreasing variance.
    pub components: DMatrix<f64>,
    /// All `d` eigenvalues, non-increasing.
    pub eigenvalues: DVector<f64>,
    pub retained: usize,
}

/// Eigenvalue share reached by the default component count.
pub const DEFAULT_SHARE: f64 = 0.99;

/// Fits PCA on the columns of `x` and keeps the smallest number of leading
/// components whose cumulative eigenvalue share exceeds `share`.
pub fn pca_fit(x: &DMatrix<f64>, share: f64) -> Result<PcaModel> {
    let (d, n) = x.shape();
    if n < 2 {
        return Err(EsmlrError::InvalidInput(format!(
            "PCA needs at least 2 samples, got {n}"
        )));
    }
    if !(share > 0.0 && share <= 1.0) {
        return Err(EsmlrError::Config(format!(
            "eigenvalue share must be in (0, 1], got {share}"
        )));
    }
    if x.column_iter().all(|c| c == x.column(0)) {
        return Err(EsmlrError::InvalidInput(
            "PCA input has zero variance".into(),
        ));
    }
    let mean = x.column_mean();
    let mut centered = x.clone();
    for mut col in centered.column_iter_mut() {
        col -= &mean;
    }
    let cov = (&centered * centered.transpose()) / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues = DVector::from_iterator(d, order.iter().map(|&i| eig.eigenvalues[i].max(0.0)));
    let total: f64 = eigenvalues.sum();
    if !(total > 0.0) {
        return Err(EsmlrError::InvalidInput(
            "PCA input has zero variance".into(),
        ));
    }

    let mut retained = d;
    let mut acc = 0.0;
    for (k, &v) in eigenvalues.iter().enumerate() {
        acc += v;
        if acc / total > share {
            retained = k + 1;
            break;
        }
    }

    let mut components = DMatrix::zeros(d, retained);
    for (k, &i) in order.iter().take(retained).enumerate() {
        let mut v = eig.eigenvectors.column(i).into_owned();
        // deterministic sign: largest-magnitude entry positive
        let pivot = v.iamax();
        if v[pivot] < 0.0 {
            v = -v;
        }
        components.set_column(k, &v);
    }
    Ok(PcaModel {
        mean,
        components,
        eigenvalues,
        retained,
    })
}

impl PcaModel {
    /// Scores `componentsᵀ (x - mean)` for every column of `x`.
    pub fn project(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.nrows() != self.mean.len() {
            return Err(EsmlrError::Dimension(format!(
                "PCA fitted on {} bands, got {}",
                self.mean.len(),
                x.nrows()
            )));
        }
        let mut centered = x.clone();
        for mut col in centered.column_iter_mut() {
            col -= &self.mean;
        }
        Ok(self.components.transpose() * centered)
    }
}

/// Projects every pixel of `cube` and reshapes each retained component into a raster.
pub fn pca_project_to_images(model: &PcaModel, cube: &HsiCube) -> Result<Vec<Raster>> {
    if cube.bands() != model.mean.len() {
        return Err(EsmlrError::Dimension(format!(
            "PCA fitted on {} bands, cube has {}",
            model.mean.len(),
            cube.bands()
        )));
    }
    let scores = model.project(&cube.to_matrix())?;
    Ok((0..model.retained)
        .map(|k| Raster {
            height: cube.height(),
            width: cube.width(),
            data: scores.row(k).iter().copied().collect(),
        })
        .collect())
}
