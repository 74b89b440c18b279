//! Principal component analysis via the symmetric eigendecomposition of the
//! sample covariance (denominator `N − 1`).

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub means: Vec<f64>,
    /// Unit-norm principal directions, strongest first, each of length `F_in`.
    pub components: Vec<Vec<f64>>,
    /// Covariance eigenvalue of each kept component.
    pub explained_variance: Vec<f64>,
    /// Trace of the covariance matrix.
    pub total_variance: f64,
}

impl PcaModel {
    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn explained_variance_ratio(&self) -> Vec<f64> {
        self.explained_variance
            .iter()
            .map(|v| if self.total_variance > 0.0 { v / self.total_variance } else { 0.0 })
            .collect()
    }

    /// `F_in × k` matrix with the components as columns.
    pub fn component_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.means.len(), self.components.len(), |r, c| self.components[c][r])
    }

    /// Maps projected rows back to the input space.
    pub fn inverse_transform(&self, projected: &DMatrix<f64>) -> DMatrix<f64> {
        let mut back = projected * self.component_matrix().transpose();
        for mut row in back.row_iter_mut() {
            for (v, m) in row.iter_mut().zip(&self.means) {
                *v += m;
            }
        }
        back
    }
}

/// Fits `k` components on the rows of `x`. Each component's sign is fixed so
/// that its largest-magnitude entry is positive.
pub fn pca_fit(x: &DMatrix<f64>, k: usize) -> Result<PcaModel> {
    let (n, f) = x.shape();
    if k == 0 {
        return Err(Error::InvalidArgument("PCA needs at least one component".into()));
    }
    if f < k {
        return Err(Error::InvalidArgument(format!(
            "cannot extract {k} components from {f} features"
        )));
    }
    if n < k {
        return Err(Error::InvalidArgument(format!(
            "cannot extract {k} components from {n} samples"
        )));
    }
    let means: Vec<f64> = (0..f).map(|c| x.column(c).mean()).collect();
    let centered = center(x, &means);
    let denom = if n > 1 { (n - 1) as f64 } else { 1.0 };
    let cov = (centered.transpose() * &centered) / denom;
    let total_variance = cov.trace();

    let eigen = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..f).collect();
    order.sort_by(|&a, &b| eigen.eigenvalues[b].total_cmp(&eigen.eigenvalues[a]));

    let mut components = Vec::with_capacity(k);
    let mut explained_variance = Vec::with_capacity(k);
    for &idx in order.iter().take(k) {
        let mut v: Vec<f64> = eigen.eigenvectors.column(idx).iter().copied().collect();
        let pivot = v
            .iter()
            .copied()
            .fold(0.0f64, |best, e| if e.abs() > best.abs() { e } else { best });
        if pivot < 0.0 {
            v.iter_mut().for_each(|e| *e = -*e);
        }
        components.push(v);
        // rounding can leave a rank-deficient direction slightly negative
        explained_variance.push(eigen.eigenvalues[idx].max(0.0));
    }
    Ok(PcaModel {
        means,
        components,
        explained_variance,
        total_variance,
    })
}

/// Projects the centred rows of `x` onto the fitted components.
pub fn pca_transform(x: &DMatrix<f64>, model: &PcaModel) -> Result<DMatrix<f64>> {
    if x.ncols() != model.means.len() {
        return Err(Error::DimensionMismatch {
            context: "PCA input features",
            expected: model.means.len(),
            got: x.ncols(),
        });
    }
    Ok(center(x, &model.means) * model.component_matrix())
}

fn center(x: &DMatrix<f64>, means: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), x.ncols(), |r, c| x[(r, c)] - means[c])
}
