//! Non-probabilistic estimators: column centering, PCA and PLS-SVD, plus the
//! two ways of turning weights into components.

use crate::error::{PplsError, Result};
use crate::linalg::{spd_solve, svd_ordered, sym_eig_desc, Mat, Vector};
use crate::model::{ExtendedPplsParams, Side};

/// Semi-orthogonal weights with their eigen- or singular values.
#[derive(Debug, Clone)]
pub struct WeightEstimate {
    pub weights: Mat,
    pub scores: Vector,
}

/// Left (x) and right (y) PLS-SVD weights sharing one set of singular values.
#[derive(Debug, Clone)]
pub struct PlsSvdFit {
    pub x: WeightEstimate,
    pub y: WeightEstimate,
}

pub fn center_columns(z: &Mat) -> Mat {
    let mut out = z.clone();
    let n = z.nrows() as f64;
    for mut col in out.column_iter_mut() {
        let mean = col.sum() / n;
        col.add_scalar_mut(-mean);
    }
    out
}

/// Top-`r` eigenvectors of the centered Gram matrix `Zᵀ Z`.
pub fn fit_pca(z: &Mat, r: usize) -> Result<WeightEstimate> {
    if r == 0 || r >= z.ncols() {
        return Err(PplsError::Dimension(format!(
            "PCA needs 0 < r < {} columns, got r = {r}",
            z.ncols()
        )));
    }
    if z.nrows() == 0 {
        return Err(PplsError::InvalidInput("no observations".into()));
    }
    let zc = center_columns(z);
    let gram = zc.transpose() * &zc;
    let eig = sym_eig_desc(&gram)?;
    Ok(WeightEstimate {
        weights: eig.vectors.columns(0, r).into_owned(),
        scores: eig.values.rows(0, r).into_owned(),
    })
}

/// Top-`r` singular vectors of the centered cross-product `Xᵀ Y`.
pub fn fit_pls_svd(x: &Mat, y: &Mat, r: usize) -> Result<PlsSvdFit> {
    if x.nrows() != y.nrows() {
        return Err(PplsError::Dimension(format!(
            "X has {} rows but Y has {}",
            x.nrows(),
            y.nrows()
        )));
    }
    if r == 0 || r >= x.ncols().min(y.ncols()) {
        return Err(PplsError::Dimension(format!(
            "PLS-SVD needs 0 < r < min(p, q) = {}, got r = {r}",
            x.ncols().min(y.ncols())
        )));
    }
    let cross = center_columns(x).transpose() * center_columns(y);
    pls_svd_from_cross(&cross, r)
}

/// PLS-SVD weights from a precomputed (or population) cross-covariance.
pub fn pls_svd_from_cross(cross: &Mat, r: usize) -> Result<PlsSvdFit> {
    let svd = svd_ordered(cross, r)?;
    Ok(PlsSvdFit {
        x: WeightEstimate {
            weights: svd.left,
            scores: svd.singvals.clone(),
        },
        y: WeightEstimate {
            weights: svd.right,
            scores: svd.singvals,
        },
    })
}

/// `Z · weights`.
pub fn components_from_weights(z: &Mat, weights: &Mat) -> Result<Mat> {
    if z.ncols() != weights.nrows() {
        return Err(PplsError::Dimension(format!(
            "data has {} columns but weights have {} rows",
            z.ncols(),
            weights.nrows()
        )));
    }
    Ok(z * weights)
}

/// Conditional-expectation components `E(t | z)`: for the x block
/// `Z (W Σ_t Wᵀ + Ψ_e)⁻¹ W Σ_t`, analogously for y with `(C, Ψ_f)`.
pub fn conditional_components(z: &Mat, params: &ExtendedPplsParams, side: Side) -> Result<Mat> {
    let (loadings, psi) = match side {
        Side::X => (&params.w, &params.psi_e),
        Side::Y => (&params.c, &params.psi_f),
    };
    if z.ncols() != loadings.nrows() || psi.shape() != (loadings.nrows(), loadings.nrows()) {
        return Err(PplsError::Dimension(format!(
            "data has {} columns, loadings have {} rows",
            z.ncols(),
            loadings.nrows()
        )));
    }
    let l_st = params.sigma_t.scale_columns(loadings);
    let var = &l_st * loadings.transpose() + psi;
    let gain = spd_solve(&var, &l_st)
        .map_err(|_| PplsError::Numerical("variance block is singular".into()))?;
    Ok(z * gain)
}
