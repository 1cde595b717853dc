//! Thin SVD shared by the regression and the projection.
//!
//! Matrices stay in nalgebra types at the API boundary; the factorization
//! itself runs in faer, which stays accurate on rank-deficient tall and wide
//! inputs (centered data always is).

use faer::Mat;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// `a = u * diag(s) * v^T` with `s` sorted in nonincreasing order and
/// `min(n, d)` columns in `u` and `v`.
pub(crate) struct ThinSvd {
    pub u: DMatrix<f64>,
    pub s: DVector<f64>,
    pub v: DMatrix<f64>,
}

pub(crate) fn thin_svd(a: &DMatrix<f64>) -> Result<ThinSvd> {
    let (n, d) = a.shape();
    let m = Mat::<f64>::from_fn(n, d, |i, j| a[(i, j)]);
    let svd = m
        .thin_svd()
        .map_err(|e| Error::Integrity(format!("SVD did not converge: {e:?}")))?;
    let (u, s, v) = (svd.U(), svd.S().column_vector(), svd.V());
    let k = n.min(d);
    Ok(ThinSvd {
        u: DMatrix::from_fn(n, k, |i, j| u[(i, j)]),
        s: DVector::from_fn(k, |i, _| s[i]),
        v: DMatrix::from_fn(d, k, |i, j| v[(i, j)]),
    })
}
