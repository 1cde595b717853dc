use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::thin_svd;

/// Fit ratings on embeddings with an intercept and predict new rows.
///
/// Features and targets are centered, then the minimum-norm least-squares
/// weights are taken from the SVD of the centered feature matrix. Singular
/// values at or below `max(n, d) * eps * sigma_max` count as zero. Outputs are
/// not clipped.
pub fn fit_predict_molecule(
    source: &DMatrix<f64>,
    ratings: &[f64],
    target: &DMatrix<f64>,
) -> Result<Vec<f64>> {
    let (n, d) = source.shape();
    if n < 2 {
        return Err(Error::Argument(format!(
            "need at least 2 rated descriptors to fit, got {n}"
        )));
    }
    if ratings.len() != n {
        return Err(Error::Argument(format!(
            "{} ratings for {n} embedding rows",
            ratings.len()
        )));
    }
    if target.ncols() != d {
        return Err(Error::Argument(format!(
            "target dimension {} differs from source dimension {d}",
            target.ncols()
        )));
    }
    if source
        .iter()
        .chain(target.iter())
        .chain(ratings)
        .any(|v| !v.is_finite())
    {
        return Err(Error::Integrity(
            "non-finite value in regression inputs".into(),
        ));
    }

    let feature_mean = source.row_mean();
    let rating_mean = ratings.iter().sum::<f64>() / n as f64;
    let mut centered = source.clone();
    for mut row in centered.row_iter_mut() {
        row -= &feature_mean;
    }
    let centered_ratings = DVector::from_iterator(n, ratings.iter().map(|r| r - rating_mean));

    let weights = min_norm_solve(&centered, &centered_ratings)?;

    Ok(target
        .row_iter()
        .map(|row| (row - &feature_mean).dot(&weights.transpose()) + rating_mean)
        .collect())
}

/// Minimum-norm solution of `a x ~= b` through the thin SVD.
fn min_norm_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let (n, d) = a.shape();
    let svd = thin_svd(a)?;
    let tol = n.max(d) as f64 * f64::EPSILON * svd.s.max();
    let mut x = DVector::zeros(d);
    for (i, &s) in svd.s.iter().enumerate() {
        if s > tol && s > 0.0 {
            let coeff = svd.u.column(i).dot(b) / s;
            x.axpy(coeff, &svd.v.column(i), 1.0);
        }
    }
    Ok(x)
}

/// Sample Pearson correlation; `None` when either side has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<Option<f64>> {
    if x.len() != y.len() {
        return Err(Error::Argument(format!(
            "pearson on lengths {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::Argument("pearson needs at least 2 points".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(None);
    }
    Ok(Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)))
}
