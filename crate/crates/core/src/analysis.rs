//! Embedding-space geometry: 2-D projections and distance summaries.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use nalgebra::{DMatrix, RowDVector};
use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::linalg::thin_svd;

/// Anchor word and its related / unrelated comparison words.
pub const LEATHER_ANCHOR: &str = "leather";
pub const LEATHER_POSITIVES: [&str; 5] = ["musky", "gasoline", "smoky", "amber", "musk"];
pub const LEATHER_NEGATIVES: [&str; 5] = ["jacket", "rugged", "hide", "material", "tanning"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectionResult {
    /// One `[pc1, pc2]` pair per input row.
    pub points: Vec<[f64; 2]>,
    /// Two orthonormal direction vectors in the input space.
    pub components: [Vec<f64>; 2],
    /// Sample variance along each component (`n - 1` denominator).
    pub explained_variance: [f64; 2],
}

fn centered(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mean = m.row_mean();
    let mut c = m.clone();
    for mut row in c.row_iter_mut() {
        row -= &mean;
    }
    c
}

/// Project rows onto their top two principal directions.
///
/// Each component's largest-magnitude entry is made positive so repeated runs
/// give the same signs.
pub fn pca_2d(m: &DMatrix<f64>) -> Result<ProjectionResult> {
    let (n, d) = m.shape();
    if n < 3 || d < 2 {
        return Err(Error::Argument(format!(
            "projection needs at least 3 rows and 2 columns, got {n}x{d}"
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Integrity(
            "non-finite value in projection input".into(),
        ));
    }
    let c = centered(m);
    let svd = thin_svd(&c)?;
    if svd.s[0] == 0.0 {
        return Err(Error::Argument(
            "all rows are identical; nothing to project".into(),
        ));
    }
    let component = |k: usize| -> RowDVector<f64> {
        let mut v: RowDVector<f64> = svd.v.column(k).transpose();
        let lead = v.iter().enumerate().fold(
            0,
            |best, (i, x)| if x.abs() > v[best].abs() { i } else { best },
        );
        if v[lead] < 0.0 {
            v.neg_mut();
        }
        v
    };
    let (c1, c2) = (component(0), component(1));
    let points = c
        .row_iter()
        .map(|row| [row.dot(&c1), row.dot(&c2)])
        .collect();
    let var = |k: usize| svd.s[k].powi(2) / (n - 1) as f64;
    Ok(ProjectionResult {
        points,
        components: [c1.iter().copied().collect(), c2.iter().copied().collect()],
        explained_variance: [var(0), var(1)],
    })
}

/// Mean Euclidean distance from each row to the column means.
pub fn centroid_spread(m: &DMatrix<f64>) -> Result<f64> {
    if m.nrows() == 0 {
        return Err(Error::Argument("centroid spread of an empty matrix".into()));
    }
    let c = centered(m);
    Ok(c.row_iter().map(|r| r.norm()).sum::<f64>() / m.nrows() as f64)
}

/// Space in which neighbor distances are measured.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceSpace {
    #[default]
    Full,
    /// The 2-D projection of anchor, positives and negatives together.
    Pca2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeighborReport {
    pub mean_centroid_distance: f64,
    pub mean_negative_to_anchor: f64,
    pub mean_positive_to_anchor: f64,
}

/// Mean distances from the anchor to each group, plus the spread of all of them.
///
/// Labels are treated as sets, so their order and repetition do not matter.
pub fn neighbor_report(
    embeddings: &EmbeddingMatrix,
    anchor: &str,
    positives: &[String],
    negatives: &[String],
    space: DistanceSpace,
) -> Result<NeighborReport> {
    let pos: BTreeSet<&str> = positives.iter().map(String::as_str).collect();
    let neg: BTreeSet<&str> = negatives.iter().map(String::as_str).collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::Argument(
            "positive and negative groups must be nonempty".into(),
        ));
    }
    if pos.contains(anchor) || neg.contains(anchor) {
        return Err(Error::Argument(format!(
            "anchor {anchor:?} also listed in a group"
        )));
    }
    let all: BTreeSet<&str> = pos.iter().chain(&neg).copied().chain([anchor]).collect();
    let labels: Vec<&str> = all.into_iter().collect();
    let rows = labels
        .iter()
        .map(|l| {
            embeddings
                .position(l)
                .ok_or_else(|| Error::Argument(format!("unknown label {l:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let full = DMatrix::from_fn(rows.len(), embeddings.dim(), |i, j| {
        embeddings.matrix()[(rows[i], j)]
    });
    let points = match space {
        DistanceSpace::Full => full,
        DistanceSpace::Pca2 => {
            let p = pca_2d(&full)?;
            DMatrix::from_fn(rows.len(), 2, |i, j| p.points[i][j])
        }
    };
    let idx = |l: &str| labels.binary_search(&l).expect("label collected above");
    let a = points.row(idx(anchor)).into_owned();
    let mean_dist = |group: &BTreeSet<&str>| {
        group
            .iter()
            .map(|l| (points.row(idx(l)) - &a).norm())
            .sum::<f64>()
            / group.len() as f64
    };
    Ok(NeighborReport {
        mean_centroid_distance: centroid_spread(&points)?,
        mean_negative_to_anchor: mean_dist(&neg),
        mean_positive_to_anchor: mean_dist(&pos),
    })
}

/// CSV rows `label,pc1,pc2,group` for a projection of `labels`.
pub fn projection_csv(
    labels: &[String],
    projection: &ProjectionResult,
    anchor: &str,
    positives: &[String],
    negatives: &[String],
) -> String {
    let mut out = String::from("label,pc1,pc2,group\n");
    for (label, p) in labels.iter().zip(&projection.points) {
        let group = if label == anchor {
            "anchor"
        } else if positives.contains(label) {
            "positive"
        } else if negatives.contains(label) {
            "negative"
        } else {
            "other"
        };
        let _ = writeln!(out, "{},{},{},{group}", csv_field(label), p[0], p[1]);
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
