//! Fixtures and independent oracles shared by the integration tests.
#![allow(dead_code, clippy::needless_range_loop)]

use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scentprompt::benchmark::{RatingTable, TaskSpec, TaskVariant};
use scentprompt::embedding::{
    embed_descriptors_with, EmbedInput, Embedder, Prompt, SyntheticEmbedder, VectorTable,
};
use scentprompt::Result;

pub fn strings(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_matrix(rng: &mut ChaCha8Rng, n: usize, d: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, d, |_, _| rng.random_range(-1.0..1.0))
}

/// Solve `a x = b` by Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    x
}

/// Centered least squares through the normal equations; needs full column rank.
pub fn normal_equations_predict(x: &DMatrix<f64>, y: &[f64], x_new: &DMatrix<f64>) -> Vec<f64> {
    let (n, d) = x.shape();
    let mx: Vec<f64> = (0..d)
        .map(|j| (0..n).map(|i| x[(i, j)]).sum::<f64>() / n as f64)
        .collect();
    let my = y.iter().sum::<f64>() / n as f64;
    let xc = |i: usize, j: usize| x[(i, j)] - mx[j];
    let ata: Vec<Vec<f64>> = (0..d)
        .map(|p| {
            (0..d)
                .map(|q| (0..n).map(|i| xc(i, p) * xc(i, q)).sum())
                .collect()
        })
        .collect();
    let atb: Vec<f64> = (0..d)
        .map(|p| (0..n).map(|i| xc(i, p) * (y[i] - my)).sum())
        .collect();
    let w = gauss_solve(ata, atb);
    (0..x_new.nrows())
        .map(|i| my + (0..d).map(|j| (x_new[(i, j)] - mx[j]) * w[j]).sum::<f64>())
        .collect()
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues descending with unit eigenvectors.
pub fn jacobi_eigen(sym: &[Vec<f64>]) -> Vec<(f64, Vec<f64>)> {
    let n = sym.len();
    let mut a = sym.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect())
        .collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut pairs: Vec<(f64, Vec<f64>)> = (0..n)
        .map(|k| (a[k][k], v.iter().map(|row| row[k]).collect()))
        .collect();
    pairs.sort_by(|x, y| y.0.total_cmp(&x.0));
    pairs
}

pub const PLANTED_SOURCES: [&str; 6] = ["musky", "sweet", "woody", "fruity", "floral", "green"];
pub const PLANTED_TARGETS: [&str; 9] = [
    "citrus", "smoky", "earthy", "spicy", "minty", "fresh", "waxy", "herbal", "amber",
];

/// Ratings `50 + w_m . e(d)` for per-molecule weights `w_m`.
pub fn linear_ratings(
    molecules: &[String],
    descriptors: &[String],
    emb: &[Vec<f64>],
    weights: &[Vec<f64>],
) -> RatingTable {
    let values = weights
        .iter()
        .map(|w| {
            emb.iter()
                .map(|e| Some(50.0 + e.iter().zip(w).map(|(a, b)| a * b).sum::<f64>()))
                .collect()
        })
        .collect();
    RatingTable::new(molecules.to_vec(), descriptors.to_vec(), values).unwrap()
}

/// Five molecules whose target ratings are exactly linear in a 3-d vector
/// table. Returns the table text and the task.
pub fn planted_table_task(seed: u64) -> (String, TaskSpec) {
    let mut r = rng(seed);
    let molecules: Vec<String> = (1..=5).map(|i| format!("m{i}")).collect();
    let sources = strings(&PLANTED_SOURCES);
    let targets = strings(&PLANTED_TARGETS);
    let dim = 3;
    let mut vec_of =
        |_: &String| -> Vec<f64> { (0..dim).map(|_| r.random_range(-1.0..1.0)).collect() };
    let src_emb: Vec<Vec<f64>> = sources.iter().map(&mut vec_of).collect();
    let tgt_emb: Vec<Vec<f64>> = targets.iter().map(&mut vec_of).collect();
    let weights: Vec<Vec<f64>> = (0..5)
        .map(|_| (0..dim).map(|_| r.random_range(-10.0..10.0)).collect())
        .collect();
    let labels: Vec<String> = sources.iter().chain(&targets).cloned().collect();
    let rows: Vec<Vec<f64>> = src_emb.iter().chain(&tgt_emb).cloned().collect();
    let table = scentprompt::embedding::write_vec_format(&labels, &rows);
    let task = TaskSpec::new(
        linear_ratings(&molecules, &sources, &src_emb, &weights),
        linear_ratings(&molecules, &targets, &tgt_emb, &weights),
        TaskVariant::Custom,
    )
    .unwrap();
    (table, task)
}

pub fn planted_table(seed: u64) -> VectorTable {
    VectorTable::parse(&planted_table_task(seed).0).unwrap()
}

/// Tasks whose ratings are linear in synthetic embeddings under a hidden
/// prompt, so the score depends on the context the search finds.
pub struct MiningFixture {
    pub single: TaskSpec,
    pub full: TaskSpec,
    pub hidden: Prompt,
}

pub const MINING_DIM: usize = 4;

pub fn mining_fixture(embedder: &SyntheticEmbedder, hidden: &str) -> MiningFixture {
    let hidden = Prompt::parse(hidden).unwrap();
    let molecules: Vec<String> = (1..=5).map(|i| format!("m{i}")).collect();
    let sources = strings(&PLANTED_SOURCES);
    let single_targets = strings(&PLANTED_TARGETS);
    let mut full_targets = single_targets.clone();
    full_targets.extend(strings(&["butter popcorn", "wet dog", "green apple"]));
    let mut r = rng(77);
    let weights: Vec<Vec<f64>> = (0..5)
        .map(|_| {
            (0..MINING_DIM)
                .map(|_| r.random_range(-10.0..10.0))
                .collect()
        })
        .collect();
    let emb = |labels: &[String]| {
        embed_descriptors_with(embedder, &hidden, labels)
            .unwrap()
            .rows()
    };
    let src = linear_ratings(&molecules, &sources, &emb(&sources), &weights);
    let task = |targets: &[String], variant| {
        TaskSpec::new(
            src.clone(),
            linear_ratings(&molecules, targets, &emb(targets), &weights),
            variant,
        )
        .unwrap()
    };
    MiningFixture {
        single: task(&single_targets, TaskVariant::Custom),
        full: task(&full_targets, TaskVariant::Custom),
        hidden,
    }
}

/// O(1) per text: a few character statistics. Counts its calls.
#[derive(Default)]
pub struct CountingStub {
    pub calls: AtomicUsize,
}

impl Embedder for CountingStub {
    fn embed(&self, inputs: &[EmbedInput]) -> Result<Vec<Vec<f64>>> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        Ok(inputs
            .iter()
            .map(|i| {
                let b = i.text.as_bytes();
                vec![
                    b.len() as f64,
                    f64::from(b[0]),
                    f64::from(*b.last().unwrap()),
                ]
            })
            .collect())
    }

    fn dim(&self) -> Option<usize> {
        Some(3)
    }
}
