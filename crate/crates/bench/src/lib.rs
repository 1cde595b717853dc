//! Deterministic inputs for the benchmarks.

use scentprompt::benchmark::{RatingTable, TaskSpec, TaskVariant};
use scentprompt::corpus::Lexicon;
use scentprompt::nalgebra::DMatrix;

/// Smooth, full-rank pseudo-random entries without an RNG dependency.
pub fn matrix(rows: usize, cols: usize, salt: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |i, j| {
        ((i * cols + j) as f64 * 0.618 + salt).sin()
    })
}

pub fn ratings(rows: usize, salt: f64) -> Vec<f64> {
    (0..rows)
        .map(|i| 50.0 + 40.0 * (i as f64 * 1.7 + salt).cos())
        .collect()
}

pub fn words(prefix: &str, n: usize) -> Vec<String> {
    (0..n)
        .map(|i| format!("{prefix}{}", char::from(b'a' + (i % 26) as u8)).repeat(1 + i / 26))
        .collect()
}

/// A task of the standard shape with `molecules` rows and fully rated cells.
pub fn task(molecules: usize, sources: usize, targets: usize) -> TaskSpec {
    let ids: Vec<String> = (0..molecules).map(|m| format!("m{m}")).collect();
    let table = |names: Vec<String>, salt: f64| {
        let values = (0..molecules)
            .map(|m| {
                ratings(names.len(), salt + m as f64)
                    .into_iter()
                    .map(Some)
                    .collect()
            })
            .collect();
        RatingTable::new(ids.clone(), names, values).expect("valid ratings")
    };
    TaskSpec::new(
        table(words("src", sources), 0.0),
        table(words("tgt", targets), 0.5),
        TaskVariant::Custom,
    )
    .expect("valid task")
}

pub fn lexicon(n: usize) -> Lexicon {
    Lexicon::from_counts(
        words("note", n)
            .into_iter()
            .enumerate()
            .map(|(i, w)| (w, 1 + i as u64)),
    )
}
