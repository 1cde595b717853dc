use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::Serialize;

use super::{chunk_description, CorpusDocument, Lexicon};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParetoRow {
    pub freq: u64,
    /// Sum of counts of all descriptors occurring exactly `freq` times.
    pub mass: u64,
    pub cumulative: f64,
}

/// Occurrence mass by descriptor frequency, ascending, with cumulative share.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ParetoData {
    pub rows: Vec<ParetoRow>,
}

impl ParetoData {
    /// CSV with columns `freq,mass,cumulative`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("freq,mass,cumulative\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{}", r.freq, r.mass, r.cumulative);
        }
        out
    }
}

pub fn frequency_report(lex: &Lexicon) -> ParetoData {
    let mut by_freq: BTreeMap<u64, u64> = BTreeMap::new();
    for (_, e) in lex.iter() {
        *by_freq.entry(e.freq).or_default() += e.freq;
    }
    let total: u64 = by_freq.values().sum();
    let mut running = 0u64;
    let rows = by_freq
        .into_iter()
        .map(|(freq, mass)| {
            running += mass;
            ParetoRow {
                freq,
                mass,
                // Integer running sum keeps the final row at exactly 1.0.
                cumulative: running as f64 / total as f64,
            }
        })
        .collect();
    ParetoData { rows }
}

/// Jaccard overlap of document sets between two descriptor lists.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CooccurrenceMatrix {
    pub sources: Vec<String>,
    pub targets: Vec<String>,
    /// Row-major, `sources.len() x targets.len()`.
    pub values: Vec<Vec<f64>>,
}

impl CooccurrenceMatrix {
    pub fn get(&self, source: &str, target: &str) -> Option<f64> {
        let i = self.sources.iter().position(|s| s == source)?;
        let j = self.targets.iter().position(|t| t == target)?;
        Some(self.values[i][j])
    }

    /// Matrix CSV: a header row of targets and a header column of sources.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec![String::new()];
        header.extend(self.targets.iter().cloned());
        w.write_record(&header).expect("in-memory write");
        for (s, row) in self.sources.iter().zip(&self.values) {
            let mut rec = vec![s.clone()];
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
    }
}

pub fn cooccurrence(
    docs: &[CorpusDocument],
    sources: &[String],
    targets: &[String],
) -> Result<CooccurrenceMatrix> {
    if sources.is_empty() || targets.is_empty() {
        return Err(Error::Argument(
            "co-occurrence needs nonempty source and target lists".into(),
        ));
    }
    let chunk_sets: Vec<BTreeSet<String>> = docs
        .iter()
        .map(|d| chunk_description(&d.description).into_iter().collect())
        .collect();
    let doc_set = |x: &str| -> BTreeSet<usize> {
        chunk_sets
            .iter()
            .enumerate()
            .filter(|(_, s)| s.contains(x))
            .map(|(i, _)| i)
            .collect()
    };
    let target_sets: Vec<BTreeSet<usize>> = targets.iter().map(|t| doc_set(t)).collect();
    let values = sources
        .iter()
        .map(|s| {
            let ds = doc_set(s);
            target_sets
                .iter()
                .map(|dt| {
                    let union = ds.union(dt).count();
                    if union == 0 {
                        0.0
                    } else {
                        ds.intersection(dt).count() as f64 / union as f64
                    }
                })
                .collect()
        })
        .collect();
    Ok(CooccurrenceMatrix {
        sources: sources.to_vec(),
        targets: targets.to_vec(),
        values,
    })
}
