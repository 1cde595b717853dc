//! Corpus ingestion and the descriptor lexicon.
//!
//! Raw catalog descriptions are split into descriptor chunks, counted into a
//! [`Lexicon`], optionally merged across near-duplicate spellings, and pruned
//! of rare entries. Frequency and co-occurrence statistics are derived from
//! the same chunking.

mod chunk;
mod lexicon;
mod stats;

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use chunk::{chunk_description, normalize_descriptor};
pub use lexicon::{
    build_lexicon, edit_distance, merge_variants, prune, Lexicon, LexiconEntry, MergeParams,
};
pub use stats::{cooccurrence, frequency_report, CooccurrenceMatrix, ParetoData, ParetoRow};

/// One catalog record: an identifier and its free-text odor description.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusDocument {
    pub id: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub source: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    Csv,
    Jsonl,
}

impl CorpusFormat {
    /// Guess from the file extension; anything but `.jsonl`/`.ndjson` is CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("ndjson") => CorpusFormat::Jsonl,
            _ => CorpusFormat::Csv,
        }
    }
}

/// Read a corpus file. Records keep their file order.
pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Vec<CorpusDocument>> {
    let docs = match format {
        CorpusFormat::Csv => read_csv(path)?,
        CorpusFormat::Jsonl => read_jsonl(path)?,
    };
    let mut seen = HashSet::new();
    for (i, d) in docs.iter().enumerate() {
        if d.id.is_empty() {
            return Err(Error::Schema(format!(
                "{}: record {} has an empty id",
                path.display(),
                i + 1
            )));
        }
        if !seen.insert(d.id.as_str()) {
            return Err(Error::Schema(format!(
                "{}: duplicate document id {:?} at record {}",
                path.display(),
                d.id,
                i + 1
            )));
        }
    }
    Ok(docs)
}

fn read_csv(path: &Path) -> Result<Vec<CorpusDocument>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != ["id", "description", "source"] {
        return Err(Error::Schema(format!(
            "{}: expected header id,description,source",
            path.display()
        )));
    }
    reader
        .deserialize()
        .enumerate()
        .map(|(i, rec)| {
            rec.map_err(|e| Error::Schema(format!("{}: record {}: {e}", path.display(), i + 1)))
        })
        .collect()
}

fn read_jsonl(path: &Path) -> Result<Vec<CorpusDocument>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            serde_json::from_str::<CorpusDocument>(line).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}
