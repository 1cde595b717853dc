//! Versioned, checksummed JSON snapshots of a [`SearchState`].

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::search::{Beam, GenerationRecord, SearchState};
use crate::embedding::Prompt;
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct BeamRecord {
    tokens: Vec<String>,
    blank_index: usize,
    score_single: f64,
    score_full: f64,
}

impl From<&Beam> for BeamRecord {
    fn from(b: &Beam) -> Self {
        Self {
            tokens: b.prompt.tokens().to_vec(),
            blank_index: b.prompt.blank_index(),
            score_single: b.score_single,
            score_full: b.score_full,
        }
    }
}

impl BeamRecord {
    fn into_beam(self) -> Result<Beam> {
        let prompt = Prompt::new(self.tokens, self.blank_index)
            .map_err(|e| Error::Checkpoint(format!("invalid beam prompt: {e}")))?;
        Ok(Beam::new(prompt, self.score_single, self.score_full))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Payload {
    version: u32,
    generation: u32,
    master_seed: u64,
    k: usize,
    max_generations: u32,
    beams: Vec<BeamRecord>,
    best: Option<BeamRecord>,
    baseline: Option<BeamRecord>,
    evaluated_count: u64,
    failed_count: u64,
    history: Vec<GenerationRecord>,
}

fn checksum(payload: &Payload) -> String {
    let body = serde_json::to_string(payload).expect("payload serializes");
    let digest = Sha256::digest(body.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Serialize a state to checkpoint JSON.
pub fn checkpoint_to_string(state: &SearchState) -> String {
    let payload = Payload {
        version: CHECKPOINT_VERSION,
        generation: state.generation,
        master_seed: state.master_seed,
        k: state.k,
        max_generations: state.max_generations,
        beams: state.beams.iter().map(BeamRecord::from).collect(),
        best: state.best_so_far.as_ref().map(BeamRecord::from),
        baseline: state.baseline.as_ref().map(BeamRecord::from),
        evaluated_count: state.evaluated_count,
        failed_count: state.failed_count,
        history: state.history.clone(),
    };
    let sum = checksum(&payload);
    let mut value = serde_json::to_value(&payload).expect("payload serializes");
    value
        .as_object_mut()
        .expect("payload is an object")
        .insert("checksum".into(), serde_json::Value::String(sum));
    let mut text = serde_json::to_string_pretty(&value).expect("value serializes");
    text.push('\n');
    text
}

pub fn checkpoint_from_str(text: &str) -> Result<SearchState> {
    let mut value: serde_json::Value = serde_json::from_str(text)
        .map_err(|e| Error::Checkpoint(format!("unreadable checkpoint: {e}")))?;
    let obj = value
        .as_object_mut()
        .ok_or_else(|| Error::Checkpoint("checkpoint is not a JSON object".into()))?;
    let stored = match obj.remove("checksum") {
        Some(serde_json::Value::String(s)) => s,
        _ => return Err(Error::Checkpoint("checkpoint has no checksum".into())),
    };
    match obj.get("version").and_then(serde_json::Value::as_u64) {
        Some(v) if v == u64::from(CHECKPOINT_VERSION) => {}
        Some(v) => {
            return Err(Error::Checkpoint(format!(
                "checkpoint version {v}, expected {CHECKPOINT_VERSION}"
            )))
        }
        None => return Err(Error::Checkpoint("checkpoint has no version".into())),
    }
    let payload: Payload = serde_json::from_value(value)
        .map_err(|e| Error::Checkpoint(format!("malformed checkpoint: {e}")))?;
    if checksum(&payload) != stored {
        return Err(Error::Checkpoint("checksum mismatch".into()));
    }
    let beams = payload
        .beams
        .into_iter()
        .map(BeamRecord::into_beam)
        .collect::<Result<Vec<_>>>()?;
    Ok(SearchState {
        generation: payload.generation,
        beams,
        best_so_far: payload.best.map(BeamRecord::into_beam).transpose()?,
        baseline: payload.baseline.map(BeamRecord::into_beam).transpose()?,
        k: payload.k,
        max_generations: payload.max_generations,
        master_seed: payload.master_seed,
        evaluated_count: payload.evaluated_count,
        failed_count: payload.failed_count,
        history: payload.history,
    })
}

/// Write atomically: a temporary sibling file is renamed over the target.
pub fn checkpoint_save(state: &SearchState, path: &Path) -> Result<()> {
    let text = checkpoint_to_string(state);
    let tmp = path.with_extension("tmp");
    let write = std::fs::write(&tmp, &text).and_then(|_| std::fs::rename(&tmp, path));
    write.map_err(|e| Error::CheckpointWrite {
        path: path.to_path_buf(),
        message: e.to_string(),
        state_json: text,
    })
}

pub fn checkpoint_load(path: &Path) -> Result<SearchState> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    checkpoint_from_str(&text)
}
