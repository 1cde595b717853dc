//! Frequency-weighted k-beam search over prompts.
//!
//! Starting from the empty context, every beam is extended by one descriptor
//! drawn from the lexicon in proportion to its frequency, placed before or
//! after the context at random. Candidates are scored on the single-word and
//! full-descriptor tasks and the `k` best by average score survive, parents
//! included. Each child draws from its own generator keyed by
//! `(master_seed, generation, parent, child)`, so a run is a pure function of
//! its inputs and can be resumed from a checkpoint.

mod checkpoint;
mod search;

use serde::Serialize;

use crate::benchmark::{layer_sweep, TaskSpec};
use crate::embedding::{EmbedderConfig, Prompt};
use crate::error::Result;

pub use checkpoint::{
    checkpoint_from_str, checkpoint_load, checkpoint_save, checkpoint_to_string, CHECKPOINT_VERSION,
};
pub use search::{
    child_rng, extend_prompt, mine, report_csv, resume, run_generation, sample_descriptor, Beam,
    DescriptorSampler, GenerationRecord, MiningResult, PromptScorer, SearchParams, SearchState,
    Side, TaskPairScorer, DEFAULT_BEAM_WIDTH, DEFAULT_GENERATIONS,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerResult {
    pub prompt: String,
    pub layer: u32,
    pub score_single: f64,
    pub score_full: f64,
    pub score_avg: f64,
}

/// Re-score finished beams at several layers of a remote backend.
pub fn sweep_beams(
    cfg: &EmbedderConfig,
    prompts: &[Prompt],
    single: &TaskSpec,
    full: &TaskSpec,
    layers: &[u32],
) -> Result<Vec<LayerResult>> {
    let mut out = Vec::new();
    for prompt in prompts {
        let s = layer_sweep(cfg, prompt, single, layers)?;
        let f = layer_sweep(cfg, prompt, full, layers)?;
        for ((layer, ss), (_, fs)) in s.into_iter().zip(f) {
            out.push(LayerResult {
                prompt: prompt.to_string(),
                layer,
                score_single: ss.score,
                score_full: fs.score,
                score_avg: (ss.score + fs.score) / 2.0,
            });
        }
    }
    Ok(out)
}
