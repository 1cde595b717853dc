use std::cmp::Ordering;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::checkpoint::checkpoint_save;
use crate::benchmark::{evaluate_embedded, ScoreMetric, TaskSpec};
use crate::corpus::Lexicon;
use crate::embedding::{embed_descriptors_with, Embedder, EmbeddingMatrix, Prompt};
use crate::error::{Error, Result};

pub const DEFAULT_BEAM_WIDTH: usize = 75;
pub const DEFAULT_GENERATIONS: u32 = 25;

/// A scored prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Beam {
    pub prompt: Prompt,
    pub score_single: f64,
    pub score_full: f64,
    pub score_avg: f64,
}

impl Beam {
    pub fn new(prompt: Prompt, score_single: f64, score_full: f64) -> Self {
        Self {
            prompt,
            score_single,
            score_full,
            score_avg: (score_single + score_full) / 2.0,
        }
    }

    /// Selection order: higher average first, then shorter prompt, then
    /// lexicographic notation.
    pub fn rank_cmp(&self, other: &Beam) -> Ordering {
        other
            .score_avg
            .total_cmp(&self.score_avg)
            .then_with(|| self.prompt.len().cmp(&other.prompt.len()))
            .then_with(|| self.prompt.to_string().cmp(&other.prompt.to_string()))
    }
}

/// Best-so-far scores after one generation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub generation: u32,
    pub best_score_single: f64,
    pub best_score_full: f64,
    pub best_score_avg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchParams {
    pub k: usize,
    pub max_generations: u32,
    pub master_seed: u64,
}

impl SearchParams {
    pub fn new(k: usize, max_generations: u32, master_seed: u64) -> Result<Self> {
        if k < 1 {
            return Err(Error::Argument("beam width k must be at least 1".into()));
        }
        if max_generations < 1 {
            return Err(Error::Argument("max_generations must be at least 1".into()));
        }
        Ok(Self {
            k,
            max_generations,
            master_seed,
        })
    }
}

/// Everything needed to continue a search exactly where it stopped.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchState {
    /// Number of completed generations.
    pub generation: u32,
    /// Sorted by [`Beam::rank_cmp`]; at most `k`.
    pub beams: Vec<Beam>,
    pub best_so_far: Option<Beam>,
    /// Score of the empty prompt, recorded once before generation 0.
    pub baseline: Option<Beam>,
    pub k: usize,
    pub max_generations: u32,
    pub master_seed: u64,
    pub evaluated_count: u64,
    pub failed_count: u64,
    pub history: Vec<GenerationRecord>,
}

impl SearchState {
    pub fn new(params: SearchParams) -> Self {
        Self {
            generation: 0,
            beams: Vec::new(),
            best_so_far: None,
            baseline: None,
            k: params.k,
            max_generations: params.max_generations,
            master_seed: params.master_seed,
            evaluated_count: 0,
            failed_count: 0,
            history: Vec::new(),
        }
    }

    pub fn is_finished(&self) -> bool {
        self.generation >= self.max_generations
    }
}

/// Scores a prompt on the single-word and full-descriptor tasks.
pub trait PromptScorer: Sync {
    fn score(&self, prompt: &Prompt) -> Result<(f64, f64)>;
}

/// Scores both benchmark tasks, embedding the union of their descriptors in
/// one batch per prompt.
pub struct TaskPairScorer<'a> {
    embedder: &'a dyn Embedder,
    single: &'a TaskSpec,
    full: &'a TaskSpec,
    metric: ScoreMetric,
    union: Vec<String>,
}

impl<'a> TaskPairScorer<'a> {
    pub fn new(
        embedder: &'a dyn Embedder,
        single: &'a TaskSpec,
        full: &'a TaskSpec,
        metric: ScoreMetric,
    ) -> Self {
        let mut union: Vec<String> = Vec::new();
        for task in [single, full] {
            for d in task
                .source()
                .descriptors()
                .iter()
                .chain(task.target().descriptors())
            {
                if !union.contains(d) {
                    union.push(d.clone());
                }
            }
        }
        Self {
            embedder,
            single,
            full,
            metric,
            union,
        }
    }

    fn subset(all: &EmbeddingMatrix, labels: &[String]) -> Result<EmbeddingMatrix> {
        let rows = labels
            .iter()
            .map(|l| all.row(all.position(l).expect("label in union")))
            .collect();
        EmbeddingMatrix::new(labels.to_vec(), rows)
    }

    fn score_task(&self, all: &EmbeddingMatrix, task: &TaskSpec) -> Result<f64> {
        let src = Self::subset(all, task.source().descriptors())?;
        let tgt = Self::subset(all, task.target().descriptors())?;
        Ok(evaluate_embedded(task, &src, &tgt, self.metric)?.score)
    }
}

impl PromptScorer for TaskPairScorer<'_> {
    fn score(&self, prompt: &Prompt) -> Result<(f64, f64)> {
        let all = embed_descriptors_with(self.embedder, prompt, &self.union)?;
        Ok((
            self.score_task(&all, self.single)?,
            self.score_task(&all, self.full)?,
        ))
    }
}

/// Frequency-weighted descriptor sampling.
pub struct DescriptorSampler<'a> {
    descriptors: Vec<&'a str>,
    cumulative: Vec<u64>,
}

impl<'a> DescriptorSampler<'a> {
    pub fn new(lex: &'a Lexicon) -> Result<Self> {
        if lex.is_empty() {
            return Err(Error::Argument(
                "cannot sample from an empty lexicon".into(),
            ));
        }
        let mut total = 0u64;
        let (descriptors, cumulative) = lex
            .iter()
            .map(|(d, e)| {
                total += e.freq;
                (d, total)
            })
            .unzip();
        Ok(Self {
            descriptors,
            cumulative,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &'a str {
        let total = *self.cumulative.last().expect("nonempty");
        let x = rng.random_range(0..total);
        let i = self.cumulative.partition_point(|&c| c <= x);
        self.descriptors[i]
    }
}

/// Draw one descriptor with probability proportional to its frequency.
pub fn sample_descriptor<'a, R: Rng + ?Sized>(lex: &'a Lexicon, rng: &mut R) -> Result<&'a str> {
    Ok(DescriptorSampler::new(lex)?.sample(rng))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Prefix,
    Suffix,
}

/// Add a descriptor's words before or after the existing context.
pub fn extend_prompt(prompt: &Prompt, descriptor: &str, side: Side) -> Result<Prompt> {
    let words: Vec<String> = descriptor.split_whitespace().map(str::to_string).collect();
    if words.is_empty() {
        return Err(Error::Argument(
            "cannot extend a prompt with an empty descriptor".into(),
        ));
    }
    let n = words.len();
    match side {
        Side::Prefix => {
            let mut tokens = words;
            tokens.extend(prompt.tokens().iter().cloned());
            Prompt::new(tokens, prompt.blank_index() + n)
        }
        Side::Suffix => {
            let mut tokens = prompt.tokens().to_vec();
            tokens.extend(words);
            Prompt::new(tokens, prompt.blank_index())
        }
    }
}

/// Generator dedicated to one child; keyed by its position in the search tree
/// so sampling does not depend on evaluation order.
pub fn child_rng(master_seed: u64, generation: u32, parent: usize, child: usize) -> ChaCha8Rng {
    let mut seed = [0u8; 32];
    seed[..8].copy_from_slice(&master_seed.to_le_bytes());
    seed[8..16].copy_from_slice(&u64::from(generation).to_le_bytes());
    seed[16..24].copy_from_slice(&(parent as u64).to_le_bytes());
    seed[24..].copy_from_slice(&(child as u64).to_le_bytes());
    ChaCha8Rng::from_seed(seed)
}

fn propose_child(
    sampler: &DescriptorSampler<'_>,
    parent: &Prompt,
    mut rng: ChaCha8Rng,
) -> Result<Prompt> {
    let descriptor = sampler.sample(&mut rng);
    let side = if rng.random_bool(0.5) {
        Side::Prefix
    } else {
        Side::Suffix
    };
    extend_prompt(parent, descriptor, side)
}

fn score_beam(scorer: &dyn PromptScorer, prompt: Prompt) -> Result<Beam> {
    let (single, full) = scorer.score(&prompt)?;
    if !single.is_finite() || !full.is_finite() {
        return Err(Error::Evaluation(format!("non-finite score for {prompt}")));
    }
    Ok(Beam::new(prompt, single, full))
}

/// Advance the search by one generation.
///
/// Generation 0 expands the empty prompt into `k` one-descriptor candidates
/// (and records the empty prompt's own score as a baseline). Later
/// generations expand each beam into `k` children. Parents compete with
/// their children and the best `k` survive. Candidates that fail to score are
/// dropped and counted.
pub fn run_generation(
    state: &SearchState,
    lex: &Lexicon,
    scorer: &dyn PromptScorer,
) -> Result<SearchState> {
    let sampler = DescriptorSampler::new(lex)?;
    let mut next = state.clone();
    let empty = [Beam::new(Prompt::empty(), 0.0, 0.0)];
    let parents: &[Beam] = if state.generation == 0 {
        match score_beam(scorer, Prompt::empty()) {
            Ok(b) => next.baseline = Some(b),
            Err(e) => log::warn!("empty-prompt baseline could not be scored: {e}"),
        }
        &empty
    } else {
        if state.beams.is_empty() {
            return Err(Error::Argument(format!(
                "generation {} has no beams to expand",
                state.generation
            )));
        }
        &state.beams
    };

    let jobs: Vec<(usize, usize)> = (0..parents.len())
        .flat_map(|p| (0..state.k).map(move |c| (p, c)))
        .collect();
    let children: Vec<Result<Beam>> = jobs
        .par_iter()
        .map(|&(p, c)| {
            let rng = child_rng(state.master_seed, state.generation, p, c);
            let prompt = propose_child(&sampler, &parents[p].prompt, rng)?;
            score_beam(scorer, prompt)
        })
        .collect();

    next.evaluated_count += jobs.len() as u64;
    let mut pool: Vec<Beam> = if state.generation == 0 {
        Vec::new()
    } else {
        state.beams.clone()
    };
    let mut failures = 0u64;
    for child in children {
        match child {
            Ok(b) => pool.push(b),
            Err(e) => {
                failures += 1;
                log::debug!("candidate discarded: {e}");
            }
        }
    }
    if failures > 0 {
        log::warn!(
            "generation {}: {failures} of {} candidates failed to score",
            state.generation,
            jobs.len()
        );
    }
    next.failed_count += failures;
    if failures == jobs.len() as u64 {
        return Err(Error::Evaluation(format!(
            "all {} candidates of generation {} failed to score",
            jobs.len(),
            state.generation
        )));
    }

    pool.sort_by(Beam::rank_cmp);
    pool.truncate(state.k);
    let top = pool[0].clone();
    let best = match &state.best_so_far {
        Some(prev) if prev.rank_cmp(&top) != Ordering::Greater => prev.clone(),
        _ => top,
    };
    next.history.push(GenerationRecord {
        generation: state.generation,
        best_score_single: best.score_single,
        best_score_full: best.score_full,
        best_score_avg: best.score_avg,
    });
    next.best_so_far = Some(best);
    next.beams = pool;
    next.generation += 1;
    Ok(next)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MiningResult {
    pub best: Beam,
    pub baseline: Option<Beam>,
    pub history: Vec<GenerationRecord>,
    pub evaluated_count: u64,
    pub failed_count: u64,
    pub final_state: SearchState,
}

impl MiningResult {
    fn from_state(state: SearchState) -> Self {
        Self {
            best: state
                .best_so_far
                .clone()
                .expect("at least one generation ran"),
            baseline: state.baseline.clone(),
            history: state.history.clone(),
            evaluated_count: state.evaluated_count,
            failed_count: state.failed_count,
            final_state: state,
        }
    }

    /// CSV `generation,best_score_single,best_score_full,best_score_avg`.
    pub fn report_csv(&self) -> String {
        report_csv(&self.history)
    }
}

pub fn report_csv(history: &[GenerationRecord]) -> String {
    use std::fmt::Write as _;
    let mut out = String::from("generation,best_score_single,best_score_full,best_score_avg\n");
    for r in history {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.generation, r.best_score_single, r.best_score_full, r.best_score_avg
        );
    }
    out
}

/// Run the search from scratch, checkpointing after every generation when a
/// path is given.
pub fn mine(
    lex: &Lexicon,
    scorer: &dyn PromptScorer,
    params: SearchParams,
    checkpoint: Option<&Path>,
) -> Result<MiningResult> {
    resume(SearchState::new(params), lex, scorer, checkpoint)
}

/// Continue a (possibly restored) search until `max_generations`.
pub fn resume(
    mut state: SearchState,
    lex: &Lexicon,
    scorer: &dyn PromptScorer,
    checkpoint: Option<&Path>,
) -> Result<MiningResult> {
    while !state.is_finished() {
        state = run_generation(&state, lex, scorer)?;
        if let Some(r) = state.history.last() {
            log::info!(
                "generation {}: best avg {:.4} ({} evaluated)",
                r.generation,
                r.best_score_avg,
                state.evaluated_count
            );
        }
        if let Some(path) = checkpoint {
            checkpoint_save(&state, path)?;
        }
    }
    if state.best_so_far.is_none() {
        return Err(Error::Evaluation(
            "search finished without any generation".into(),
        ));
    }
    Ok(MiningResult::from_state(state))
}
