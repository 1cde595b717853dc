//! Zero-shot descriptor-rating benchmark.
//!
//! For each molecule a linear map from descriptor embeddings to ratings is fit
//! on the source descriptors and used to predict the target descriptors; the
//! score correlates those predictions with the actual target ratings.

mod ratings;
mod regression;
mod task;

use serde::Serialize;

use crate::embedding::EmbedderConfig;

pub use ratings::{RatingTable, RATING_MAX, RATING_MIN};
pub use regression::{fit_predict_molecule, pearson};
pub use task::{
    embed_task, evaluate_embedded, evaluate_task, evaluate_task_with, layer_sweep,
    per_descriptor_scores, per_descriptor_scores_with, predict_task, score_predictions,
    DescriptorScores, MoleculeScore, ScoreMetric, TaskManifest, TaskScore, TaskSpec, TaskVariant,
    FULL_DESCRIPTOR_TARGETS, SINGLE_WORD_TARGETS, SOURCE_DESCRIPTORS,
};

/// Score JSON artifact: the score plus the configuration that produced it.
#[derive(Debug, Clone, Serialize)]
pub struct ScoreReport<'a> {
    pub score: f64,
    pub per_molecule: &'a [MoleculeScore],
    pub skipped_count: usize,
    pub metric: ScoreMetric,
    pub variant: TaskVariant,
    pub layer: u32,
    pub prompt: String,
    pub config: &'a EmbedderConfig,
}

impl<'a> ScoreReport<'a> {
    pub fn new(
        score: &'a TaskScore,
        metric: ScoreMetric,
        variant: TaskVariant,
        prompt: &crate::embedding::Prompt,
        config: &'a EmbedderConfig,
    ) -> Self {
        Self {
            score: score.score,
            per_molecule: &score.per_molecule,
            skipped_count: score.skipped_count,
            metric,
            variant,
            layer: config.effective_layer(),
            prompt: prompt.to_string(),
            config,
        }
    }
}
