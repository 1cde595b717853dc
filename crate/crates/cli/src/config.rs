//! Run configuration: one JSON file, every field optional, flags win.
//!
//! Relative paths are taken relative to the working directory.

use std::path::{Path, PathBuf};

use scentprompt::analysis::{DistanceSpace, LEATHER_ANCHOR, LEATHER_NEGATIVES, LEATHER_POSITIVES};
use scentprompt::benchmark::{ScoreMetric, TaskVariant};
use scentprompt::corpus::MergeParams;
use scentprompt::embedding::{BackendKind, EmbedderConfig};
use scentprompt::mining::{DEFAULT_BEAM_WIDTH, DEFAULT_GENERATIONS};
use scentprompt::{Error, Result};
use serde::{Deserialize, Serialize};

/// Overrides the remote service URL from the config file.
pub const EMBED_URL_ENV: &str = "SCENTPROMPT_EMBED_URL";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub embedder: EmbedderConfig,
    pub corpus: Vec<PathBuf>,
    /// Lexicon read by commands that sample or join descriptors.
    pub lexicon: Option<PathBuf>,
    pub ratings: RatingsConfig,
    pub metric: ScoreMetric,
    /// Context in `[blank]` notation.
    pub prompt: String,
    /// Descriptors for `embed`; empty means every lexicon entry.
    pub descriptors: Vec<String>,
    pub mining: MiningConfig,
    pub merge: MergeParams,
    pub min_freq: u64,
    pub layers: Vec<u32>,
    pub cooccur: CooccurConfig,
    pub analysis: AnalysisConfig,
    pub improvement: ImprovementConfig,
    pub output_dir: PathBuf,
}

/// Two per-descriptor score maps to compare.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImprovementConfig {
    pub baseline: Option<PathBuf>,
    pub improved: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RatingsConfig {
    pub source: Option<PathBuf>,
    pub target_single: Option<PathBuf>,
    pub target_full: Option<PathBuf>,
    /// `standard` enforces the 19 / 131 / 146 descriptor counts.
    pub sizes: TaskSizes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskSizes {
    #[default]
    Standard,
    Custom,
}

impl TaskSizes {
    pub fn variants(self) -> (TaskVariant, TaskVariant) {
        match self {
            TaskSizes::Standard => (TaskVariant::SingleWord, TaskVariant::FullDescriptor),
            TaskSizes::Custom => (TaskVariant::Custom, TaskVariant::Custom),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MiningConfig {
    pub k: usize,
    pub max_generations: u32,
    pub master_seed: u64,
    /// Continue from this checkpoint instead of starting over.
    pub resume: Option<PathBuf>,
}

impl Default for MiningConfig {
    fn default() -> Self {
        Self {
            k: DEFAULT_BEAM_WIDTH,
            max_generations: DEFAULT_GENERATIONS,
            master_seed: 0,
            resume: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CooccurConfig {
    /// Empty lists fall back to the `top` most frequent lexicon entries.
    pub sources: Vec<String>,
    pub targets: Vec<String>,
    pub top: usize,
}

impl Default for CooccurConfig {
    fn default() -> Self {
        Self {
            sources: Vec::new(),
            targets: Vec::new(),
            top: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub anchor: String,
    pub positives: Vec<String>,
    pub negatives: Vec<String>,
    /// Extra labels included in the projection only.
    pub others: Vec<String>,
    pub space: DistanceSpace,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            anchor: LEATHER_ANCHOR.into(),
            positives: LEATHER_POSITIVES.iter().map(|s| s.to_string()).collect(),
            negatives: LEATHER_NEGATIVES.iter().map(|s| s.to_string()).collect(),
            others: Vec::new(),
            space: DistanceSpace::Full,
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            embedder: EmbedderConfig::new(BackendKind::Random),
            corpus: Vec::new(),
            lexicon: None,
            ratings: RatingsConfig::default(),
            metric: ScoreMetric::default(),
            prompt: "[blank]".into(),
            descriptors: Vec::new(),
            mining: MiningConfig::default(),
            merge: MergeParams::default(),
            min_freq: 2,
            layers: Vec::new(),
            cooccur: CooccurConfig::default(),
            analysis: AnalysisConfig::default(),
            improvement: ImprovementConfig::default(),
            output_dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Schema(format!("config {}: {e}", path.display())))
    }

    /// Embedder as used: the seed falls back to the master seed and the
    /// environment may redirect the remote service.
    pub fn effective_embedder(&self, env_url: Option<String>) -> EmbedderConfig {
        let mut cfg = self.embedder.clone();
        if cfg.seed.is_none()
            && matches!(
                cfg.backend,
                BackendKind::Random | BackendKind::SyntheticTest
            )
        {
            cfg.seed = Some(self.mining.master_seed);
        }
        if cfg.backend == BackendKind::Remote {
            if let Some(url) = env_url.filter(|u| !u.is_empty()) {
                cfg.resource = Some(url);
            }
        }
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        if self.mining.k < 1 {
            return Err(Error::Argument("mining.k must be at least 1".into()));
        }
        if self.mining.max_generations < 1 {
            return Err(Error::Argument(
                "mining.max_generations must be at least 1".into(),
            ));
        }
        if self.min_freq < 1 {
            return Err(Error::Argument("min_freq must be at least 1".into()));
        }
        Ok(())
    }

    /// Canonical JSON used for the manifest echo and hash.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

/// Fail early, naming the field, when a needed input is absent.
pub fn require_path<'a>(field: &str, path: Option<&'a PathBuf>) -> Result<&'a Path> {
    let path = path.ok_or_else(|| Error::Argument(format!("{field} is not configured")))?;
    if !path.exists() {
        return Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "file not found"),
        ));
    }
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.mining.k, 75);
        assert_eq!(cfg.mining.max_generations, 25);
        assert_eq!(cfg.merge.max_edit, 2);
        assert_eq!(cfg.merge.min_cosine, 0.7);
        assert_eq!(cfg.min_freq, 2);
    }

    #[test]
    fn partial_file_and_round_trip() {
        let cfg: RunConfig =
            serde_json::from_str(r#"{"mining": {"k": 3}, "prompt": "essence [blank] flavored"}"#)
                .unwrap();
        assert_eq!(cfg.mining.k, 3);
        assert_eq!(cfg.mining.max_generations, 25);
        let back: RunConfig = serde_json::from_str(&cfg.canonical_json()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_field_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"beam": 3}"#).is_err());
    }

    #[test]
    fn env_url_only_for_remote() {
        let mut cfg = RunConfig::default();
        let e = cfg.effective_embedder(Some("http://x".into()));
        assert_eq!(e.resource, None);
        assert_eq!(e.seed, Some(0));
        cfg.embedder = EmbedderConfig::remote("http://config", 3);
        let e = cfg.effective_embedder(Some("http://env".into()));
        assert_eq!(e.resource.as_deref(), Some("http://env"));
        let e = cfg.effective_embedder(None);
        assert_eq!(e.resource.as_deref(), Some("http://config"));
    }
}
