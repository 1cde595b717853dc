//! Descriptor embeddings, optionally placed in a prompt context.
//!
//! Every backend implements [`Embedder`]. Backends are built from an
//! [`EmbedderConfig`] and are deterministic for a given configuration.

mod backends;
mod prompt;
pub mod remote;
pub mod stub;
mod table;
mod wordpiece;

use std::collections::HashSet;
use std::path::PathBuf;
use std::time::Duration;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use backends::{
    RandomEmbedder, SyntheticEmbedder, VectorTableEmbedder, WordpieceEmbedder,
    SYNTHETIC_DESCRIPTOR_WEIGHT,
};
pub use prompt::{render_prompt, Prompt, BLANK};
pub use remote::RemoteEmbedder;
pub use table::{write_vec_format, VectorTable};
pub use wordpiece::{wordpiece_tokenize, WordpieceVocab, UNKNOWN_TOKEN};

pub const DEFAULT_RANDOM_DIM: usize = 300;
pub const DEFAULT_SYNTHETIC_DIM: usize = 16;
pub const DEFAULT_TIMEOUT_SECS: u64 = 60;

/// A text to embed, with the half-open word span of the descriptor when known.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmbedInput {
    pub text: String,
    pub span: Option<(usize, usize)>,
}

impl EmbedInput {
    pub fn plain(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            span: None,
        }
    }
}

/// Anything that turns a batch of texts into equally sized vectors, one per
/// input and in input order.
pub trait Embedder: Send + Sync {
    fn embed(&self, inputs: &[EmbedInput]) -> Result<Vec<Vec<f64>>>;

    /// Output dimension when known without a call.
    fn dim(&self) -> Option<usize> {
        None
    }
}

impl<E: Embedder + ?Sized> Embedder for Box<E> {
    fn embed(&self, inputs: &[EmbedInput]) -> Result<Vec<Vec<f64>>> {
        (**self).embed(inputs)
    }
    fn dim(&self) -> Option<usize> {
        (**self).dim()
    }
}

impl<E: Embedder + ?Sized> Embedder for &E {
    fn embed(&self, inputs: &[EmbedInput]) -> Result<Vec<Vec<f64>>> {
        (**self).embed(inputs)
    }
    fn dim(&self) -> Option<usize> {
        (**self).dim()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    VectorTable,
    Wordpiece,
    Random,
    SyntheticTest,
    Remote,
}

/// Which tokens of the rendered text are averaged.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    #[default]
    AllTokens,
    DescriptorOnly,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbedderConfig {
    pub backend: BackendKind,
    /// Hidden layer requested from the remote service; ignored elsewhere.
    #[serde(default)]
    pub layer: u32,
    #[serde(default)]
    pub pooling: Pooling,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Vector table path, or the service base URL for `remote`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resource: Option<String>,
    /// Wordpiece vocabulary file; defaults to the table's keys.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vocab: Option<PathBuf>,
    /// Output dimension for the random and synthetic backends.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timeout_secs: Option<u64>,
}

impl EmbedderConfig {
    pub fn new(backend: BackendKind) -> Self {
        Self {
            backend,
            layer: 0,
            pooling: Pooling::default(),
            seed: None,
            resource: None,
            vocab: None,
            dim: None,
            timeout_secs: None,
        }
    }

    pub fn random(seed: u64, dim: usize) -> Self {
        Self {
            seed: Some(seed),
            dim: Some(dim),
            ..Self::new(BackendKind::Random)
        }
    }

    pub fn synthetic(seed: u64, dim: usize) -> Self {
        Self {
            seed: Some(seed),
            dim: Some(dim),
            ..Self::new(BackendKind::SyntheticTest)
        }
    }

    pub fn vector_table(path: impl Into<String>) -> Self {
        Self {
            resource: Some(path.into()),
            ..Self::new(BackendKind::VectorTable)
        }
    }

    pub fn remote(url: impl Into<String>, layer: u32) -> Self {
        Self {
            resource: Some(url.into()),
            layer,
            ..Self::new(BackendKind::Remote)
        }
    }

    /// Layer as recorded in reports: non-remote backends report 0.
    pub fn effective_layer(&self) -> u32 {
        match self.backend {
            BackendKind::Remote => self.layer,
            _ => 0,
        }
    }

    fn require_seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| Error::Argument(format!("{:?} backend requires a seed", self.backend)))
    }

    fn require_resource(&self) -> Result<&str> {
        self.resource.as_deref().ok_or_else(|| {
            Error::Argument(format!("{:?} backend requires a resource", self.backend))
        })
    }

    /// Instantiate the configured backend, loading any files it needs.
    pub fn build(&self) -> Result<Box<dyn Embedder>> {
        Ok(match self.backend {
            BackendKind::VectorTable => Box::new(VectorTableEmbedder::load(
                self.require_resource()?.as_ref(),
                self.pooling,
            )?),
            BackendKind::Wordpiece => Box::new(WordpieceEmbedder::load(
                self.vocab.as_deref(),
                self.require_resource()?.as_ref(),
                self.pooling,
            )?),
            BackendKind::Random => Box::new(RandomEmbedder::new(
                self.require_seed()?,
                self.dim.unwrap_or(DEFAULT_RANDOM_DIM),
            )),
            BackendKind::SyntheticTest => Box::new(SyntheticEmbedder::new(
                self.require_seed()?,
                self.dim.unwrap_or(DEFAULT_SYNTHETIC_DIM),
                self.pooling,
            )),
            BackendKind::Remote => Box::new(RemoteEmbedder::new(
                self.require_resource()?,
                self.layer,
                self.pooling,
                Duration::from_secs(self.timeout_secs.unwrap_or(DEFAULT_TIMEOUT_SECS)),
            )),
        })
    }
}

/// Labeled rows of equal dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    labels: Vec<String>,
    data: DMatrix<f64>,
}

impl EmbeddingMatrix {
    pub fn new(labels: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if labels.len() != rows.len() {
            return Err(Error::Integrity(format!(
                "{} labels for {} rows",
                labels.len(),
                rows.len()
            )));
        }
        let dim = rows.first().map_or(0, Vec::len);
        if dim == 0 {
            return Err(Error::Integrity(
                "embedding matrix needs a positive dimension".into(),
            ));
        }
        for (label, row) in labels.iter().zip(&rows) {
            if row.len() != dim {
                return Err(Error::Integrity(format!(
                    "row {label:?} has dimension {} but the batch has {dim}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Integrity(format!(
                    "row {label:?} has non-finite entries"
                )));
            }
        }
        let data = DMatrix::from_row_iterator(rows.len(), dim, rows.into_iter().flatten());
        Ok(Self { labels, data })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn len(&self) -> usize {
        self.data.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.data.nrows() == 0
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.data.row(i).iter().copied().collect()
    }

    pub fn position(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.row(i)).collect()
    }

    pub fn to_vec_format(&self) -> String {
        write_vec_format(&self.labels, &self.rows())
    }
}

/// Embed raw texts with the configured backend; labels are the texts.
pub fn embed_batch(cfg: &EmbedderConfig, texts: &[String]) -> Result<EmbeddingMatrix> {
    embed_texts_with(cfg.build()?.as_ref(), texts)
}

pub fn embed_texts_with(embedder: &dyn Embedder, texts: &[String]) -> Result<EmbeddingMatrix> {
    if texts.is_empty() {
        return Err(Error::Argument("nothing to embed".into()));
    }
    if let Some(t) = texts.iter().find(|t| t.trim().is_empty()) {
        return Err(Error::Argument(format!("cannot embed blank text {t:?}")));
    }
    let inputs: Vec<EmbedInput> = texts
        .iter()
        .map(|t| EmbedInput::plain(t.as_str()))
        .collect();
    EmbeddingMatrix::new(texts.to_vec(), embedder.embed(&inputs)?)
}

/// Row `i` embeds `prompt` rendered around `descriptors[i]`.
pub fn embed_descriptors(
    cfg: &EmbedderConfig,
    prompt: &Prompt,
    descriptors: &[String],
) -> Result<EmbeddingMatrix> {
    embed_descriptors_with(cfg.build()?.as_ref(), prompt, descriptors)
}

pub fn embed_descriptors_with(
    embedder: &dyn Embedder,
    prompt: &Prompt,
    descriptors: &[String],
) -> Result<EmbeddingMatrix> {
    if descriptors.is_empty() {
        return Err(Error::Argument("no descriptors to embed".into()));
    }
    let mut seen = HashSet::new();
    if let Some(dup) = descriptors.iter().find(|d| !seen.insert(d.as_str())) {
        return Err(Error::Argument(format!("duplicate descriptor {dup:?}")));
    }
    let inputs = descriptors
        .iter()
        .map(|d| {
            let (text, span) = prompt.render_with_span(d)?;
            Ok(EmbedInput {
                text,
                span: Some(span),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    EmbeddingMatrix::new(descriptors.to_vec(), embedder.embed(&inputs)?)
}

/// Embed bare descriptors, naming the first one that fails.
pub(crate) fn embed_named(embedder: &dyn Embedder, names: &[&str]) -> Result<Vec<Vec<f64>>> {
    let inputs: Vec<EmbedInput> = names.iter().map(|n| EmbedInput::plain(*n)).collect();
    match embedder.embed(&inputs) {
        Ok(rows) => Ok(rows),
        Err(batch_err) => {
            for (name, input) in names.iter().zip(&inputs) {
                if let Err(e) = embedder.embed(std::slice::from_ref(input)) {
                    return Err(Error::Embedding {
                        descriptor: name.to_string(),
                        source: Box::new(e),
                    });
                }
            }
            Err(batch_err)
        }
    }
}

/// Cosine of the angle between two vectors of equal length.
pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::Argument(format!(
            "cosine of vectors with lengths {} and {}",
            u.len(),
            v.len()
        )));
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::Argument("cosine similarity of a zero vector".into()));
    }
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strings(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn cosine_examples() {
        assert!((cosine_similarity(&[0.3, -2.0], &[0.3, -2.0]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let c = cosine_similarity(&[1.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!((c - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-9);
        assert!(cosine_similarity(&[0.0, 0.0], &[1.0, 1.0]).is_err());
        assert!(cosine_similarity(&[1.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn empty_prompt_equals_bare_descriptors() {
        let table = VectorTable::parse("2 2\nsweet 1 3\nmusk 3 5\n").unwrap();
        let e = VectorTableEmbedder::new(table, Pooling::AllTokens);
        let descs = strings(&["sweet", "musk"]);
        let prompted = embed_descriptors_with(&e, &Prompt::empty(), &descs).unwrap();
        let bare = embed_texts_with(&e, &descs).unwrap();
        assert_eq!(prompted, bare);
    }

    #[test]
    fn synthetic_prompt_token_changes_every_row() {
        let e = SyntheticEmbedder::new(9, 8, Pooling::AllTokens);
        let descs = strings(&["musk", "amber", "green melon"]);
        let a = embed_descriptors_with(&e, &Prompt::parse("smells like [blank]").unwrap(), &descs)
            .unwrap();
        let b = embed_descriptors_with(&e, &Prompt::parse("smells of [blank]").unwrap(), &descs)
            .unwrap();
        for i in 0..descs.len() {
            assert_ne!(a.row(i), b.row(i));
        }
    }

    #[test]
    fn dream_shaped_matrix() {
        let e = RandomEmbedder::new(0, 300);
        let descs: Vec<String> = (0..19).map(|i| format!("d{i}")).collect();
        let m = embed_descriptors_with(&e, &Prompt::empty(), &descs).unwrap();
        assert_eq!((m.len(), m.dim()), (19, 300));
    }

    #[test]
    fn duplicate_and_empty_inputs_rejected() {
        let e = RandomEmbedder::new(0, 3);
        assert!(embed_descriptors_with(&e, &Prompt::empty(), &strings(&["a", "a"])).is_err());
        assert!(embed_descriptors_with(&e, &Prompt::empty(), &[]).is_err());
        assert!(embed_texts_with(&e, &strings(&["ok", " "])).is_err());
    }

    #[test]
    fn matrix_rejects_ragged_and_non_finite_rows() {
        let err = EmbeddingMatrix::new(strings(&["a", "b"]), vec![vec![1.0, 2.0], vec![1.0]]);
        assert!(matches!(err, Err(Error::Integrity(_))));
        let err = EmbeddingMatrix::new(strings(&["a"]), vec![vec![f64::NAN]]);
        assert!(matches!(err, Err(Error::Integrity(_))));
    }

    #[test]
    fn config_requirements_and_layer_reporting() {
        assert!(EmbedderConfig::new(BackendKind::Random).build().is_err());
        assert!(EmbedderConfig::new(BackendKind::VectorTable)
            .build()
            .is_err());
        let mut cfg = EmbedderConfig::random(1, 4);
        cfg.layer = 11;
        assert_eq!(cfg.effective_layer(), 0);
        assert_eq!(EmbedderConfig::remote("http://x", 11).effective_layer(), 11);
    }

    #[test]
    fn config_json_shape() {
        let cfg: EmbedderConfig = serde_json::from_str(
            r#"{"backend": "synthetic_test", "seed": 5, "pooling": "descriptor_only"}"#,
        )
        .unwrap();
        assert_eq!(cfg.backend, BackendKind::SyntheticTest);
        assert_eq!(cfg.pooling, Pooling::DescriptorOnly);
        assert_eq!(cfg.layer, 0);
    }
}
