//! In-process embedding backends.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sha2::{Digest, Sha256};

use super::table::VectorTable;
use super::wordpiece::{WordpieceVocab, UNKNOWN_TOKEN};
use super::{EmbedInput, Embedder, Pooling};
use crate::error::{Error, Result};

/// Weight given to descriptor tokens by the synthetic backend.
pub const SYNTHETIC_DESCRIPTOR_WEIGHT: f64 = 4.0;

/// Generator keyed by `(domain, seed, key)` through SHA-256.
pub(crate) fn keyed_rng(domain: &str, seed: u64, key: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(domain.as_bytes());
    h.update([0u8]);
    h.update(seed.to_le_bytes());
    h.update(key.as_bytes());
    let digest: [u8; 32] = h.finalize().into();
    ChaCha8Rng::from_seed(digest)
}

pub(crate) fn gaussian_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.sample(StandardNormal)).collect()
}

/// Weighted mean of `rows`; `None` when there is no positive weight.
fn weighted_mean<'a>(
    rows: impl IntoIterator<Item = (&'a [f64], f64)>,
    dim: usize,
) -> Option<Vec<f64>> {
    let mut acc = vec![0.0; dim];
    let mut total = 0.0;
    for (row, w) in rows {
        for (a, v) in acc.iter_mut().zip(row) {
            *a += w * v;
        }
        total += w;
    }
    (total > 0.0).then(|| acc.into_iter().map(|a| a / total).collect())
}

fn in_span(input: &EmbedInput, word_index: usize) -> bool {
    input
        .span
        .is_some_and(|(s, e)| (s..e).contains(&word_index))
}

/// Words that take part in pooling under the given flag.
fn pooled_words(input: &EmbedInput, pooling: Pooling) -> Vec<(usize, &str)> {
    let words = input.text.split_whitespace().enumerate();
    match (pooling, input.span) {
        (Pooling::DescriptorOnly, Some(_)) => words.filter(|(i, _)| in_span(input, *i)).collect(),
        _ => words.collect(),
    }
}

/// Averages per-word rows of a `.vec` table; unknown words are skipped.
pub struct VectorTableEmbedder {
    table: VectorTable,
    pooling: Pooling,
}

impl VectorTableEmbedder {
    pub fn new(table: VectorTable, pooling: Pooling) -> Self {
        Self { table, pooling }
    }

    pub fn load(path: &Path, pooling: Pooling) -> Result<Self> {
        Ok(Self::new(VectorTable::load(path)?, pooling))
    }

    fn lookup(&self, word: &str) -> Option<&[f64]> {
        self.table
            .get(word)
            .or_else(|| self.table.get(&word.to_lowercase()))
    }
}

impl Embedder for VectorTableEmbedder {
    fn embed(&self, inputs: &[EmbedInput]) -> Result<Vec<Vec<f64>>> {
        inputs
            .iter()
            .map(|input| {
                let rows = pooled_words(input, self.pooling)
                    .into_iter()
                    .filter_map(|(_, w)| self.lookup(w))
                    .map(|r| (r, 1.0));
                weighted_mean(rows, self.table.dim()).ok_or_else(|| {
                    Error::Argument(format!(
                        "no word of {:?} is in the vector table",
                        input.text
                    ))
                })
            })
            .collect()
    }

    fn dim(&self) -> Option<usize> {
        Some(self.table.dim())
    }
}

/// Mean of piece vectors after wordpiece tokenization of each word.
pub struct WordpieceEmbedder {
    vocab: WordpieceVocab,
    table: VectorTable,
    unknown: Vec<f64>,
    pooling: Pooling,
}

impl WordpieceEmbedder {
    /// Without an explicit vocabulary the table's keys serve as one.
    pub fn new(
        vocab: Option<WordpieceVocab>,
        table: VectorTable,
        pooling: Pooling,
    ) -> Result<Self> {
        let vocab = match vocab {
            Some(v) => v,
            None => WordpieceVocab::new(table.words().map(str::to_string))?,
        };
        let unknown = table
            .get(UNKNOWN_TOKEN)
            .map(<[f64]>::to_vec)
            .unwrap_or_else(|| vec![0.0; table.dim()]);
        Ok(Self {
            vocab,
            table,
            unknown,
            pooling,
        })
    }

    pub fn load(vocab: Option<&Path>, table: &Path, pooling: Pooling) -> Result<Self> {
        let vocab = vocab.map(WordpieceVocab::load).transpose()?;
        Self::new(vocab, VectorTable::load(table)?, pooling)
    }

    fn piece_vector(&self, piece: &str) -> &[f64] {
        if piece == UNKNOWN_TOKEN {
            return &self.unknown;
        }
        self.table.get(piece).unwrap_or(&self.unknown)
    }
}

impl Embedder for WordpieceEmbedder {
    fn embed(&self, inputs: &[EmbedInput]) -> Result<Vec<Vec<f64>>> {
        inputs
            .iter()
            .map(|input| {
                let pieces: Vec<String> = pooled_words(input, self.pooling)
                    .into_iter()
                    .flat_map(|(_, w)| self.vocab.tokenize(&w.to_lowercase()))
                    .collect();
                weighted_mean(
                    pieces.iter().map(|p| (self.piece_vector(p), 1.0)),
                    self.table.dim(),
                )
                .ok_or_else(|| Error::Argument(format!("{:?} produced no wordpieces", input.text)))
            })
            .collect()
    }

    fn dim(&self) -> Option<usize> {
        Some(self.table.dim())
    }
}

/// I.i.d. standard-normal vector per distinct text.
pub struct RandomEmbedder {
    seed: u64,
    dim: usize,
}

impl RandomEmbedder {
    pub fn new(seed: u64, dim: usize) -> Self {
        Self { seed, dim }
    }
}

impl Embedder for RandomEmbedder {
    fn embed(&self, inputs: &[EmbedInput]) -> Result<Vec<Vec<f64>>> {
        Ok(inputs
            .iter()
            .map(|i| gaussian_vector(&mut keyed_rng("random", self.seed, &i.text), self.dim))
            .collect())
    }

    fn dim(&self) -> Option<usize> {
        Some(self.dim)
    }
}

/// Deterministic test backend: hashed token vectors, mean-pooled with the
/// descriptor span up-weighted so both descriptor and context matter.
pub struct SyntheticEmbedder {
    seed: u64,
    dim: usize,
    pooling: Pooling,
}

impl SyntheticEmbedder {
    pub fn new(seed: u64, dim: usize, pooling: Pooling) -> Self {
        Self { seed, dim, pooling }
    }

    pub fn token_vector(&self, token: &str) -> Vec<f64> {
        gaussian_vector(&mut keyed_rng("synthetic", self.seed, token), self.dim)
    }
}

impl Embedder for SyntheticEmbedder {
    fn embed(&self, inputs: &[EmbedInput]) -> Result<Vec<Vec<f64>>> {
        inputs
            .iter()
            .map(|input| {
                let words = pooled_words(input, self.pooling);
                let vectors: Vec<(Vec<f64>, f64)> = words
                    .iter()
                    .map(|&(i, w)| {
                        let weight = if in_span(input, i) {
                            SYNTHETIC_DESCRIPTOR_WEIGHT
                        } else {
                            1.0
                        };
                        (self.token_vector(w), weight)
                    })
                    .collect();
                weighted_mean(vectors.iter().map(|(v, w)| (v.as_slice(), *w)), self.dim)
                    .ok_or_else(|| Error::Argument("cannot embed empty text".into()))
            })
            .collect()
    }

    fn dim(&self) -> Option<usize> {
        Some(self.dim)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plain(texts: &[&str]) -> Vec<EmbedInput> {
        texts.iter().map(|t| EmbedInput::plain(*t)).collect()
    }

    #[test]
    fn vector_table_averages_known_words() {
        let table = VectorTable::parse("2 2\nsweet 1 3\nmusk 3 5\n").unwrap();
        let e = VectorTableEmbedder::new(table, Pooling::AllTokens);
        let rows = e
            .embed(&plain(&["sweet musk", "sweet unknownword"]))
            .unwrap();
        assert_eq!(rows[0], vec![2.0, 4.0]);
        assert_eq!(rows[1], vec![1.0, 3.0]);
        assert!(e.embed(&plain(&["nothing known"])).is_err());
    }

    #[test]
    fn vector_table_descriptor_only_pooling() {
        let table = VectorTable::parse("2 1\nsmells 10\nmusk 2\n").unwrap();
        let e = VectorTableEmbedder::new(table, Pooling::DescriptorOnly);
        let input = EmbedInput {
            text: "smells musk".into(),
            span: Some((1, 2)),
        };
        assert_eq!(e.embed(&[input]).unwrap()[0], vec![2.0]);
    }

    #[test]
    fn wordpiece_averages_pieces() {
        let table = VectorTable::parse("2 2\nflow 1 0\n##ery 0 1\n").unwrap();
        let e = WordpieceEmbedder::new(None, table, Pooling::AllTokens).unwrap();
        assert_eq!(e.embed(&plain(&["flowery"])).unwrap()[0], vec![0.5, 0.5]);
        // [UNK] without a table row contributes a zero vector.
        assert_eq!(
            e.embed(&plain(&["flowery zzz"])).unwrap()[0],
            vec![1.0 / 3.0, 1.0 / 3.0]
        );
    }

    #[test]
    fn random_is_keyed_by_seed_and_text() {
        let a = RandomEmbedder::new(1, 8);
        let b = RandomEmbedder::new(2, 8);
        let x = a.embed(&plain(&["musk", "musk", "amber"])).unwrap();
        assert_eq!(x[0], x[1]);
        assert_ne!(x[0], x[2]);
        assert_ne!(x[0], b.embed(&plain(&["musk"])).unwrap()[0]);
    }

    #[test]
    fn random_entries_are_standard_normal() {
        let e = RandomEmbedder::new(42, 1000);
        let texts: Vec<String> = (0..100).map(|i| format!("t{i}")).collect();
        let inputs: Vec<EmbedInput> = texts
            .iter()
            .map(|t| EmbedInput::plain(t.as_str()))
            .collect();
        let values: Vec<f64> = e.embed(&inputs).unwrap().into_iter().flatten().collect();
        let n = values.len() as f64;
        assert_eq!(values.len(), 100_000);
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        // Standard errors: mean 1/sqrt(n), variance sqrt(2/n).
        assert!(mean.abs() < 3.0 / n.sqrt(), "mean {mean}");
        assert!((var - 1.0).abs() < 3.0 * (2.0 / n).sqrt(), "var {var}");
    }

    #[test]
    fn synthetic_weights_descriptor_span() {
        let e = SyntheticEmbedder::new(3, 4, Pooling::AllTokens);
        let ctx = e.token_vector("essence");
        let desc = e.token_vector("apple");
        let input = EmbedInput {
            text: "essence apple".into(),
            span: Some((1, 2)),
        };
        let got = &e.embed(&[input]).unwrap()[0];
        for k in 0..4 {
            let want = (ctx[k] + 4.0 * desc[k]) / 5.0;
            assert!((got[k] - want).abs() < 1e-12);
        }
    }
}
