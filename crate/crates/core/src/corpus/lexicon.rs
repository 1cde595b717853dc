use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{chunk_description, normalize_descriptor, CorpusDocument};
use crate::embedding::{cosine_similarity, embed_named, Embedder};
use crate::error::{Error, Result};

/// A canonical descriptor's occurrence count and the surface forms merged into it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexiconEntry {
    pub freq: u64,
    pub variants: BTreeSet<String>,
}

/// Canonical descriptors with frequencies and merged variants.
///
/// Serialized as a JSON object keyed by descriptor, keys sorted.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Lexicon {
    entries: BTreeMap<String, LexiconEntry>,
}

impl Lexicon {
    pub fn new() -> Self {
        Self::default()
    }

    /// Build a lexicon from `(descriptor, frequency)` pairs, each its own variant.
    /// Descriptors are normalized and repeated keys accumulate.
    pub fn from_counts<I, S>(counts: I) -> Self
    where
        I: IntoIterator<Item = (S, u64)>,
        S: AsRef<str>,
    {
        let mut lex = Self::new();
        for (d, f) in counts {
            lex.add(&normalize_descriptor(d.as_ref()), f);
        }
        lex
    }

    fn add(&mut self, descriptor: &str, freq: u64) {
        if descriptor.is_empty() || freq == 0 {
            return;
        }
        self.entries
            .entry(descriptor.to_string())
            .or_insert_with(|| LexiconEntry {
                freq: 0,
                variants: BTreeSet::from([descriptor.to_string()]),
            })
            .freq += freq;
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, descriptor: &str) -> Option<&LexiconEntry> {
        self.entries.get(descriptor)
    }

    pub fn freq(&self, descriptor: &str) -> Option<u64> {
        self.entries.get(descriptor).map(|e| e.freq)
    }

    /// Frequency of the entry whose variant set contains `surface`.
    pub fn freq_of_variant(&self, surface: &str) -> Option<u64> {
        self.freq(surface).or_else(|| {
            self.entries
                .values()
                .find(|e| e.variants.contains(surface))
                .map(|e| e.freq)
        })
    }

    /// Entries in ascending key order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &LexiconEntry)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn total_frequency(&self) -> u64 {
        self.entries.values().map(|e| e.freq).sum()
    }

    /// Check the structural invariants: positive frequencies, canonical in its
    /// own variant set, pairwise-disjoint variants, normalized strings.
    pub fn validate(&self) -> Result<()> {
        let mut seen: HashMap<&str, &str> = HashMap::new();
        for (key, entry) in &self.entries {
            if entry.freq == 0 {
                return Err(Error::Schema(format!(
                    "descriptor {key:?} has zero frequency"
                )));
            }
            if normalize_descriptor(key) != *key {
                return Err(Error::Schema(format!(
                    "descriptor {key:?} is not normalized"
                )));
            }
            if !entry.variants.contains(key) {
                return Err(Error::Schema(format!(
                    "descriptor {key:?} is missing from its own variant set"
                )));
            }
            for v in &entry.variants {
                if normalize_descriptor(v) != *v {
                    return Err(Error::Schema(format!("variant {v:?} is not normalized")));
                }
                if let Some(other) = seen.insert(v, key) {
                    return Err(Error::Schema(format!(
                        "variant {v:?} belongs to both {other:?} and {key:?}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let lex: Lexicon = serde_json::from_str(&text)
            .map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
        lex.validate()?;
        Ok(lex)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("lexicon serializes");
        s.push('\n');
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }
}

/// Count every chunk occurrence across the documents.
pub fn build_lexicon(docs: &[CorpusDocument]) -> Lexicon {
    let mut lex = Lexicon::new();
    for doc in docs {
        for chunk in chunk_description(&doc.description) {
            lex.add(&chunk, 1);
        }
    }
    lex
}

/// Unit-cost Levenshtein distance over Unicode scalar values.
pub fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let (short, long) = if a.len() <= b.len() {
        (&a, &b)
    } else {
        (&b, &a)
    };
    let mut row: Vec<usize> = (0..=short.len()).collect();
    for (j, cl) in long.iter().enumerate() {
        let mut diag = row[0];
        row[0] = j + 1;
        for (i, cs) in short.iter().enumerate() {
            let above = row[i + 1];
            let cost = usize::from(cs != cl);
            row[i + 1] = (diag + cost).min(above + 1).min(row[i] + 1);
            diag = above;
        }
    }
    row[short.len()]
}

/// Gates for [`merge_variants`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MergeParams {
    pub max_edit: usize,
    pub min_cosine: f64,
}

impl Default for MergeParams {
    fn default() -> Self {
        Self {
            max_edit: 2,
            min_cosine: 0.7,
        }
    }
}

const EMBED_CHUNK: usize = 128;

/// Merge descriptor pairs that are close both in spelling and in embedding
/// space, iterating to a fixed point.
///
/// Each pass collects all qualifying pairs, orders them by descending combined
/// frequency then lexicographically, and merges greedily, skipping pairs whose
/// members were already merged in the same pass. The higher-frequency member
/// becomes canonical (ties go to the lexicographically smaller string).
pub fn merge_variants(
    lex: &Lexicon,
    embedder: &dyn Embedder,
    params: MergeParams,
) -> Result<Lexicon> {
    if !(-1.0..=1.0).contains(&params.min_cosine) {
        return Err(Error::Argument(format!(
            "min_cosine must lie in [-1, 1], got {}",
            params.min_cosine
        )));
    }
    let mut entries = lex.entries.clone();
    let mut vectors: HashMap<String, Vec<f64>> = HashMap::new();

    loop {
        let keys: Vec<&String> = entries.keys().collect();
        let close: Vec<(usize, usize)> = (0..keys.len())
            .into_par_iter()
            .flat_map_iter(|i| {
                let keys = &keys;
                let li = keys[i].chars().count();
                (i + 1..keys.len()).filter_map(move |j| {
                    let lj = keys[j].chars().count();
                    if li.abs_diff(lj) > params.max_edit {
                        return None;
                    }
                    (edit_distance(keys[i], keys[j]) <= params.max_edit).then_some((i, j))
                })
            })
            .collect();
        if close.is_empty() {
            break;
        }

        let mut missing: Vec<&str> = close
            .iter()
            .flat_map(|&(i, j)| [keys[i].as_str(), keys[j].as_str()])
            .filter(|k| !vectors.contains_key(*k))
            .collect();
        missing.sort_unstable();
        missing.dedup();
        for batch in missing.chunks(EMBED_CHUNK) {
            let rows = embed_named(embedder, batch)?;
            for (name, row) in batch.iter().zip(rows) {
                vectors.insert(name.to_string(), row);
            }
        }

        let mut pairs: Vec<(u64, &str, &str)> = close
            .iter()
            .filter(|&&(i, j)| {
                // A zero vector has no direction; such pairs never qualify.
                cosine_similarity(&vectors[keys[i].as_str()], &vectors[keys[j].as_str()])
                    .map(|c| c >= params.min_cosine)
                    .unwrap_or(false)
            })
            .map(|&(i, j)| {
                let combined = entries[keys[i]].freq + entries[keys[j]].freq;
                (combined, keys[i].as_str(), keys[j].as_str())
            })
            .collect();
        if pairs.is_empty() {
            break;
        }
        pairs.sort_by(|x, y| y.0.cmp(&x.0).then_with(|| (x.1, x.2).cmp(&(y.1, y.2))));

        let mut touched: BTreeSet<String> = BTreeSet::new();
        let mut merges: Vec<(String, String)> = Vec::new();
        for (_, a, b) in pairs {
            if touched.contains(a) || touched.contains(b) {
                continue;
            }
            touched.insert(a.to_string());
            touched.insert(b.to_string());
            let (fa, fb) = (entries[a].freq, entries[b].freq);
            // `a < b` lexicographically, so ties keep `a`.
            let (keep, absorb) = if fb > fa { (b, a) } else { (a, b) };
            merges.push((keep.to_string(), absorb.to_string()));
        }
        for (keep, absorb) in merges {
            let gone = entries.remove(&absorb).expect("merge member present");
            let target = entries.get_mut(&keep).expect("merge member present");
            target.freq += gone.freq;
            target.variants.extend(gone.variants);
        }
    }
    Ok(Lexicon { entries })
}

/// Drop entries below `min_freq`; returns the pruned lexicon and the share of
/// total frequency mass that was removed.
pub fn prune(lex: &Lexicon, min_freq: u64) -> Result<(Lexicon, f64)> {
    if min_freq < 1 {
        return Err(Error::Argument("min_freq must be at least 1".into()));
    }
    let total = lex.total_frequency();
    let mut kept = BTreeMap::new();
    let mut removed = 0u64;
    for (k, e) in &lex.entries {
        if e.freq < min_freq {
            removed += e.freq;
        } else {
            kept.insert(k.clone(), e.clone());
        }
    }
    let fraction = if total == 0 {
        0.0
    } else {
        removed as f64 / total as f64
    };
    Ok((Lexicon { entries: kept }, fraction))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::EmbedInput;
    use proptest::prelude::*;

    /// Looks vectors up by exact text; unknown text is an error.
    struct FixedVectors(HashMap<String, Vec<f64>>);

    impl Embedder for FixedVectors {
        fn embed(&self, inputs: &[EmbedInput]) -> Result<Vec<Vec<f64>>> {
            inputs
                .iter()
                .map(|i| {
                    self.0
                        .get(&i.text)
                        .cloned()
                        .ok_or_else(|| Error::Argument(format!("no vector for {}", i.text)))
                })
                .collect()
        }
    }

    fn fixed(pairs: &[(&str, &[f64])]) -> FixedVectors {
        FixedVectors(
            pairs
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_vec()))
                .collect(),
        )
    }

    fn doc(id: &str, text: &str) -> CorpusDocument {
        CorpusDocument {
            id: id.into(),
            description: text.into(),
            source: "fixture".into(),
        }
    }

    // Textbook O(nm) table, kept separate from the rolling-row implementation.
    fn levenshtein_table(a: &str, b: &str) -> usize {
        let a: Vec<char> = a.chars().collect();
        let b: Vec<char> = b.chars().collect();
        let mut t = vec![vec![0usize; b.len() + 1]; a.len() + 1];
        for (i, row) in t.iter_mut().enumerate() {
            row[0] = i;
        }
        for (j, cell) in t[0].iter_mut().enumerate() {
            *cell = j;
        }
        for i in 1..=a.len() {
            for j in 1..=b.len() {
                let sub = t[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
                t[i][j] = sub.min(t[i - 1][j] + 1).min(t[i][j - 1] + 1);
            }
        }
        t[a.len()][b.len()]
    }

    #[test]
    fn counts_chunk_occurrences() {
        let lex = build_lexicon(&[doc("1", "a, b, a")]);
        assert_eq!(lex.freq("a"), Some(2));
        assert_eq!(lex.freq("b"), Some(1));
        assert!(build_lexicon(&[]).is_empty());
    }

    #[test]
    fn three_doc_fixture() {
        let docs = [
            doc("1", "musk, amber"),
            doc("2", "Musk and vanilla"),
            doc("3", "green melon"),
        ];
        let lex = build_lexicon(&docs);
        assert_eq!(lex.len(), 4);
        assert_eq!(lex.total_frequency(), 5);
        assert_eq!(lex.freq("musk"), Some(2));
        lex.validate().unwrap();
    }

    #[test]
    fn edit_distance_examples() {
        assert_eq!(edit_distance("chocolatey", "chocolate"), 1);
        assert_eq!(edit_distance("musk", "musk"), 0);
        assert_eq!(edit_distance("kitten", "sitting"), 3);
        assert_eq!(edit_distance("", "abc"), 3);
    }

    #[test]
    fn chocolatey_merges_into_chocolate() {
        let lex = Lexicon::from_counts([("chocolate", 10), ("chocolatey", 3)]);
        let emb = fixed(&[("chocolate", &[1.0, 0.1]), ("chocolatey", &[0.9, 0.2])]);
        let merged = merge_variants(&lex, &emb, MergeParams::default()).unwrap();
        assert_eq!(merged.len(), 1);
        let e = merged.get("chocolate").unwrap();
        assert_eq!(e.freq, 13);
        assert_eq!(
            e.variants,
            BTreeSet::from(["chocolate".to_string(), "chocolatey".to_string()])
        );
        merged.validate().unwrap();
    }

    #[test]
    fn zero_edit_budget_changes_nothing() {
        let lex = Lexicon::from_counts([("chocolate", 10), ("chocolatey", 3)]);
        let emb = fixed(&[("chocolate", &[1.0]), ("chocolatey", &[1.0])]);
        let params = MergeParams {
            max_edit: 0,
            min_cosine: 0.7,
        };
        assert_eq!(merge_variants(&lex, &emb, params).unwrap(), lex);
    }

    #[test]
    fn cosine_gate_blocks_merge() {
        let lex = Lexicon::from_counts([("aa", 2), ("ab", 2), ("bb", 2)]);
        let emb = fixed(&[
            ("aa", &[1.0, 0.0, 0.0]),
            ("ab", &[0.0, 1.0, 0.0]),
            ("bb", &[0.0, 0.0, 1.0]),
        ]);
        assert_eq!(
            merge_variants(&lex, &emb, MergeParams::default()).unwrap(),
            lex
        );
    }

    #[test]
    fn equal_frequency_tie_keeps_smaller_string() {
        let lex = Lexicon::from_counts([("woody", 4), ("woodys", 4)]);
        let emb = fixed(&[("woody", &[1.0]), ("woodys", &[1.0])]);
        let merged = merge_variants(&lex, &emb, MergeParams::default()).unwrap();
        assert_eq!(merged.freq("woody"), Some(8));
    }

    #[test]
    fn chained_merges_reach_fixed_point() {
        // abcd-abce-abcf are all within distance 1; one canonical survives.
        let lex = Lexicon::from_counts([("abcd", 5), ("abce", 3), ("abcf", 1)]);
        let emb = fixed(&[("abcd", &[1.0]), ("abce", &[1.0]), ("abcf", &[1.0])]);
        let params = MergeParams {
            max_edit: 1,
            min_cosine: 0.5,
        };
        let merged = merge_variants(&lex, &emb, params).unwrap();
        assert_eq!(merged.len(), 1);
        assert_eq!(merged.freq("abcd"), Some(9));
        assert_eq!(merged.get("abcd").unwrap().variants.len(), 3);
    }

    #[test]
    fn embedder_failure_names_descriptor() {
        let lex = Lexicon::from_counts([("chocolate", 10), ("chocolatey", 3)]);
        let emb = fixed(&[("chocolate", &[1.0])]);
        let err = merge_variants(&lex, &emb, MergeParams::default()).unwrap_err();
        assert!(err.to_string().contains("chocolatey"), "{err}");
    }

    #[test]
    fn prune_examples() {
        let lex = Lexicon::from_counts([("a", 5), ("b", 1), ("c", 1)]);
        let (kept, frac) = prune(&lex, 2).unwrap();
        assert_eq!(kept, Lexicon::from_counts([("a", 5)]));
        assert_eq!(frac, 2.0 / 7.0);
        let (same, zero) = prune(&lex, 1).unwrap();
        assert_eq!(same, lex);
        assert_eq!(zero, 0.0);
        let (empty, z) = prune(&Lexicon::new(), 3).unwrap();
        assert!(empty.is_empty());
        assert_eq!(z, 0.0);
        assert!(prune(&lex, 0).is_err());
    }

    #[test]
    fn json_keys_sorted_and_round_trip() {
        let lex = Lexicon::from_counts([("vanilla", 3), ("bergamot", 9), ("musk", 11)]);
        let json = lex.to_json();
        let b = json.find("bergamot").unwrap();
        let m = json.find("musk").unwrap();
        let v = json.find("vanilla").unwrap();
        assert!(b < m && m < v);
        assert!(json.contains("\"freq\": 9"));
        let back: Lexicon = serde_json::from_str(&json).unwrap();
        assert_eq!(back, lex);
    }

    #[test]
    fn validate_rejects_overlapping_variants() {
        let json = r#"{"a": {"freq": 1, "variants": ["a", "b"]},
                       "b": {"freq": 1, "variants": ["b"]}}"#;
        let lex: Lexicon = serde_json::from_str(json).unwrap();
        assert!(lex.validate().is_err());
    }

    proptest! {
        #[test]
        fn edit_distance_matches_table(a in "[abc]{0,8}", b in "[abc]{0,8}") {
            let d = edit_distance(&a, &b);
            prop_assert_eq!(d, levenshtein_table(&a, &b));
            prop_assert_eq!(d, edit_distance(&b, &a));
            prop_assert_eq!(d == 0, a == b);
        }

        #[test]
        fn merge_preserves_mass_and_is_deterministic(
            counts in proptest::collection::btree_map("[ab]{1,4}", 1u64..20, 1..12),
            seed in 0u64..4,
        ) {
            let lex = Lexicon::from_counts(counts.iter().map(|(k, v)| (k.as_str(), *v)));
            // Two clusters by first letter so some pairs pass the cosine gate.
            let emb = FixedVectors(counts.keys().map(|k| {
                let v = if k.starts_with('a') { vec![1.0, 0.1 * seed as f64] } else { vec![0.0, 1.0] };
                (k.clone(), v)
            }).collect());
            let params = MergeParams { max_edit: 1, min_cosine: 0.9 };
            let one = merge_variants(&lex, &emb, params).unwrap();
            let two = merge_variants(&lex, &emb, params).unwrap();
            prop_assert_eq!(one.total_frequency(), lex.total_frequency());
            prop_assert_eq!(&one, &two);
            one.validate().unwrap();
        }

        #[test]
        fn prune_fraction_in_unit_interval(
            counts in proptest::collection::btree_map("[a-e]{1,3}", 1u64..10, 0..10),
            min in 1u64..6,
        ) {
            let lex = Lexicon::from_counts(counts.iter().map(|(k, v)| (k.as_str(), *v)));
            let (_, frac) = prune(&lex, min).unwrap();
            prop_assert!((0.0..=1.0).contains(&frac));
        }
    }
}
