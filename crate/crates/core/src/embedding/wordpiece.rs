use std::collections::HashSet;
use std::path::Path;

use crate::error::{Error, Result};

pub const UNKNOWN_TOKEN: &str = "[UNK]";
const CONTINUATION: &str = "##";
const MAX_CHARS_PER_WORD: usize = 100;

/// Subword vocabulary with the `##` continuation convention.
#[derive(Debug, Clone)]
pub struct WordpieceVocab {
    tokens: HashSet<String>,
}

impl WordpieceVocab {
    pub fn new<I, S>(tokens: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let tokens: HashSet<String> = tokens.into_iter().map(Into::into).collect();
        if tokens.is_empty() {
            return Err(Error::Argument("wordpiece vocabulary is empty".into()));
        }
        Ok(Self { tokens })
    }

    /// One token per line; blank lines are skipped.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::new(
            text.lines()
                .map(str::trim_end)
                .filter(|l| !l.is_empty())
                .map(str::to_string),
        )
    }

    pub fn contains(&self, token: &str) -> bool {
        self.tokens.contains(token)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokenize(&self, word: &str) -> Vec<String> {
        wordpiece_tokenize(word, self)
    }
}

/// Greedy longest-match-first decomposition of a single word.
///
/// Non-initial pieces are looked up with the `##` prefix. If any position has
/// no matching piece the whole word maps to `[UNK]`.
pub fn wordpiece_tokenize(word: &str, vocab: &WordpieceVocab) -> Vec<String> {
    let chars: Vec<char> = word.chars().collect();
    if chars.is_empty() {
        return Vec::new();
    }
    if chars.len() > MAX_CHARS_PER_WORD {
        return vec![UNKNOWN_TOKEN.to_string()];
    }
    let mut pieces = Vec::new();
    let mut start = 0;
    let mut candidate = String::new();
    while start < chars.len() {
        let mut end = chars.len();
        let mut found = None;
        while end > start {
            candidate.clear();
            if start > 0 {
                candidate.push_str(CONTINUATION);
            }
            candidate.extend(&chars[start..end]);
            if vocab.contains(&candidate) {
                found = Some(candidate.clone());
                break;
            }
            end -= 1;
        }
        match found {
            Some(piece) => pieces.push(piece),
            None => return vec![UNKNOWN_TOKEN.to_string()],
        }
        start = end;
    }
    pieces
}
