use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Marker used for the blank slot in textual prompt notation.
pub const BLANK: &str = "[blank]";

/// A word context with one positional slot for the descriptor.
///
/// Tokens are single words; the blank is not stored as a token but as the
/// index it would occupy.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawPrompt", into = "RawPrompt")]
pub struct Prompt {
    tokens: Vec<String>,
    blank_index: usize,
}

#[derive(Serialize, Deserialize)]
struct RawPrompt {
    tokens: Vec<String>,
    blank_index: usize,
}

impl TryFrom<RawPrompt> for Prompt {
    type Error = Error;
    fn try_from(raw: RawPrompt) -> Result<Self> {
        Prompt::new(raw.tokens, raw.blank_index)
    }
}

impl From<Prompt> for RawPrompt {
    fn from(p: Prompt) -> Self {
        RawPrompt {
            tokens: p.tokens,
            blank_index: p.blank_index,
        }
    }
}

impl Prompt {
    pub fn new(tokens: Vec<String>, blank_index: usize) -> Result<Self> {
        if blank_index > tokens.len() {
            return Err(Error::Argument(format!(
                "blank index {blank_index} beyond {} tokens",
                tokens.len()
            )));
        }
        for t in &tokens {
            if t.is_empty() || t.chars().any(char::is_whitespace) {
                return Err(Error::Argument(format!(
                    "prompt token {t:?} must be a single nonempty word"
                )));
            }
            if t == BLANK {
                return Err(Error::Argument(
                    "prompt tokens may not contain the blank marker".into(),
                ));
            }
        }
        Ok(Self {
            tokens,
            blank_index,
        })
    }

    /// The empty context: the descriptor alone.
    pub fn empty() -> Self {
        Self::default()
    }

    /// Parse notation like `"essence [blank] flavored"`. An empty string is the
    /// empty prompt; otherwise exactly one `[blank]` must appear.
    pub fn parse(text: &str) -> Result<Self> {
        let words: Vec<&str> = text.split_whitespace().collect();
        if words.is_empty() {
            return Ok(Self::empty());
        }
        let blanks: Vec<usize> = words
            .iter()
            .enumerate()
            .filter(|(_, w)| **w == BLANK)
            .map(|(i, _)| i)
            .collect();
        match blanks.as_slice() {
            [i] => {
                let tokens = words
                    .iter()
                    .filter(|w| **w != BLANK)
                    .map(|w| w.to_string())
                    .collect();
                Self::new(tokens, *i)
            }
            [] => Err(Error::Argument(format!(
                "prompt {text:?} has no {BLANK} slot"
            ))),
            _ => Err(Error::Argument(format!(
                "prompt {text:?} has more than one {BLANK} slot"
            ))),
        }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn blank_index(&self) -> usize {
        self.blank_index
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Substitute the descriptor into the blank.
    pub fn render(&self, descriptor: &str) -> Result<String> {
        self.render_with_span(descriptor).map(|(text, _)| text)
    }

    /// Rendered text plus the half-open word span occupied by the descriptor.
    pub fn render_with_span(&self, descriptor: &str) -> Result<(String, (usize, usize))> {
        let words: Vec<&str> = descriptor.split_whitespace().collect();
        if words.is_empty() {
            return Err(Error::Argument("descriptor must be nonempty".into()));
        }
        let (before, after) = self.tokens.split_at(self.blank_index);
        let all: Vec<&str> = before
            .iter()
            .map(String::as_str)
            .chain(words.iter().copied())
            .chain(after.iter().map(String::as_str))
            .collect();
        let start = self.blank_index;
        Ok((all.join(" "), (start, start + words.len())))
    }
}

impl fmt::Display for Prompt {
    /// Notation form, e.g. `essence [blank] flavored`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (before, after) = self.tokens.split_at(self.blank_index);
        let all: Vec<&str> = before
            .iter()
            .map(String::as_str)
            .chain(std::iter::once(BLANK))
            .chain(after.iter().map(String::as_str))
            .collect();
        f.write_str(&all.join(" "))
    }
}

/// Convenience wrapper over [`Prompt::render`].
pub fn render_prompt(prompt: &Prompt, descriptor: &str) -> Result<String> {
    prompt.render(descriptor)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(tokens: &[&str], blank: usize) -> Prompt {
        Prompt::new(tokens.iter().map(|s| s.to_string()).collect(), blank).unwrap()
    }

    #[test]
    fn renders_human_prompts() {
        assert_eq!(
            p(&["essence", "flavored"], 1).render("apple").unwrap(),
            "essence apple flavored"
        );
        assert_eq!(Prompt::empty().render("musk").unwrap(), "musk");
        assert_eq!(
            p(&["smells", "like"], 2).render("leather").unwrap(),
            "smells like leather"
        );
    }

    #[test]
    fn empty_descriptor_rejected() {
        assert!(Prompt::empty().render("").is_err());
        assert!(Prompt::empty().render("   ").is_err());
    }

    #[test]
    fn span_covers_multi_word_descriptor() {
        let (text, span) = p(&["essence", "flavored"], 1)
            .render_with_span("butter popcorn")
            .unwrap();
        assert_eq!(text, "essence butter popcorn flavored");
        assert_eq!(span, (1, 3));
    }

    #[test]
    fn parse_and_display_round_trip() {
        let prompt = Prompt::parse("essence [blank] flavored").unwrap();
        assert_eq!(prompt, p(&["essence", "flavored"], 1));
        assert_eq!(prompt.to_string(), "essence [blank] flavored");
        assert_eq!(Prompt::parse("").unwrap(), Prompt::empty());
        assert_eq!(Prompt::parse("[blank]").unwrap(), Prompt::empty());
        assert!(Prompt::parse("smells like").is_err());
        assert!(Prompt::parse("[blank] and [blank]").is_err());
    }

    #[test]
    fn constructor_invariants() {
        assert!(Prompt::new(vec!["a".into()], 2).is_err());
        assert!(Prompt::new(vec![BLANK.into()], 0).is_err());
        assert!(Prompt::new(vec!["two words".into()], 0).is_err());
        let json = r#"{"tokens":["a"],"blank_index":5}"#;
        assert!(serde_json::from_str::<Prompt>(json).is_err());
    }
}
