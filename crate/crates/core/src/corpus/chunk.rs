//! Rule-based splitting of free-text descriptions into descriptor chunks.

/// Conjunctions that separate chunks when they appear as standalone words.
const SEPARATOR_WORDS: [&str; 3] = ["and", "or", "with"];

fn is_separator_char(c: char) -> bool {
    matches!(c, ',' | ';' | '.')
}

/// Split a description into lowercase descriptor chunks.
///
/// Text is cut at commas, semicolons, periods and at the standalone words
/// `and`, `or`, `with`. Multi-word chunks are kept whole; whitespace inside a
/// chunk is collapsed to single spaces and empty chunks are dropped.
///
/// ```
/// use scentprompt::corpus::chunk_description;
/// assert_eq!(
///     chunk_description("Fresh  Fruity and green melon"),
///     vec!["fresh fruity", "green melon"]
/// );
/// ```
pub fn chunk_description(text: &str) -> Vec<String> {
    let lowered = text.to_lowercase();
    let mut chunks = Vec::new();
    for segment in lowered.split(is_separator_char) {
        let mut current: Vec<&str> = Vec::new();
        for word in segment.split_whitespace() {
            if SEPARATOR_WORDS.contains(&word) {
                flush(&mut current, &mut chunks);
            } else {
                current.push(word);
            }
        }
        flush(&mut current, &mut chunks);
    }
    chunks
}

fn flush(words: &mut Vec<&str>, out: &mut Vec<String>) {
    if !words.is_empty() {
        out.push(words.join(" "));
        words.clear();
    }
}

/// Lowercase and collapse whitespace, the normal form shared by lexicon keys
/// and rating-table headers.
pub fn normalize_descriptor(text: &str) -> String {
    text.to_lowercase()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn comma_list_splits_into_descriptors() {
        assert_eq!(
            chunk_description("musky, sweet, chalky"),
            vec!["musky", "sweet", "chalky"]
        );
    }

    #[test]
    fn empty_text_gives_no_chunks() {
        assert!(chunk_description("").is_empty());
        assert!(chunk_description(" , ; . and ").is_empty());
    }

    #[test]
    fn conjunction_and_whitespace_rules() {
        assert_eq!(
            chunk_description("Fresh  Fruity and green melon"),
            vec!["fresh fruity", "green melon"]
        );
    }

    #[test]
    fn sentence_keeps_multi_word_descriptors() {
        let text = "highly powerful, highly substantive and highly stable ambery note";
        assert_eq!(
            chunk_description(text),
            vec![
                "highly powerful",
                "highly substantive",
                "highly stable ambery note"
            ]
        );
    }

    #[test]
    fn conjunction_inside_word_is_not_a_separator() {
        assert_eq!(
            chunk_description("sandalwood; orris"),
            vec!["sandalwood", "orris"]
        );
        assert_eq!(chunk_description("withered rose"), vec!["withered rose"]);
    }

    #[test]
    fn semicolons_periods_and_or() {
        assert_eq!(
            chunk_description("Green; woody. Citrus or musk with amber"),
            vec!["green", "woody", "citrus", "musk", "amber"]
        );
    }

    proptest! {
        #[test]
        fn chunking_is_idempotent(text in "[a-zA-Z ,;.]{0,60}") {
            for chunk in chunk_description(&text) {
                prop_assert_eq!(chunk_description(&chunk), vec![chunk.clone()]);
            }
        }
    }
}
