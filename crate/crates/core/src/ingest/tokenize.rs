use std::sync::LazyLock;

use regex::Regex;

static HTML_TAG: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"<[^>]*>").expect("valid pattern"));

/// Strips HTML tags, replaces every non-alphabetic character with a space,
/// lowercases and splits on whitespace. Only ASCII letters count as
/// alphabetic, so accented words are split at the accent.
pub fn tokenize_about(text: &str) -> Vec<String> {
    let stripped = HTML_TAG.replace_all(text, " ");
    let cleaned: String = stripped
        .chars()
        .map(|c| if c.is_ascii_alphabetic() { c.to_ascii_lowercase() } else { ' ' })
        .collect();
    cleaned.split_whitespace().map(str::to_owned).collect()
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn worked_example() {
        assert_eq!(tokenize_about("<p>I love R &amp; stats!</p>"), ["i", "love", "r", "amp", "stats"]);
    }

    #[test]
    fn edge_cases() {
        assert!(tokenize_about("").is_empty());
        assert_eq!(tokenize_about("ABC"), ["abc"]);
        assert_eq!(tokenize_about("<a href=\"x\">link</a>text"), ["link", "text"]);
        assert_eq!(tokenize_about("R2-D2 café"), ["r", "d", "caf"]);
    }

    proptest! {
        #[test]
        fn tokens_are_lowercase_letters(text in ".{0,200}") {
            for t in tokenize_about(&text) {
                prop_assert!(!t.is_empty());
                prop_assert!(t.chars().all(|c| c.is_ascii_lowercase()), "{t:?}");
            }
        }
    }
}
