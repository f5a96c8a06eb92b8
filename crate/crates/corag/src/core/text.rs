//! Text normalization and token matching.
//!
//! Answer checking works on normalized tokens rather than raw strings so
//! that case and punctuation differences never affect rewards, and so that
//! short answers cannot match inside unrelated words.

/// Normalizes raw text into a token sequence.
///
/// Lowercases, replaces every non-alphanumeric character with a space, and
/// splits on whitespace. Empty input yields an empty sequence. The result is
/// a fixed point: normalizing a space-joined normalized sequence returns the
/// same sequence.
pub fn normalize_text(raw: &str) -> Vec<String> {
    raw.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

/// True iff `needle` occurs as a contiguous run inside `haystack`.
///
/// An empty needle is a contract violation and panics.
pub fn contains_subsequence<T: PartialEq>(haystack: &[T], needle: &[T]) -> bool {
    assert!(!needle.is_empty(), "contains_subsequence: empty needle");
    if needle.len() > haystack.len() {
        return false;
    }
    haystack.windows(needle.len()).any(|w| w == needle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(items: &[&str]) -> Vec<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn normalizes_case_and_punctuation() {
        assert_eq!(
            normalize_text("The answer is Paris."),
            toks(&["the", "answer", "is", "paris"])
        );
    }

    #[test]
    fn empty_input_yields_empty_sequence() {
        assert_eq!(normalize_text(""), Vec::<String>::new());
    }

    #[test]
    fn strips_initials_and_extra_whitespace() {
        // Derived by applying the rules by hand: periods become spaces,
        // so initials split into single-letter tokens.
        assert_eq!(
            normalize_text("  A.J.  Quinnell "),
            toks(&["a", "j", "quinnell"])
        );
    }

    #[test]
    fn subsequence_single_token() {
        let hay = toks(&["the", "answer", "is", "paris"]);
        assert!(contains_subsequence(&hay, &toks(&["paris"])));
    }

    #[test]
    fn subsequence_identity() {
        let hay = toks(&["paris", "france"]);
        assert!(contains_subsequence(&hay, &hay.clone()));
    }

    #[test]
    fn subsequence_does_not_merge_tokens() {
        // "par is" must not match "paris": matching is token-level.
        let hay = toks(&["par", "is"]);
        assert!(!contains_subsequence(&hay, &toks(&["paris"])));
    }

    #[test]
    fn subsequence_needle_longer_than_haystack() {
        let hay = toks(&["paris"]);
        assert!(!contains_subsequence(&hay, &toks(&["paris", "france"])));
    }

    #[test]
    #[should_panic(expected = "empty needle")]
    fn empty_needle_panics() {
        let hay = toks(&["x"]);
        contains_subsequence(&hay, &Vec::<String>::new());
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(raw in "\\PC*") {
            let once = normalize_text(&raw);
            let twice = normalize_text(&once.join(" "));
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn tokens_are_lowercase_alphanumeric(raw in "\\PC*") {
            for tok in normalize_text(&raw) {
                prop_assert!(!tok.is_empty());
                prop_assert!(tok.chars().all(|c| c.is_alphanumeric()));
                prop_assert_eq!(tok.clone(), tok.to_lowercase());
            }
        }

        #[test]
        fn every_nonempty_sequence_contains_itself(
            hay in proptest::collection::vec("[a-z]{1,6}", 1..12)
        ) {
            prop_assert!(contains_subsequence(&hay, &hay));
        }

        #[test]
        fn subsequence_matches_naive_window_scan(
            hay in proptest::collection::vec("[ab]{1,2}", 0..10),
            needle in proptest::collection::vec("[ab]{1,2}", 1..4)
        ) {
            let naive = (0..hay.len().saturating_sub(needle.len() - 1))
                .any(|i| hay[i..i + needle.len()] == needle[..]);
            prop_assert_eq!(contains_subsequence(&hay, &needle), naive);
        }
    }
}
