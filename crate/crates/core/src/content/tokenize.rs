//! Tokenization feeding the syntactic index and the gazetteer scanner.

use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

use super::Token;

/// Split text into normalized terms.
///
/// A token starts at an alphanumeric codepoint and runs through
/// alphanumerics and combining marks; anything else is a boundary. Marks
/// stay token-internal because NFC can decompose a letter into base plus
/// mark (composition exclusions), and tokenizing a term must yield the
/// term itself. Each term is NFC-normalized and simple-lowercased (1:1
/// case mapping). Offsets reference the original text.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut start: Option<usize> = None;
    for (i, c) in text.char_indices() {
        let continues = c.is_alphanumeric() || (start.is_some() && is_combining_mark(c));
        if continues {
            if start.is_none() {
                start = Some(i);
            }
        } else if let Some(s) = start.take() {
            push_token(text, s, i, &mut tokens);
        }
    }
    if let Some(s) = start {
        push_token(text, s, text.len(), &mut tokens);
    }
    tokens
}

fn push_token(text: &str, start: usize, end: usize, out: &mut Vec<Token>) {
    let term = normalize_term(&text[start..end]);
    if !term.is_empty() {
        out.push(Token { term, start, end });
    }
}

/// NFC-normalize and simple-lowercase a term.
///
/// NFC canonical reordering can move a non-alphabetic combining mark in
/// front of an alphabetic one; leading codepoints that could not start a
/// token are trimmed so the result survives re-tokenization unchanged.
pub fn normalize_term(raw: &str) -> String {
    let normalized: String = raw.nfc().map(simple_lowercase).collect();
    let start = normalized
        .char_indices()
        .find(|(_, c)| c.is_alphanumeric())
        .map(|(i, _)| i);
    match start {
        Some(i) => normalized[i..].to_string(),
        None => String::new(),
    }
}

/// 1:1 lowercase mapping. Where the full Unicode mapping would expand to
/// multiple codepoints (U+0130), the first codepoint equals the simple
/// mapping, so expansion never changes token boundaries.
fn simple_lowercase(c: char) -> char {
    c.to_lowercase().next().unwrap_or(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn terms(text: &str) -> Vec<String> {
        tokenize(text).into_iter().map(|t| t.term).collect()
    }

    #[test]
    fn splits_on_non_alphanumeric() {
        assert_eq!(terms("Economic Co-operation"), ["economic", "co", "operation"]);
    }

    #[test]
    fn empty_text_yields_nothing() {
        assert!(tokenize("").is_empty());
    }

    #[test]
    fn duplicates_keep_distinct_offsets() {
        let toks = tokenize("BM25 BM25");
        assert_eq!(toks.len(), 2);
        assert_eq!(toks[0].term, "bm25");
        assert_eq!(toks[1].term, "bm25");
        assert_eq!((toks[0].start, toks[0].end), (0, 4));
        assert_eq!((toks[1].start, toks[1].end), (5, 9));
    }

    #[test]
    fn offsets_reference_original_text() {
        let text = "Straße, Äpfel";
        for t in tokenize(text) {
            assert_eq!(normalize_term(&text[t.start..t.end]), t.term);
        }
    }

    #[test]
    fn dotted_capital_i_stays_single_codepoint() {
        assert_eq!(terms("\u{130}stanbul").len(), 1);
    }

    proptest! {
        #[test]
        fn idempotent_on_own_output(text in "\\PC{0,64}") {
            for t in tokenize(&text) {
                let again = tokenize(&t.term);
                prop_assert_eq!(again.len(), 1);
                prop_assert_eq!(&again[0].term, &t.term);
            }
        }

        #[test]
        fn offsets_are_ordered_and_in_bounds(text in "\\PC{0,64}") {
            let toks = tokenize(&text);
            for w in toks.windows(2) {
                prop_assert!(w[0].start <= w[1].start);
            }
            for t in &toks {
                prop_assert!(t.end <= text.len());
                prop_assert!(t.start < t.end);
            }
        }
    }
}
