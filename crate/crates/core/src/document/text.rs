use std::collections::BTreeSet;

use unicode_general_category::{get_general_category, GeneralCategory};
use unicode_normalization::UnicodeNormalization;

use super::VectorDocument;

fn is_punctuation_or_symbol(c: char) -> bool {
    use GeneralCategory::*;
    matches!(
        get_general_category(c),
        ConnectorPunctuation
            | DashPunctuation
            | OpenPunctuation
            | ClosePunctuation
            | InitialPunctuation
            | FinalPunctuation
            | OtherPunctuation
            | MathSymbol
            | CurrencySymbol
            | ModifierSymbol
            | OtherSymbol
    )
}

/// NFC, drop punctuation and symbol characters, lowercase, collapse
/// whitespace runs to one space and trim.
pub fn normalize_text(s: &str) -> String {
    let stripped: String = s.nfc().filter(|&c| !is_punctuation_or_symbol(c)).collect();
    let lowered = stripped.to_lowercase();
    // Lowercasing can emit decomposed sequences; recompose so the result is
    // a fixed point of this function.
    let recomposed: String = lowered.nfc().collect();
    recomposed.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// The generated text set `G`: every text payload normalized, empties
/// dropped, duplicates collapsed.
pub fn extract_text_set(doc: &VectorDocument) -> BTreeSet<String> {
    doc.elements()
        .iter()
        .filter_map(|e| e.text.as_ref())
        .map(|t| normalize_text(&t.content))
        .filter(|s| !s.is_empty())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::document::{DiagramElement, Rect, TextPayload};

    fn doc_with(texts: &[&str]) -> VectorDocument {
        let els = texts
            .iter()
            .enumerate()
            .map(|(i, t)| {
                DiagramElement::text_box(
                    format!("t{i}"),
                    Rect::new(0.0, 0.0, 10.0, 10.0),
                    TextPayload::new(*t, 8.0),
                )
            })
            .collect();
        VectorDocument::new(100.0, 100.0, els, "").unwrap()
    }

    #[test]
    fn duplicates_collapse_after_normalization() {
        let set = extract_text_set(&doc_with(&["Encoder!", "encoder", "  DECODER "]));
        let expected: BTreeSet<String> = ["encoder", "decoder"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        assert_eq!(set, expected);
    }

    #[test]
    fn empty_document_text_set() {
        let doc = VectorDocument::new(1.0, 1.0, vec![], "").unwrap();
        assert!(extract_text_set(&doc).is_empty());
    }

    #[test]
    fn strips_symbols_and_unicode_punctuation() {
        assert_eq!(
            normalize_text("«Self‑Attention» + MLP ×2"),
            "selfattention mlp 2"
        );
        assert_eq!(normalize_text("Cafe\u{301}"), "café");
        assert_eq!(normalize_text("a\t\n b"), "a b");
    }

    #[test]
    fn text_made_only_of_punctuation_is_dropped() {
        let set = extract_text_set(&doc_with(&["→", "x"]));
        assert_eq!(set.len(), 1);
    }
}
