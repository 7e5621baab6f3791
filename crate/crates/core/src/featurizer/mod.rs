//! Text featurization: hashed n-gram note embeddings, chronological note
//! concatenation, the summary transform, and a loader for externally computed
//! embeddings.

mod hashing;
mod precomputed;
mod summarizer;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cohort::NoteEvent;

pub use hashing::{embed_text, tokenize, EmbeddingSpec, Normalization};
pub use precomputed::{
    load_precomputed_embeddings, save_precomputed_embeddings, EpisodeEmbeddings,
    PrecomputedEmbeddings,
};
pub use summarizer::{
    load_lexicon, summarize_stub, Summarizer, SummarizerConfig, SummarizerMode, DEFAULT_LEXICON,
    NO_FINDINGS_HEADER,
};

/// Token cap applied to the concatenated note document.
pub const DEFAULT_MAX_INPUT_TOKENS: usize = 4096;

#[derive(Debug, Error)]
pub enum FeaturizerError {
    #[error("invalid embedding spec: {0}")]
    Spec(String),
    #[error("{path}: row {row}: expected {expected} values, found {found}")]
    Dimension {
        path: String,
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("{path}: row {row}: duplicate key ({episode_id}, {kind}, {index})")]
    Duplicate {
        path: String,
        row: usize,
        episode_id: String,
        kind: String,
        index: usize,
    },
    #[error("{path}: row {row}: {reason}")]
    Row {
        path: String,
        row: usize,
        reason: String,
    },
    #[error("no precomputed summary for episode `{0}`")]
    MissingSummary(String),
    #[error("summarizer command failed: {0}")]
    Command(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error on {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
}

/// An embedded note with its chart time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoteEmbedding {
    pub vector: Vec<f64>,
    pub chart_time: f64,
}

/// Joins notes in chronological order (ties keep input order), each preceded
/// by a one-token header line `[chart_time=H.HHh]`. Whitespace tokens,
/// headers included, are capped at `max_tokens` by dropping the oldest.
pub fn concat_notes(notes: &[NoteEvent], max_tokens: usize) -> String {
    let mut order: Vec<&NoteEvent> = notes.iter().collect();
    order.sort_by(|a, b| a.chart_time.total_cmp(&b.chart_time));

    // (token, starts_new_line)
    let mut tokens: Vec<(String, bool)> = Vec::new();
    for note in order {
        tokens.push((format!("[chart_time={:.2}h]", note.chart_time), true));
        let mut first = true;
        for tok in note.text.split_whitespace() {
            tokens.push((tok.to_string(), first));
            first = false;
        }
    }
    let skip = tokens.len().saturating_sub(max_tokens);
    let mut out = String::new();
    for (i, (tok, new_line)) in tokens.into_iter().skip(skip).enumerate() {
        if i > 0 {
            out.push(if new_line { '\n' } else { ' ' });
        }
        out.push_str(&tok);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn note(t: f64, text: &str) -> NoteEvent {
        NoteEvent {
            chart_time: t,
            text: text.into(),
            category: "nursing".into(),
        }
    }

    fn words(prefix: &str, n: usize) -> String {
        (0..n)
            .map(|i| format!("{prefix}{i}"))
            .collect::<Vec<_>>()
            .join(" ")
    }

    #[test]
    fn notes_are_ordered_by_time() {
        let doc = concat_notes(&[note(5.0, "later text"), note(2.0, "earlier text")], 4096);
        let early = doc.find("earlier").unwrap();
        let late = doc.find("later").unwrap();
        assert!(early < late);
        assert!(doc.starts_with("[chart_time=2.00h]"));
    }

    #[test]
    fn ties_keep_input_order() {
        let doc = concat_notes(&[note(1.0, "first"), note(1.0, "second")], 100);
        assert!(doc.find("first").unwrap() < doc.find("second").unwrap());
    }

    #[test]
    fn exact_cap_is_not_truncated() {
        // 2 headers + 2047 + 2047 words = 4096 tokens
        let notes = [note(1.0, &words("a", 2047)), note(2.0, &words("b", 2047))];
        let doc = concat_notes(&notes, 4096);
        assert_eq!(doc.split_whitespace().count(), 4096);
        assert!(doc.starts_with("[chart_time=1.00h]\na0 "));
    }

    #[test]
    fn over_cap_drops_oldest_tokens() {
        // 2 headers + 2499 + 2499 = 5000 tokens; 904 oldest must go: the first
        // header and a0..a902.
        let notes = [note(1.0, &words("a", 2499)), note(2.0, &words("b", 2499))];
        let doc = concat_notes(&notes, 4096);
        let toks: Vec<&str> = doc.split_whitespace().collect();
        assert_eq!(toks.len(), 4096);
        assert_eq!(toks[0], "a903");
        assert!(!doc.contains("chart_time=1.00h"));
        assert_eq!(*toks.last().unwrap(), "b2498");
    }

    #[test]
    fn headers_are_non_decreasing() {
        let notes = [
            note(9.0, "x"),
            note(0.5, "y"),
            note(3.25, "z"),
            note(3.0, "w"),
        ];
        let doc = concat_notes(&notes, 4096);
        let times: Vec<f64> = doc
            .split_whitespace()
            .filter_map(|t| t.strip_prefix("[chart_time="))
            .map(|t| t.trim_end_matches("h]").parse().unwrap())
            .collect();
        assert_eq!(times, vec![0.5, 3.0, 3.25, 9.0]);
    }
}
