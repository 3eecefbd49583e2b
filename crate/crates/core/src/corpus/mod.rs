//! Lyric ingestion: cleaning, segmentation, vocabularies, fixed-length
//! encoding, stratified splits and synthetic labeled corpora.

mod clean;
pub mod io;
mod segment;
mod split;
mod synthetic;
mod vocab;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use clean::{clean_lyric_text, count_content_lines, is_cjk_ideograph};
pub use segment::{segment, SegmentMode, SegmenterLexicon};
pub use split::{dataset_stats, dedup_documents, split_dataset, ClassCounts, DatasetStats, LabeledDataset, Split};
pub use synthetic::{generate_synthetic_corpus, signal_bigrams, SyntheticConfig};
pub use vocab::{encode_document, encode_tokens, Vocabulary, PAD, PAD_TOKEN, UNK, UNK_TOKEN};

/// The four mood tags. Integer codes are stable and used in every matrix
/// and file the crate writes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MoodLabel {
    Happiness = 0,
    Catharsis = 1,
    Sadness = 2,
    Quiet = 3,
}

impl MoodLabel {
    pub const COUNT: usize = 4;
    pub const ALL: [MoodLabel; 4] = [
        MoodLabel::Happiness,
        MoodLabel::Catharsis,
        MoodLabel::Sadness,
        MoodLabel::Quiet,
    ];

    pub fn code(self) -> usize {
        self as usize
    }

    pub fn from_code(code: usize) -> Option<Self> {
        Self::ALL.get(code).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            MoodLabel::Happiness => "Happiness",
            MoodLabel::Catharsis => "Catharsis",
            MoodLabel::Sadness => "Sadness",
            MoodLabel::Quiet => "Quiet",
        }
    }
}

impl fmt::Display for MoodLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MoodLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        MoodLabel::ALL
            .into_iter()
            .find(|l| l.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| s.to_string())
    }
}

/// One song's lyric text plus whatever preprocessing has produced so far.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LyricDocument {
    pub id: String,
    pub title: Option<String>,
    pub artist: Option<String>,
    pub raw_text: String,
    pub tokens: Vec<String>,
    pub label: Option<MoodLabel>,
    /// Number of non-empty lyric lines after cleaning; 0 when unknown.
    pub line_count: usize,
}

impl LyricDocument {
    pub fn new(id: impl Into<String>, raw_text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            raw_text: raw_text.into(),
            ..Default::default()
        }
    }

    /// Document built directly from tokens, e.g. pre-segmented corpora.
    pub fn from_tokens(id: impl Into<String>, tokens: Vec<String>, label: Option<MoodLabel>) -> Self {
        Self {
            id: id.into(),
            raw_text: tokens.join(" "),
            line_count: usize::from(!tokens.is_empty()),
            tokens,
            label,
            ..Default::default()
        }
    }

    pub fn with_label(mut self, label: MoodLabel) -> Self {
        self.label = Some(label);
        self
    }

    /// Cleans `raw_text` and segments it, filling `tokens` and `line_count`.
    pub fn preprocess(&mut self, lexicon: &SegmenterLexicon, mode: SegmentMode) -> crate::Result<()> {
        let cleaned = clean_lyric_text(&self.raw_text);
        self.tokens = segment(&cleaned, lexicon, mode)?;
        self.line_count = count_content_lines(&self.raw_text);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_parse_case_insensitively() {
        assert_eq!("QUIET".parse::<MoodLabel>(), Ok(MoodLabel::Quiet));
        assert_eq!(" sadness ".parse::<MoodLabel>(), Ok(MoodLabel::Sadness));
        assert!("angry".parse::<MoodLabel>().is_err());
    }

    #[test]
    fn codes_are_stable() {
        for (i, l) in MoodLabel::ALL.iter().enumerate() {
            assert_eq!(l.code(), i);
            assert_eq!(MoodLabel::from_code(i), Some(*l));
        }
        assert_eq!(MoodLabel::from_code(4), None);
    }
}
