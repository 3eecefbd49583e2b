use std::collections::HashSet;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SegmentMode {
    /// Forward maximum matching over a word list.
    #[default]
    Lexicon,
    /// Input is already segmented; split on whitespace.
    Whitespace,
}

impl std::fmt::Display for SegmentMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SegmentMode::Lexicon => "lexicon",
            SegmentMode::Whitespace => "whitespace",
        })
    }
}

impl std::str::FromStr for SegmentMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lexicon" => Ok(SegmentMode::Lexicon),
            "whitespace" => Ok(SegmentMode::Whitespace),
            other => Err(format!("unknown segmentation mode {other:?}")),
        }
    }
}

/// Known multi-character words for forward maximum matching.
#[derive(Debug, Clone, Default)]
pub struct SegmenterLexicon {
    entries: HashSet<String>,
    max_word_len: usize,
}

impl SegmenterLexicon {
    pub fn new<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut lex = Self::default();
        for w in words {
            lex.insert(w.into());
        }
        lex
    }

    pub fn insert(&mut self, word: String) {
        let word = word.trim().to_string();
        if word.is_empty() {
            return;
        }
        self.max_word_len = self.max_word_len.max(word.chars().count());
        self.entries.insert(word);
    }

    /// Reads a UTF-8 word list, one word per line. Blank lines and `#`
    /// comments are skipped.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::new(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#')),
        ))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.entries.contains(word)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn max_word_len(&self) -> usize {
        self.max_word_len
    }
}

fn forward_max_match(run: &str, lexicon: &SegmenterLexicon, out: &mut Vec<String>) {
    // byte offsets of every char boundary, including the end
    let bounds: Vec<usize> = run
        .char_indices()
        .map(|(i, _)| i)
        .chain(std::iter::once(run.len()))
        .collect();
    let n = bounds.len() - 1;
    let mut pos = 0;
    while pos < n {
        let longest = (2..=lexicon.max_word_len.min(n - pos))
            .rev()
            .find(|&len| lexicon.contains(&run[bounds[pos]..bounds[pos + len]]))
            .unwrap_or(1);
        out.push(run[bounds[pos]..bounds[pos + longest]].to_string());
        pos += longest;
    }
}

/// Splits cleaned text into tokens.
///
/// In lexicon mode each whitespace-separated run is segmented greedily: at
/// every position the longest lexicon word starting there is taken, falling
/// back to a single character.
pub fn segment(text: &str, lexicon: &SegmenterLexicon, mode: SegmentMode) -> Result<Vec<String>> {
    match mode {
        SegmentMode::Whitespace => Ok(text.split_whitespace().map(str::to_string).collect()),
        SegmentMode::Lexicon => {
            if lexicon.is_empty() {
                return Err(Error::LexiconEmpty);
            }
            let mut out = Vec::new();
            for run in text.split_whitespace() {
                forward_max_match(run, lexicon, &mut out);
            }
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lex(words: &[&str]) -> SegmenterLexicon {
        SegmenterLexicon::new(words.iter().copied())
    }

    #[test]
    fn empty_text() {
        assert!(segment("", &lex(&["中国"]), SegmentMode::Lexicon).unwrap().is_empty());
    }

    #[test]
    fn fmm_prefers_longest() {
        let toks = segment("中国人", &lex(&["中国", "人"]), SegmentMode::Lexicon).unwrap();
        assert_eq!(toks, vec!["中国", "人"]);
        let toks = segment("中国人民", &lex(&["中国", "中国人", "人民"]), SegmentMode::Lexicon).unwrap();
        assert_eq!(toks, vec!["中国人", "民"]);
    }

    #[test]
    fn unknown_chars_become_singletons() {
        let toks = segment("我爱北京 天安门", &lex(&["北京", "天安门"]), SegmentMode::Lexicon).unwrap();
        assert_eq!(toks, vec!["我", "爱", "北京", "天安门"]);
    }

    #[test]
    fn whitespace_mode() {
        let toks = segment("a b", &SegmenterLexicon::default(), SegmentMode::Whitespace).unwrap();
        assert_eq!(toks, vec!["a", "b"]);
    }

    #[test]
    fn empty_lexicon_rejected() {
        assert!(matches!(
            segment("中国", &SegmenterLexicon::default(), SegmentMode::Lexicon),
            Err(Error::LexiconEmpty)
        ));
    }

    #[test]
    fn max_word_len_tracks_longest() {
        let l = lex(&["一", "一二三", "一二"]);
        assert_eq!(l.max_word_len(), 3);
    }

    proptest! {
        #[test]
        fn fmm_round_trips_non_space_chars(
            text in "[一二三四五 ]{0,40}",
            words in proptest::collection::vec("[一二三四五]{1,4}", 1..8),
        ) {
            let l = SegmenterLexicon::new(words);
            let toks = segment(&text, &l, SegmentMode::Lexicon).unwrap();
            let joined: String = toks.concat();
            let expected: String = text.chars().filter(|c| !c.is_whitespace()).collect();
            prop_assert_eq!(joined, expected);
            prop_assert!(toks.iter().all(|t| !t.trim().is_empty()));
        }
    }
}
