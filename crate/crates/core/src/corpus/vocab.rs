use std::collections::HashMap;

use crate::error::{Error, Result};

use super::LyricDocument;

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";

/// Token ↔ index table. Indices 0 and 1 are reserved for padding and
/// unknown tokens; real tokens start at 2 in descending frequency order.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    token_to_index: HashMap<String, usize>,
    index_to_token: Vec<String>,
    counts: Vec<u64>,
}

impl Vocabulary {
    /// Counts tokens across `docs` and keeps those seen at least `min_count`
    /// times. Ties in frequency are ordered lexicographically.
    pub fn build<'a, I>(docs: I, min_count: u64) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [String]>,
    {
        if min_count == 0 {
            return Err(Error::InvalidArgument("min_count must be >= 1".into()));
        }
        let mut freq: HashMap<&str, u64> = HashMap::new();
        for doc in docs {
            for tok in doc {
                *freq.entry(tok.as_str()).or_default() += 1;
            }
        }
        let mut kept: Vec<(&str, u64)> = freq.into_iter().filter(|&(_, c)| c >= min_count).collect();
        if kept.is_empty() {
            return Err(Error::EmptyVocabulary);
        }
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        Ok(Self::from_ranked(kept.into_iter().map(|(t, c)| (t.to_string(), c))))
    }

    /// Builds from `(token, count)` pairs already in index order.
    pub fn from_ranked<I: IntoIterator<Item = (String, u64)>>(ranked: I) -> Self {
        let mut index_to_token = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
        let mut counts = vec![0, 0];
        let mut token_to_index = HashMap::new();
        for (tok, c) in ranked {
            if token_to_index.contains_key(&tok) || tok == PAD_TOKEN || tok == UNK_TOKEN {
                continue;
            }
            token_to_index.insert(tok.clone(), index_to_token.len());
            index_to_token.push(tok);
            counts.push(c);
        }
        Self {
            token_to_index,
            index_to_token,
            counts,
        }
    }

    pub fn from_documents(docs: &[LyricDocument], min_count: u64) -> Result<Self> {
        Self::build(docs.iter().map(|d| d.tokens.as_slice()), min_count)
    }

    pub fn index(&self, token: &str) -> Option<usize> {
        self.token_to_index.get(token).copied()
    }

    pub fn index_or_unk(&self, token: &str) -> usize {
        self.index(token).unwrap_or(UNK)
    }

    pub fn token(&self, index: usize) -> Option<&str> {
        self.index_to_token.get(index).map(String::as_str)
    }

    pub fn count(&self, index: usize) -> u64 {
        self.counts.get(index).copied().unwrap_or(0)
    }

    /// Tokens in index order, reserved entries included.
    pub fn tokens(&self) -> &[String] {
        &self.index_to_token
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Number of real (non-reserved) tokens, `V`.
    pub fn num_words(&self) -> usize {
        self.index_to_token.len() - 2
    }

    /// Total table size including the two reserved rows, `V + 2`.
    pub fn len(&self) -> usize {
        self.index_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        self.num_words() == 0
    }
}

/// Maps the first `max_len` tokens through `vocab`, right-padding with PAD.
pub fn encode_tokens(tokens: &[String], vocab: &Vocabulary, max_len: usize) -> Vec<usize> {
    let mut out: Vec<usize> = tokens.iter().take(max_len).map(|t| vocab.index_or_unk(t)).collect();
    out.resize(max_len, PAD);
    out
}

pub fn encode_document(doc: &LyricDocument, vocab: &Vocabulary, max_len: usize) -> Vec<usize> {
    encode_tokens(&doc.tokens, vocab, max_len)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(s: &[&str]) -> Vec<String> {
        s.iter().map(|t| t.to_string()).collect()
    }

    #[test]
    fn min_count_filters() {
        let d = toks(&["a", "a", "b"]);
        let v = Vocabulary::build([d.as_slice()], 2).unwrap();
        assert_eq!(v.index("a"), Some(2));
        assert_eq!(v.index("b"), None);
        assert_eq!(v.num_words(), 1);
        assert_eq!(v.count(2), 2);
    }

    #[test]
    fn single_token() {
        let d = toks(&["a"]);
        let v = Vocabulary::build([d.as_slice()], 1).unwrap();
        assert_eq!(v.index("a"), Some(2));
    }

    #[test]
    fn threshold_excludes_all() {
        let d = toks(&["a"]);
        assert!(matches!(
            Vocabulary::build([d.as_slice()], 2),
            Err(Error::EmptyVocabulary)
        ));
    }

    #[test]
    fn ties_are_lexicographic() {
        let d = toks(&["c", "b", "a", "c"]);
        let v = Vocabulary::build([d.as_slice()], 1).unwrap();
        assert_eq!(v.tokens()[2..], toks(&["c", "a", "b"]));
    }

    #[test]
    fn encode_truncates_to_first_hundred() {
        let d: Vec<String> = (0..120).map(|i| format!("t{i}")).collect();
        let v = Vocabulary::build([d.as_slice()], 1).unwrap();
        let enc = encode_tokens(&d, &v, 100);
        assert_eq!(enc.len(), 100);
        assert_eq!(enc[99], v.index("t99").unwrap());
        assert!(!enc.contains(&v.index("t100").unwrap()));
    }

    #[test]
    fn encode_empty_and_unknown() {
        let d = toks(&["x"]);
        let v = Vocabulary::build([d.as_slice()], 1).unwrap();
        assert_eq!(encode_tokens(&[], &v, 100), vec![PAD; 100]);
        let enc = encode_tokens(&toks(&["a"]), &v, 100);
        assert_eq!(enc[0], UNK);
        assert!(enc[1..].iter().all(|&i| i == PAD));
    }

    proptest! {
        #[test]
        fn bijection_and_bounds(docs in proptest::collection::vec(
            proptest::collection::vec("[a-e]{1,2}", 0..20), 1..6), max_len in 1usize..30) {
            let all: Vec<&[String]> = docs.iter().map(Vec::as_slice).collect();
            if let Ok(v) = Vocabulary::build(all, 1) {
                for (i, t) in v.tokens().iter().enumerate().skip(2) {
                    prop_assert_eq!(v.index(t), Some(i));
                }
                for d in &docs {
                    let enc = encode_tokens(d, &v, max_len);
                    prop_assert_eq!(enc.len(), max_len);
                    prop_assert!(enc.iter().all(|&i| i < v.len()));
                }
            }
        }
    }
}
