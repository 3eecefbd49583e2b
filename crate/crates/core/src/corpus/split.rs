use std::collections::HashSet;
use std::fmt;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::{seeded, STREAM_SPLIT};

use super::{LyricDocument, MoodLabel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split {other:?}")),
        }
    }
}

/// Labeled, tokenized documents with a train/test tag each.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub documents: Vec<LyricDocument>,
    pub split: Vec<Split>,
    pub seed: u64,
}

impl LabeledDataset {
    /// Wraps documents whose split tags are already known (e.g. loaded from
    /// a processed file).
    pub fn from_parts(documents: Vec<LyricDocument>, split: Vec<Split>, seed: u64) -> Result<Self> {
        if documents.len() != split.len() {
            return Err(Error::LengthMismatch(documents.len(), split.len()));
        }
        for d in &documents {
            if d.label.is_none() {
                return Err(Error::Unlabeled(d.id.clone()));
            }
            if d.tokens.is_empty() {
                return Err(Error::EmptyDocument(d.id.clone()));
            }
        }
        Ok(Self { documents, split, seed })
    }

    pub fn empty(seed: u64) -> Self {
        Self {
            documents: Vec::new(),
            split: Vec::new(),
            seed,
        }
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn iter_split(&self, which: Split) -> impl Iterator<Item = &LyricDocument> {
        self.documents
            .iter()
            .zip(&self.split)
            .filter(move |(_, s)| **s == which)
            .map(|(d, _)| d)
    }

    pub fn label(&self, i: usize) -> MoodLabel {
        self.documents[i].label.expect("dataset documents are labeled")
    }
}

/// Half-away-from-zero rounding of `n * fraction`.
fn test_count(n: usize, fraction: f64) -> usize {
    (n as f64 * fraction).round() as usize
}

/// Stratified split: each class is shuffled with its own seeded stream and
/// the first `round(n_c * test_fraction)` documents become test documents.
pub fn split_dataset(docs: Vec<LyricDocument>, test_fraction: f64, seed: u64) -> Result<LabeledDataset> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "test_fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let mut by_class: [Vec<usize>; 4] = Default::default();
    for (i, d) in docs.iter().enumerate() {
        let label = d.label.ok_or_else(|| Error::Unlabeled(d.id.clone()))?;
        if d.tokens.is_empty() {
            return Err(Error::EmptyDocument(d.id.clone()));
        }
        by_class[label.code()].push(i);
    }
    for label in MoodLabel::ALL {
        if by_class[label.code()].len() < 2 {
            return Err(Error::ClassTooSmall(label));
        }
    }
    let mut split = vec![Split::Train; docs.len()];
    for label in MoodLabel::ALL {
        let members = &mut by_class[label.code()];
        let mut rng = seeded(seed, STREAM_SPLIT + label.code() as u64);
        members.shuffle(&mut rng);
        for &i in &members[..test_count(members.len(), test_fraction)] {
            split[i] = Split::Test;
        }
    }
    Ok(LabeledDataset {
        documents: docs,
        split,
        seed,
    })
}

/// Drops documents whose raw text exactly repeats an earlier one. Returns
/// the ids removed.
pub fn dedup_documents(docs: &mut Vec<LyricDocument>) -> Vec<String> {
    let mut seen = HashSet::new();
    let mut removed = Vec::new();
    docs.retain(|d| {
        if seen.insert(d.raw_text.clone()) {
            true
        } else {
            removed.push(d.id.clone());
            false
        }
    });
    removed
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClassCounts {
    pub total: usize,
    pub train: usize,
    pub test: usize,
}

/// Per-class document counts, indexed by label code.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DatasetStats {
    pub per_class: [ClassCounts; 4],
}

impl DatasetStats {
    pub fn get(&self, label: MoodLabel) -> ClassCounts {
        self.per_class[label.code()]
    }

    pub fn totals(&self) -> ClassCounts {
        self.per_class
            .iter()
            .fold(ClassCounts::default(), |acc, c| ClassCounts {
                total: acc.total + c.total,
                train: acc.train + c.train,
                test: acc.test + c.test,
            })
    }
}

impl fmt::Display for DatasetStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<10} {:>8} {:>8} {:>8}", "Class", "Total", "Train", "Test")?;
        for label in MoodLabel::ALL {
            let c = self.get(label);
            writeln!(f, "{:<10} {:>8} {:>8} {:>8}", label.name(), c.total, c.train, c.test)?;
        }
        let t = self.totals();
        write!(f, "{:<10} {:>8} {:>8} {:>8}", "Total", t.total, t.train, t.test)
    }
}

pub fn dataset_stats(ds: &LabeledDataset) -> DatasetStats {
    let mut stats = DatasetStats::default();
    for (d, s) in ds.documents.iter().zip(&ds.split) {
        let Some(label) = d.label else { continue };
        let c = &mut stats.per_class[label.code()];
        c.total += 1;
        match s {
            Split::Train => c.train += 1,
            Split::Test => c.test += 1,
        }
    }
    stats
}

#[cfg(test)]
mod tests {
    use super::*;

    fn docs_with_sizes(sizes: [usize; 4]) -> Vec<LyricDocument> {
        let mut out = Vec::new();
        for label in MoodLabel::ALL {
            for i in 0..sizes[label.code()] {
                out.push(LyricDocument::from_tokens(
                    format!("{}-{i}", label.name()),
                    vec![format!("w{i}")],
                    Some(label),
                ));
            }
        }
        out
    }

    #[test]
    fn class_sizes_of_the_reference_corpus_give_1143_test_docs() {
        let ds = split_dataset(docs_with_sizes([2870, 2812, 2848, 2897]), 0.1, 1).unwrap();
        let stats = dataset_stats(&ds);
        assert_eq!(stats.totals().total, 11_427);
        assert_eq!(stats.totals().test, 1143);
        assert_eq!(MoodLabel::ALL.map(|l| stats.get(l).test), [287, 281, 285, 290]);
    }

    #[test]
    fn single_class_is_too_small() {
        let docs = docs_with_sizes([10, 0, 0, 0]);
        assert!(matches!(
            split_dataset(docs, 0.1, 0),
            Err(Error::ClassTooSmall(MoodLabel::Catharsis))
        ));
        let docs = docs_with_sizes([10, 10, 1, 10]);
        assert!(matches!(
            split_dataset(docs, 0.1, 0),
            Err(Error::ClassTooSmall(MoodLabel::Sadness))
        ));
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let a = split_dataset(docs_with_sizes([30, 30, 30, 30]), 0.2, 9).unwrap();
        let b = split_dataset(docs_with_sizes([30, 30, 30, 30]), 0.2, 9).unwrap();
        assert_eq!(a.split, b.split);
        let c = split_dataset(docs_with_sizes([30, 30, 30, 30]), 0.2, 10).unwrap();
        assert_ne!(a.split, c.split);
    }

    #[test]
    fn stratification_bound() {
        for sizes in [[2, 3, 5, 7], [13, 29, 44, 101], [50, 50, 50, 51]] {
            let ds = split_dataset(docs_with_sizes(sizes), 0.15, 3).unwrap();
            let stats = dataset_stats(&ds);
            for l in MoodLabel::ALL {
                let c = stats.get(l);
                assert!((c.test as f64 - c.total as f64 * 0.15).abs() <= 1.5);
                assert_eq!(c.train + c.test, c.total);
            }
        }
    }

    #[test]
    fn stats_of_empty_dataset() {
        let stats = dataset_stats(&LabeledDataset::empty(0));
        assert_eq!(stats, DatasetStats::default());
    }

    #[test]
    fn stats_one_per_class() {
        let docs = docs_with_sizes([1, 1, 1, 1]);
        let split = vec![Split::Train, Split::Test, Split::Train, Split::Test];
        let ds = LabeledDataset::from_parts(docs, split, 0).unwrap();
        let stats = dataset_stats(&ds);
        assert_eq!(
            stats.get(MoodLabel::Happiness),
            ClassCounts {
                total: 1,
                train: 1,
                test: 0
            }
        );
        assert_eq!(
            stats.get(MoodLabel::Catharsis),
            ClassCounts {
                total: 1,
                train: 0,
                test: 1
            }
        );
        assert_eq!(stats.totals().total, 4);
    }

    #[test]
    fn unlabeled_and_empty_rejected() {
        let mut docs = docs_with_sizes([3, 3, 3, 3]);
        docs[0].label = None;
        assert!(matches!(split_dataset(docs, 0.1, 0), Err(Error::Unlabeled(_))));
        let mut docs = docs_with_sizes([3, 3, 3, 3]);
        docs[1].tokens.clear();
        assert!(matches!(split_dataset(docs, 0.1, 0), Err(Error::EmptyDocument(_))));
    }

    #[test]
    fn dedup_by_raw_text() {
        let mut docs = vec![
            LyricDocument::new("a", "一"),
            LyricDocument::new("b", "二"),
            LyricDocument::new("c", "一"),
        ];
        assert_eq!(dedup_documents(&mut docs), vec!["c".to_string()]);
        assert_eq!(docs.len(), 2);
    }
}
