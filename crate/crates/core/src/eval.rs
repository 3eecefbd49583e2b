//! Accuracy, per-class precision/recall/F1, comparison tables and word
//! frequency reports.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::{self, Write as _};

use crate::corpus::{LabeledDataset, MoodLabel};
use crate::error::{Error, Result};

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    n: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            counts: vec![0; n * n],
        }
    }

    pub fn from_counts(rows: &[Vec<u64>]) -> Result<Self> {
        let n = rows.len();
        let mut cm = Self::new(n);
        for (t, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: row.len(),
                });
            }
            cm.counts[t * n..(t + 1) * n].copy_from_slice(row);
        }
        Ok(cm)
    }

    /// Tallies class codes; every code must be below `n`.
    pub fn from_codes(n: usize, truth: &[usize], pred: &[usize]) -> Result<Self> {
        if truth.len() != pred.len() {
            return Err(Error::LengthMismatch(truth.len(), pred.len()));
        }
        let mut cm = Self::new(n);
        for (&t, &p) in truth.iter().zip(pred) {
            if t >= n || p >= n {
                return Err(Error::InvalidArgument(format!("class code {} out of range", t.max(p))));
            }
            cm.counts[t * n + p] += 1;
        }
        Ok(cm)
    }

    pub fn num_classes(&self) -> usize {
        self.n
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.n + pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.n).map(|c| self.get(c, c)).sum()
    }

    pub fn row_sum(&self, truth: usize) -> u64 {
        (0..self.n).map(|p| self.get(truth, p)).sum()
    }

    pub fn col_sum(&self, pred: usize) -> u64 {
        (0..self.n).map(|t| self.get(t, pred)).sum()
    }

    /// Header row of predicted names, then one row per true class.
    pub fn to_csv(&self, names: &[&str]) -> String {
        let mut s = String::from("true\\pred");
        for name in names.iter().take(self.n) {
            let _ = write!(s, ",{name}");
        }
        s.push('\n');
        for t in 0..self.n {
            s.push_str(names.get(t).copied().unwrap_or(""));
            for p in 0..self.n {
                let _ = write!(s, ",{}", self.get(t, p));
            }
            s.push('\n');
        }
        s
    }
}

pub fn confusion_matrix(truth: &[MoodLabel], pred: &[MoodLabel]) -> Result<ConfusionMatrix> {
    let t: Vec<usize> = truth.iter().map(|l| l.code()).collect();
    let p: Vec<usize> = pred.iter().map(|l| l.code()).collect();
    ConfusionMatrix::from_codes(MoodLabel::COUNT, &t, &p)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassReport {
    pub names: Vec<String>,
    pub classes: Vec<ClassMetrics>,
    /// Unweighted mean of the per-class rates; support is the total.
    pub macro_avg: ClassMetrics,
    pub accuracy: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    if cm.total() == 0 {
        return Err(Error::EmptyMatrix);
    }
    Ok(ratio(cm.trace(), cm.total()))
}

fn default_names(n: usize) -> Vec<String> {
    (0..n)
        .map(|c| MoodLabel::from_code(c).map_or_else(|| format!("class{c}"), |l| l.name().to_string()))
        .collect()
}

pub fn class_report(cm: &ConfusionMatrix) -> Result<ClassReport> {
    let acc = accuracy(cm)?;
    let n = cm.num_classes();
    let classes: Vec<ClassMetrics> = (0..n)
        .map(|c| {
            let tp = cm.get(c, c);
            let precision = ratio(tp, cm.col_sum(c));
            let recall = ratio(tp, cm.row_sum(c));
            let f1 = if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
            ClassMetrics {
                precision,
                recall,
                f1,
                support: cm.row_sum(c),
            }
        })
        .collect();
    let nf = n as f64;
    let macro_avg = ClassMetrics {
        precision: classes.iter().map(|m| m.precision).sum::<f64>() / nf,
        recall: classes.iter().map(|m| m.recall).sum::<f64>() / nf,
        f1: classes.iter().map(|m| m.f1).sum::<f64>() / nf,
        support: cm.total(),
    };
    Ok(ClassReport {
        names: default_names(n),
        classes,
        macro_avg,
        accuracy: acc,
    })
}

impl ClassReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("class,precision,recall,f1,support\n");
        let rows = self.names.iter().map(String::as_str).zip(&self.classes);
        for (name, m) in rows.chain(std::iter::once(("Avg/Total", &self.macro_avg))) {
            let _ = writeln!(s, "{name},{:.6},{:.6},{:.6},{}", m.precision, m.recall, m.f1, m.support);
        }
        let _ = writeln!(s, "accuracy,{:.6},,,", self.accuracy);
        s
    }
}

impl fmt::Display for ClassReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<10} {:>9} {:>9} {:>9} {:>9}",
            "", "Precision", "Recall", "F1-score", "Support"
        )?;
        let rows = self.names.iter().map(String::as_str).zip(&self.classes);
        for (name, m) in rows.chain(std::iter::once(("Avg/Total", &self.macro_avg))) {
            writeln!(
                f,
                "{:<10} {:>9.2} {:>9.2} {:>9.2} {:>9}",
                name, m.precision, m.recall, m.f1, m.support
            )?;
        }
        write!(f, "Accuracy {:.2}", self.accuracy * 100.0)
    }
}

/// Display order of the five model configurations.
pub const MODEL_ORDER: [&str; 5] = ["TF-IDF+SVM", "LIWC+SVM", "CNN", "RNN", "LSTM"];

/// One `name accuracy%` line per model, known models first in canonical
/// order, then any others by name.
pub fn comparison_table(results: &BTreeMap<String, f64>) -> String {
    let known = MODEL_ORDER.iter().filter_map(|&m| results.get_key_value(m));
    let extra = results.iter().filter(|(k, _)| !MODEL_ORDER.contains(&k.as_str()));
    let mut s = String::new();
    for (name, acc) in known.chain(extra) {
        let _ = writeln!(s, "{name} {:.2}", acc * 100.0);
    }
    s
}

/// Token counts over every document of `label`, most frequent first, ties
/// in lexicographic order.
pub fn word_frequency_report(
    ds: &LabeledDataset,
    label: MoodLabel,
    top_k: usize,
    stoplist: &HashSet<String>,
) -> Result<Vec<(String, u64)>> {
    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    let mut seen = false;
    for doc in ds.documents.iter().filter(|d| d.label == Some(label)) {
        seen = true;
        for t in &doc.tokens {
            if !stoplist.contains(t) {
                *counts.entry(t).or_default() += 1;
            }
        }
    }
    if !seen {
        return Err(Error::UnknownClass(label));
    }
    let mut ranked: Vec<(String, u64)> = counts.into_iter().map(|(t, c)| (t.to_string(), c)).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(top_k);
    Ok(ranked)
}

/// Jaccard similarity of the two token sets; 0 when both are empty.
pub fn overlap_score<S: AsRef<str>>(a: &[S], b: &[S]) -> f64 {
    let a: BTreeSet<&str> = a.iter().map(AsRef::as_ref).collect();
    let b: BTreeSet<&str> = b.iter().map(AsRef::as_ref).collect();
    let union = a.union(&b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(&b).count() as f64 / union as f64
}
