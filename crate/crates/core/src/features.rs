//! Classical document features for the SVM baselines: tf-idf weights and
//! category-lexicon percentages.

use std::collections::{HashMap, HashSet};
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense feature values with their column names.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector<T> {
    pub values: Vec<T>,
    pub schema: Arc<Vec<String>>,
}

impl<T: Scalar> FeatureVector<T> {
    pub fn get(&self, name: &str) -> Option<T> {
        self.schema.iter().position(|s| s == name).map(|i| self.values[i])
    }
}

/// Writes feature vectors as CSV with the schema as header row.
pub fn write_features_csv<T: Scalar, W: Write>(vectors: &[FeatureVector<T>], mut out: W) -> std::io::Result<()> {
    let Some(first) = vectors.first() else {
        return Ok(());
    };
    writeln!(out, "{}", first.schema.join(","))?;
    for v in vectors {
        let row: Vec<String> = v.values.iter().map(|x| x.to_string()).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Document frequencies over a training corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct TfidfModel {
    vocab: Vocabulary,
    /// Indexed by vocabulary index; 0 for reserved or unseen entries.
    doc_freq: Vec<u64>,
    num_docs: u64,
    schema: Arc<Vec<String>>,
}

impl TfidfModel {
    pub fn fit<'a, I>(train_docs: I, vocab: &Vocabulary) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [String]>,
    {
        let mut doc_freq = vec![0u64; vocab.len()];
        let mut num_docs = 0u64;
        let mut seen = HashSet::new();
        for doc in train_docs {
            num_docs += 1;
            seen.clear();
            for tok in doc {
                if let Some(i) = vocab.index(tok) {
                    if seen.insert(i) {
                        doc_freq[i] += 1;
                    }
                }
            }
        }
        if num_docs == 0 {
            return Err(Error::EmptyCorpus);
        }
        Ok(Self::from_parts(vocab.clone(), doc_freq, num_docs))
    }

    pub(crate) fn from_parts(vocab: Vocabulary, doc_freq: Vec<u64>, num_docs: u64) -> Self {
        let schema = Arc::new(vocab.tokens()[2..].to_vec());
        Self {
            vocab,
            doc_freq,
            num_docs,
            schema,
        }
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn num_docs(&self) -> u64 {
        self.num_docs
    }

    /// Number of training documents containing `token` (0 if absent).
    pub fn doc_freq(&self, token: &str) -> u64 {
        self.vocab.index(token).map_or(0, |i| self.doc_freq[i])
    }

    pub(crate) fn doc_freqs(&self) -> &[u64] {
        &self.doc_freq
    }

    pub fn dim(&self) -> usize {
        self.schema.len()
    }

    /// `tf(t, d) · ln(|D| / f_t)` for every vocabulary term; terms never
    /// seen in training stay at zero.
    pub fn transform<T: Scalar>(&self, doc: &[String]) -> FeatureVector<T> {
        let mut tf = vec![0u64; self.vocab.len()];
        for tok in doc {
            if let Some(i) = self.vocab.index(tok) {
                tf[i] += 1;
            }
        }
        let n = T::lit(self.num_docs as f64);
        let values = (2..self.vocab.len())
            .map(|i| {
                let df = self.doc_freq[i];
                if tf[i] == 0 || df == 0 {
                    T::zero()
                } else {
                    T::lit(tf[i] as f64) * (n / T::lit(df as f64)).ln()
                }
            })
            .collect();
        FeatureVector {
            values,
            schema: Arc::clone(&self.schema),
        }
    }
}

pub fn fit_tfidf(train_docs: &[Vec<String>], vocab: &Vocabulary) -> Result<TfidfModel> {
    TfidfModel::fit(train_docs.iter().map(Vec::as_slice), vocab)
}

pub fn transform_tfidf<T: Scalar>(doc: &[String], model: &TfidfModel) -> FeatureVector<T> {
    model.transform(doc)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LexiconEntry<T> {
    pub word: String,
    pub category: String,
    pub weight: T,
}

/// Word → (category, weight) lexicon, with categories in first-appearance
/// order.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoryLexicon<T> {
    entries: Vec<LexiconEntry<T>>,
    categories: Vec<String>,
    by_word: HashMap<String, Vec<(usize, T)>>,
}

impl<T: Scalar> Default for CategoryLexicon<T> {
    fn default() -> Self {
        Self {
            entries: Vec::new(),
            categories: Vec::new(),
            by_word: HashMap::new(),
        }
    }
}

impl<T: Scalar> CategoryLexicon<T> {
    /// Parses `word<TAB>category<TAB>weight` lines. The weight column may be
    /// omitted (weight 1). `#` starts a comment line.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lex = Self::default();
        let mut seen = HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
            let (word, category, weight) = match fields.as_slice() {
                [w, c] => (*w, *c, 1.0),
                [w, c, x] => {
                    let x: f64 = x
                        .parse()
                        .map_err(|_| Error::parse(line_no, format!("bad weight {x:?}")))?;
                    (*w, *c, x)
                }
                _ => return Err(Error::parse(line_no, "expected word<TAB>category<TAB>weight")),
            };
            if word.is_empty() || category.is_empty() {
                return Err(Error::parse(line_no, "empty word or category"));
            }
            if !(weight.is_finite() && weight > 0.0) {
                return Err(Error::parse(line_no, format!("weight must be positive, got {weight}")));
            }
            if !seen.insert((word.to_string(), category.to_string())) {
                return Err(Error::DuplicateEntry {
                    word: word.to_string(),
                    category: category.to_string(),
                    line: line_no,
                });
            }
            lex.push(word, category, T::lit(weight));
        }
        Ok(lex)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    fn push(&mut self, word: &str, category: &str, weight: T) {
        let cat = match self.categories.iter().position(|c| c == category) {
            Some(c) => c,
            None => {
                self.categories.push(category.to_string());
                self.categories.len() - 1
            }
        };
        self.by_word.entry(word.to_string()).or_default().push((cat, weight));
        self.entries.push(LexiconEntry {
            word: word.to_string(),
            category: category.to_string(),
            weight,
        });
    }

    pub fn entries(&self) -> &[LexiconEntry<T>] {
        &self.entries
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Serializes back to the tab-separated file format.
    pub fn to_text(&self) -> String {
        self.entries
            .iter()
            .map(|e| format!("{}\t{}\t{}\n", e.word, e.category, e.weight))
            .collect()
    }
}

pub fn load_lexicon<T: Scalar>(path: impl AsRef<Path>) -> Result<CategoryLexicon<T>> {
    CategoryLexicon::load(path)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LiwcConfig {
    /// Tokens with at least this many characters count as long words.
    pub long_word_chars: usize,
}

impl Default for LiwcConfig {
    fn default() -> Self {
        Self { long_word_chars: 3 }
    }
}

pub const LIWC_DESCRIPTIVE: [&str; 3] = ["word_count", "mean_tokens_per_line", "long_word_fraction"];

pub fn liwc_schema<T: Scalar>(lex: &CategoryLexicon<T>) -> Arc<Vec<String>> {
    Arc::new(
        LIWC_DESCRIPTIVE
            .iter()
            .map(|s| s.to_string())
            .chain(lex.categories().iter().cloned())
            .collect(),
    )
}

/// Descriptive counts followed by one weighted percentage per category.
/// `line_count` is the number of lyric lines the tokens came from.
pub fn liwc_features<T: Scalar>(
    tokens: &[String],
    line_count: usize,
    lex: &CategoryLexicon<T>,
    cfg: &LiwcConfig,
) -> FeatureVector<T> {
    let schema = liwc_schema(lex);
    let n = tokens.len();
    let mut values = vec![T::zero(); schema.len()];
    values[0] = T::from_count(n);
    values[1] = T::from_count(n) / T::from_count(line_count.max(1));
    let long = tokens
        .iter()
        .filter(|t| t.chars().count() >= cfg.long_word_chars)
        .count();
    values[2] = T::from_count(long) / T::from_count(n.max(1));
    let offset = LIWC_DESCRIPTIVE.len();
    for tok in tokens {
        if let Some(hits) = lex.by_word.get(tok.as_str()) {
            for &(cat, weight) in hits {
                values[offset + cat] += weight;
            }
        }
    }
    let scale = T::lit(100.0) / T::from_count(n.max(1));
    for v in &mut values[offset..] {
        *v *= scale;
    }
    FeatureVector { values, schema }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn toks(s: &[&str]) -> Vec<String> {
        s.iter().map(|t| t.to_string()).collect()
    }

    fn toy() -> (Vec<Vec<String>>, Vocabulary) {
        let docs = vec![toks(&["a", "b", "a"]), toks(&["b", "c"])];
        let vocab = Vocabulary::build(docs.iter().map(Vec::as_slice), 1).unwrap();
        (docs, vocab)
    }

    #[test]
    fn document_frequencies() {
        let (docs, vocab) = toy();
        let m = fit_tfidf(&docs, &vocab).unwrap();
        assert_eq!((m.doc_freq("a"), m.doc_freq("b"), m.doc_freq("c")), (1, 2, 1));
        assert_eq!(m.num_docs(), 2);
    }

    #[test]
    fn single_document() {
        let docs = vec![toks(&["x", "y", "x"])];
        let vocab = Vocabulary::build(docs.iter().map(Vec::as_slice), 1).unwrap();
        let m = fit_tfidf(&docs, &vocab).unwrap();
        assert_eq!((m.doc_freq("x"), m.doc_freq("y"), m.num_docs()), (1, 1, 1));
        let v: FeatureVector<f64> = m.transform(&docs[0]);
        assert!(v.values.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn empty_corpus() {
        let (_, vocab) = toy();
        assert!(matches!(fit_tfidf(&[], &vocab), Err(Error::EmptyCorpus)));
    }

    #[test]
    fn hand_computed_weights() {
        let (docs, vocab) = toy();
        let m = fit_tfidf(&docs, &vocab).unwrap();
        let v: FeatureVector<f64> = m.transform(&docs[0]);
        assert_abs_diff_eq!(v.get("a").unwrap(), 2.0 * 2f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(v.get("a").unwrap(), 1.3862943611198906, epsilon = 1e-12);
        assert_eq!(v.get("b").unwrap(), 0.0);
        assert_eq!(v.get("c").unwrap(), 0.0);
        let empty: FeatureVector<f64> = m.transform(&[]);
        assert!(empty.values.iter().all(|&x| x == 0.0));
        let unseen: FeatureVector<f64> = m.transform(&toks(&["zzz"]));
        assert!(unseen.values.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn doubling_tf_doubles_weight() {
        let (docs, vocab) = toy();
        let m = fit_tfidf(&docs, &vocab).unwrap();
        let once: FeatureVector<f64> = m.transform(&toks(&["c"]));
        let twice: FeatureVector<f64> = m.transform(&toks(&["c", "c"]));
        assert_eq!(twice.get("c").unwrap(), 2.0 * once.get("c").unwrap());
    }

    #[test]
    fn lexicon_parsing() {
        let lex = CategoryLexicon::<f64>::parse("快乐\tposemo\t1").unwrap();
        assert_eq!(lex.entries().len(), 1);
        assert_eq!(lex.categories(), ["posemo"]);
        assert!(CategoryLexicon::<f64>::parse("").unwrap().is_empty());
        let dup = CategoryLexicon::<f64>::parse("# c\n快乐\tposemo\t1\n快乐\tposemo\t2\n");
        assert!(matches!(dup, Err(Error::DuplicateEntry { line: 3, .. })));
        let bad = CategoryLexicon::<f64>::parse("快乐\tposemo\t1\n快乐 posemo\n");
        assert!(matches!(bad, Err(Error::Parse { line: 2, .. })));
        let neg = CategoryLexicon::<f64>::parse("快乐\tposemo\t-1\n");
        assert!(matches!(neg, Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn category_order_is_first_appearance() {
        let lex = CategoryLexicon::<f64>::parse("a\tz\nb\ty\nc\tz\n").unwrap();
        assert_eq!(lex.categories(), ["z", "y"]);
        let back = CategoryLexicon::<f64>::parse(&lex.to_text()).unwrap();
        assert_eq!(back, lex);
    }

    #[test]
    fn category_percentages() {
        let doc = toks(&["快乐", "的", "歌"]);
        let lex = CategoryLexicon::<f64>::parse("快乐\tposemo\t1").unwrap();
        let v = liwc_features(&doc, 1, &lex, &LiwcConfig::default());
        assert_abs_diff_eq!(v.get("posemo").unwrap(), 100.0 / 3.0, epsilon = 1e-12);
        assert_eq!(v.get("word_count").unwrap(), 3.0);
        let heavy = CategoryLexicon::<f64>::parse("快乐\tposemo\t2").unwrap();
        let v = liwc_features(&doc, 1, &heavy, &LiwcConfig::default());
        assert_abs_diff_eq!(v.get("posemo").unwrap(), 200.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn descriptive_fields() {
        let doc = toks(&["天安门", "的", "歌", "我们"]);
        let lex = CategoryLexicon::<f64>::default();
        let v = liwc_features(&doc, 2, &lex, &LiwcConfig::default());
        assert_eq!(v.values, vec![4.0, 2.0, 0.25]);
        let v = liwc_features(&doc, 2, &lex, &LiwcConfig { long_word_chars: 2 });
        assert_eq!(v.values[2], 0.5);
    }

    #[test]
    fn empty_doc_all_zero() {
        let lex = CategoryLexicon::<f64>::parse("快乐\tposemo\t1").unwrap();
        let v = liwc_features(&[], 0, &lex, &LiwcConfig::default());
        assert!(v.values.iter().all(|&x| x == 0.0));
        assert_eq!(v.schema.len(), 4);
    }

    #[test]
    fn csv_export() {
        let lex = CategoryLexicon::<f64>::parse("快乐\tposemo\t1").unwrap();
        let v = liwc_features(&toks(&["快乐"]), 1, &lex, &LiwcConfig::default());
        let mut buf = Vec::new();
        write_features_csv(&[v], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "word_count,mean_tokens_per_line,long_word_fraction,posemo\n1,1,0,100\n"
        );
    }
}
