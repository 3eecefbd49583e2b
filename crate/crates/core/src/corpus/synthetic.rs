use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::{seeded, STREAM_SYNTH};

use super::{LyricDocument, MoodLabel};

/// Generator settings for a labeled corpus with planted class signals.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub classes: usize,
    pub docs_per_class: usize,
    pub vocab_size: usize,
    pub signal_bigrams_per_class: usize,
    pub doc_len: usize,
    pub noise_prob: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            classes: 4,
            docs_per_class: 500,
            vocab_size: 500,
            signal_bigrams_per_class: 3,
            doc_len: 80,
            noise_prob: 0.1,
            seed: 7,
        }
    }
}

impl SyntheticConfig {
    fn validate(&self) -> Result<()> {
        let s = self.signal_bigrams_per_class;
        let fail = |m: String| Err(Error::ConfigInfeasible(m));
        if self.classes != MoodLabel::COUNT {
            return fail(format!("classes must be {}, got {}", MoodLabel::COUNT, self.classes));
        }
        if self.docs_per_class < 10 {
            return fail(format!("docs_per_class must be >= 10, got {}", self.docs_per_class));
        }
        if s == 0 {
            return fail("signal_bigrams_per_class must be >= 1".into());
        }
        let needed = self.classes * s * 2 + 10;
        if self.vocab_size < needed {
            return fail(format!(
                "vocab_size {} < {needed} needed for disjoint signals",
                self.vocab_size
            ));
        }
        if self.doc_len < 4 * s {
            return fail(format!("doc_len {} too short to plant {s} bigrams", self.doc_len));
        }
        if !(0.0..=1.0).contains(&self.noise_prob) {
            return fail(format!("noise_prob {} outside [0, 1]", self.noise_prob));
        }
        Ok(())
    }
}

fn token_name(i: usize) -> String {
    format!("w{i}")
}

/// The signal bigrams owned by `label`, as token strings.
pub fn signal_bigrams(cfg: &SyntheticConfig, label: MoodLabel) -> Vec<(String, String)> {
    let s = cfg.signal_bigrams_per_class;
    (0..s)
        .map(|j| {
            let base = 2 * (label.code() * s + j);
            (token_name(base), token_name(base + 1))
        })
        .collect()
}

/// Generates `classes × docs_per_class` tokenized, labeled documents.
///
/// Tokens `w0 .. w{8S-1}` form the class signal bigrams; the rest are noise
/// drawn from a Zipf-shaped unigram distribution shared by all classes. Each
/// signal bigram of a document's class is planted, without overlap, with
/// probability `1 - noise_prob`.
pub fn generate_synthetic_corpus(cfg: &SyntheticConfig) -> Result<Vec<LyricDocument>> {
    cfg.validate()?;
    let mut rng = seeded(cfg.seed, STREAM_SYNTH);
    let first_noise = cfg.classes * cfg.signal_bigrams_per_class * 2;
    let noise_ids: Vec<usize> = (first_noise..cfg.vocab_size).collect();
    let weights: Vec<f64> = (0..noise_ids.len()).map(|r| 1.0 / (r as f64 + 1.0)).collect();
    let noise = WeightedIndex::new(&weights).expect("positive weights");

    let mut docs = Vec::with_capacity(cfg.classes * cfg.docs_per_class);
    for label in MoodLabel::ALL {
        let bigrams = signal_bigrams(cfg, label);
        for i in 0..cfg.docs_per_class {
            let mut tokens: Vec<String> = (0..cfg.doc_len)
                .map(|_| token_name(noise_ids[noise.sample(&mut rng)]))
                .collect();
            let mut used = vec![false; cfg.doc_len];
            for (a, b) in &bigrams {
                if !rng.gen_bool(1.0 - cfg.noise_prob) {
                    continue;
                }
                let free: Vec<usize> = (0..cfg.doc_len - 1).filter(|&p| !used[p] && !used[p + 1]).collect();
                let p = free[rng.gen_range(0..free.len())];
                used[p] = true;
                used[p + 1] = true;
                tokens[p] = a.clone();
                tokens[p + 1] = b.clone();
            }
            docs.push(LyricDocument::from_tokens(
                format!("syn-{}-{i:05}", label.code()),
                tokens,
                Some(label),
            ));
        }
    }
    Ok(docs)
}
