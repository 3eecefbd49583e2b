//! Flat `key = value` run configuration shared by every subcommand.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::corpus::{SegmentMode, SyntheticConfig};
use crate::embeddings::CbowConfig;
use crate::error::{Error, Result};
use crate::features::LiwcConfig;
use crate::nn::{BranchOrder, CnnConfig, RecurrentConfig, TrainConfig};
use crate::svm::SvmConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Root of all randomness: splits, synthesis, initialization, training.
    pub seed: u64,
    pub max_len: usize,
    pub segment_mode: SegmentMode,
    pub test_fraction: f64,
    /// Minimum count for the tf-idf vocabulary.
    pub vocab_min_count: u64,
    pub synth: SyntheticConfig,
    pub cbow: CbowConfig,
    pub train: TrainConfig,
    pub cnn: CnnConfig,
    pub rnn_hidden: usize,
    pub svm: SvmConfig<f64>,
    pub liwc: LiwcConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            max_len: 100,
            segment_mode: SegmentMode::Lexicon,
            test_fraction: 0.1,
            vocab_min_count: 1,
            synth: SyntheticConfig::default(),
            cbow: CbowConfig::default(),
            train: TrainConfig::default(),
            cnn: CnnConfig::default(),
            rnn_hidden: 128,
            svm: SvmConfig::default(),
            liwc: LiwcConfig::default(),
        }
    }
}

fn parse<V: FromStr>(key: &str, value: &str) -> Result<V> {
    value
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("invalid value {value:?} for `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::InvalidArgument(format!("invalid value {value:?} for `{key}`"))),
    }
}

fn parse_optional(key: &str, value: &str) -> Result<Option<f64>> {
    match value {
        "none" | "off" | "auto" => Ok(None),
        v => parse(key, v).map(Some),
    }
}

fn show_optional(v: Option<f64>, none: &str) -> String {
    v.map_or_else(|| none.to_string(), |x| x.to_string())
}

impl RunConfig {
    /// Every key with its current value, in a fixed order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let widths = self
            .cnn
            .widths
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join(",");
        vec![
            ("seed", self.seed.to_string()),
            ("max_len", self.max_len.to_string()),
            ("segment.mode", self.segment_mode.to_string()),
            ("split.test_fraction", self.test_fraction.to_string()),
            ("vocab.min_count", self.vocab_min_count.to_string()),
            ("synth.docs_per_class", self.synth.docs_per_class.to_string()),
            ("synth.vocab_size", self.synth.vocab_size.to_string()),
            ("synth.signal_bigrams", self.synth.signal_bigrams_per_class.to_string()),
            ("synth.doc_len", self.synth.doc_len.to_string()),
            ("synth.noise", self.synth.noise_prob.to_string()),
            ("cbow.dim", self.cbow.dim.to_string()),
            ("cbow.window", self.cbow.window.to_string()),
            ("cbow.negatives", self.cbow.negatives.to_string()),
            ("cbow.epochs", self.cbow.epochs.to_string()),
            ("cbow.lr_start", self.cbow.lr_start.to_string()),
            ("cbow.lr_end", self.cbow.lr_end.to_string()),
            ("cbow.min_count", self.cbow.min_count.to_string()),
            ("cbow.subsample", show_optional(self.cbow.subsample, "off")),
            ("cbow.dynamic_window", self.cbow.dynamic_window.to_string()),
            ("train.epochs", self.train.epochs.to_string()),
            ("train.batch_size", self.train.batch_size.to_string()),
            ("train.lr", self.train.lr.to_string()),
            ("train.l2", self.train.l2.to_string()),
            ("train.beta1", self.train.beta1.to_string()),
            ("train.beta2", self.train.beta2.to_string()),
            ("train.adam_eps", self.train.adam_eps.to_string()),
            ("train.shuffle", self.train.shuffle.to_string()),
            ("train.clip", show_optional(self.train.clip, "off")),
            ("cnn.widths", widths),
            ("cnn.filters", self.cnn.filters.to_string()),
            ("cnn.dropout", self.cnn.dropout.to_string()),
            ("cnn.order", self.cnn.order.as_str().to_string()),
            ("cnn.bn_momentum", self.cnn.bn_momentum.to_string()),
            ("cnn.bn_eps", self.cnn.bn_eps.to_string()),
            ("rnn.hidden", self.rnn_hidden.to_string()),
            ("svm.c", self.svm.c.to_string()),
            ("svm.gamma", show_optional(self.svm.gamma, "auto")),
            ("svm.tol", self.svm.tol.to_string()),
            ("svm.max_passes", self.svm.max_passes.to_string()),
            ("liwc.long_word_chars", self.liwc.long_word_chars.to_string()),
        ]
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "seed" => self.seed = parse(key, v)?,
            "max_len" => self.max_len = parse(key, v)?,
            "segment.mode" => {
                self.segment_mode = v
                    .parse()
                    .map_err(|_| Error::InvalidArgument(format!("invalid value {v:?} for `{key}`")))?
            }
            "split.test_fraction" => self.test_fraction = parse(key, v)?,
            "vocab.min_count" => self.vocab_min_count = parse(key, v)?,
            "synth.docs_per_class" => self.synth.docs_per_class = parse(key, v)?,
            "synth.vocab_size" => self.synth.vocab_size = parse(key, v)?,
            "synth.signal_bigrams" => self.synth.signal_bigrams_per_class = parse(key, v)?,
            "synth.doc_len" => self.synth.doc_len = parse(key, v)?,
            "synth.noise" => self.synth.noise_prob = parse(key, v)?,
            "cbow.dim" => self.cbow.dim = parse(key, v)?,
            "cbow.window" => self.cbow.window = parse(key, v)?,
            "cbow.negatives" => self.cbow.negatives = parse(key, v)?,
            "cbow.epochs" => self.cbow.epochs = parse(key, v)?,
            "cbow.lr_start" => self.cbow.lr_start = parse(key, v)?,
            "cbow.lr_end" => self.cbow.lr_end = parse(key, v)?,
            "cbow.min_count" => self.cbow.min_count = parse(key, v)?,
            "cbow.subsample" => self.cbow.subsample = parse_optional(key, v)?,
            "cbow.dynamic_window" => self.cbow.dynamic_window = parse_bool(key, v)?,
            "train.epochs" => self.train.epochs = parse(key, v)?,
            "train.batch_size" => self.train.batch_size = parse(key, v)?,
            "train.lr" => self.train.lr = parse(key, v)?,
            "train.l2" => self.train.l2 = parse(key, v)?,
            "train.beta1" => self.train.beta1 = parse(key, v)?,
            "train.beta2" => self.train.beta2 = parse(key, v)?,
            "train.adam_eps" => self.train.adam_eps = parse(key, v)?,
            "train.shuffle" => self.train.shuffle = parse_bool(key, v)?,
            "train.clip" => self.train.clip = parse_optional(key, v)?,
            "cnn.widths" => {
                self.cnn.widths = v
                    .split(',')
                    .map(|w| parse(key, w.trim()))
                    .collect::<Result<Vec<usize>>>()?
            }
            "cnn.filters" => self.cnn.filters = parse(key, v)?,
            "cnn.dropout" => self.cnn.dropout = parse(key, v)?,
            "cnn.order" => {
                self.cnn.order = v.parse::<BranchOrder>().map_err(Error::InvalidArgument)?;
            }
            "cnn.bn_momentum" => self.cnn.bn_momentum = parse(key, v)?,
            "cnn.bn_eps" => self.cnn.bn_eps = parse(key, v)?,
            "rnn.hidden" => self.rnn_hidden = parse(key, v)?,
            "svm.c" => self.svm.c = parse(key, v)?,
            "svm.gamma" => self.svm.gamma = parse_optional(key, v)?,
            "svm.tol" => self.svm.tol = parse(key, v)?,
            "svm.max_passes" => self.svm.max_passes = parse(key, v)?,
            "liwc.long_word_chars" => self.liwc.long_word_chars = parse(key, v)?,
            other => return Err(Error::InvalidArgument(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines; blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(i + 1, format!("expected key = value, got {line:?}")))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    /// `key=value` override as given on the command line.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| Error::InvalidArgument(format!("expected key=value, got {assignment:?}")))?;
        self.set(k, v)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    pub fn synthetic(&self) -> SyntheticConfig {
        SyntheticConfig {
            seed: self.seed,
            ..self.synth.clone()
        }
    }

    pub fn cbow(&self) -> CbowConfig {
        CbowConfig {
            seed: self.seed,
            ..self.cbow.clone()
        }
    }

    pub fn train(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            ..self.train.clone()
        }
    }

    pub fn svm(&self) -> SvmConfig<f64> {
        SvmConfig {
            seed: self.seed,
            ..self.svm.clone()
        }
    }

    pub fn cnn(&self, embed_dim: usize) -> CnnConfig {
        CnnConfig {
            max_len: self.max_len,
            embed_dim,
            ..self.cnn.clone()
        }
    }

    pub fn recurrent(&self, embed_dim: usize) -> RecurrentConfig {
        RecurrentConfig {
            embed_dim,
            hidden: self.rnn_hidden,
            classes: 4,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.apply_text("seed = 9\n# comment\ncnn.widths = 2,3\ntrain.clip = off  # trailing\n\nsvm.gamma=0.5\n")
            .unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.cnn.widths, vec![2, 3]);
        assert_eq!(cfg.train.clip, None);
        assert_eq!(cfg.svm.gamma, Some(0.5));
        let mut back = RunConfig::default();
        back.apply_text(&cfg.to_text()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn defaults_round_trip_and_unknown_keys_fail() {
        let mut back = RunConfig::default();
        back.apply_text(&RunConfig::default().to_text()).unwrap();
        assert_eq!(back, RunConfig::default());
        assert!(RunConfig::default().set("cnn.filter", "3").is_err());
        assert!(RunConfig::default().set("seed", "x").is_err());
        assert!(RunConfig::default().apply_text("seed 3").is_err());
    }

    #[test]
    fn seed_flows_everywhere() {
        let mut cfg = RunConfig::default();
        cfg.apply_override("seed=42").unwrap();
        assert_eq!(cfg.synthetic().seed, 42);
        assert_eq!(cfg.cbow().seed, 42);
        assert_eq!(cfg.train().seed, 42);
        assert_eq!(cfg.svm().seed, 42);
    }
}
