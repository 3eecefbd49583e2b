use std::fmt::Write as _;

use rand::seq::SliceRandom;

use crate::corpus::MoodLabel;
use crate::embeddings::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::rng::{seeded, STREAM_NN_TRAIN};
use crate::scalar::Scalar;
use crate::svm::argmax_first;

use super::adam::{clip_global_norm, Adam, AdamConfig};
use super::layers::{softmax_cross_entropy, softmax_rows};
use super::{Batch, Mode, SequenceModel};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub lr: f64,
    pub l2: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    pub shuffle: bool,
    /// Global gradient-norm limit, applied to recurrent models only.
    pub clip: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 100,
            epochs: 10,
            lr: 1e-3,
            l2: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            seed: 1,
            shuffle: true,
            clip: Some(5.0),
        }
    }
}

impl TrainConfig {
    fn adam<T: Scalar>(&self) -> AdamConfig<T> {
        AdamConfig {
            lr: T::lit(self.lr),
            beta1: T::lit(self.beta1),
            beta2: T::lit(self.beta2),
            eps: T::lit(self.adam_eps),
            l2: T::lit(self.l2),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean cross-entropy plus L2 penalty over the epoch's batches.
    pub loss: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
}

impl TrainReport {
    /// `epoch,loss,accuracy` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,loss,accuracy\n");
        for e in &self.epochs {
            let _ = writeln!(s, "{},{:.10},{:.6}", e.epoch, e.loss, e.accuracy);
        }
        s
    }
}

/// Mini-batch Adam training over frozen embeddings. `data` holds encoded
/// sequences with class codes.
pub fn fit<T: Scalar, M: SequenceModel<T>>(
    model: &mut M,
    data: &[(Vec<usize>, usize)],
    emb: &EmbeddingMatrix<T>,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if cfg.batch_size == 0 {
        return Err(Error::InvalidArgument("batch_size must be at least 1".into()));
    }
    if emb.dim() != model.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.input_dim(),
            got: emb.dim(),
        });
    }
    if let Some((_, bad)) = data.iter().find(|(_, l)| *l >= model.classes()) {
        return Err(Error::InvalidArgument(format!("class code {bad} out of range")));
    }
    let mut adam = Adam::new(cfg.adam::<T>(), &model.params());
    let l2 = T::lit(cfg.l2);
    let clip = cfg.clip.filter(|_| model.is_recurrent()).map(T::lit);
    let mut rng = seeded(cfg.seed, STREAM_NN_TRAIN);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut report = TrainReport::default();
    for epoch in 1..=cfg.epochs {
        if cfg.shuffle {
            order.shuffle(&mut rng);
        }
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let seqs: Vec<&[usize]> = chunk.iter().map(|&i| data[i].0.as_slice()).collect();
            let labels: Vec<usize> = chunk.iter().map(|&i| data[i].1).collect();
            let batch = Batch::from_indices(&seqs, emb)?;
            let (logits, cache) = model.forward(&batch, Mode::Train, &mut rng)?;
            let (ce, grad, _) = softmax_cross_entropy(&logits, &labels)?;
            let loss = ce + model.l2_penalty(l2);
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss);
            }
            loss_sum += loss.as_f64() * chunk.len() as f64;
            correct += labels
                .iter()
                .enumerate()
                .filter(|&(i, &l)| argmax_first(logits.row(i)) == l)
                .count();
            let mut grads = model.backward(&batch, &cache, &grad)?;
            if let Some(max) = clip {
                clip_global_norm(&mut grads, max);
            }
            model.commit(&cache);
            adam.step(model.params_mut(), &grads)?;
        }
        report.epochs.push(EpochStats {
            epoch,
            loss: loss_sum / data.len() as f64,
            accuracy: correct as f64 / data.len() as f64,
        });
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction<T> {
    /// Arg-max class code, ties to the smallest.
    pub class: usize,
    pub probs: Vec<T>,
}

impl<T> Prediction<T> {
    pub fn label(&self) -> Option<MoodLabel> {
        MoodLabel::from_code(self.class)
    }
}

/// Infer-mode predictions, processed in chunks of `batch_size`.
pub fn predict<T: Scalar, M: SequenceModel<T>>(
    model: &M,
    seqs: &[Vec<usize>],
    emb: &EmbeddingMatrix<T>,
    batch_size: usize,
) -> Result<Vec<Prediction<T>>> {
    if emb.dim() != model.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.input_dim(),
            got: emb.dim(),
        });
    }
    let mut out = Vec::with_capacity(seqs.len());
    for chunk in seqs.chunks(batch_size.max(1)) {
        let refs: Vec<&[usize]> = chunk.iter().map(Vec::as_slice).collect();
        let logits = model.logits(&Batch::from_indices(&refs, emb)?)?;
        let probs = softmax_rows(&logits);
        for i in 0..chunk.len() {
            out.push(Prediction {
                class: argmax_first(logits.row(i)),
                probs: probs.row(i).to_vec(),
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Vocabulary;
    use crate::nn::{CnnClassifier, CnnConfig, Parameterized, RecurrentConfig, RnnClassifier};

    fn setup() -> (EmbeddingMatrix<f64>, Vec<(Vec<usize>, usize)>) {
        let vocab = Vocabulary::from_ranked((0..8).map(|i| (format!("t{i}"), 10 - i as u64)));
        let emb = EmbeddingMatrix::initialize(vocab, 6, 3);
        let data = (0..12)
            .map(|i| {
                let c = i % 4;
                (vec![2 + c, 2 + c, 6 + c % 2, 2 + c, 0, 0], c)
            })
            .collect();
        (emb, data)
    }

    fn tiny_cnn() -> CnnClassifier<f64> {
        CnnClassifier::new(
            CnnConfig {
                max_len: 6,
                embed_dim: 6,
                widths: vec![2, 3],
                filters: 4,
                ..CnnConfig::default()
            },
            1,
        )
        .unwrap()
    }

    #[test]
    fn zero_epochs_and_zero_lr_leave_parameters() {
        let (emb, data) = setup();
        let mut m = tiny_cnn();
        let before = m.clone();
        fit(
            &mut m,
            &data,
            &emb,
            &TrainConfig {
                epochs: 0,
                ..TrainConfig::default()
            },
        )
        .unwrap();
        assert_eq!(m, before);
        let cfg = TrainConfig {
            epochs: 3,
            lr: 0.0,
            batch_size: 5,
            ..TrainConfig::default()
        };
        fit(&mut m, &data, &emb, &cfg).unwrap();
        for (a, b) in m.params().iter().zip(before.params()) {
            assert_eq!(a.tensor, b.tensor);
        }
    }

    #[test]
    fn empty_dataset_rejected() {
        let (emb, _) = setup();
        let mut m = tiny_cnn();
        assert!(matches!(
            fit(&mut m, &[], &emb, &TrainConfig::default()),
            Err(Error::EmptyDataset)
        ));
    }

    #[test]
    fn fit_is_reproducible_and_learns() {
        let (emb, data) = setup();
        let cfg = TrainConfig {
            epochs: 30,
            batch_size: 4,
            lr: 0.01,
            ..TrainConfig::default()
        };
        let mut a = RnnClassifier::<f64>::new(
            RecurrentConfig {
                embed_dim: 6,
                hidden: 8,
                classes: 4,
            },
            2,
        )
        .unwrap();
        let mut b = a.clone();
        let ra = fit(&mut a, &data, &emb, &cfg).unwrap();
        let rb = fit(&mut b, &data, &emb, &cfg).unwrap();
        assert_eq!(ra, rb);
        assert_eq!(a, b);
        assert!(ra.epochs.last().unwrap().loss < ra.epochs[0].loss);
    }

    #[test]
    fn predictions_ignore_batch_partitioning() {
        let (emb, data) = setup();
        let mut m = tiny_cnn();
        let cfg = TrainConfig {
            epochs: 2,
            batch_size: 4,
            ..TrainConfig::default()
        };
        fit(&mut m, &data, &emb, &cfg).unwrap();
        let seqs: Vec<Vec<usize>> = data.iter().map(|(s, _)| s.clone()).collect();
        assert_eq!(
            predict(&m, &seqs, &emb, 1).unwrap(),
            predict(&m, &seqs, &emb, 100).unwrap()
        );
    }

    #[test]
    fn constant_model_predicts_first_class() {
        let (emb, data) = setup();
        let mut m = tiny_cnn();
        m.head.weight = crate::nn::Tensor::zeros(m.head.weight.shape());
        let seqs: Vec<Vec<usize>> = data.iter().map(|(s, _)| s.clone()).collect();
        let preds = predict(&m, &seqs, &emb, 5).unwrap();
        assert!(preds.iter().all(|p| p.label() == Some(MoodLabel::Happiness)));
    }
}
