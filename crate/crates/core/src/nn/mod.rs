//! Neural sequence classifiers over frozen embeddings.

mod adam;
mod cnn;
pub mod gradcheck;
mod layers;
mod recurrent;
mod tensor;
mod train;

pub use adam::{adam_update, clip_global_norm, Adam, AdamConfig};
pub use cnn::{BranchOrder, CnnCache, CnnClassifier, CnnConfig};
pub use layers::{
    batchnorm_forward, conv1d_forward, dense_forward, dropout_forward, dropout_mask, global_max_pool,
    global_max_pool_backward, set_tanh_derivative_fault, softmax_cross_entropy, softmax_rows, tanh_backward,
    tanh_forward, BatchNorm, BatchNormCache, Conv1d, Dense,
};
pub use recurrent::{LstmCache, LstmClassifier, RecurrentConfig, RnnCache, RnnClassifier};
pub use tensor::Tensor;
pub use train::{fit, predict, EpochStats, Prediction, TrainConfig, TrainReport};

use crate::corpus::PAD;
use crate::embeddings::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::modelfile::ModelFile;
use crate::rng::Rng;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// Read-only view of one trainable tensor.
#[derive(Debug)]
pub struct Param<'a, T> {
    pub name: String,
    pub tensor: &'a Tensor<T>,
    /// Whether L2 decay applies (weights yes, biases and BN no).
    pub decay: bool,
}

pub trait Parameterized<T: Scalar> {
    fn params(&self) -> Vec<Param<'_, T>>;

    /// Same order as [`Parameterized::params`].
    fn params_mut(&mut self) -> Vec<&mut Tensor<T>>;

    fn l2_penalty(&self, lambda: T) -> T {
        let sq: T = self
            .params()
            .iter()
            .filter(|p| p.decay)
            .map(|p| p.tensor.squared_norm())
            .sum();
        lambda * sq / T::lit(2.0)
    }
}

/// A mini-batch of embedded sequences, each `len × dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch<T> {
    pub inputs: Vec<Tensor<T>>,
    /// Positions up to and including the last non-PAD token, at least 1.
    pub lengths: Vec<usize>,
}

impl<T: Scalar> Batch<T> {
    pub fn new(inputs: Vec<Tensor<T>>, lengths: Vec<usize>) -> Result<Self> {
        if inputs.len() != lengths.len() {
            return Err(Error::LengthMismatch(inputs.len(), lengths.len()));
        }
        for (x, &l) in inputs.iter().zip(&lengths) {
            if l == 0 || l > x.rows() {
                return Err(Error::InvalidArgument(format!(
                    "sequence length {l} for {} rows",
                    x.rows()
                )));
            }
        }
        Ok(Self { inputs, lengths })
    }

    /// Looks up each index sequence in the (frozen) input vectors.
    pub fn from_indices(seqs: &[&[usize]], emb: &EmbeddingMatrix<T>) -> Result<Self> {
        let d = emb.dim();
        let mut inputs = Vec::with_capacity(seqs.len());
        let mut lengths = Vec::with_capacity(seqs.len());
        for seq in seqs {
            if seq.is_empty() {
                return Err(Error::InvalidArgument("empty index sequence".into()));
            }
            let mut data = Vec::with_capacity(seq.len() * d);
            for &i in seq.iter() {
                if i >= emb.rows() {
                    return Err(Error::InvalidArgument(format!(
                        "token index {i} outside embedding matrix of {} rows",
                        emb.rows()
                    )));
                }
                data.extend_from_slice(emb.input_row(i));
            }
            inputs.push(Tensor::from_vec(&[seq.len(), d], data)?);
            lengths.push(seq.iter().rposition(|&i| i != PAD).map_or(1, |p| p + 1));
        }
        Ok(Self { inputs, lengths })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

/// A classifier trainable by [`fit`].
pub trait SequenceModel<T: Scalar>: Parameterized<T> + Clone {
    type Cache;

    fn input_dim(&self) -> usize;

    fn classes(&self) -> usize;

    /// Recurrent models get gradient clipping during training.
    fn is_recurrent(&self) -> bool;

    /// Logits `N × classes`. Infer mode never touches `rng`.
    fn forward(&self, batch: &Batch<T>, mode: Mode, rng: &mut Rng) -> Result<(Tensor<T>, Self::Cache)>;

    /// Gradients congruent to [`Parameterized::params`].
    fn backward(&self, batch: &Batch<T>, cache: &Self::Cache, grad_logits: &Tensor<T>) -> Result<Vec<Tensor<T>>>;

    /// Applies state updates recorded by a train-mode forward (BN running stats).
    fn commit(&mut self, _cache: &Self::Cache) {}

    fn logits(&self, batch: &Batch<T>) -> Result<Tensor<T>> {
        let mut unused = crate::rng::seeded(0, 0);
        Ok(self.forward(batch, Mode::Infer, &mut unused)?.0)
    }

    fn write_into(&self, file: &mut ModelFile);
}

fn zero_grads<T: Scalar, M: Parameterized<T> + ?Sized>(model: &M) -> Vec<Tensor<T>> {
    model.params().iter().map(|p| Tensor::zeros(p.tensor.shape())).collect()
}

/// One of the three network architectures, as stored in a model file.
#[derive(Debug, Clone, PartialEq)]
pub enum NeuralModel<T> {
    Cnn(CnnClassifier<T>),
    Rnn(RnnClassifier<T>),
    Lstm(LstmClassifier<T>),
}

impl<T: Scalar> NeuralModel<T> {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Cnn(_) => "cnn",
            Self::Rnn(_) => "rnn",
            Self::Lstm(_) => "lstm",
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Self::Cnn(m) => m.input_dim(),
            Self::Rnn(m) => m.input_dim(),
            Self::Lstm(m) => m.input_dim(),
        }
    }

    pub fn fit(
        &mut self,
        data: &[(Vec<usize>, usize)],
        emb: &EmbeddingMatrix<T>,
        cfg: &TrainConfig,
    ) -> Result<TrainReport> {
        match self {
            Self::Cnn(m) => fit(m, data, emb, cfg),
            Self::Rnn(m) => fit(m, data, emb, cfg),
            Self::Lstm(m) => fit(m, data, emb, cfg),
        }
    }

    pub fn predict(
        &self,
        seqs: &[Vec<usize>],
        emb: &EmbeddingMatrix<T>,
        batch_size: usize,
    ) -> Result<Vec<Prediction<T>>> {
        match self {
            Self::Cnn(m) => predict(m, seqs, emb, batch_size),
            Self::Rnn(m) => predict(m, seqs, emb, batch_size),
            Self::Lstm(m) => predict(m, seqs, emb, batch_size),
        }
    }

    pub fn to_model_file(&self) -> ModelFile {
        let mut file = ModelFile::new(self.kind());
        match self {
            Self::Cnn(m) => m.write_into(&mut file),
            Self::Rnn(m) => m.write_into(&mut file),
            Self::Lstm(m) => m.write_into(&mut file),
        }
        file
    }

    pub fn from_model_file(file: &ModelFile) -> Result<Self> {
        match file.kind.as_str() {
            "cnn" => Ok(Self::Cnn(CnnClassifier::read_from(file)?)),
            "rnn" => Ok(Self::Rnn(RnnClassifier::read_from(file)?)),
            "lstm" => Ok(Self::Lstm(LstmClassifier::read_from(file)?)),
            other => Err(Error::ModelFormat(format!("not a neural model: {other}"))),
        }
    }
}

pub(crate) fn write_params<T: Scalar, M: Parameterized<T>>(model: &M, file: &mut ModelFile) {
    for p in model.params() {
        file.push_tensor(&p.name, p.tensor.shape(), p.tensor.data());
    }
}

pub(crate) fn read_params<T: Scalar, M: Parameterized<T>>(model: &mut M, file: &ModelFile) -> Result<()> {
    let names: Vec<(String, Vec<usize>)> = model
        .params()
        .iter()
        .map(|p| (p.name.clone(), p.tensor.shape().to_vec()))
        .collect();
    for ((name, shape), slot) in names.into_iter().zip(model.params_mut()) {
        let (_, values) = file.tensor::<T>(&name, Some(&shape))?;
        *slot = Tensor::from_vec(&shape, values)?;
    }
    Ok(())
}
