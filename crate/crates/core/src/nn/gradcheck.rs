//! Central-difference gradient checks for layers, models and CBOW.

use std::fmt;

use rand::seq::index::sample;

use crate::corpus::Vocabulary;
use crate::embeddings::{cbow_gradient, cbow_loss, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::rng::{seeded, Rng};

use super::layers::{
    global_max_pool, global_max_pool_backward, softmax_cross_entropy, tanh_backward, tanh_forward, uniform, BatchNorm,
    Conv1d, Dense,
};
use super::{
    Batch, BranchOrder, CnnClassifier, CnnConfig, LstmClassifier, Mode, Param, Parameterized, RecurrentConfig,
    RnnClassifier, SequenceModel, Tensor,
};

/// Error bound for layers checked in isolation.
pub const LAYER_THRESHOLD: f64 = 1e-6;
/// Error bound for full models.
pub const MODEL_THRESHOLD: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckOptions {
    pub eps: f64,
    /// Tensors larger than this are checked on a random subset of this size.
    pub samples_per_tensor: usize,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            eps: 1e-5,
            samples_per_tensor: 200,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorCheck {
    pub name: String,
    pub checked: usize,
    pub max_rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub component: String,
    pub threshold: f64,
    pub tensors: Vec<TensorCheck>,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.tensors.iter().map(|t| t.max_rel_error).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.max_rel_error() < self.threshold
    }
}

impl fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} max_rel_error={:.3e} threshold={:.0e}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.component,
            self.max_rel_error(),
            self.threshold
        )
    }
}

/// `|a − n| / max(1e-12, |a| + |n|)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-12)
}

/// Compares `analytic` against central differences of `loss` for every
/// parameter tensor of `model` (or a random subset of entries).
pub fn grad_check<M: Parameterized<f64>>(
    component: &str,
    threshold: f64,
    model: &mut M,
    analytic: &[Tensor<f64>],
    mut loss: impl FnMut(&M) -> Result<f64>,
    opts: &GradCheckOptions,
) -> Result<GradCheckReport> {
    let names: Vec<String> = model.params().iter().map(|p| p.name.clone()).collect();
    if names.len() != analytic.len() {
        return Err(Error::LengthMismatch(names.len(), analytic.len()));
    }
    let mut rng = seeded(opts.seed, 0x60);
    let mut tensors = Vec::with_capacity(names.len());
    for (k, name) in names.into_iter().enumerate() {
        let len = analytic[k].len();
        let indices: Vec<usize> = if len <= opts.samples_per_tensor {
            (0..len).collect()
        } else {
            let mut v = sample(&mut rng, len, opts.samples_per_tensor).into_vec();
            v.sort_unstable();
            v
        };
        let mut worst = 0.0f64;
        for &i in &indices {
            let orig = model.params_mut()[k].data()[i];
            model.params_mut()[k].data_mut()[i] = orig + opts.eps;
            let plus = loss(model)?;
            model.params_mut()[k].data_mut()[i] = orig - opts.eps;
            let minus = loss(model)?;
            model.params_mut()[k].data_mut()[i] = orig;
            if !plus.is_finite() || !minus.is_finite() {
                return Err(Error::NonFiniteLoss);
            }
            let numeric = (plus - minus) / (2.0 * opts.eps);
            worst = worst.max(relative_error(analytic[k].data()[i], numeric));
        }
        tensors.push(TensorCheck {
            name,
            checked: indices.len(),
            max_rel_error: worst,
        });
    }
    Ok(GradCheckReport {
        component: component.to_string(),
        threshold,
        tensors,
    })
}

/// Free-standing named tensors, used to check layers in isolation.
#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub names: Vec<String>,
    pub tensors: Vec<Tensor<f64>>,
}

impl Probe {
    pub fn new(named: Vec<(&str, Tensor<f64>)>) -> Self {
        let (names, tensors) = named.into_iter().map(|(n, t)| (n.to_string(), t)).unzip();
        Self { names, tensors }
    }
}

impl Parameterized<f64> for Probe {
    fn params(&self) -> Vec<Param<'_, f64>> {
        self.names
            .iter()
            .zip(&self.tensors)
            .map(|(n, t)| Param {
                name: n.clone(),
                tensor: t,
                decay: false,
            })
            .collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<f64>> {
        self.tensors.iter_mut().collect()
    }
}

fn rand_t(shape: &[usize], rng: &mut Rng) -> Tensor<f64> {
    uniform(shape, 1.0, rng)
}

fn weighted_sum(r: &Tensor<f64>, out: &[f64]) -> f64 {
    r.data().iter().zip(out).map(|(a, b)| a * b).sum()
}

/// A linear model under squared loss, whose central difference is exact up
/// to rounding.
pub fn check_linear_quadratic(opts: &GradCheckOptions) -> Result<GradCheckReport> {
    let mut rng = seeded(opts.seed, 1);
    let x = rand_t(&[6, 4], &mut rng);
    let y = rand_t(&[6], &mut rng);
    let mut probe = Probe::new(vec![("w", rand_t(&[4], &mut rng)), ("b", rand_t(&[1], &mut rng))]);
    let loss = |p: &Probe| -> Result<f64> {
        let (w, b) = (p.tensors[0].data(), p.tensors[1].data()[0]);
        Ok((0..6)
            .map(|i| {
                let r: f64 = x.row(i).iter().zip(w).map(|(a, c)| a * c).sum::<f64>() + b - y.data()[i];
                0.5 * r * r
            })
            .sum())
    };
    let (w, b) = (probe.tensors[0].data().to_vec(), probe.tensors[1].data()[0]);
    let mut gw = vec![0.0; 4];
    let mut gb = 0.0;
    for i in 0..6 {
        let r: f64 = x.row(i).iter().zip(&w).map(|(a, c)| a * c).sum::<f64>() + b - y.data()[i];
        gw.iter_mut().zip(x.row(i)).for_each(|(g, a)| *g += r * a);
        gb += r;
    }
    let analytic = vec![Tensor::from_vec(&[4], gw)?, Tensor::from_vec(&[1], vec![gb])?];
    grad_check("linear-quadratic", 1e-9, &mut probe, &analytic, loss, opts)
}

/// Each layer alone under `L = Σ R ⊙ output` for a fixed random `R`.
pub fn check_layers(opts: &GradCheckOptions) -> Result<Vec<GradCheckReport>> {
    let mut rng = seeded(opts.seed, 2);
    let mut reports = Vec::new();

    // conv1d
    {
        let conv = Conv1d::<f64>::new(3, 3, 5, &mut rng);
        let mut probe = Probe::new(vec![
            ("input", rand_t(&[7, 5], &mut rng)),
            ("weight", conv.weight.clone()),
            ("bias", rand_t(&[3], &mut rng)),
        ]);
        let r = rand_t(&[5, 3], &mut rng);
        let layer = |p: &Probe| Conv1d {
            weight: p.tensors[1].clone(),
            bias: p.tensors[2].clone(),
            ..conv.clone()
        };
        let c = layer(&probe);
        let mut grads = vec![Tensor::zeros(&[7, 5]), Tensor::zeros(&[3, 3, 5]), Tensor::zeros(&[3])];
        let (gx, rest) = grads.split_at_mut(1);
        let (gw, gb) = rest.split_at_mut(1);
        c.backward(
            &probe.tensors[0],
            r.data(),
            gw[0].data_mut(),
            gb[0].data_mut(),
            Some(gx[0].data_mut()),
        );
        let loss = |p: &Probe| Ok(weighted_sum(&r, layer(p).forward(&p.tensors[0])?.data()));
        reports.push(grad_check("conv1d", LAYER_THRESHOLD, &mut probe, &grads, loss, opts)?);
    }

    // tanh
    {
        let mut probe = Probe::new(vec![("input", rand_t(&[4, 6], &mut rng))]);
        let r = rand_t(&[4, 6], &mut rng);
        let y = tanh_forward(&probe.tensors[0]);
        let g = Tensor::from_vec(&[4, 6], tanh_backward(y.data(), r.data()))?;
        let loss = |p: &Probe| Ok(weighted_sum(&r, tanh_forward(&p.tensors[0]).data()));
        reports.push(grad_check("tanh", LAYER_THRESHOLD, &mut probe, &[g], loss, opts)?);
    }

    // batch norm, train mode
    {
        let mut probe = Probe::new(vec![
            ("input", rand_t(&[10, 3], &mut rng)),
            ("gamma", rand_t(&[3], &mut rng)),
            ("beta", rand_t(&[3], &mut rng)),
        ]);
        let r = rand_t(&[10, 3], &mut rng);
        let layer = |p: &Probe| {
            let mut bn = BatchNorm::new(3, 0.9, 1e-5);
            bn.gamma = p.tensors[1].clone();
            bn.beta = p.tensors[2].clone();
            bn
        };
        let bn = layer(&probe);
        let (_, cache) = bn.forward_train(probe.tensors[0].data())?;
        let mut gg = Tensor::zeros(&[3]);
        let mut gb = Tensor::zeros(&[3]);
        let gx = bn.backward(&cache, r.data(), gg.data_mut(), gb.data_mut());
        let grads = vec![Tensor::from_vec(&[10, 3], gx)?, gg, gb];
        let loss = |p: &Probe| Ok(weighted_sum(&r, &layer(p).forward_train(p.tensors[0].data())?.0));
        reports.push(grad_check(
            "batchnorm",
            LAYER_THRESHOLD,
            &mut probe,
            &grads,
            loss,
            opts,
        )?);
    }

    // global max pool
    {
        let mut probe = Probe::new(vec![("input", rand_t(&[7, 4], &mut rng))]);
        let r = rand_t(&[4], &mut rng);
        let (_, arg) = global_max_pool(probe.tensors[0].data(), 4);
        let g = Tensor::from_vec(&[7, 4], global_max_pool_backward(r.data(), &arg, 7))?;
        let loss = |p: &Probe| Ok(weighted_sum(&r, &global_max_pool(p.tensors[0].data(), 4).0));
        reports.push(grad_check("maxpool", LAYER_THRESHOLD, &mut probe, &[g], loss, opts)?);
    }

    // dropout with a frozen mask
    {
        let mut probe = Probe::new(vec![("input", rand_t(&[5, 4], &mut rng))]);
        let r = rand_t(&[5, 4], &mut rng);
        let mask: Vec<f64> = super::layers::dropout_mask(20, 0.5, &mut rng);
        let g = Tensor::from_vec(&[5, 4], r.data().iter().zip(&mask).map(|(a, m)| a * m).collect())?;
        let loss = |p: &Probe| {
            let out: Vec<f64> = p.tensors[0].data().iter().zip(&mask).map(|(a, m)| a * m).collect();
            Ok(weighted_sum(&r, &out))
        };
        reports.push(grad_check("dropout", LAYER_THRESHOLD, &mut probe, &[g], loss, opts)?);
    }

    // dense
    {
        let d = Dense::<f64>::new(5, 4, &mut rng);
        let mut probe = Probe::new(vec![
            ("input", rand_t(&[3, 5], &mut rng)),
            ("weight", d.weight.clone()),
            ("bias", rand_t(&[4], &mut rng)),
        ]);
        let r = rand_t(&[3, 4], &mut rng);
        let layer = |p: &Probe| Dense {
            weight: p.tensors[1].clone(),
            bias: p.tensors[2].clone(),
        };
        let mut gw = Tensor::zeros(&[4, 5]);
        let mut gb = Tensor::zeros(&[4]);
        let gx = layer(&probe).backward(probe.tensors[0].data(), r.data(), gw.data_mut(), gb.data_mut());
        let grads = vec![Tensor::from_vec(&[3, 5], gx)?, gw, gb];
        let loss = |p: &Probe| Ok(weighted_sum(&r, layer(p).forward(&p.tensors[0])?.data()));
        reports.push(grad_check("dense", LAYER_THRESHOLD, &mut probe, &grads, loss, opts)?);
    }

    // softmax cross-entropy
    {
        let mut probe = Probe::new(vec![("logits", uniform(&[3, 4], 2.0, &mut rng))]);
        let labels = [0, 3, 1];
        let (_, g, _) = softmax_cross_entropy(&probe.tensors[0], &labels)?;
        let loss = |p: &Probe| Ok(softmax_cross_entropy(&p.tensors[0], &labels)?.0);
        reports.push(grad_check("softmax-ce", LAYER_THRESHOLD, &mut probe, &[g], loss, opts)?);
    }

    Ok(reports)
}

fn model_check<M: SequenceModel<f64>>(
    component: &str,
    model: &mut M,
    batch: &Batch<f64>,
    labels: &[usize],
    opts: &GradCheckOptions,
) -> Result<GradCheckReport> {
    let rng_for_loss = || seeded(opts.seed, 0x61);
    let (logits, cache) = model.forward(batch, Mode::Train, &mut rng_for_loss())?;
    let (_, grad, _) = softmax_cross_entropy(&logits, labels)?;
    let analytic = model.backward(batch, &cache, &grad)?;
    let loss = |m: &M| {
        let (logits, _) = m.forward(batch, Mode::Train, &mut rng_for_loss())?;
        Ok(softmax_cross_entropy(&logits, labels)?.0)
    };
    grad_check(component, MODEL_THRESHOLD, model, &analytic, loss, opts)
}

fn random_batch(n: usize, len: usize, dim: usize, lengths: Vec<usize>, rng: &mut Rng) -> Result<Batch<f64>> {
    Batch::new((0..n).map(|_| rand_t(&[len, dim], rng)).collect(), lengths)
}

/// CNN with `T=7, D=5, F=3`, widths {2, 3}, two examples.
pub fn check_cnn(opts: &GradCheckOptions) -> Result<GradCheckReport> {
    let cfg = CnnConfig {
        max_len: 7,
        embed_dim: 5,
        widths: vec![2, 3],
        filters: 3,
        order: BranchOrder::ConvTanhBn,
        ..CnnConfig::default()
    };
    let mut model = CnnClassifier::new(cfg, opts.seed)?;
    let mut rng = seeded(opts.seed, 3);
    for br in &mut model.branches {
        br.conv.bias = rand_t(&[3], &mut rng);
        br.bn.gamma = uniform(&[3], 0.5, &mut rng).map(|v| v + 1.0);
        br.bn.beta = rand_t(&[3], &mut rng);
    }
    model.head.bias = rand_t(&[4], &mut rng);
    let batch = random_batch(2, 7, 5, vec![7, 7], &mut rng)?;
    model_check("cnn", &mut model, &batch, &[1, 2], opts)
}

fn recurrent_cfg() -> RecurrentConfig {
    RecurrentConfig {
        embed_dim: 4,
        hidden: 3,
        classes: 4,
    }
}

/// Elman RNN with `T=5, D=4, H=3`.
pub fn check_rnn(opts: &GradCheckOptions) -> Result<GradCheckReport> {
    let mut model = RnnClassifier::new(recurrent_cfg(), opts.seed)?;
    let mut rng = seeded(opts.seed, 4);
    model.b = rand_t(&[3], &mut rng);
    let batch = random_batch(2, 5, 4, vec![5, 4], &mut rng)?;
    model_check("rnn", &mut model, &batch, &[0, 3], opts)
}

/// LSTM with `T=5, D=4, H=3`.
pub fn check_lstm(opts: &GradCheckOptions) -> Result<GradCheckReport> {
    let mut model = LstmClassifier::new(recurrent_cfg(), opts.seed)?;
    let mut rng = seeded(opts.seed, 5);
    model.b = uniform(&[12], 0.5, &mut rng);
    let batch = random_batch(2, 5, 4, vec![5, 4], &mut rng)?;
    model_check("lstm", &mut model, &batch, &[2, 1], opts)
}

/// CBOW negative-sampling loss on a small vocabulary with fixed negatives.
pub fn check_cbow(opts: &GradCheckOptions) -> Result<GradCheckReport> {
    let vocab = Vocabulary::from_ranked((0..8).map(|i| (format!("w{i}"), 20 - i as u64)));
    let dim = 6;
    let rows = vocab.len();
    let mut rng = seeded(opts.seed, 6);
    let base = EmbeddingMatrix::<f64>::zeros(vocab, dim);
    let mut probe = Probe::new(vec![
        ("input", uniform(&[rows, dim], 0.5, &mut rng)),
        ("output", uniform(&[rows, dim], 0.5, &mut rng)),
    ]);
    let (center, context, negatives) = (4, [2, 3, 5, 3], [6, 7, 2]);
    let build = |p: &Probe| {
        let mut emb = base.clone();
        for r in 0..rows {
            emb.input_row_mut(r).copy_from_slice(p.tensors[0].row(r));
            emb.output_row_mut(r).copy_from_slice(p.tensors[1].row(r));
        }
        emb
    };
    let (_, g) = cbow_gradient(center, &context, &negatives, &build(&probe))?;
    let mut gi = Tensor::zeros(&[rows, dim]);
    let mut go = Tensor::zeros(&[rows, dim]);
    for (&r, v) in &g.input {
        gi.row_mut(r).copy_from_slice(v);
    }
    for (&r, v) in &g.output {
        go.row_mut(r).copy_from_slice(v);
    }
    let loss = |p: &Probe| cbow_loss(center, &context, &negatives, &build(p));
    grad_check("cbow", MODEL_THRESHOLD, &mut probe, &[gi, go], loss, opts)
}

/// Which group of checks to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckTarget {
    Layers,
    Cnn,
    Rnn,
    Lstm,
    Cbow,
}

impl std::str::FromStr for CheckTarget {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "layers" => Ok(Self::Layers),
            "cnn" => Ok(Self::Cnn),
            "rnn" => Ok(Self::Rnn),
            "lstm" => Ok(Self::Lstm),
            "cbow" => Ok(Self::Cbow),
            other => Err(format!("unknown gradient-check target `{other}`")),
        }
    }
}

pub fn run_checks(target: CheckTarget, opts: &GradCheckOptions) -> Result<Vec<GradCheckReport>> {
    match target {
        CheckTarget::Layers => check_layers(opts),
        CheckTarget::Cnn => Ok(vec![check_cnn(opts)?]),
        CheckTarget::Rnn => Ok(vec![check_rnn(opts)?]),
        CheckTarget::Lstm => Ok(vec![check_lstm(opts)?]),
        CheckTarget::Cbow => Ok(vec![check_cbow(opts)?]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_case_is_exact() {
        let r = check_linear_quadratic(&GradCheckOptions::default()).unwrap();
        assert!(r.passed(), "{r}");
    }

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert_eq!(relative_error(1.0, 1.0), 0.0);
        assert!((relative_error(1.0, 0.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn every_component_passes() {
        let opts = GradCheckOptions::default();
        for target in [
            CheckTarget::Layers,
            CheckTarget::Cnn,
            CheckTarget::Rnn,
            CheckTarget::Lstm,
            CheckTarget::Cbow,
        ] {
            for r in run_checks(target, &opts).unwrap() {
                assert!(r.passed(), "{r}");
            }
        }
    }

    #[test]
    fn corrupted_tanh_derivative_is_caught() {
        super::super::set_tanh_derivative_fault(true);
        let layers = check_layers(&GradCheckOptions::default());
        let cnn = check_cnn(&GradCheckOptions::default());
        super::super::set_tanh_derivative_fault(false);
        let failed: Vec<String> = layers
            .unwrap()
            .into_iter()
            .filter(|r| !r.passed())
            .map(|r| r.component)
            .collect();
        assert_eq!(failed, vec!["tanh".to_string()]);
        assert!(!cnn.unwrap().passed());
    }
}
