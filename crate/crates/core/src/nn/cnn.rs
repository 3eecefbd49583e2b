use std::str::FromStr;

use crate::error::{Error, Result};
use crate::modelfile::ModelFile;
use crate::rng::{seeded, Rng, STREAM_NN_INIT};
use crate::scalar::Scalar;

use super::layers::{dropout_mask, global_max_pool, tanh_backward, BatchNorm, BatchNormCache, Conv1d, Dense};
use super::{read_params, write_params, zero_grads, Batch, Mode, Param, Parameterized, SequenceModel, Tensor};

/// Where batch normalization sits relative to the activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BranchOrder {
    #[default]
    ConvTanhBn,
    ConvBnTanh,
}

impl BranchOrder {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::ConvTanhBn => "conv-tanh-bn",
            Self::ConvBnTanh => "conv-bn-tanh",
        }
    }
}

impl FromStr for BranchOrder {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "conv-tanh-bn" => Ok(Self::ConvTanhBn),
            "conv-bn-tanh" => Ok(Self::ConvBnTanh),
            other => Err(format!("unknown branch order `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CnnConfig {
    pub max_len: usize,
    pub embed_dim: usize,
    pub widths: Vec<usize>,
    pub filters: usize,
    pub dropout: f64,
    pub order: BranchOrder,
    pub bn_momentum: f64,
    pub bn_eps: f64,
    pub classes: usize,
}

impl Default for CnnConfig {
    fn default() -> Self {
        Self {
            max_len: 100,
            embed_dim: 300,
            widths: vec![2, 3, 4, 5],
            filters: 64,
            dropout: 0.5,
            order: BranchOrder::ConvTanhBn,
            bn_momentum: 0.9,
            bn_eps: 1e-5,
            classes: 4,
        }
    }
}

impl CnnConfig {
    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.widths.is_empty() || self.widths.contains(&0) {
            return bad("cnn widths must be non-empty and positive");
        }
        if self.filters == 0 || self.embed_dim == 0 || self.classes < 2 {
            return bad("cnn filters, embed_dim must be positive and classes ≥ 2");
        }
        if self.widths.iter().any(|&w| w > self.max_len) {
            return bad("cnn width exceeds max_len");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must be in [0, 1)");
        }
        if !(self.bn_eps > 0.0) {
            return bad("batch-norm epsilon must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CnnBranch<T> {
    pub conv: Conv1d<T>,
    pub bn: BatchNorm<T>,
}

/// Parallel convolution branches, each pooled over time, then dropout and a
/// dense softmax head.
#[derive(Debug, Clone, PartialEq)]
pub struct CnnClassifier<T> {
    pub config: CnnConfig,
    pub branches: Vec<CnnBranch<T>>,
    pub head: Dense<T>,
}

#[derive(Debug, Clone)]
struct BranchCache<T> {
    /// Output row count per example.
    t_out: Vec<usize>,
    /// Post-tanh activations, `M × F` over all examples.
    act: Vec<T>,
    bn: Option<BatchNormCache<T>>,
    /// Arg-max row within `act`/BN output for each (example, filter).
    argmax: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct CnnCache<T> {
    mode: Mode,
    shapes: Vec<(usize, usize)>,
    branches: Vec<BranchCache<T>>,
    /// Post-dropout head input, `N × ΣF`.
    head_input: Vec<T>,
    mask: Option<Vec<T>>,
}

impl<T: Scalar> CnnClassifier<T> {
    pub fn new(config: CnnConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = seeded(seed, STREAM_NN_INIT);
        let branches = config
            .widths
            .iter()
            .map(|&w| CnnBranch {
                conv: Conv1d::new(w, config.filters, config.embed_dim, &mut rng),
                bn: BatchNorm::new(config.filters, T::lit(config.bn_momentum), T::lit(config.bn_eps)),
            })
            .collect();
        let head = Dense::new(config.widths.len() * config.filters, config.classes, &mut rng);
        Ok(Self { config, branches, head })
    }

    fn feature_dim(&self) -> usize {
        self.branches.len() * self.config.filters
    }

    pub fn read_from(file: &ModelFile) -> Result<Self> {
        let widths = file
            .meta("widths")?
            .split(',')
            .map(|w| {
                w.parse::<usize>()
                    .map_err(|e| Error::ModelFormat(format!("widths: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let config = CnnConfig {
            max_len: file.parse_meta("max_len")?,
            embed_dim: file.parse_meta("embed_dim")?,
            widths,
            filters: file.parse_meta("filters")?,
            dropout: file.parse_meta("dropout")?,
            order: file.meta("order")?.parse().map_err(Error::ModelFormat)?,
            bn_momentum: file.parse_meta("bn_momentum")?,
            bn_eps: file.parse_meta("bn_eps")?,
            classes: file.parse_meta("classes")?,
        };
        let mut model = Self::new(config, 0)?;
        read_params(&mut model, file)?;
        let f = model.config.filters;
        for (b, br) in model.branches.iter_mut().enumerate() {
            br.bn.running_mean = file.tensor::<T>(&format!("branch{b}.bn.running_mean"), Some(&[f]))?.1;
            br.bn.running_var = file.tensor::<T>(&format!("branch{b}.bn.running_var"), Some(&[f]))?.1;
        }
        Ok(model)
    }
}

impl<T: Scalar> Parameterized<T> for CnnClassifier<T> {
    fn params(&self) -> Vec<Param<'_, T>> {
        let mut out = Vec::new();
        for (b, br) in self.branches.iter().enumerate() {
            let p = |name: &str, tensor, decay| Param {
                name: format!("branch{b}.{name}"),
                tensor,
                decay,
            };
            out.push(p("conv.weight", &br.conv.weight, true));
            out.push(p("conv.bias", &br.conv.bias, false));
            out.push(p("bn.gamma", &br.bn.gamma, false));
            out.push(p("bn.beta", &br.bn.beta, false));
        }
        out.push(Param {
            name: "head.weight".into(),
            tensor: &self.head.weight,
            decay: true,
        });
        out.push(Param {
            name: "head.bias".into(),
            tensor: &self.head.bias,
            decay: false,
        });
        out
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out = Vec::new();
        for br in &mut self.branches {
            out.push(&mut br.conv.weight);
            out.push(&mut br.conv.bias);
            out.push(&mut br.bn.gamma);
            out.push(&mut br.bn.beta);
        }
        out.push(&mut self.head.weight);
        out.push(&mut self.head.bias);
        out
    }
}

impl<T: Scalar> SequenceModel<T> for CnnClassifier<T> {
    type Cache = CnnCache<T>;

    fn input_dim(&self) -> usize {
        self.config.embed_dim
    }

    fn classes(&self) -> usize {
        self.config.classes
    }

    fn is_recurrent(&self) -> bool {
        false
    }

    fn forward(&self, batch: &Batch<T>, mode: Mode, rng: &mut Rng) -> Result<(Tensor<T>, CnnCache<T>)> {
        let n = batch.len();
        let f = self.config.filters;
        let feat = self.feature_dim();
        let mut features = vec![T::zero(); n * feat];
        let mut caches = Vec::with_capacity(self.branches.len());
        for (b, br) in self.branches.iter().enumerate() {
            let mut z = Vec::new();
            let mut t_out = Vec::with_capacity(n);
            for x in &batch.inputs {
                let y = br.conv.forward(x)?;
                t_out.push(y.rows());
                z.extend_from_slice(y.data());
            }
            let tanh = |v: Vec<T>| v.into_iter().map(T::tanh).collect::<Vec<T>>();
            let (act, pooled_src, bn) = match (self.config.order, mode) {
                (BranchOrder::ConvTanhBn, Mode::Train) => {
                    let a = tanh(z);
                    let (y, c) = br.bn.forward_train(&a)?;
                    (a, y, Some(c))
                }
                (BranchOrder::ConvTanhBn, Mode::Infer) => {
                    let a = tanh(z);
                    let y = br.bn.forward_infer(&a)?;
                    (a, y, None)
                }
                (BranchOrder::ConvBnTanh, Mode::Train) => {
                    let (u, c) = br.bn.forward_train(&z)?;
                    let a = tanh(u);
                    (a.clone(), a, Some(c))
                }
                (BranchOrder::ConvBnTanh, Mode::Infer) => {
                    let a = tanh(br.bn.forward_infer(&z)?);
                    (a.clone(), a, None)
                }
            };
            let mut argmax = Vec::with_capacity(n * f);
            let mut offset = 0;
            for (i, &t) in t_out.iter().enumerate() {
                let (vals, arg) = global_max_pool(&pooled_src[offset * f..(offset + t) * f], f);
                features[i * feat + b * f..i * feat + (b + 1) * f].copy_from_slice(&vals);
                argmax.extend(arg.into_iter().map(|r| offset + r));
                offset += t;
            }
            caches.push(BranchCache { t_out, act, bn, argmax });
        }
        let mask = match mode {
            Mode::Train if self.config.dropout > 0.0 => {
                let mask = dropout_mask::<T>(features.len(), self.config.dropout, rng);
                features.iter_mut().zip(&mask).for_each(|(v, &m)| *v *= m);
                Some(mask)
            }
            _ => None,
        };
        let head_input = Tensor::from_vec(&[n, feat], features)?;
        let logits = self.head.forward(&head_input)?;
        let shapes = batch.inputs.iter().map(|x| (x.rows(), x.row_len())).collect();
        Ok((
            logits,
            CnnCache {
                mode,
                shapes,
                branches: caches,
                head_input: head_input.into_data(),
                mask,
            },
        ))
    }

    fn backward(&self, batch: &Batch<T>, cache: &CnnCache<T>, grad_logits: &Tensor<T>) -> Result<Vec<Tensor<T>>> {
        if cache.mode != Mode::Train {
            return Err(Error::StaleCache("backward needs a train-mode cache".into()));
        }
        let n = batch.len();
        let shapes: Vec<(usize, usize)> = batch.inputs.iter().map(|x| (x.rows(), x.row_len())).collect();
        if shapes != cache.shapes || cache.branches.len() != self.branches.len() {
            return Err(Error::StaleCache("batch does not match cache".into()));
        }
        grad_logits.expect_shape(&[n, self.config.classes], "grad_logits")?;
        let f = self.config.filters;
        let feat = self.feature_dim();
        let mut grads = zero_grads(self);
        let head_at = 4 * self.branches.len();
        let (gw, gb) = grads.split_at_mut(head_at + 1);
        let mut g_feat = self.head.backward(
            &cache.head_input,
            grad_logits.data(),
            gw[head_at].data_mut(),
            gb[0].data_mut(),
        );
        if let Some(mask) = &cache.mask {
            g_feat.iter_mut().zip(mask).for_each(|(g, &m)| *g *= m);
        }
        for (b, (br, bc)) in self.branches.iter().zip(&cache.branches).enumerate() {
            let m_rows: usize = bc.t_out.iter().sum();
            let mut g_post = vec![T::zero(); m_rows * f];
            for i in 0..n {
                for k in 0..f {
                    let r = bc.argmax[i * f + k];
                    g_post[r * f + k] += g_feat[i * feat + b * f + k];
                }
            }
            let bn_cache = bc
                .bn
                .as_ref()
                .ok_or_else(|| Error::StaleCache("missing batch-norm cache".into()))?;
            let base = 4 * b;
            let (left, right) = grads.split_at_mut(base + 2);
            let (g_gamma, g_beta) = right.split_at_mut(1);
            let g_z = match self.config.order {
                BranchOrder::ConvTanhBn => {
                    let g_a = br
                        .bn
                        .backward(bn_cache, &g_post, g_gamma[0].data_mut(), g_beta[0].data_mut());
                    tanh_backward(&bc.act, &g_a)
                }
                BranchOrder::ConvBnTanh => {
                    let g_u = tanh_backward(&bc.act, &g_post);
                    br.bn
                        .backward(bn_cache, &g_u, g_gamma[0].data_mut(), g_beta[0].data_mut())
                }
            };
            let (g_w, g_b) = left[base..].split_at_mut(1);
            let mut offset = 0;
            for (x, &t) in batch.inputs.iter().zip(&bc.t_out) {
                br.conv.backward(
                    x,
                    &g_z[offset * f..(offset + t) * f],
                    g_w[0].data_mut(),
                    g_b[0].data_mut(),
                    None,
                );
                offset += t;
            }
        }
        Ok(grads)
    }

    fn commit(&mut self, cache: &CnnCache<T>) {
        for (br, bc) in self.branches.iter_mut().zip(&cache.branches) {
            if let Some(c) = &bc.bn {
                br.bn.commit(c);
            }
        }
    }

    fn write_into(&self, file: &mut ModelFile) {
        let c = &self.config;
        file.set_meta("max_len", c.max_len);
        file.set_meta("embed_dim", c.embed_dim);
        file.set_meta(
            "widths",
            c.widths.iter().map(ToString::to_string).collect::<Vec<_>>().join(","),
        );
        file.set_meta("filters", c.filters);
        file.set_meta("dropout", c.dropout);
        file.set_meta("order", c.order.as_str());
        file.set_meta("bn_momentum", c.bn_momentum);
        file.set_meta("bn_eps", c.bn_eps);
        file.set_meta("classes", c.classes);
        write_params(self, file);
        for (b, br) in self.branches.iter().enumerate() {
            file.push_tensor(&format!("branch{b}.bn.running_mean"), &[c.filters], &br.bn.running_mean);
            file.push_tensor(&format!("branch{b}.bn.running_var"), &[c.filters], &br.bn.running_var);
        }
    }
}
