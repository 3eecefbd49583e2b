//! Layer primitives. Each forward has a matching backward that accumulates
//! parameter gradients and returns the input gradient.

use std::cell::Cell;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::scalar::{axpy, dot, Scalar};

use super::{Mode, Tensor};

pub(crate) fn uniform<T: Scalar>(shape: &[usize], limit: f64, rng: &mut Rng) -> Tensor<T> {
    let n = shape.iter().product();
    let data = (0..n).map(|_| T::lit(rng.gen_range(-limit..=limit))).collect();
    Tensor::from_vec(shape, data).expect("shape matches")
}

fn xavier_limit(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Valid 1-D convolution over a `T × D` sequence, stride 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1d<T> {
    pub width: usize,
    pub filters: usize,
    pub in_dim: usize,
    /// `filters × width × in_dim`
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Scalar> Conv1d<T> {
    pub fn new(width: usize, filters: usize, in_dim: usize, rng: &mut Rng) -> Self {
        assert!(width >= 1 && filters >= 1 && in_dim >= 1);
        let limit = xavier_limit(width * in_dim, filters);
        Self {
            width,
            filters,
            in_dim,
            weight: uniform(&[filters, width, in_dim], limit, rng),
            bias: Tensor::zeros(&[filters]),
        }
    }

    pub fn output_len(&self, input_len: usize) -> Result<usize> {
        if input_len < self.width {
            return Err(Error::InputTooShort {
                len: input_len,
                width: self.width,
            });
        }
        Ok(input_len - self.width + 1)
    }

    /// `out[t, f] = bias[f] + Σ_{i, j} weight[f, i, j] · input[t + i, j]`
    pub fn forward(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        let (len, d) = (input.rows(), input.row_len());
        if d != self.in_dim {
            return Err(Error::DimensionMismatch {
                expected: self.in_dim,
                got: d,
            });
        }
        let t_out = self.output_len(len)?;
        let span = self.width * d;
        let x = input.data();
        let w = self.weight.data();
        let b = self.bias.data();
        let mut out = Vec::with_capacity(t_out * self.filters);
        for t in 0..t_out {
            let window = &x[t * d..t * d + span];
            for f in 0..self.filters {
                out.push(b[f] + dot(&w[f * span..(f + 1) * span], window));
            }
        }
        Tensor::from_vec(&[t_out, self.filters], out)
    }

    /// Accumulates weight/bias gradients; writes the input gradient into
    /// `grad_input` when given.
    pub fn backward(
        &self,
        input: &Tensor<T>,
        grad_out: &[T],
        grad_weight: &mut [T],
        grad_bias: &mut [T],
        mut grad_input: Option<&mut [T]>,
    ) {
        let d = self.in_dim;
        let span = self.width * d;
        let t_out = input.rows() + 1 - self.width;
        debug_assert_eq!(grad_out.len(), t_out * self.filters);
        let x = input.data();
        let w = self.weight.data();
        for t in 0..t_out {
            let window = &x[t * d..t * d + span];
            for f in 0..self.filters {
                let g = grad_out[t * self.filters + f];
                if g == T::zero() {
                    continue;
                }
                grad_bias[f] += g;
                axpy(g, window, &mut grad_weight[f * span..(f + 1) * span]);
                if let Some(gx) = grad_input.as_deref_mut() {
                    axpy(g, &w[f * span..(f + 1) * span], &mut gx[t * d..t * d + span]);
                }
            }
        }
    }
}

pub fn conv1d_forward<T: Scalar>(input: &Tensor<T>, layer: &Conv1d<T>) -> Result<Tensor<T>> {
    layer.forward(input)
}

thread_local! {
    static TANH_FAULT: Cell<bool> = const { Cell::new(false) };
}

/// Corrupts the tanh derivative on the current thread. Only used to check
/// that gradient checks catch a broken backward pass.
#[doc(hidden)]
pub fn set_tanh_derivative_fault(on: bool) {
    TANH_FAULT.with(|f| f.set(on));
}

pub fn tanh_forward<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(T::tanh)
}

/// Gradient through `y = tanh(x)` given the forward output `y`.
pub fn tanh_backward<T: Scalar>(y: &[T], grad_out: &[T]) -> Vec<T> {
    let fault = TANH_FAULT.with(Cell::get);
    y.iter()
        .zip(grad_out)
        .map(|(&y, &g)| {
            let d = T::one() - y * y;
            if fault {
                g * d * T::lit(1.5)
            } else {
                g * d
            }
        })
        .collect()
}

/// Per-channel batch normalization over the rows of an `M × C` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm<T> {
    pub channels: usize,
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
    pub momentum: T,
    pub eps: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormCache<T> {
    pub xhat: Vec<T>,
    pub inv_std: Vec<T>,
    pub mean: Vec<T>,
    /// Unbiased batch variance, used for the running estimate.
    pub var_unbiased: Vec<T>,
}

impl<T: Scalar> BatchNorm<T> {
    pub fn new(channels: usize, momentum: T, eps: T) -> Self {
        Self {
            channels,
            gamma: Tensor::filled(&[channels], T::one()),
            beta: Tensor::zeros(&[channels]),
            running_mean: vec![T::zero(); channels],
            running_var: vec![T::one(); channels],
            momentum,
            eps,
        }
    }

    fn rows_of(&self, x: &[T]) -> Result<usize> {
        if x.len() % self.channels != 0 {
            return Err(Error::DimensionMismatch {
                expected: self.channels,
                got: x.len() % self.channels,
            });
        }
        Ok(x.len() / self.channels)
    }

    /// Normalizes with batch statistics (biased variance). Running
    /// statistics are not touched; see [`BatchNorm::commit`].
    pub fn forward_train(&self, x: &[T]) -> Result<(Vec<T>, BatchNormCache<T>)> {
        let c = self.channels;
        let m = self.rows_of(x)?;
        if m < 2 {
            return Err(Error::DegenerateBatch(m));
        }
        let mf = T::from_count(m);
        let mut mean = vec![T::zero(); c];
        for row in x.chunks(c) {
            for (s, &v) in mean.iter_mut().zip(row) {
                *s += v;
            }
        }
        mean.iter_mut().for_each(|s| *s /= mf);
        let mut var = vec![T::zero(); c];
        for row in x.chunks(c) {
            for ((s, &v), &mu) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - mu) * (v - mu);
            }
        }
        let var_unbiased: Vec<T> = var.iter().map(|&s| s / T::from_count(m - 1)).collect();
        let inv_std: Vec<T> = var.iter().map(|&s| T::one() / (s / mf + self.eps).sqrt()).collect();
        let mut xhat = Vec::with_capacity(x.len());
        let mut y = Vec::with_capacity(x.len());
        let (g, b) = (self.gamma.data(), self.beta.data());
        for row in x.chunks(c) {
            for k in 0..c {
                let h = (row[k] - mean[k]) * inv_std[k];
                xhat.push(h);
                y.push(g[k] * h + b[k]);
            }
        }
        Ok((
            y,
            BatchNormCache {
                xhat,
                inv_std,
                mean,
                var_unbiased,
            },
        ))
    }

    pub fn forward_infer(&self, x: &[T]) -> Result<Vec<T>> {
        let c = self.channels;
        self.rows_of(x)?;
        let (g, b) = (self.gamma.data(), self.beta.data());
        let scale: Vec<T> = (0..c).map(|k| g[k] / (self.running_var[k] + self.eps).sqrt()).collect();
        Ok(x.chunks(c)
            .flat_map(|row| {
                (0..c)
                    .map(|k| (row[k] - self.running_mean[k]) * scale[k] + b[k])
                    .collect::<Vec<_>>()
            })
            .collect())
    }

    /// `running ← m·running + (1 − m)·batch`
    pub fn commit(&mut self, cache: &BatchNormCache<T>) {
        let m = self.momentum;
        for k in 0..self.channels {
            self.running_mean[k] = m * self.running_mean[k] + (T::one() - m) * cache.mean[k];
            self.running_var[k] = m * self.running_var[k] + (T::one() - m) * cache.var_unbiased[k];
        }
    }

    /// Returns the input gradient and accumulates `γ`, `β` gradients.
    pub fn backward(
        &self,
        cache: &BatchNormCache<T>,
        grad_out: &[T],
        grad_gamma: &mut [T],
        grad_beta: &mut [T],
    ) -> Vec<T> {
        let c = self.channels;
        let m = grad_out.len() / c;
        let mf = T::from_count(m);
        let g = self.gamma.data();
        let mut sum_g = vec![T::zero(); c];
        let mut sum_gx = vec![T::zero(); c];
        for (gy, xh) in grad_out.chunks(c).zip(cache.xhat.chunks(c)) {
            for k in 0..c {
                grad_beta[k] += gy[k];
                grad_gamma[k] += gy[k] * xh[k];
                let gxh = gy[k] * g[k];
                sum_g[k] += gxh;
                sum_gx[k] += gxh * xh[k];
            }
        }
        let mut gx = Vec::with_capacity(grad_out.len());
        for (gy, xh) in grad_out.chunks(c).zip(cache.xhat.chunks(c)) {
            for k in 0..c {
                let gxh = gy[k] * g[k];
                gx.push(cache.inv_std[k] / mf * (mf * gxh - sum_g[k] - xh[k] * sum_gx[k]));
            }
        }
        gx
    }
}

/// Normalizes an `N × T' × F` tensor per channel. Train mode updates the
/// running statistics; infer mode only reads them.
pub fn batchnorm_forward<T: Scalar>(x: &Tensor<T>, layer: &mut BatchNorm<T>, mode: Mode) -> Result<Tensor<T>> {
    let y = match mode {
        Mode::Train => {
            let (y, cache) = layer.forward_train(x.data())?;
            layer.commit(&cache);
            y
        }
        Mode::Infer => layer.forward_infer(x.data())?,
    };
    Tensor::from_vec(x.shape(), y)
}

/// Column maxima of a `rows × cols` matrix with the first arg-max row.
pub fn global_max_pool<T: Scalar>(x: &[T], cols: usize) -> (Vec<T>, Vec<usize>) {
    let rows = x.len() / cols;
    assert!(rows >= 1, "max pool over an empty sequence");
    let mut best = x[..cols].to_vec();
    let mut arg = vec![0usize; cols];
    for t in 1..rows {
        let row = &x[t * cols..(t + 1) * cols];
        for f in 0..cols {
            if row[f] > best[f] {
                best[f] = row[f];
                arg[f] = t;
            }
        }
    }
    (best, arg)
}

/// Routes each pooled gradient to its arg-max row.
pub fn global_max_pool_backward<T: Scalar>(grad_out: &[T], argmax: &[usize], rows: usize) -> Vec<T> {
    let cols = grad_out.len();
    let mut gx = vec![T::zero(); rows * cols];
    for f in 0..cols {
        gx[argmax[f] * cols + f] = grad_out[f];
    }
    gx
}

/// Inverted-dropout mask: entries are 0 with probability `p`, else `1/(1-p)`.
pub fn dropout_mask<T: Scalar>(n: usize, p: f64, rng: &mut Rng) -> Vec<T> {
    if p == 0.0 {
        return vec![T::one(); n];
    }
    let keep = T::lit(1.0 / (1.0 - p));
    (0..n)
        .map(|_| if rng.gen::<f64>() < p { T::zero() } else { keep })
        .collect()
}

/// Returns the output and the mask used (`None` in infer mode).
pub fn dropout_forward<T: Scalar>(
    x: &Tensor<T>,
    p: f64,
    mode: Mode,
    rng: &mut Rng,
) -> Result<(Tensor<T>, Option<Vec<T>>)> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("dropout rate {p} outside [0, 1)")));
    }
    match mode {
        Mode::Infer => Ok((x.clone(), None)),
        Mode::Train => {
            let mask = dropout_mask(x.len(), p, rng);
            let data = x.data().iter().zip(&mask).map(|(&v, &m)| v * m).collect();
            Ok((Tensor::from_vec(x.shape(), data)?, Some(mask)))
        }
    }
}

/// Fully connected layer `y = W·x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    /// `out × in`
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Scalar> Dense<T> {
    pub fn new(in_dim: usize, out_dim: usize, rng: &mut Rng) -> Self {
        Self {
            weight: uniform(&[out_dim, in_dim], xavier_limit(in_dim, out_dim), rng),
            bias: Tensor::zeros(&[out_dim]),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.row_len()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }

    /// Applies the layer to each row of an `N × in` input.
    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let (n, d) = if x.shape().len() == 1 {
            (1, x.len())
        } else {
            (x.rows(), x.row_len())
        };
        if d != self.in_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.in_dim(),
                got: d,
            });
        }
        let out_dim = self.out_dim();
        let mut out = Vec::with_capacity(n * out_dim);
        for row in x.data().chunks(d) {
            for o in 0..out_dim {
                out.push(self.bias.data()[o] + dot(self.weight.row(o), row));
            }
        }
        let shape: Vec<usize> = if x.shape().len() == 1 {
            vec![out_dim]
        } else {
            vec![n, out_dim]
        };
        Tensor::from_vec(&shape, out)
    }

    /// Accumulates parameter gradients and returns the input gradient.
    pub fn backward(&self, x: &[T], grad_out: &[T], grad_weight: &mut [T], grad_bias: &mut [T]) -> Vec<T> {
        let d = self.in_dim();
        let out_dim = self.out_dim();
        let mut gx = vec![T::zero(); x.len()];
        for (n, row) in x.chunks(d).enumerate() {
            let g = &grad_out[n * out_dim..(n + 1) * out_dim];
            for o in 0..out_dim {
                if g[o] == T::zero() {
                    continue;
                }
                grad_bias[o] += g[o];
                axpy(g[o], row, &mut grad_weight[o * d..(o + 1) * d]);
                axpy(g[o], self.weight.row(o), &mut gx[n * d..(n + 1) * d]);
            }
        }
        gx
    }
}

pub fn dense_forward<T: Scalar>(x: &Tensor<T>, layer: &Dense<T>) -> Result<Tensor<T>> {
    layer.forward(x)
}

/// Row-wise stable softmax.
pub fn softmax_rows<T: Scalar>(logits: &Tensor<T>) -> Tensor<T> {
    let c = logits.row_len();
    let mut out = logits.clone();
    for row in out.data_mut().chunks_mut(c) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut sum = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        row.iter_mut().for_each(|v| *v /= sum);
    }
    out
}

/// Mean cross-entropy of `N × C` logits against class codes. Returns the
/// loss, `∂loss/∂logits` and the softmax probabilities.
pub fn softmax_cross_entropy<T: Scalar>(logits: &Tensor<T>, labels: &[usize]) -> Result<(T, Tensor<T>, Tensor<T>)> {
    let n = logits.rows();
    let c = logits.row_len();
    if labels.len() != n {
        return Err(Error::LengthMismatch(n, labels.len()));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= c) {
        return Err(Error::InvalidArgument(format!(
            "label {bad} out of range for {c} classes"
        )));
    }
    let probs = softmax_rows(logits);
    let nf = T::from_count(n);
    let mut loss = T::zero();
    let mut grad = probs.clone();
    for (i, &label) in labels.iter().enumerate() {
        let row = logits.row(i);
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let lse = max + row.iter().map(|&v| (v - max).exp()).sum::<T>().ln();
        loss += lse - row[label];
        grad.row_mut(i)[label] -= T::one();
    }
    grad.scale(T::one() / nf);
    Ok((loss / nf, grad, probs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use approx::assert_abs_diff_eq;

    fn rand_tensor(shape: &[usize], seed: u64) -> Tensor<f64> {
        uniform(shape, 1.0, &mut seeded(seed, 99))
    }

    #[test]
    fn conv_constant_and_identity() {
        let mut rng = seeded(0, 0);
        let mut conv = Conv1d::<f64>::new(2, 1, 3, &mut rng);
        conv.weight = Tensor::zeros(&[1, 2, 3]);
        conv.bias = Tensor::filled(&[1], 0.5);
        let y = conv.forward(&rand_tensor(&[4, 3], 1)).unwrap();
        assert_eq!(y.shape(), [3, 1]);
        assert!(y.data().iter().all(|&v| v == 0.5));

        let mut ident = Conv1d::<f64>::new(1, 3, 3, &mut rng);
        let mut w = Tensor::zeros(&[3, 1, 3]);
        for f in 0..3 {
            w.data_mut()[f * 3 + f] = 1.0;
        }
        ident.weight = w;
        let x = rand_tensor(&[5, 3], 2);
        assert_eq!(ident.forward(&x).unwrap(), x);
    }

    #[test]
    fn conv_matches_triple_loop() {
        let mut rng = seeded(3, 0);
        let mut conv = Conv1d::<f64>::new(2, 2, 3, &mut rng);
        conv.bias = rand_tensor(&[2], 4);
        let x = rand_tensor(&[5, 3], 5);
        let y = conv.forward(&x).unwrap();
        for t in 0..4 {
            for f in 0..2 {
                let mut s = conv.bias.data()[f];
                for i in 0..2 {
                    for j in 0..3 {
                        s += conv.weight.data()[f * 6 + i * 3 + j] * x.data()[(t + i) * 3 + j];
                    }
                }
                assert_abs_diff_eq!(y.data()[t * 2 + f], s, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn conv_too_short() {
        let conv = Conv1d::<f64>::new(4, 1, 2, &mut seeded(0, 0));
        assert!(matches!(
            conv.forward(&Tensor::zeros(&[3, 2])),
            Err(Error::InputTooShort { len: 3, width: 4 })
        ));
    }

    #[test]
    fn tanh_values() {
        let t = Tensor::from_vec(&[4], vec![0.0, 1.0, 30.0, -30.0]).unwrap();
        let y = tanh_forward(&t);
        assert_eq!(y.data()[0], 0.0);
        assert_abs_diff_eq!(y.data()[1], 0.76159, epsilon = 1e-5);
        assert_abs_diff_eq!(y.data()[2], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(y.data()[3], -1.0, epsilon = 1e-15);
    }

    #[test]
    fn batchnorm_train_normalizes() {
        let mut bn = BatchNorm::<f64>::new(3, 0.9, 1e-5);
        let x = rand_tensor(&[4, 5, 3], 7);
        let y = batchnorm_forward(&x, &mut bn, Mode::Train).unwrap();
        for k in 0..3 {
            let col: Vec<f64> = y.data().iter().skip(k).step_by(3).copied().collect();
            let mean = col.iter().sum::<f64>() / 20.0;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 20.0;
            assert!(mean.abs() < 1e-12);
            assert!((var - 1.0).abs() < 1e-3, "{var}");
        }
        assert_ne!(bn.running_mean, vec![0.0; 3]);
    }

    #[test]
    fn batchnorm_matches_formula() {
        let mut bn = BatchNorm::<f64>::new(2, 0.9, 1e-5);
        bn.gamma = Tensor::from_vec(&[2], vec![1.5, -0.5]).unwrap();
        bn.beta = Tensor::from_vec(&[2], vec![0.1, 0.2]).unwrap();
        let x = rand_tensor(&[6, 2], 8);
        let (y, _) = bn.forward_train(x.data()).unwrap();
        for k in 0..2 {
            let col: Vec<f64> = (0..6).map(|r| x.data()[r * 2 + k]).collect();
            let mean = col.iter().sum::<f64>() / 6.0;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 6.0;
            for r in 0..6 {
                let expect = bn.gamma.data()[k] * (col[r] - mean) / (var + 1e-5).sqrt() + bn.beta.data()[k];
                assert_abs_diff_eq!(y[r * 2 + k], expect, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn batchnorm_infer_is_pure_and_degenerate_train_fails() {
        let mut bn = BatchNorm::<f64>::new(2, 0.9, 1e-5);
        bn.running_mean = vec![0.3, -0.1];
        bn.running_var = vec![2.0, 0.5];
        let x = rand_tensor(&[3, 2], 9);
        let before = bn.clone();
        let a = batchnorm_forward(&x, &mut bn, Mode::Infer).unwrap();
        let b = batchnorm_forward(&x, &mut bn, Mode::Infer).unwrap();
        assert_eq!(a, b);
        assert_eq!(bn, before);
        assert!(matches!(bn.forward_train(&[1.0, 2.0]), Err(Error::DegenerateBatch(1))));
    }

    #[test]
    fn running_stats_update_rule() {
        let mut bn = BatchNorm::<f64>::new(1, 0.9, 1e-5);
        let (_, cache) = bn.forward_train(&[1.0, 3.0]).unwrap();
        bn.commit(&cache);
        assert_abs_diff_eq!(bn.running_mean[0], 0.2, epsilon = 1e-15);
        // unbiased variance of {1, 3} is 2
        assert_abs_diff_eq!(bn.running_var[0], 0.9 + 0.1 * 2.0, epsilon = 1e-15);
    }

    #[test]
    fn max_pool_cases() {
        let (v, a) = global_max_pool(&[2.0, 2.0, 2.0], 1);
        assert_eq!((v, a), (vec![2.0], vec![0]));
        let (v, a) = global_max_pool(&[1.0, 5.0, 3.0], 1);
        assert_eq!((v, a), (vec![5.0], vec![1]));
        let x = rand_tensor(&[7, 4], 10);
        let (v, a) = global_max_pool(x.data(), 4);
        for f in 0..4 {
            let col: Vec<f64> = (0..7).map(|t| x.data()[t * 4 + f]).collect();
            let m = col.iter().copied().fold(f64::MIN, f64::max);
            assert_eq!(v[f], m);
            assert_eq!(col[a[f]], m);
        }
        let g = global_max_pool_backward(&[1.0], &[0], 3);
        assert_eq!(g, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn dropout_modes() {
        let x = rand_tensor(&[10], 11);
        let mut rng = seeded(1, 1);
        assert_eq!(dropout_forward(&x, 0.5, Mode::Infer, &mut rng).unwrap().0, x);
        assert_eq!(dropout_forward(&x, 0.0, Mode::Train, &mut rng).unwrap().0, x);
        let (y, mask) = dropout_forward(&x, 0.5, Mode::Train, &mut seeded(2, 2)).unwrap();
        let (y2, _) = dropout_forward(&x, 0.5, Mode::Train, &mut seeded(2, 2)).unwrap();
        assert_eq!(y, y2);
        assert!(mask.unwrap().iter().all(|&m| m == 0.0 || m == 2.0));
        assert!(dropout_forward(&x, 1.0, Mode::Train, &mut rng).is_err());
    }

    #[test]
    fn dense_cases() {
        let mut d = Dense::<f64>::new(3, 3, &mut seeded(0, 0));
        let mut eye = Tensor::zeros(&[3, 3]);
        for i in 0..3 {
            eye.data_mut()[i * 4] = 1.0;
        }
        d.weight = eye;
        let x = Tensor::from_vec(&[3], vec![1.0, -2.0, 3.0]).unwrap();
        assert_eq!(d.forward(&x).unwrap(), x);
        d.weight = Tensor::zeros(&[3, 3]);
        d.bias = Tensor::from_vec(&[3], vec![7.0, 8.0, 9.0]).unwrap();
        assert_eq!(d.forward(&x).unwrap().data(), [7.0, 8.0, 9.0]);

        let d = Dense {
            weight: Tensor::from_vec(&[2, 3], vec![1.0, 2.0, 3.0, -1.0, 0.5, 0.0]).unwrap(),
            bias: Tensor::from_vec(&[2], vec![0.5, -0.5]).unwrap(),
        };
        let y = d
            .forward(&Tensor::from_vec(&[1, 3], vec![2.0, 1.0, -1.0]).unwrap())
            .unwrap();
        // [2+2-3+0.5, -2+0.5+0-0.5]
        assert_eq!(y.data(), [1.5, -2.0]);
        assert!(d.forward(&Tensor::zeros(&[2])).is_err());
    }

    #[test]
    fn cross_entropy_values() {
        let logits = Tensor::<f64>::zeros(&[2, 4]);
        let (loss, grad, probs) = softmax_cross_entropy(&logits, &[0, 3]).unwrap();
        assert_abs_diff_eq!(loss, 4f64.ln(), epsilon = 1e-15);
        assert!(probs.data().iter().all(|&p| (p - 0.25).abs() < 1e-15));
        assert_abs_diff_eq!(grad.data()[0], (0.25 - 1.0) / 2.0, epsilon = 1e-15);

        let logits = Tensor::from_vec(&[1, 4], vec![10.0, 0.0, 0.0, 0.0]).unwrap();
        let (loss, _, _) = softmax_cross_entropy(&logits, &[0]).unwrap();
        // ln(1 + 3e^-10)
        assert_abs_diff_eq!(loss, (3.0 * (-10f64).exp()).ln_1p(), epsilon = 1e-15);
        assert!((loss - 1.36e-4).abs() < 1e-6);

        let big = Tensor::<f64>::from_vec(&[1, 4], vec![1000.0, -1000.0, 0.0, 5.0]).unwrap();
        let (loss, _, probs) = softmax_cross_entropy(&big, &[1]).unwrap();
        assert!(loss.is_finite());
        assert_abs_diff_eq!(probs.data().iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert!(softmax_cross_entropy(&big, &[4]).is_err());
    }
}
