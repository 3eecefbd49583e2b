use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::{Param, Tensor};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig<T> {
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    /// L2 coefficient, added as `λ·param` to decayed tensors' gradients.
    pub l2: T,
}

impl<T: Scalar> Default for AdamConfig<T> {
    fn default() -> Self {
        Self {
            lr: T::lit(1e-3),
            beta1: T::lit(0.9),
            beta2: T::lit(0.999),
            eps: T::lit(1e-8),
            l2: T::lit(1e-4),
        }
    }
}

/// One Adam step on a single tensor at timestep `t` (already incremented).
pub fn adam_update<T: Scalar>(
    param: &mut [T],
    grad: &[T],
    m: &mut [T],
    v: &mut [T],
    t: u64,
    cfg: &AdamConfig<T>,
    decay: bool,
) {
    let t = i32::try_from(t).unwrap_or(i32::MAX);
    let c1 = T::one() - cfg.beta1.powi(t);
    let c2 = T::one() - cfg.beta2.powi(t);
    for i in 0..param.len() {
        let mut g = grad[i];
        if decay {
            g += cfg.l2 * param[i];
        }
        m[i] = cfg.beta1 * m[i] + (T::one() - cfg.beta1) * g;
        v[i] = cfg.beta2 * v[i] + (T::one() - cfg.beta2) * g * g;
        let m_hat = m[i] / c1;
        let v_hat = v[i] / c2;
        param[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
    }
}

/// Moment estimates for every tensor of one model.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam<T> {
    pub config: AdamConfig<T>,
    pub t: u64,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
    decay: Vec<bool>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(config: AdamConfig<T>, params: &[Param<'_, T>]) -> Self {
        Self {
            config,
            t: 0,
            m: params.iter().map(|p| vec![T::zero(); p.tensor.len()]).collect(),
            v: params.iter().map(|p| vec![T::zero(); p.tensor.len()]).collect(),
            decay: params.iter().map(|p| p.decay).collect(),
        }
    }

    pub fn step(&mut self, params: Vec<&mut Tensor<T>>, grads: &[Tensor<T>]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::LengthMismatch(params.len(), grads.len()));
        }
        self.t += 1;
        for (k, (p, g)) in params.into_iter().zip(grads).enumerate() {
            if p.len() != g.len() || p.len() != self.m[k].len() {
                return Err(Error::DimensionMismatch {
                    expected: p.len(),
                    got: g.len(),
                });
            }
            adam_update(
                p.data_mut(),
                g.data(),
                &mut self.m[k],
                &mut self.v[k],
                self.t,
                &self.config,
                self.decay[k],
            );
        }
        Ok(())
    }
}

/// Rescales all gradients so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm<T: Scalar>(grads: &mut [Tensor<T>], max_norm: T) -> T {
    let norm = grads.iter().map(Tensor::squared_norm).sum::<T>().sqrt();
    if norm > max_norm && norm > T::zero() {
        let s = max_norm / norm;
        grads.iter_mut().for_each(|g| g.scale(s));
    }
    norm
}
