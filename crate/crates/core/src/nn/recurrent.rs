use crate::error::{Error, Result};
use crate::modelfile::ModelFile;
use crate::rng::{seeded, Rng, STREAM_NN_INIT};
use crate::scalar::{axpy, dot, Scalar};

use super::layers::{tanh_backward, uniform, Dense};
use super::{read_params, write_params, zero_grads, Batch, Mode, Param, Parameterized, SequenceModel, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RecurrentConfig {
    pub embed_dim: usize,
    pub hidden: usize,
    pub classes: usize,
}

impl Default for RecurrentConfig {
    fn default() -> Self {
        Self {
            embed_dim: 300,
            hidden: 128,
            classes: 4,
        }
    }
}

impl RecurrentConfig {
    fn validate(&self) -> Result<()> {
        if self.embed_dim == 0 || self.hidden == 0 || self.classes < 2 {
            return Err(Error::InvalidArgument(
                "recurrent embed_dim and hidden must be positive, classes ≥ 2".into(),
            ));
        }
        Ok(())
    }

    fn write_into(&self, file: &mut ModelFile) {
        file.set_meta("embed_dim", self.embed_dim);
        file.set_meta("hidden", self.hidden);
        file.set_meta("classes", self.classes);
    }

    fn read_from(file: &ModelFile) -> Result<Self> {
        Ok(Self {
            embed_dim: file.parse_meta("embed_dim")?,
            hidden: file.parse_meta("hidden")?,
            classes: file.parse_meta("classes")?,
        })
    }
}

fn xavier(rows: usize, cols: usize, rng: &mut Rng) -> Tensor<f64> {
    uniform(&[rows, cols], (6.0 / (rows + cols) as f64).sqrt(), rng)
}

fn cast<T: Scalar>(t: Tensor<f64>) -> Tensor<T> {
    let shape = t.shape().to_vec();
    Tensor::from_vec(&shape, t.into_data().into_iter().map(T::lit).collect()).expect("same shape")
}

/// `out += W·x` for `W` of shape `rows × x.len()`.
fn matvec_acc<T: Scalar>(w: &Tensor<T>, x: &[T], out: &mut [T]) {
    for (r, o) in out.iter_mut().enumerate() {
        *o += dot(w.row(r), x);
    }
}

/// `out += Wᵀ·y`.
fn matvec_t_acc<T: Scalar>(w: &Tensor<T>, y: &[T], out: &mut [T]) {
    for (r, &g) in y.iter().enumerate() {
        if g != T::zero() {
            axpy(g, w.row(r), out);
        }
    }
}

/// `G += y ⊗ x`.
fn outer_acc<T: Scalar>(g: &mut [T], y: &[T], x: &[T]) {
    let c = x.len();
    for (r, &v) in y.iter().enumerate() {
        if v != T::zero() {
            axpy(v, x, &mut g[r * c..(r + 1) * c]);
        }
    }
}

fn check_batch<T: Scalar>(batch: &Batch<T>, dim: usize) -> Result<()> {
    for x in &batch.inputs {
        if x.row_len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: x.row_len(),
            });
        }
    }
    Ok(())
}

fn head_params<'a, T: Scalar>(head: &'a Dense<T>, out: &mut Vec<Param<'a, T>>) {
    out.push(Param {
        name: "head.weight".into(),
        tensor: &head.weight,
        decay: true,
    });
    out.push(Param {
        name: "head.bias".into(),
        tensor: &head.bias,
        decay: false,
    });
}

/// Elman network `h_t = tanh(W_x x_t + W_h h_{t−1} + b)` with a dense head
/// on the last hidden state.
#[derive(Debug, Clone, PartialEq)]
pub struct RnnClassifier<T> {
    pub config: RecurrentConfig,
    pub w_x: Tensor<T>,
    pub w_h: Tensor<T>,
    pub b: Tensor<T>,
    pub head: Dense<T>,
}

#[derive(Debug, Clone)]
pub struct RnnCache<T> {
    shapes: Vec<(usize, usize)>,
    /// Per example, `(len + 1) × H` hidden states starting with `h_0 = 0`.
    states: Vec<Vec<T>>,
    head_input: Vec<T>,
}

impl<T: Scalar> RnnClassifier<T> {
    pub fn new(config: RecurrentConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = seeded(seed, STREAM_NN_INIT);
        let (d, h) = (config.embed_dim, config.hidden);
        Ok(Self {
            config,
            w_x: cast(xavier(h, d, &mut rng)),
            w_h: cast(xavier(h, h, &mut rng)),
            b: Tensor::zeros(&[h]),
            head: Dense::new(h, config.classes, &mut rng),
        })
    }

    pub fn read_from(file: &ModelFile) -> Result<Self> {
        let mut m = Self::new(RecurrentConfig::read_from(file)?, 0)?;
        read_params(&mut m, file)?;
        Ok(m)
    }
}

impl<T: Scalar> Parameterized<T> for RnnClassifier<T> {
    fn params(&self) -> Vec<Param<'_, T>> {
        let mut out = vec![
            Param {
                name: "rnn.w_x".into(),
                tensor: &self.w_x,
                decay: true,
            },
            Param {
                name: "rnn.w_h".into(),
                tensor: &self.w_h,
                decay: true,
            },
            Param {
                name: "rnn.b".into(),
                tensor: &self.b,
                decay: false,
            },
        ];
        head_params(&self.head, &mut out);
        out
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        vec![
            &mut self.w_x,
            &mut self.w_h,
            &mut self.b,
            &mut self.head.weight,
            &mut self.head.bias,
        ]
    }
}

impl<T: Scalar> SequenceModel<T> for RnnClassifier<T> {
    type Cache = RnnCache<T>;

    fn input_dim(&self) -> usize {
        self.config.embed_dim
    }

    fn classes(&self) -> usize {
        self.config.classes
    }

    fn is_recurrent(&self) -> bool {
        true
    }

    fn forward(&self, batch: &Batch<T>, _mode: Mode, _rng: &mut Rng) -> Result<(Tensor<T>, RnnCache<T>)> {
        check_batch(batch, self.config.embed_dim)?;
        let h = self.config.hidden;
        let n = batch.len();
        let mut states = Vec::with_capacity(n);
        let mut head_input = Vec::with_capacity(n * h);
        for (x, &len) in batch.inputs.iter().zip(&batch.lengths) {
            let mut hs = vec![T::zero(); (len + 1) * h];
            for t in 0..len {
                let (prev, next) = hs.split_at_mut((t + 1) * h);
                let z = &mut next[..h];
                z.copy_from_slice(self.b.data());
                matvec_acc(&self.w_x, x.row(t), z);
                matvec_acc(&self.w_h, &prev[t * h..], z);
                z.iter_mut().for_each(|v| *v = v.tanh());
            }
            head_input.extend_from_slice(&hs[len * h..]);
            states.push(hs);
        }
        let head_input = Tensor::from_vec(&[n, h], head_input)?;
        let logits = self.head.forward(&head_input)?;
        let shapes = batch.inputs.iter().map(|x| (x.rows(), x.row_len())).collect();
        Ok((
            logits,
            RnnCache {
                shapes,
                states,
                head_input: head_input.into_data(),
            },
        ))
    }

    fn backward(&self, batch: &Batch<T>, cache: &RnnCache<T>, grad_logits: &Tensor<T>) -> Result<Vec<Tensor<T>>> {
        let shapes: Vec<(usize, usize)> = batch.inputs.iter().map(|x| (x.rows(), x.row_len())).collect();
        if shapes != cache.shapes {
            return Err(Error::StaleCache("batch does not match cache".into()));
        }
        grad_logits.expect_shape(&[batch.len(), self.config.classes], "grad_logits")?;
        let h = self.config.hidden;
        let mut grads = zero_grads(self);
        let (rec, head) = grads.split_at_mut(3);
        let (hw, hb) = head.split_at_mut(1);
        let g_h = self.head.backward(
            &cache.head_input,
            grad_logits.data(),
            hw[0].data_mut(),
            hb[0].data_mut(),
        );
        let (gwx, rest) = rec.split_at_mut(1);
        let (gwh, gb) = rest.split_at_mut(1);
        for (i, (x, &len)) in batch.inputs.iter().zip(&batch.lengths).enumerate() {
            let hs = &cache.states[i];
            let mut dh = g_h[i * h..(i + 1) * h].to_vec();
            for t in (0..len).rev() {
                let dz = tanh_backward(&hs[(t + 1) * h..(t + 2) * h], &dh);
                axpy(T::one(), &dz, gb[0].data_mut());
                outer_acc(gwx[0].data_mut(), &dz, x.row(t));
                outer_acc(gwh[0].data_mut(), &dz, &hs[t * h..(t + 1) * h]);
                dh.iter_mut().for_each(|v| *v = T::zero());
                matvec_t_acc(&self.w_h, &dz, &mut dh);
            }
        }
        Ok(grads)
    }

    fn write_into(&self, file: &mut ModelFile) {
        self.config.write_into(file);
        write_params(self, file);
    }
}

/// LSTM with gate blocks ordered input, forget, output, candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmClassifier<T> {
    pub config: RecurrentConfig,
    /// `4H × D`
    pub w: Tensor<T>,
    /// `4H × H`
    pub u: Tensor<T>,
    pub b: Tensor<T>,
    pub head: Dense<T>,
}

#[derive(Debug, Clone)]
struct LstmTrace<T> {
    /// Per step `[i, f, o, g]` activations, `len × 4H`.
    gates: Vec<T>,
    /// `(len + 1) × H`, starting at zero.
    h: Vec<T>,
    c: Vec<T>,
    /// `tanh(c_t)`, `len × H`.
    tc: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct LstmCache<T> {
    shapes: Vec<(usize, usize)>,
    traces: Vec<LstmTrace<T>>,
    head_input: Vec<T>,
}

impl<T: Scalar> LstmClassifier<T> {
    pub fn new(config: RecurrentConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = seeded(seed, STREAM_NN_INIT);
        let (d, h) = (config.embed_dim, config.hidden);
        let mut b = Tensor::zeros(&[4 * h]);
        b.data_mut()[h..2 * h].iter_mut().for_each(|v| *v = T::one());
        Ok(Self {
            config,
            w: cast(xavier(4 * h, d, &mut rng)),
            u: cast(xavier(4 * h, h, &mut rng)),
            b,
            head: Dense::new(h, config.classes, &mut rng),
        })
    }

    pub fn read_from(file: &ModelFile) -> Result<Self> {
        let mut m = Self::new(RecurrentConfig::read_from(file)?, 0)?;
        read_params(&mut m, file)?;
        Ok(m)
    }
}

impl<T: Scalar> Parameterized<T> for LstmClassifier<T> {
    fn params(&self) -> Vec<Param<'_, T>> {
        let mut out = vec![
            Param {
                name: "lstm.w".into(),
                tensor: &self.w,
                decay: true,
            },
            Param {
                name: "lstm.u".into(),
                tensor: &self.u,
                decay: true,
            },
            Param {
                name: "lstm.b".into(),
                tensor: &self.b,
                decay: false,
            },
        ];
        head_params(&self.head, &mut out);
        out
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        vec![
            &mut self.w,
            &mut self.u,
            &mut self.b,
            &mut self.head.weight,
            &mut self.head.bias,
        ]
    }
}

impl<T: Scalar> SequenceModel<T> for LstmClassifier<T> {
    type Cache = LstmCache<T>;

    fn input_dim(&self) -> usize {
        self.config.embed_dim
    }

    fn classes(&self) -> usize {
        self.config.classes
    }

    fn is_recurrent(&self) -> bool {
        true
    }

    fn forward(&self, batch: &Batch<T>, _mode: Mode, _rng: &mut Rng) -> Result<(Tensor<T>, LstmCache<T>)> {
        check_batch(batch, self.config.embed_dim)?;
        let h = self.config.hidden;
        let n = batch.len();
        let mut traces = Vec::with_capacity(n);
        let mut head_input = Vec::with_capacity(n * h);
        for (x, &len) in batch.inputs.iter().zip(&batch.lengths) {
            let mut tr = LstmTrace {
                gates: Vec::with_capacity(len * 4 * h),
                h: vec![T::zero(); (len + 1) * h],
                c: vec![T::zero(); (len + 1) * h],
                tc: Vec::with_capacity(len * h),
            };
            let mut z = vec![T::zero(); 4 * h];
            for t in 0..len {
                z.copy_from_slice(self.b.data());
                matvec_acc(&self.w, x.row(t), &mut z);
                matvec_acc(&self.u, &tr.h[t * h..(t + 1) * h], &mut z);
                for (k, v) in z.iter_mut().enumerate() {
                    *v = if k < 3 * h { v.sigmoid() } else { v.tanh() };
                }
                for k in 0..h {
                    let (i, f, o, g) = (z[k], z[h + k], z[2 * h + k], z[3 * h + k]);
                    let c = f * tr.c[t * h + k] + i * g;
                    let tc = c.tanh();
                    tr.c[(t + 1) * h + k] = c;
                    tr.h[(t + 1) * h + k] = o * tc;
                    tr.tc.push(tc);
                }
                tr.gates.extend_from_slice(&z);
            }
            head_input.extend_from_slice(&tr.h[len * h..]);
            traces.push(tr);
        }
        let head_input = Tensor::from_vec(&[n, h], head_input)?;
        let logits = self.head.forward(&head_input)?;
        let shapes = batch.inputs.iter().map(|x| (x.rows(), x.row_len())).collect();
        Ok((
            logits,
            LstmCache {
                shapes,
                traces,
                head_input: head_input.into_data(),
            },
        ))
    }

    fn backward(&self, batch: &Batch<T>, cache: &LstmCache<T>, grad_logits: &Tensor<T>) -> Result<Vec<Tensor<T>>> {
        let shapes: Vec<(usize, usize)> = batch.inputs.iter().map(|x| (x.rows(), x.row_len())).collect();
        if shapes != cache.shapes {
            return Err(Error::StaleCache("batch does not match cache".into()));
        }
        grad_logits.expect_shape(&[batch.len(), self.config.classes], "grad_logits")?;
        let h = self.config.hidden;
        let one = T::one();
        let mut grads = zero_grads(self);
        let (rec, head) = grads.split_at_mut(3);
        let (hw, hb) = head.split_at_mut(1);
        let g_h = self.head.backward(
            &cache.head_input,
            grad_logits.data(),
            hw[0].data_mut(),
            hb[0].data_mut(),
        );
        let (gw, rest) = rec.split_at_mut(1);
        let (gu, gb) = rest.split_at_mut(1);
        for (n, (x, &len)) in batch.inputs.iter().zip(&batch.lengths).enumerate() {
            let tr = &cache.traces[n];
            let mut dh = g_h[n * h..(n + 1) * h].to_vec();
            let mut dc = vec![T::zero(); h];
            let mut dz = vec![T::zero(); 4 * h];
            for t in (0..len).rev() {
                let gates = &tr.gates[t * 4 * h..(t + 1) * 4 * h];
                let tc = &tr.tc[t * h..(t + 1) * h];
                let d_o: Vec<T> = dh.iter().zip(tc).map(|(&d, &c)| d * c).collect();
                let through_h: Vec<T> = dh.iter().zip(&gates[2 * h..3 * h]).map(|(&d, &o)| d * o).collect();
                let dtc = tanh_backward(tc, &through_h);
                let g_act = &gates[3 * h..];
                let dg_pre_in: Vec<T> = (0..h).map(|k| (dc[k] + dtc[k]) * gates[k]).collect();
                let dg = tanh_backward(g_act, &dg_pre_in);
                for k in 0..h {
                    let (i, f, o, g) = (gates[k], gates[h + k], gates[2 * h + k], gates[3 * h + k]);
                    let dck = dc[k] + dtc[k];
                    dz[k] = dck * g * i * (one - i);
                    dz[h + k] = dck * tr.c[t * h + k] * f * (one - f);
                    dz[2 * h + k] = d_o[k] * o * (one - o);
                    dz[3 * h + k] = dg[k];
                    dc[k] = dck * f;
                }
                axpy(one, &dz, gb[0].data_mut());
                outer_acc(gw[0].data_mut(), &dz, x.row(t));
                outer_acc(gu[0].data_mut(), &dz, &tr.h[t * h..(t + 1) * h]);
                dh.iter_mut().for_each(|v| *v = T::zero());
                matvec_t_acc(&self.u, &dz, &mut dh);
            }
        }
        Ok(grads)
    }

    fn write_into(&self, file: &mut ModelFile) {
        self.config.write_into(file);
        write_params(self, file);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> RecurrentConfig {
        RecurrentConfig {
            embed_dim: 4,
            hidden: 3,
            classes: 4,
        }
    }

    fn batch() -> Batch<f64> {
        let inputs = (0..2).map(|i| uniform(&[5, 4], 1.0, &mut seeded(11, i))).collect();
        Batch::new(inputs, vec![5, 3]).unwrap()
    }

    #[test]
    fn zero_weight_rnn_state_is_tanh_bias() {
        let mut m = RnnClassifier::<f64>::new(cfg(), 1).unwrap();
        m.w_x = Tensor::zeros(&[3, 4]);
        m.w_h = Tensor::zeros(&[3, 3]);
        m.b = Tensor::from_vec(&[3], vec![0.5, -1.0, 2.0]).unwrap();
        let (_, cache) = m.forward(&batch(), Mode::Infer, &mut seeded(0, 0)).unwrap();
        for t in 1..=5 {
            for k in 0..3 {
                assert_eq!(cache.states[0][t * 3 + k], m.b.data()[k].tanh());
            }
        }
    }

    #[test]
    fn zero_weight_lstm_outputs_head_bias() {
        let mut m = LstmClassifier::<f64>::new(cfg(), 1).unwrap();
        m.w = Tensor::zeros(&[12, 4]);
        m.u = Tensor::zeros(&[12, 3]);
        assert_eq!(&m.b.data()[3..6], [1.0; 3]);
        m.head.bias = Tensor::from_vec(&[4], vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let (logits, cache) = m.forward(&batch(), Mode::Infer, &mut seeded(0, 0)).unwrap();
        assert!(cache.traces[0].c.iter().all(|&v| v == 0.0));
        assert_eq!(logits.row(0), [0.1, 0.2, 0.3, 0.4]);
    }

    #[test]
    fn lstm_cell_state_grows_at_most_one_per_step() {
        let m = LstmClassifier::<f64>::new(cfg(), 2).unwrap();
        let (_, cache) = m.forward(&batch(), Mode::Infer, &mut seeded(0, 0)).unwrap();
        let c = &cache.traces[0].c;
        for t in 1..=5 {
            for k in 0..3 {
                assert!(c[t * 3 + k].abs() <= c[(t - 1) * 3 + k].abs() + 1.0);
            }
        }
    }

    #[test]
    fn length_ignores_trailing_positions() {
        let m = RnnClassifier::<f64>::new(cfg(), 3).unwrap();
        let b = batch();
        let mut altered = b.clone();
        altered.inputs[1].row_mut(4).iter_mut().for_each(|v| *v = 9.0);
        assert_eq!(m.logits(&b).unwrap(), m.logits(&altered).unwrap());
    }

    #[test]
    fn single_step_rnn_is_dense_tanh_dense() {
        let m = RnnClassifier::<f64>::new(cfg(), 4).unwrap();
        let x = uniform(&[1, 4], 1.0, &mut seeded(5, 0));
        let b = Batch::new(vec![x.clone()], vec![1]).unwrap();
        let hidden = Dense {
            weight: m.w_x.clone(),
            bias: m.b.clone(),
        };
        let expect = m.head.forward(&hidden.forward(&x).unwrap().map(f64::tanh)).unwrap();
        assert_eq!(m.logits(&b).unwrap(), expect);
    }

    #[test]
    fn model_files_round_trip() {
        let r = RnnClassifier::<f64>::new(cfg(), 6).unwrap();
        let mut f = ModelFile::new("rnn");
        r.write_into(&mut f);
        assert_eq!(
            RnnClassifier::read_from(&ModelFile::parse(&f.to_text()).unwrap()).unwrap(),
            r
        );
        let l = LstmClassifier::<f64>::new(cfg(), 7).unwrap();
        let mut f = ModelFile::new("lstm");
        l.write_into(&mut f);
        assert_eq!(
            LstmClassifier::read_from(&ModelFile::parse(&f.to_text()).unwrap()).unwrap(),
            l
        );
    }
}
