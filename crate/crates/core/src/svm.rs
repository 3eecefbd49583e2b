//! RBF-kernel soft-margin SVM trained by simplified SMO, with a
//! one-vs-rest wrapper for the four mood classes.

use rand::Rng as _;

use crate::corpus::MoodLabel;
use crate::error::{Error, Result};
use crate::modelfile::ModelFile;
use crate::rng::{seeded, STREAM_SMO};
use crate::scalar::Scalar;

fn check_dims(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

fn squared_distance<T: Scalar>(x: &[T], z: &[T]) -> T {
    x.iter()
        .zip(z)
        .map(|(&a, &b)| {
            let d = a - b;
            d * d
        })
        .sum()
}

/// `exp(-gamma · ‖x − z‖²)`
pub fn rbf_kernel<T: Scalar>(x: &[T], z: &[T], gamma: T) -> Result<T> {
    check_dims(x.len(), z.len())?;
    Ok((-gamma * squared_distance(x, z)).exp())
}

/// Gram matrix of `rows`, row-major `n × n`.
pub fn kernel_matrix<T: Scalar>(rows: &[Vec<T>], gamma: T) -> Vec<T> {
    let n = rows.len();
    let sparse: Vec<Vec<(usize, T)>> = rows
        .iter()
        .map(|r| r.iter().copied().enumerate().filter(|(_, v)| *v != T::zero()).collect())
        .collect();
    let mut k = vec![T::zero(); n * n];
    for i in 0..n {
        k[i * n + i] = T::one();
        for j in 0..i {
            let v = (-gamma * sparse_sq_dist(&sparse[i], &sparse[j])).exp();
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    k
}

fn sparse_sq_dist<T: Scalar>(a: &[(usize, T)], b: &[(usize, T)]) -> T {
    let (mut i, mut j) = (0, 0);
    let mut acc = T::zero();
    while i < a.len() || j < b.len() {
        let d = match (a.get(i), b.get(j)) {
            (Some(&(ia, va)), Some(&(ib, vb))) if ia == ib => {
                i += 1;
                j += 1;
                va - vb
            }
            (Some(&(ia, va)), Some(&(ib, _))) if ia < ib => {
                i += 1;
                va
            }
            (Some(&(_, va)), None) => {
                i += 1;
                va
            }
            (_, Some(&(_, vb))) => {
                j += 1;
                vb
            }
            (None, None) => unreachable!(),
        };
        acc += d * d;
    }
    acc
}

/// `Σα − ½ ΣΣ αᵢαⱼyᵢyⱼKᵢⱼ`
pub fn dual_objective<T: Scalar>(alphas: &[T], y: &[T], kernel: &[T]) -> T {
    let n = alphas.len();
    let mut quad = T::zero();
    for i in 0..n {
        for j in 0..n {
            quad += alphas[i] * alphas[j] * y[i] * y[j] * kernel[i * n + j];
        }
    }
    alphas.iter().copied().sum::<T>() - T::lit(0.5) * quad
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoConfig<T> {
    pub c: T,
    pub gamma: T,
    pub tol: T,
    pub max_passes: usize,
    pub seed: u64,
    /// Hard cap on sweeps over the training set.
    pub max_sweeps: usize,
}

impl<T: Scalar> SmoConfig<T> {
    pub fn new(c: T, gamma: T) -> Self {
        Self {
            c,
            gamma,
            tol: T::lit(1e-3),
            max_passes: 10,
            seed: 0,
            max_sweeps: 10_000,
        }
    }
}

/// Full dual solution: one multiplier per training example.
#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution<T> {
    pub alphas: Vec<T>,
    pub bias: T,
    pub sweeps: usize,
}

struct Smo<'a, T> {
    y: &'a [T],
    k: &'a [T],
    n: usize,
    c: T,
    alphas: Vec<T>,
    /// `Σ_k α_k y_k K_ik`, kept in sync with `alphas`.
    g: Vec<T>,
    b: T,
}

impl<T: Scalar> Smo<'_, T> {
    fn error(&self, i: usize) -> T {
        self.g[i] + self.b - self.y[i]
    }

    fn violates(&self, i: usize, tol: T) -> bool {
        let r = self.error(i) * self.y[i];
        (r < -tol && self.alphas[i] < self.c) || (r > tol && self.alphas[i] > T::zero())
    }

    /// `(i, j, max_up, min_low)` over `yₖ − gₖ`: `i` can raise `yᵢαᵢ`, `j`
    /// can lower `yⱼαⱼ`. A bias satisfying every KKT condition within `tol`
    /// exists iff `max_up − min_low ≤ 2·tol`.
    fn extreme_pair(&self) -> Option<(usize, usize, T, T)> {
        let zero = T::zero();
        let mut up: Option<(usize, T)> = None;
        let mut low: Option<(usize, T)> = None;
        for k in 0..self.n {
            let v = self.y[k] - self.g[k];
            let (pos, a) = (self.y[k] > zero, self.alphas[k]);
            if ((pos && a < self.c) || (!pos && a > zero)) && up.is_none_or(|(_, m)| v > m) {
                up = Some((k, v));
            }
            if ((pos && a > zero) || (!pos && a < self.c)) && low.is_none_or(|(_, m)| v < m) {
                low = Some((k, v));
            }
        }
        let ((i, hi), (j, lo)) = (up?, low?);
        Some((i, j, hi, lo))
    }

    fn take_step(&mut self, i: usize, j: usize) -> bool {
        if i == j {
            return false;
        }
        let (yi, yj) = (self.y[i], self.y[j]);
        let (ai, aj) = (self.alphas[i], self.alphas[j]);
        let (ei, ej) = (self.error(i), self.error(j));
        let (lo, hi) = if yi != yj {
            ((aj - ai).max(T::zero()), (self.c + aj - ai).min(self.c))
        } else {
            ((ai + aj - self.c).max(T::zero()), (ai + aj).min(self.c))
        };
        if hi - lo <= T::epsilon() {
            return false;
        }
        let n = self.n;
        let (kii, kjj, kij) = (self.k[i * n + i], self.k[j * n + j], self.k[i * n + j]);
        let eta = T::lit(2.0) * kij - kii - kjj;
        if eta >= T::zero() {
            return false;
        }
        let mut aj_new = (aj - yj * (ei - ej) / eta).max(lo).min(hi);
        if (aj_new - aj).abs() < T::lit(1e-9) {
            return false;
        }
        let snap = |a: T| {
            let eps = T::lit(1e-12) * self.c;
            if a < eps {
                T::zero()
            } else if a > self.c - eps {
                self.c
            } else {
                a
            }
        };
        aj_new = snap(aj_new);
        let ai_new = snap((ai + yi * yj * (aj - aj_new)).max(T::zero()).min(self.c));
        let (di, dj) = (ai_new - ai, aj_new - aj);
        let b1 = self.b - ei - yi * di * kii - yj * dj * kij;
        let b2 = self.b - ej - yi * di * kij - yj * dj * kjj;
        let free = |a: T| a > T::zero() && a < self.c;
        self.b = if free(ai_new) {
            b1
        } else if free(aj_new) {
            b2
        } else {
            (b1 + b2) / T::lit(2.0)
        };
        self.alphas[i] = ai_new;
        self.alphas[j] = aj_new;
        let (si, sj) = (yi * di, yj * dj);
        for t in 0..n {
            self.g[t] += si * self.k[i * n + t] + sj * self.k[j * n + t];
        }
        true
    }
}

fn validate_labels<T: Scalar>(y: &[T]) -> Result<()> {
    if let Some(bad) = y.iter().find(|&&v| v != T::one() && v != -T::one()) {
        return Err(Error::InvalidArgument(format!("SVM labels must be ±1, got {bad}")));
    }
    let pos = y.iter().any(|&v| v > T::zero());
    let neg = y.iter().any(|&v| v < T::zero());
    if !(pos && neg) {
        return Err(Error::SingleClassInput);
    }
    Ok(())
}

/// Simplified SMO on a precomputed Gram matrix.
///
/// Examples violating KKT by more than `tol` are paired with a random
/// partner; if that pair cannot move, the remaining partners are scanned in
/// order from the random start. Stops after `max_passes` consecutive sweeps
/// without any multiplier change. The random-pair phase can stall with small
/// residual violations, so it is followed by maximal-violating-pair steps
/// until the KKT gap is within `tol`, and the bias is then placed in the
/// middle of its feasible interval.
pub fn smo_solve_kernel<T: Scalar>(kernel: &[T], y: &[T], cfg: &SmoConfig<T>) -> Result<DualSolution<T>> {
    let n = y.len();
    check_dims(n * n, kernel.len())?;
    validate_labels(y)?;
    if !(cfg.c > T::zero()) {
        return Err(Error::InvalidArgument("C must be positive".into()));
    }
    let mut smo = Smo {
        y,
        k: kernel,
        n,
        c: cfg.c,
        alphas: vec![T::zero(); n],
        g: vec![T::zero(); n],
        b: T::zero(),
    };
    let mut rng = seeded(cfg.seed, STREAM_SMO);
    let mut passes = 0;
    let mut sweeps = 0;
    while passes < cfg.max_passes && sweeps < cfg.max_sweeps {
        sweeps += 1;
        let mut changed = 0usize;
        for i in 0..n {
            if !smo.violates(i, cfg.tol) {
                continue;
            }
            let start = rng.gen_range(0..n - 1);
            let first = if start >= i { start + 1 } else { start };
            let moved = smo.take_step(i, first)
                || (1..n).any(|off| {
                    let j = (first + off) % n;
                    j != i && smo.take_step(i, j)
                });
            if moved {
                changed += 1;
            }
        }
        if changed == 0 {
            passes += 1;
        } else {
            passes = 0;
        }
    }
    let mut polish = 0;
    while let Some((i, j, hi, lo)) = smo.extreme_pair() {
        if hi - lo <= cfg.tol || polish >= 100 * n + 10_000 || !smo.take_step(i, j) {
            break;
        }
        polish += 1;
    }
    if let Some((_, _, hi, lo)) = smo.extreme_pair() {
        smo.b = (hi + lo) / T::lit(2.0);
    }
    Ok(DualSolution {
        alphas: smo.alphas,
        bias: smo.b,
        sweeps,
    })
}

pub fn smo_solve<T: Scalar>(x: &[Vec<T>], y: &[T], cfg: &SmoConfig<T>) -> Result<DualSolution<T>> {
    check_dims(x.len(), y.len())?;
    if let Some(d) = x.first().map(Vec::len) {
        for r in x {
            check_dims(d, r.len())?;
        }
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("training rows must be finite".into()));
    }
    validate_labels(y)?;
    smo_solve_kernel(&kernel_matrix(x, cfg.gamma), y, cfg)
}

/// Binary RBF SVM keeping only the support vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct BinarySvmModel<T> {
    pub support_vectors: Vec<Vec<T>>,
    /// `αᵢ·yᵢ` per support vector.
    pub coefficients: Vec<T>,
    pub bias: T,
    pub gamma: T,
    pub c: T,
    pub dim: usize,
}

impl<T: Scalar> BinarySvmModel<T> {
    pub fn from_solution(x: &[Vec<T>], y: &[T], sol: &DualSolution<T>, cfg: &SmoConfig<T>) -> Self {
        let mut support_vectors = Vec::new();
        let mut coefficients = Vec::new();
        for (i, &a) in sol.alphas.iter().enumerate() {
            if a > T::zero() {
                support_vectors.push(x[i].clone());
                coefficients.push(a * y[i]);
            }
        }
        Self {
            support_vectors,
            coefficients,
            bias: sol.bias,
            gamma: cfg.gamma,
            c: cfg.c,
            dim: x.first().map_or(0, Vec::len),
        }
    }

    /// `Σ coeffᵢ·K(svᵢ, x) + b`
    pub fn decision_function(&self, x: &[T]) -> Result<T> {
        check_dims(self.dim, x.len())?;
        let mut acc = self.bias;
        for (sv, &c) in self.support_vectors.iter().zip(&self.coefficients) {
            acc += c * (-self.gamma * squared_distance(sv, x)).exp();
        }
        Ok(acc)
    }

    fn write_into(&self, file: &mut ModelFile, prefix: &str) {
        file.set_meta(&format!("{prefix}.C"), crate::scalar::format_exact(self.c));
        file.set_meta(&format!("{prefix}.gamma"), crate::scalar::format_exact(self.gamma));
        file.set_meta(&format!("{prefix}.b"), crate::scalar::format_exact(self.bias));
        file.set_meta(&format!("{prefix}.n_sv"), self.coefficients.len());
        file.set_meta(&format!("{prefix}.dim"), self.dim);
        file.push_tensor(
            &format!("{prefix}.coef"),
            &[self.coefficients.len()],
            &self.coefficients,
        );
        let flat: Vec<T> = self.support_vectors.iter().flatten().copied().collect();
        file.push_tensor(&format!("{prefix}.sv"), &[self.coefficients.len(), self.dim], &flat);
    }

    fn read_from(file: &ModelFile, prefix: &str) -> Result<Self> {
        let lit = |k: &str| -> Result<T> { Ok(T::lit(file.parse_meta::<f64>(&format!("{prefix}.{k}"))?)) };
        let n_sv: usize = file.parse_meta(&format!("{prefix}.n_sv"))?;
        let dim: usize = file.parse_meta(&format!("{prefix}.dim"))?;
        let (_, coefficients) = file.tensor::<T>(&format!("{prefix}.coef"), Some(&[n_sv]))?;
        let (_, flat) = file.tensor::<T>(&format!("{prefix}.sv"), Some(&[n_sv, dim]))?;
        let support_vectors = if dim == 0 {
            vec![Vec::new(); n_sv]
        } else {
            flat.chunks(dim).map(<[T]>::to_vec).collect()
        };
        Ok(Self {
            support_vectors,
            coefficients,
            bias: lit("b")?,
            gamma: lit("gamma")?,
            c: lit("C")?,
            dim,
        })
    }
}

pub fn smo_train<T: Scalar>(x: &[Vec<T>], y: &[T], cfg: &SmoConfig<T>) -> Result<BinarySvmModel<T>> {
    let sol = smo_solve(x, y, cfg)?;
    Ok(BinarySvmModel::from_solution(x, y, &sol, cfg))
}

pub fn decision_function<T: Scalar>(model: &BinarySvmModel<T>, x: &[T]) -> Result<T> {
    model.decision_function(x)
}

/// Index of the largest value; ties go to the smallest index.
pub fn argmax_first<T: Scalar>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Per-feature preprocessing applied before the kernel.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureScaling<T> {
    Identity,
    /// Each row scaled to unit Euclidean norm (zero rows left as is).
    L2Normalize,
    /// `(x - mean) / std` per column with training statistics; zero-variance
    /// columns are only centered.
    Standardize {
        mean: Vec<T>,
        std: Vec<T>,
    },
}

impl<T: Scalar> FeatureScaling<T> {
    pub fn standardize_from(rows: &[Vec<T>]) -> Self {
        let d = rows.first().map_or(0, Vec::len);
        let n = T::from_count(rows.len().max(1));
        let mut mean = vec![T::zero(); d];
        for r in rows {
            for (m, &v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![T::zero(); d];
        for r in rows {
            for ((s, &v), &m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var.into_iter().map(|s| (s / n).sqrt()).collect();
        FeatureScaling::Standardize { mean, std }
    }

    pub fn apply(&self, row: &[T]) -> Vec<T> {
        match self {
            FeatureScaling::Identity => row.to_vec(),
            FeatureScaling::L2Normalize => {
                let norm = row.iter().map(|&v| v * v).sum::<T>().sqrt();
                if norm > T::zero() {
                    row.iter().map(|&v| v / norm).collect()
                } else {
                    row.to_vec()
                }
            }
            FeatureScaling::Standardize { mean, std } => row
                .iter()
                .zip(mean.iter().zip(std))
                .map(|(&v, (&m, &s))| if s > T::zero() { (v - m) / s } else { v - m })
                .collect(),
        }
    }

    fn name(&self) -> &'static str {
        match self {
            FeatureScaling::Identity => "identity",
            FeatureScaling::L2Normalize => "l2",
            FeatureScaling::Standardize { .. } => "standardize",
        }
    }
}

/// `1 / (d · Var)` over every training feature value, or `1 / d` when the
/// variance is zero.
pub fn default_gamma<T: Scalar>(rows: &[Vec<T>]) -> T {
    let d = rows.first().map_or(1, Vec::len).max(1);
    let count = rows.len() * d;
    if count == 0 {
        return T::one() / T::from_count(d);
    }
    let n = T::from_count(count);
    let mean = rows.iter().flatten().copied().sum::<T>() / n;
    let var = rows.iter().flatten().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
    if var > T::zero() {
        T::one() / (T::from_count(d) * var)
    } else {
        T::one() / T::from_count(d)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmConfig<T> {
    pub c: T,
    /// `None` selects [`default_gamma`] on the scaled training rows.
    pub gamma: Option<T>,
    pub tol: T,
    pub max_passes: usize,
    pub seed: u64,
}

impl<T: Scalar> Default for SvmConfig<T> {
    fn default() -> Self {
        Self {
            c: T::one(),
            gamma: None,
            tol: T::lit(1e-3),
            max_passes: 10,
            seed: 0,
        }
    }
}

/// Four one-vs-rest binary SVMs sharing one feature space.
#[derive(Debug, Clone, PartialEq)]
pub struct MulticlassSvm<T> {
    pub models: Vec<BinarySvmModel<T>>,
    pub scaling: FeatureScaling<T>,
    pub dim: usize,
}

impl<T: Scalar> MulticlassSvm<T> {
    pub fn fit(rows: &[Vec<T>], labels: &[MoodLabel], scaling: FeatureScaling<T>, cfg: &SvmConfig<T>) -> Result<Self> {
        check_dims(rows.len(), labels.len())?;
        if rows.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let dim = rows[0].len();
        let scaled: Vec<Vec<T>> = rows.iter().map(|r| scaling.apply(r)).collect();
        let gamma = cfg.gamma.unwrap_or_else(|| default_gamma(&scaled));
        let kernel = kernel_matrix(&scaled, gamma);
        let mut models = Vec::with_capacity(MoodLabel::COUNT);
        for class in MoodLabel::ALL {
            let y: Vec<T> = labels
                .iter()
                .map(|&l| if l == class { T::one() } else { -T::one() })
                .collect();
            let smo = SmoConfig {
                c: cfg.c,
                gamma,
                tol: cfg.tol,
                max_passes: cfg.max_passes,
                seed: cfg.seed.wrapping_add(class.code() as u64),
                max_sweeps: 10_000,
            };
            let sol = smo_solve_kernel(&kernel, &y, &smo)?;
            models.push(BinarySvmModel::from_solution(&scaled, &y, &sol, &smo));
        }
        Ok(Self { models, scaling, dim })
    }

    pub fn decision_values(&self, x: &[T]) -> Result<Vec<T>> {
        check_dims(self.dim, x.len())?;
        let z = self.scaling.apply(x);
        self.models.iter().map(|m| m.decision_function(&z)).collect()
    }

    pub fn predict(&self, x: &[T]) -> Result<MoodLabel> {
        Ok(predict_from_decisions(&self.decision_values(x)?))
    }

    pub fn write_into(&self, file: &mut ModelFile) {
        file.set_meta("svm.dim", self.dim);
        file.set_meta("svm.scaling", self.scaling.name());
        if let FeatureScaling::Standardize { mean, std } = &self.scaling {
            file.push_tensor("svm.mean", &[mean.len()], mean);
            file.push_tensor("svm.std", &[std.len()], std);
        }
        for (i, m) in self.models.iter().enumerate() {
            m.write_into(file, &format!("svm{i}"));
        }
    }

    pub fn read_from(file: &ModelFile) -> Result<Self> {
        let dim: usize = file.parse_meta("svm.dim")?;
        let scaling = match file.meta("svm.scaling")? {
            "identity" => FeatureScaling::Identity,
            "l2" => FeatureScaling::L2Normalize,
            "standardize" => FeatureScaling::Standardize {
                mean: file.tensor("svm.mean", Some(&[dim]))?.1,
                std: file.tensor("svm.std", Some(&[dim]))?.1,
            },
            other => return Err(Error::ModelFormat(format!("unknown scaling {other:?}"))),
        };
        let models = (0..MoodLabel::COUNT)
            .map(|i| BinarySvmModel::read_from(file, &format!("svm{i}")))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { models, scaling, dim })
    }
}

/// Argmax over one-vs-rest decision values, ties to the smallest code.
pub fn predict_from_decisions<T: Scalar>(values: &[T]) -> MoodLabel {
    MoodLabel::from_code(argmax_first(values)).expect("four decision values")
}

pub fn predict_multiclass<T: Scalar>(models: &MulticlassSvm<T>, x: &[T]) -> Result<MoodLabel> {
    models.predict(x)
}
