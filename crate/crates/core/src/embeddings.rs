//! CBOW word embeddings trained with negative sampling.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::Rng as _;

use crate::corpus::{Vocabulary, PAD, UNK};
use crate::error::{Error, Result};
use crate::rng::{seeded, Rng, STREAM_CBOW_INIT, STREAM_CBOW_TRAIN};
use crate::scalar::{dot, Scalar};

/// Input and output word vectors over a vocabulary (reserved rows included).
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix<T> {
    dim: usize,
    input: Vec<T>,
    output: Vec<T>,
    vocab: Vocabulary,
}

impl<T: Scalar> EmbeddingMatrix<T> {
    pub fn zeros(vocab: Vocabulary, dim: usize) -> Self {
        assert!(dim >= 1, "embedding dimension must be positive");
        let n = vocab.len() * dim;
        Self {
            dim,
            input: vec![T::zero(); n],
            output: vec![T::zero(); n],
            vocab,
        }
    }

    /// word2vec initialization: inputs uniform in `[-0.5/d, 0.5/d]`, outputs
    /// zero, PAD row zero.
    pub fn initialize(vocab: Vocabulary, dim: usize, seed: u64) -> Self {
        let mut emb = Self::zeros(vocab, dim);
        let mut rng = seeded(seed, STREAM_CBOW_INIT);
        let half = 0.5 / dim as f64;
        for v in &mut emb.input[dim..] {
            *v = T::lit(rng.gen_range(-half..half));
        }
        emb
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn rows(&self) -> usize {
        self.vocab.len()
    }

    pub fn input_row(&self, i: usize) -> &[T] {
        &self.input[i * self.dim..(i + 1) * self.dim]
    }

    pub fn input_row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.input[i * self.dim..(i + 1) * self.dim]
    }

    pub fn output_row(&self, i: usize) -> &[T] {
        &self.output[i * self.dim..(i + 1) * self.dim]
    }

    pub fn output_row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.output[i * self.dim..(i + 1) * self.dim]
    }

    /// Vector for a word, if present.
    pub fn vector(&self, word: &str) -> Option<&[T]> {
        self.vocab.index(word).map(|i| self.input_row(i))
    }

    pub fn is_finite(&self) -> bool {
        self.input.iter().chain(&self.output).all(|v| v.is_finite())
    }
}

/// Noise distribution `p(w) ∝ count(w)^0.75` over non-reserved words.
#[derive(Debug, Clone, PartialEq)]
pub struct UnigramTable {
    /// `cumulative[k]` covers vocabulary index `k + 2`.
    cumulative: Vec<f64>,
    probs: Vec<f64>,
}

impl UnigramTable {
    pub fn new(vocab: &Vocabulary) -> Result<Self> {
        if vocab.is_empty() {
            return Err(Error::EmptyVocabulary);
        }
        let weights: Vec<f64> = vocab.counts()[2..].iter().map(|&c| (c as f64).powf(0.75)).collect();
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::EmptyVocabulary);
        }
        let probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let mut acc = 0.0;
        let mut cumulative: Vec<f64> = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        *cumulative.last_mut().unwrap() = 1.0;
        Ok(Self { cumulative, probs })
    }

    /// Probability of vocabulary index `index` (0 for reserved rows).
    pub fn prob(&self, index: usize) -> f64 {
        index
            .checked_sub(2)
            .and_then(|k| self.probs.get(k))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn sample(&self, rng: &mut Rng) -> usize {
        let u: f64 = rng.gen();
        let k = self.cumulative.partition_point(|&c| c <= u);
        k.min(self.probs.len() - 1) + 2
    }
}

pub fn build_unigram_table(vocab: &Vocabulary) -> Result<UnigramTable> {
    UnigramTable::new(vocab)
}

const MAX_REDRAWS: usize = 100;

/// Draws `k` noise words, redrawing any that equal `target`. After 100
/// redraws for one slot the last draw is kept.
pub fn negative_sample(table: &UnigramTable, target: usize, k: usize, rng: &mut Rng) -> Vec<usize> {
    (0..k)
        .map(|_| {
            let mut w = table.sample(rng);
            for _ in 0..MAX_REDRAWS {
                if w != target {
                    break;
                }
                w = table.sample(rng);
            }
            w
        })
        .collect()
}

/// `-ln σ(x)`, stable for large `|x|`.
fn neg_log_sigmoid<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    }
}

/// Loss and gradient pieces of one CBOW example.
struct CbowPass<T> {
    loss: T,
    hidden: Vec<T>,
    /// `∂loss/∂h`
    grad_hidden: Vec<T>,
    /// `σ(s_j) - label_j` for the center (first) and each negative.
    coeffs: Vec<T>,
}

fn cbow_pass<T: Scalar>(
    center: usize,
    context: &[usize],
    negatives: &[usize],
    emb: &EmbeddingMatrix<T>,
) -> CbowPass<T> {
    let d = emb.dim;
    let mut hidden = vec![T::zero(); d];
    for &c in context {
        for (h, &v) in hidden.iter_mut().zip(emb.input_row(c)) {
            *h += v;
        }
    }
    let inv = T::one() / T::from_count(context.len());
    hidden.iter_mut().for_each(|h| *h *= inv);

    let mut loss = T::zero();
    let mut grad_hidden = vec![T::zero(); d];
    let mut coeffs = Vec::with_capacity(negatives.len() + 1);
    for (j, &w) in std::iter::once(&center).chain(negatives).enumerate() {
        let out = emb.output_row(w);
        let s = dot(&hidden, out);
        let (label, term) = if j == 0 {
            (T::one(), neg_log_sigmoid(s))
        } else {
            (T::zero(), neg_log_sigmoid(-s))
        };
        loss += term;
        let g = s.sigmoid() - label;
        coeffs.push(g);
        for (gh, &o) in grad_hidden.iter_mut().zip(out) {
            *gh += g * o;
        }
    }
    CbowPass {
        loss,
        hidden,
        grad_hidden,
        coeffs,
    }
}

fn clean_context(context: &[usize]) -> Result<Vec<usize>> {
    let ctx: Vec<usize> = context.iter().copied().filter(|&c| c != PAD).collect();
    if ctx.is_empty() {
        return Err(Error::EmptyContext);
    }
    Ok(ctx)
}

/// Negative-sampling loss for a fixed set of negatives.
pub fn cbow_loss<T: Scalar>(
    center: usize,
    context: &[usize],
    negatives: &[usize],
    emb: &EmbeddingMatrix<T>,
) -> Result<T> {
    let ctx = clean_context(context)?;
    Ok(cbow_pass(center, &ctx, negatives, emb).loss)
}

/// Analytic gradient of [`cbow_loss`], keyed by row index. Repeated rows
/// accumulate.
#[derive(Debug, Clone, PartialEq)]
pub struct CbowGradient<T> {
    pub input: BTreeMap<usize, Vec<T>>,
    pub output: BTreeMap<usize, Vec<T>>,
}

pub fn cbow_gradient<T: Scalar>(
    center: usize,
    context: &[usize],
    negatives: &[usize],
    emb: &EmbeddingMatrix<T>,
) -> Result<(T, CbowGradient<T>)> {
    let ctx = clean_context(context)?;
    let pass = cbow_pass(center, &ctx, negatives, emb);
    let d = emb.dim;
    let mut input: BTreeMap<usize, Vec<T>> = BTreeMap::new();
    let inv = T::one() / T::from_count(ctx.len());
    for &c in &ctx {
        let row = input.entry(c).or_insert_with(|| vec![T::zero(); d]);
        for (r, &g) in row.iter_mut().zip(&pass.grad_hidden) {
            *r += g * inv;
        }
    }
    let mut output: BTreeMap<usize, Vec<T>> = BTreeMap::new();
    for (&w, &g) in std::iter::once(&center).chain(negatives).zip(&pass.coeffs) {
        let row = output.entry(w).or_insert_with(|| vec![T::zero(); d]);
        for (r, &h) in row.iter_mut().zip(&pass.hidden) {
            *r += g * h;
        }
    }
    Ok((pass.loss, CbowGradient { input, output }))
}

fn apply_step<T: Scalar>(center: usize, ctx: &[usize], negatives: &[usize], emb: &mut EmbeddingMatrix<T>, lr: T) -> T {
    let pass = cbow_pass(center, ctx, negatives, emb);
    for (&w, &g) in std::iter::once(&center).chain(negatives).zip(&pass.coeffs) {
        let scale = -lr * g;
        for (o, &h) in emb.output_row_mut(w).iter_mut().zip(&pass.hidden) {
            *o += scale * h;
        }
    }
    let scale = -lr / T::from_count(ctx.len());
    for &c in ctx {
        for (v, &g) in emb.input_row_mut(c).iter_mut().zip(&pass.grad_hidden) {
            *v += scale * g;
        }
    }
    pass.loss
}

/// One SGD step on a (center, context) example with freshly drawn
/// negatives. Returns the loss before the update.
pub fn cbow_step<T: Scalar>(
    center: usize,
    context: &[usize],
    emb: &mut EmbeddingMatrix<T>,
    table: &UnigramTable,
    k: usize,
    lr: T,
    rng: &mut Rng,
) -> Result<T> {
    let ctx = clean_context(context)?;
    let negatives = negative_sample(table, center, k, rng);
    Ok(apply_step(center, &ctx, &negatives, emb, lr))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CbowConfig {
    pub window: usize,
    pub negatives: usize,
    pub dim: usize,
    pub epochs: usize,
    pub lr_start: f64,
    pub lr_end: f64,
    pub min_count: u64,
    pub seed: u64,
    /// Frequent-word subsampling threshold; `None` keeps every token.
    pub subsample: Option<f64>,
    /// Draw the effective window radius uniformly from `1..=window`.
    pub dynamic_window: bool,
}

impl Default for CbowConfig {
    fn default() -> Self {
        Self {
            window: 5,
            negatives: 5,
            dim: 300,
            epochs: 5,
            lr_start: 0.025,
            lr_end: 1e-4,
            min_count: 5,
            seed: 1,
            subsample: None,
            dynamic_window: false,
        }
    }
}

impl CbowConfig {
    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.window < 1 {
            return bad("window must be >= 1");
        }
        if self.negatives < 1 {
            return bad("negatives must be >= 1");
        }
        if self.dim < 1 {
            return bad("dim must be >= 1");
        }
        if !(self.lr_start >= self.lr_end && self.lr_end > 0.0) {
            return bad("need lr_start >= lr_end > 0");
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct CbowTraining<T> {
    pub embeddings: EmbeddingMatrix<T>,
    /// Mean pre-update loss of every step, per epoch.
    pub epoch_losses: Vec<T>,
}

fn window_context(doc: &[usize], p: usize, radius: usize, out: &mut Vec<usize>) {
    out.clear();
    let lo = p.saturating_sub(radius);
    let hi = (p + radius).min(doc.len() - 1);
    out.extend((lo..=hi).filter(|&q| q != p).map(|q| doc[q]).filter(|&t| t != PAD));
}

/// Sequential CBOW training over index-encoded documents.
pub fn train_cbow<T: Scalar>(corpus: &[Vec<usize>], vocab: &Vocabulary, cfg: &CbowConfig) -> Result<CbowTraining<T>> {
    cfg.validate()?;
    if corpus.iter().all(|d| d.is_empty()) {
        return Err(Error::EmptyCorpus);
    }
    let table = UnigramTable::new(vocab)?;
    let mut emb = EmbeddingMatrix::initialize(vocab.clone(), cfg.dim, cfg.seed);
    let mut rng = seeded(cfg.seed, STREAM_CBOW_TRAIN);

    let mut ctx = Vec::new();
    let positions_per_epoch: usize = corpus
        .iter()
        .map(|doc| {
            (0..doc.len())
                .filter(|&p| {
                    doc[p] != PAD && {
                        window_context(doc, p, cfg.window, &mut ctx);
                        !ctx.is_empty()
                    }
                })
                .count()
        })
        .sum();
    let total_steps = (positions_per_epoch * cfg.epochs).max(1);
    let lr_span = cfg.lr_start - cfg.lr_end;
    let total_count: f64 = vocab.counts().iter().sum::<u64>() as f64;

    let mut step = 0usize;
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut kept = Vec::new();
    for _ in 0..cfg.epochs {
        let mut loss_sum = T::zero();
        let mut n = 0usize;
        for doc in corpus {
            let doc: &[usize] = match cfg.subsample {
                Some(t) if t > 0.0 => {
                    kept.clear();
                    kept.extend(doc.iter().copied().filter(|&w| {
                        if w == PAD || w == UNK {
                            return true;
                        }
                        let f = vocab.count(w) as f64 / total_count;
                        let keep = ((f / t).sqrt() + 1.0) * t / f;
                        keep >= 1.0 || rng.gen::<f64>() < keep
                    }));
                    &kept
                }
                _ => doc,
            };
            for p in 0..doc.len() {
                let center = doc[p];
                if center == PAD {
                    continue;
                }
                let radius = if cfg.dynamic_window {
                    rng.gen_range(1..=cfg.window)
                } else {
                    cfg.window
                };
                window_context(doc, p, radius, &mut ctx);
                if ctx.is_empty() {
                    continue;
                }
                let frac = (step as f64 / (total_steps - 1).max(1) as f64).min(1.0);
                let lr = T::lit((cfg.lr_start - lr_span * frac).max(cfg.lr_end));
                let negatives = negative_sample(&table, center, cfg.negatives, &mut rng);
                loss_sum += apply_step(center, &ctx, &negatives, &mut emb, lr);
                n += 1;
                step += 1;
            }
        }
        epoch_losses.push(if n == 0 { T::zero() } else { loss_sum / T::from_count(n) });
    }
    Ok(CbowTraining {
        embeddings: emb,
        epoch_losses,
    })
}

pub fn cosine_similarity<T: Scalar>(a: &[T], b: &[T]) -> Result<T> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    if na == T::zero() || nb == T::zero() {
        return Err(Error::ZeroVector);
    }
    Ok((dot(a, b) / (na * nb)).max(-T::one()).min(T::one()))
}

/// Most similar non-reserved words to `word` by cosine over input vectors.
/// Zero rows are skipped; equal similarities keep vocabulary order.
pub fn nearest_neighbors<T: Scalar>(word: &str, emb: &EmbeddingMatrix<T>, top_k: usize) -> Result<Vec<(String, T)>> {
    let q = emb
        .vocab
        .index(word)
        .ok_or_else(|| Error::UnknownWord(word.to_string()))?;
    let query = emb.input_row(q);
    let mut scored = Vec::new();
    for i in 2..emb.rows() {
        if i == q {
            continue;
        }
        match cosine_similarity(query, emb.input_row(i)) {
            Ok(s) => scored.push((i, s)),
            Err(Error::ZeroVector) => continue,
            Err(e) => return Err(e),
        }
    }
    scored.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.0.cmp(&b.0))
    });
    Ok(scored
        .into_iter()
        .take(top_k)
        .map(|(i, s)| (emb.vocab.token(i).unwrap().to_string(), s))
        .collect())
}

/// word2vec text format: `V d` header, then `word v1 … vd` per row with six
/// decimals. Reserved rows are written first.
pub fn write_embeddings<T: Scalar, W: Write>(emb: &EmbeddingMatrix<T>, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{} {}", emb.rows(), emb.dim)?;
    let mut line = String::new();
    for i in 0..emb.rows() {
        line.clear();
        line.push_str(emb.vocab.token(i).unwrap());
        for v in emb.input_row(i) {
            line.push_str(&format!(" {:.6}", v.as_f64()));
        }
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    Ok(())
}

pub fn save_embeddings<T: Scalar>(emb: &EmbeddingMatrix<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_embeddings(emb, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads the word2vec text format. Files without leading `<pad>`/`<unk>`
/// rows get zero vectors for them. Output vectors are not stored in the
/// format and come back as zeros.
pub fn read_embeddings<T: Scalar, R: BufRead>(input: R) -> Result<EmbeddingMatrix<T>> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::parse(1, "missing header"))?
        .map_err(|e| Error::io("<embeddings>", e))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|s| s.parse())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::parse(1, format!("bad header {header:?}")))?;
    let [rows, dim] = dims[..] else {
        return Err(Error::parse(1, format!("header must be `V d`, got {header:?}")));
    };
    if dim == 0 {
        return Err(Error::parse(1, "dimension must be positive"));
    }
    let mut words = Vec::with_capacity(rows);
    let mut data: Vec<T> = Vec::with_capacity(rows * dim);
    for (k, line) in lines.enumerate() {
        let line_no = k + 2;
        let line = line.map_err(|e| Error::io("<embeddings>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        if words.len() == rows {
            return Err(Error::parse(line_no, format!("more than {rows} rows")));
        }
        let mut fields = line.split_whitespace();
        let word = fields.next().unwrap().to_string();
        let before = data.len();
        for f in fields {
            let v: f64 = f
                .parse()
                .map_err(|_| Error::parse(line_no, format!("bad value {f:?}")))?;
            data.push(T::lit(v));
        }
        if data.len() - before != dim {
            return Err(Error::parse(
                line_no,
                format!("expected {dim} values, got {}", data.len() - before),
            ));
        }
        words.push(word);
    }
    if words.len() != rows {
        return Err(Error::parse(
            words.len() + 2,
            format!("expected {rows} rows, found {}", words.len()),
        ));
    }

    let has_reserved = words.first().map(String::as_str) == Some(crate::corpus::PAD_TOKEN);
    let skip = if has_reserved { 2.min(words.len()) } else { 0 };
    let vocab = Vocabulary::from_ranked(words.iter().skip(skip).map(|w| (w.clone(), 0)));
    if vocab.num_words() != words.len() - skip {
        return Err(Error::parse(1, "duplicate words in embedding file"));
    }
    let mut emb = EmbeddingMatrix::zeros(vocab, dim);
    if has_reserved {
        emb.input[dim..].copy_from_slice(&data[dim..]);
    } else {
        emb.input[2 * dim..].copy_from_slice(&data);
    }
    emb.input[..dim].iter_mut().for_each(|v| *v = T::zero());
    Ok(emb)
}

pub fn load_embeddings<T: Scalar>(path: impl AsRef<Path>) -> Result<EmbeddingMatrix<T>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_embeddings(BufReader::new(file))
}
