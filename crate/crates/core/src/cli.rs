//! Command-line front end. [`run`] returns the process exit code:
//! 0 success, 1 verification failure, 2 usage or input error, 3 numerical
//! failure.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::config::RunConfig;
use crate::corpus::io::{load_processed, read_raw_input, save_processed};
use crate::corpus::{
    clean_lyric_text, count_content_lines, dataset_stats, dedup_documents, encode_tokens, generate_synthetic_corpus,
    segment, split_dataset, LabeledDataset, LyricDocument, MoodLabel, SegmentMode, SegmenterLexicon, Split, Vocabulary,
};
use crate::embeddings::{load_embeddings, save_embeddings, train_cbow, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::eval::{class_report, comparison_table, ConfusionMatrix};
use crate::features::{liwc_features, CategoryLexicon, TfidfModel};
use crate::modelfile::ModelFile;
use crate::nn::gradcheck::{run_checks, CheckTarget, GradCheckOptions};
use crate::nn::{softmax_rows, CnnClassifier, LstmClassifier, NeuralModel, RnnClassifier, Tensor};
use crate::svm::{FeatureScaling, MulticlassSvm};

#[derive(Debug, Parser)]
#[command(name = "lyricmood", version, about = "Mood tagging for song lyrics")]
struct Cli {
    /// Run configuration file (`key = value` lines).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override one configuration key; may be repeated.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModelKind {
    Cnn,
    Rnn,
    Lstm,
    SvmTfidf,
    SvmLiwc,
}

impl ModelKind {
    fn tag(self) -> &'static str {
        match self {
            Self::Cnn => "cnn",
            Self::Rnn => "rnn",
            Self::Lstm => "lstm",
            Self::SvmTfidf => "svm-tfidf",
            Self::SvmLiwc => "svm-liwc",
        }
    }
}

fn display_name(kind: &str) -> &str {
    match kind {
        "cnn" => "CNN",
        "rnn" => "RNN",
        "lstm" => "LSTM",
        "svm-tfidf" => "TF-IDF+SVM",
        "svm-liwc" => "LIWC+SVM",
        other => other,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CorpusFormat {
    /// Processed dataset records.
    Jsonl,
    /// One whitespace-tokenized sentence per line.
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SplitArg {
    Train,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CheckArg {
    All,
    Layers,
    Cnn,
    Rnn,
    Lstm,
    Cbow,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Clean, segment, de-duplicate and split a raw labeled corpus.
    Preprocess {
        /// JSON Lines file or directory of per-class subdirectories.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Word list for lexicon segmentation.
        #[arg(long)]
        segmenter: Option<PathBuf>,
    },
    /// Write a synthetic labeled corpus with planted class signals.
    Synth {
        #[arg(long)]
        out: PathBuf,
    },
    /// Train CBOW word vectors.
    TrainEmbed {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, value_enum, default_value = "jsonl")]
        format: CorpusFormat,
        #[arg(long)]
        out: PathBuf,
        /// Per-epoch loss CSV.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Train one of the five classifiers on the train split.
    Train {
        #[arg(long, value_enum)]
        model: ModelKind,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        /// Category lexicon (`word<TAB>category[<TAB>weight]`).
        #[arg(long)]
        lexicon: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Training log CSV; defaults to `<out>.log.csv`.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Per-class report, confusion matrix and accuracy on one split.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitArg,
        /// Overrides the embeddings path recorded in a neural model file.
        #[arg(long)]
        embeddings: Option<PathBuf>,
        /// Write the class report as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Write the confusion matrix as CSV.
        #[arg(long)]
        confusion: Option<PathBuf>,
    },
    /// Predict the mood of one lyric file.
    Tag {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        segmenter: Option<PathBuf>,
        /// Treat the input as whitespace-separated tokens and skip cleaning.
        #[arg(long)]
        tokens: bool,
    },
    /// Finite-difference gradient checks.
    Gradcheck {
        #[arg(long, value_enum, default_value = "all")]
        arch: CheckArg,
    },
}

/// Failure carrying its exit code.
struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NonFiniteLoss => 3,
            _ => 2,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

type CmdResult = std::result::Result<(), Failure>;

/// Parses `args` (program name first) and runs the command.
pub fn run<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let to_out = matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let sink: &mut dyn Write = if to_out { out } else { err };
            let _ = write!(sink, "{}", e.render());
            return if to_out { 0 } else { 2 };
        }
    };
    match execute(cli, out, err) {
        Ok(()) => 0,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn execute(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    for o in &cli.overrides {
        cfg.apply_override(o)?;
    }
    match cli.command {
        Command::Preprocess {
            input,
            out: path,
            segmenter,
        } => preprocess(&cfg, &input, &path, segmenter.as_deref(), out, err),
        Command::Synth { out: path } => synth(&cfg, &path, out),
        Command::TrainEmbed {
            corpus,
            format,
            out: path,
            log,
        } => train_embed(&cfg, &corpus, format, &path, log.as_deref(), out),
        Command::Train {
            model,
            dataset,
            embeddings,
            lexicon,
            out: path,
            log,
        } => {
            let dataset = dataset.ok_or_else(|| usage("train needs --dataset"))?;
            let log = log.unwrap_or_else(|| with_suffix(&path, ".log.csv"));
            train(
                &cfg,
                model,
                &dataset,
                embeddings.as_deref(),
                lexicon.as_deref(),
                &path,
                &log,
                out,
            )
        }
        Command::Evaluate {
            model,
            dataset,
            split,
            embeddings,
            csv,
            confusion,
        } => {
            let split = match split {
                SplitArg::Train => Split::Train,
                SplitArg::Test => Split::Test,
            };
            evaluate(
                &cfg,
                &model,
                &dataset,
                split,
                embeddings.as_deref(),
                csv.as_deref(),
                confusion.as_deref(),
                out,
            )
        }
        Command::Tag {
            model,
            input,
            embeddings,
            segmenter,
            tokens,
        } => tag(
            &cfg,
            &model,
            &input,
            embeddings.as_deref(),
            segmenter.as_deref(),
            tokens,
            out,
        ),
        Command::Gradcheck { arch } => gradcheck(arch, out),
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn emit(out: &mut dyn Write, text: impl std::fmt::Display) {
    let _ = writeln!(out, "{text}");
}

fn segmenter_for(cfg: &RunConfig, path: Option<&Path>) -> std::result::Result<SegmenterLexicon, Failure> {
    match (cfg.segment_mode, path) {
        (_, Some(p)) => Ok(SegmenterLexicon::load(p)?),
        (SegmentMode::Whitespace, None) => Ok(SegmenterLexicon::default()),
        (SegmentMode::Lexicon, None) => Err(usage(
            "lexicon segmentation needs --segmenter (or set segment.mode=whitespace)",
        )),
    }
}

fn preprocess(
    cfg: &RunConfig,
    input: &Path,
    path: &Path,
    segmenter: Option<&Path>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> CmdResult {
    let lexicon = segmenter_for(cfg, segmenter)?;
    let mut docs = read_raw_input(input)?;
    for doc in &mut docs {
        if doc.label.is_none() {
            return Err(Error::Unlabeled(doc.id.clone()).into());
        }
        doc.preprocess(&lexicon, cfg.segment_mode)?;
    }
    let before = docs.len();
    docs.retain(|d| !d.tokens.is_empty());
    if docs.len() < before {
        let _ = writeln!(
            err,
            "skipped {} documents with no text after cleaning",
            before - docs.len()
        );
    }
    let dropped = dedup_documents(&mut docs);
    if !dropped.is_empty() {
        let _ = writeln!(err, "removed {} duplicate documents", dropped.len());
    }
    let ds = split_dataset(docs, cfg.test_fraction, cfg.seed)?;
    save_processed(&ds, path)?;
    emit(out, dataset_stats(&ds));
    Ok(())
}

fn synth(cfg: &RunConfig, path: &Path, out: &mut dyn Write) -> CmdResult {
    let docs = generate_synthetic_corpus(&cfg.synthetic())?;
    let ds = split_dataset(docs, cfg.test_fraction, cfg.seed)?;
    save_processed(&ds, path)?;
    emit(out, dataset_stats(&ds));
    Ok(())
}

fn read_sentences(path: &Path, format: CorpusFormat) -> Result<Vec<Vec<String>>> {
    match format {
        CorpusFormat::Jsonl => Ok(load_processed(path)?.documents.into_iter().map(|d| d.tokens).collect()),
        CorpusFormat::Text => {
            let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
            let mut out = Vec::new();
            for line in BufReader::new(file).lines() {
                let line = line.map_err(|e| Error::io(path, e))?;
                let toks: Vec<String> = line.split_whitespace().map(str::to_string).collect();
                if !toks.is_empty() {
                    out.push(toks);
                }
            }
            Ok(out)
        }
    }
}

fn train_embed(
    cfg: &RunConfig,
    corpus: &Path,
    format: CorpusFormat,
    path: &Path,
    log: Option<&Path>,
    out: &mut dyn Write,
) -> CmdResult {
    let sentences = read_sentences(corpus, format)?;
    let cbow = cfg.cbow();
    let vocab = Vocabulary::build(sentences.iter().map(Vec::as_slice), cbow.min_count)?;
    let encoded: Vec<Vec<usize>> = sentences
        .iter()
        .map(|s| s.iter().filter_map(|t| vocab.index(t)).collect())
        .collect();
    let trained = train_cbow::<f64>(&encoded, &vocab, &cbow)?;
    if trained.epoch_losses.iter().any(|l| !l.is_finite()) || !trained.embeddings.is_finite() {
        return Err(Error::NonFiniteLoss.into());
    }
    save_embeddings(&trained.embeddings, path)?;
    let mut csv = String::from("epoch,loss\n");
    for (i, l) in trained.epoch_losses.iter().enumerate() {
        csv.push_str(&format!("{},{l:.10}\n", i + 1));
    }
    if let Some(log) = log {
        write_file(log, &csv)?;
    }
    emit(
        out,
        format_args!("vocabulary {} words, dimension {}", vocab.num_words(), cbow.dim),
    );
    if let Some(last) = trained.epoch_losses.last() {
        emit(out, format_args!("final epoch loss {last:.6}"));
    }
    Ok(())
}

fn encode_split(ds: &LabeledDataset, split: Split, vocab: &Vocabulary, max_len: usize) -> Vec<(Vec<usize>, usize)> {
    ds.documents
        .iter()
        .zip(&ds.split)
        .filter(|(_, s)| **s == split)
        .map(|(d, _)| {
            (
                encode_tokens(&d.tokens, vocab, max_len),
                d.label.map_or(0, MoodLabel::code),
            )
        })
        .collect()
}

fn split_docs(ds: &LabeledDataset, split: Split) -> Vec<&LyricDocument> {
    ds.iter_split(split).collect()
}

fn tfidf_rows(model: &TfidfModel, docs: &[&LyricDocument]) -> Vec<Vec<f64>> {
    docs.iter().map(|d| model.transform::<f64>(&d.tokens).values).collect()
}

fn liwc_rows(lex: &CategoryLexicon<f64>, cfg: &RunConfig, docs: &[&LyricDocument]) -> Vec<Vec<f64>> {
    docs.iter()
        .map(|d| liwc_features(&d.tokens, d.line_count, lex, &cfg.liwc).values)
        .collect()
}

fn labels_of(docs: &[&LyricDocument]) -> Vec<MoodLabel> {
    docs.iter().map(|d| d.label.unwrap_or(MoodLabel::Happiness)).collect()
}

fn write_tfidf(model: &TfidfModel, file: &mut ModelFile) {
    let vocab = model.vocab();
    file.set_meta("tfidf.num_docs", model.num_docs());
    file.push_strings("tfidf.tokens", vocab.tokens()[2..].to_vec());
    let counts: Vec<f64> = vocab.counts()[2..].iter().map(|&c| c as f64).collect();
    file.push_tensor("tfidf.counts", &[counts.len()], &counts);
    let df: Vec<f64> = model.doc_freqs().iter().map(|&c| c as f64).collect();
    file.push_tensor("tfidf.doc_freq", &[df.len()], &df);
}

fn read_tfidf(file: &ModelFile) -> Result<TfidfModel> {
    let tokens = file.strings("tfidf.tokens")?;
    let n = tokens.len();
    let (_, counts) = file.tensor::<f64>("tfidf.counts", Some(&[n]))?;
    let vocab = Vocabulary::from_ranked(tokens.iter().cloned().zip(counts.iter().map(|&c| c as u64)));
    let len = vocab.len();
    let (_, df) = file.tensor::<f64>("tfidf.doc_freq", None)?;
    if df.len() != len && df.len() != n {
        return Err(Error::ModelFormat(
            "tf-idf document frequencies do not match vocabulary".into(),
        ));
    }
    Ok(TfidfModel::from_parts(
        vocab,
        df.iter().map(|&c| c as u64).collect(),
        file.parse_meta("tfidf.num_docs")?,
    ))
}

#[allow(clippy::too_many_arguments)]
fn train(
    cfg: &RunConfig,
    kind: ModelKind,
    dataset: &Path,
    embeddings: Option<&Path>,
    lexicon: Option<&Path>,
    path: &Path,
    log: &Path,
    out: &mut dyn Write,
) -> CmdResult {
    let ds = load_processed(dataset)?;
    let train_docs = split_docs(&ds, Split::Train);
    if train_docs.is_empty() {
        return Err(Error::EmptyDataset.into());
    }
    let mut file;
    let log_text;
    let summary;
    match kind {
        ModelKind::Cnn | ModelKind::Rnn | ModelKind::Lstm => {
            let emb_path = embeddings.ok_or_else(|| usage("neural models need --embeddings"))?;
            let emb: EmbeddingMatrix<f64> = load_embeddings(emb_path)?;
            let data = encode_split(&ds, Split::Train, emb.vocab(), cfg.max_len);
            let d = emb.dim();
            let mut model = match kind {
                ModelKind::Cnn => NeuralModel::Cnn(CnnClassifier::new(cfg.cnn(d), cfg.seed)?),
                ModelKind::Rnn => NeuralModel::Rnn(RnnClassifier::new(cfg.recurrent(d), cfg.seed)?),
                _ => NeuralModel::Lstm(LstmClassifier::new(cfg.recurrent(d), cfg.seed)?),
            };
            let report = model.fit(&data, &emb, &cfg.train())?;
            file = model.to_model_file();
            file.set_meta("max_len", cfg.max_len);
            file.set_meta("embeddings", emb_path.display());
            log_text = report.to_csv();
            summary = report
                .epochs
                .last()
                .map(|e| {
                    format!(
                        "epoch {} loss {:.6} train accuracy {:.2}",
                        e.epoch,
                        e.loss,
                        e.accuracy * 100.0
                    )
                })
                .unwrap_or_else(|| "no epochs run".to_string());
        }
        ModelKind::SvmTfidf | ModelKind::SvmLiwc => {
            let labels = labels_of(&train_docs);
            file = ModelFile::new(kind.tag());
            let (rows, scaling) = if kind == ModelKind::SvmTfidf {
                let vocab = Vocabulary::build(train_docs.iter().map(|d| d.tokens.as_slice()), cfg.vocab_min_count)?;
                let tfidf = TfidfModel::fit(train_docs.iter().map(|d| d.tokens.as_slice()), &vocab)?;
                write_tfidf(&tfidf, &mut file);
                (tfidf_rows(&tfidf, &train_docs), FeatureScaling::L2Normalize)
            } else {
                let lex_path = lexicon.ok_or_else(|| usage("svm-liwc needs --lexicon"))?;
                let lex = CategoryLexicon::<f64>::load(lex_path)?;
                file.set_meta("liwc.long_word_chars", cfg.liwc.long_word_chars);
                file.push_strings("liwc.lexicon", lex.to_text().lines().map(str::to_string).collect());
                let rows = liwc_rows(&lex, cfg, &train_docs);
                let scaling = FeatureScaling::standardize_from(&rows);
                (rows, scaling)
            };
            let svm = MulticlassSvm::fit(&rows, &labels, scaling, &cfg.svm())?;
            svm.write_into(&mut file);
            let correct = rows
                .iter()
                .zip(&labels)
                .map(|(r, &l)| svm.predict(r).map(|p| p == l))
                .collect::<Result<Vec<bool>>>()?
                .into_iter()
                .filter(|&b| b)
                .count();
            let acc = correct as f64 / rows.len() as f64;
            log_text = format!("train_accuracy\n{acc:.6}\n");
            summary = format!("train accuracy {:.2}", acc * 100.0);
        }
    }
    file.set_meta("seed", cfg.seed);
    file.save(path)?;
    write_file(log, &log_text)?;
    emit(out, summary);
    Ok(())
}

/// A loaded model of any kind, ready to score token lists.
enum Scorer {
    Neural {
        model: NeuralModel<f64>,
        emb: EmbeddingMatrix<f64>,
        max_len: usize,
    },
    Tfidf {
        tfidf: TfidfModel,
        svm: MulticlassSvm<f64>,
    },
    Liwc {
        lex: CategoryLexicon<f64>,
        cfg: crate::features::LiwcConfig,
        svm: MulticlassSvm<f64>,
    },
}

impl Scorer {
    fn load(path: &Path, embeddings: Option<&Path>) -> Result<(String, Self)> {
        let file = ModelFile::load(path)?;
        let kind = file.kind.clone();
        let scorer = match kind.as_str() {
            "cnn" | "rnn" | "lstm" => {
                let model = NeuralModel::from_model_file(&file)?;
                let emb_path = match embeddings {
                    Some(p) => p.to_path_buf(),
                    None => PathBuf::from(file.meta("embeddings")?),
                };
                let emb: EmbeddingMatrix<f64> = load_embeddings(&emb_path)?;
                if emb.dim() != model.input_dim() {
                    return Err(Error::DimensionMismatch {
                        expected: model.input_dim(),
                        got: emb.dim(),
                    });
                }
                Scorer::Neural {
                    model,
                    emb,
                    max_len: file.parse_meta("max_len")?,
                }
            }
            "svm-tfidf" => Scorer::Tfidf {
                tfidf: read_tfidf(&file)?,
                svm: MulticlassSvm::read_from(&file)?,
            },
            "svm-liwc" => Scorer::Liwc {
                lex: CategoryLexicon::parse(&file.strings("liwc.lexicon")?.join("\n"))?,
                cfg: crate::features::LiwcConfig {
                    long_word_chars: file.parse_meta("liwc.long_word_chars")?,
                },
                svm: MulticlassSvm::read_from(&file)?,
            },
            other => return Err(Error::ModelFormat(format!("unknown model kind {other:?}"))),
        };
        Ok((kind, scorer))
    }

    /// Class probabilities per document; SVM decision values go through a
    /// softmax.
    fn score(&self, docs: &[(&[String], usize)]) -> Result<Vec<Vec<f64>>> {
        let svm_probs = |svm: &MulticlassSvm<f64>, rows: Vec<Vec<f64>>| -> Result<Vec<Vec<f64>>> {
            rows.iter()
                .map(|r| {
                    let d = svm.decision_values(r)?;
                    Ok(softmax_rows(&Tensor::from_vec(&[1, d.len()], d)?).into_data())
                })
                .collect()
        };
        match self {
            Scorer::Neural { model, emb, max_len } => {
                let seqs: Vec<Vec<usize>> = docs
                    .iter()
                    .map(|(t, _)| encode_tokens(t, emb.vocab(), *max_len))
                    .collect();
                Ok(model.predict(&seqs, emb, 100)?.into_iter().map(|p| p.probs).collect())
            }
            Scorer::Tfidf { tfidf, svm } => {
                let rows = docs.iter().map(|(t, _)| tfidf.transform::<f64>(t).values).collect();
                svm_probs(svm, rows)
            }
            Scorer::Liwc { lex, cfg, svm } => {
                let rows = docs
                    .iter()
                    .map(|(t, lines)| liwc_features(t, *lines, lex, cfg).values)
                    .collect();
                svm_probs(svm, rows)
            }
        }
    }
}

/// Arg-max class, ties to the smallest code.
fn decide(probs: &[f64]) -> MoodLabel {
    MoodLabel::from_code(crate::svm::argmax_first(probs)).unwrap_or(MoodLabel::Happiness)
}

#[allow(clippy::too_many_arguments)]
fn evaluate(
    _cfg: &RunConfig,
    model: &Path,
    dataset: &Path,
    split: Split,
    embeddings: Option<&Path>,
    csv: Option<&Path>,
    confusion: Option<&Path>,
    out: &mut dyn Write,
) -> CmdResult {
    let ds = load_processed(dataset)?;
    let docs = split_docs(&ds, split);
    if docs.is_empty() {
        return Err(usage(format!("the {} split is empty", split.as_str())));
    }
    let (kind, scorer) = Scorer::load(model, embeddings)?;
    let inputs: Vec<(&[String], usize)> = docs.iter().map(|d| (d.tokens.as_slice(), d.line_count)).collect();
    let probs = scorer.score(&inputs)?;
    let truth: Vec<usize> = labels_of(&docs).iter().map(|l| l.code()).collect();
    let pred: Vec<usize> = probs.iter().map(|p| decide(p).code()).collect();
    let cm = ConfusionMatrix::from_codes(MoodLabel::COUNT, &truth, &pred)?;
    let report = class_report(&cm)?;
    let names: Vec<&str> = MoodLabel::ALL.iter().map(|l| l.name()).collect();
    emit(out, &report);
    emit(out, "");
    emit(out, "Confusion matrix (rows true, columns predicted)");
    let _ = write!(out, "{}", cm.to_csv(&names));
    emit(out, "");
    let mut table = BTreeMap::new();
    table.insert(display_name(&kind).to_string(), report.accuracy);
    let _ = write!(out, "{}", comparison_table(&table));
    if let Some(p) = csv {
        write_file(p, &report.to_csv())?;
    }
    if let Some(p) = confusion {
        write_file(p, &cm.to_csv(&names))?;
    }
    Ok(())
}

fn tag(
    cfg: &RunConfig,
    model: &Path,
    input: &Path,
    embeddings: Option<&Path>,
    segmenter: Option<&Path>,
    pretokenized: bool,
    out: &mut dyn Write,
) -> CmdResult {
    let raw = fs::read_to_string(input).map_err(|e| Error::io(input, e))?;
    let (tokens, lines) = if pretokenized {
        let toks: Vec<String> = raw.split_whitespace().map(str::to_string).collect();
        let lines = raw.lines().filter(|l| !l.trim().is_empty()).count();
        (toks, lines)
    } else {
        let cleaned = clean_lyric_text(&raw);
        if cleaned.is_empty() {
            return Err(Error::EmptyDocument(input.display().to_string()).into());
        }
        let lexicon = segmenter_for(cfg, segmenter)?;
        (
            segment(&cleaned, &lexicon, cfg.segment_mode)?,
            count_content_lines(&raw),
        )
    };
    if tokens.is_empty() {
        return Err(Error::EmptyDocument(input.display().to_string()).into());
    }
    let (_, scorer) = Scorer::load(model, embeddings)?;
    let probs = scorer.score(&[(tokens.as_slice(), lines)])?.remove(0);
    emit(out, format_args!("label {}", decide(&probs)));
    for (label, p) in MoodLabel::ALL.iter().zip(&probs) {
        emit(out, format_args!("{} {p}", label.name()));
    }
    Ok(())
}

fn gradcheck(arch: CheckArg, out: &mut dyn Write) -> CmdResult {
    let targets: Vec<CheckTarget> = match arch {
        CheckArg::All => vec![
            CheckTarget::Layers,
            CheckTarget::Cnn,
            CheckTarget::Rnn,
            CheckTarget::Lstm,
            CheckTarget::Cbow,
        ],
        CheckArg::Layers => vec![CheckTarget::Layers],
        CheckArg::Cnn => vec![CheckTarget::Cnn],
        CheckArg::Rnn => vec![CheckTarget::Rnn],
        CheckArg::Lstm => vec![CheckTarget::Lstm],
        CheckArg::Cbow => vec![CheckTarget::Cbow],
    };
    let opts = GradCheckOptions::default();
    let mut failed = Vec::new();
    for t in targets {
        for report in run_checks(t, &opts)? {
            emit(out, &report);
            for tc in &report.tensors {
                emit(
                    out,
                    format_args!(
                        "  {} checked={} max_rel_error={:.3e}",
                        tc.name, tc.checked, tc.max_rel_error
                    ),
                );
            }
            if !report.passed() {
                failed.push(report.component.clone());
            }
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure {
            code: 1,
            message: format!("gradient check failed: {}", failed.join(", ")),
        })
    }
}
