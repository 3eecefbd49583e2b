use std::fs;
use std::path::{Path, PathBuf};

use lyricmood::cli::run;
use lyricmood::corpus::io::load_processed;
use lyricmood::corpus::{signal_bigrams, MoodLabel, SyntheticConfig};

struct Output {
    code: i32,
    out: String,
    err: String,
}

fn cli(args: &[&str]) -> Output {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run(
        std::iter::once("lyricmood").chain(args.iter().copied()),
        &mut out,
        &mut err,
    );
    Output {
        code,
        out: String::from_utf8(out).unwrap(),
        err: String::from_utf8(err).unwrap(),
    }
}

fn ok(args: &[&str]) -> String {
    let o = cli(args);
    assert_eq!(o.code, 0, "{args:?} failed: {}", o.err);
    o.out
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

// Small synthetic setup shared by the neural-model tests.
const SMALL: [&str; 10] = [
    "segment.mode=whitespace",
    "cbow.epochs=50",
    "synth.docs_per_class=60",
    "synth.doc_len=30",
    "cbow.dim=12",
    "cnn.filters=8",
    "rnn.hidden=8",
    "train.batch_size=20",
    "train.epochs=12",
    "split.test_fraction=0.25",
];

fn with_small<'a>(args: &[&'a str]) -> Vec<&'a str> {
    let mut all: Vec<&str> = SMALL.iter().flat_map(|kv| ["--set", kv]).collect();
    all.extend_from_slice(args);
    all
}

fn small_corpus(dir: &Path, noise: &str) -> (String, String) {
    let ds = path(dir, "ds.jsonl");
    let emb = path(dir, "emb.txt");
    let noise = format!("synth.noise={noise}");
    let mut args = with_small(&["--set", &noise, "synth", "--out", &ds]);
    ok(&args);
    args = with_small(&["train-embed", "--corpus", &ds, "--out", &emb]);
    ok(&args);
    (ds, emb)
}

#[test]
fn help_and_usage_errors() {
    let help = cli(&["--help"]);
    assert_eq!(help.code, 0);
    assert!(help.out.contains("gradcheck"));
    assert_eq!(cli(&["frobnicate"]).code, 2);
    assert_eq!(cli(&["train"]).code, 2);
    let bad_key = cli(&["--set", "no.such.key=1", "gradcheck", "--arch", "layers"]);
    assert_eq!(bad_key.code, 2);
    assert!(bad_key.err.contains("no.such.key"));
}

#[test]
fn synth_default_size_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (path(dir.path(), "a.jsonl"), path(dir.path(), "b.jsonl"));
    let stats = ok(&["synth", "--out", &a]);
    assert!(stats.contains("2000"), "{stats}");
    ok(&["synth", "--out", &b]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(load_processed(&a).unwrap().len(), 2000);

    let c = path(dir.path(), "c.jsonl");
    ok(&["--set", "seed=2", "synth", "--out", &c]);
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());

    let infeasible = cli(&["--set", "synth.vocab_size=20", "synth", "--out", &c]);
    assert_eq!(infeasible.code, 2);
}

#[test]
fn config_file_with_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = path(dir.path(), "run.cfg");
    fs::write(&cfg, "# small corpus\nsynth.docs_per_class = 20\nsynth.doc_len = 30\n").unwrap();
    let out = path(dir.path(), "ds.jsonl");
    ok(&["--config", &cfg, "synth", "--out", &out]);
    assert_eq!(load_processed(&out).unwrap().len(), 80);
    ok(&[
        "--config",
        &cfg,
        "--set",
        "synth.docs_per_class=25",
        "synth",
        "--out",
        &out,
    ]);
    assert_eq!(load_processed(&out).unwrap().len(), 100);
    fs::write(&cfg, "synth.docs_per_class = many\n").unwrap();
    assert_eq!(cli(&["--config", &cfg, "synth", "--out", &out]).code, 2);
}

#[test]
fn cnn_train_evaluate_and_tag() {
    let dir = tempfile::tempdir().unwrap();
    let (ds, emb) = small_corpus(dir.path(), "0");
    let model = path(dir.path(), "cnn.model");
    ok(&with_small(&[
        "train",
        "--model",
        "cnn",
        "--dataset",
        &ds,
        "--embeddings",
        &emb,
        "--out",
        &model,
    ]));

    let log = fs::read_to_string(format!("{model}.log.csv")).unwrap();
    let losses: Vec<f64> = log
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(log.lines().next(), Some("epoch,loss,accuracy"));
    assert_eq!(losses.len(), 12);
    assert!(losses.last().unwrap() < &losses[0], "{log}");

    let csv = path(dir.path(), "report.csv");
    let confusion = path(dir.path(), "cm.csv");
    let report = ok(&[
        "evaluate",
        "--model",
        &model,
        "--dataset",
        &ds,
        "--csv",
        &csv,
        "--confusion",
        &confusion,
    ]);
    let header: Vec<&str> = report.lines().next().unwrap().split_whitespace().collect();
    assert_eq!(header, ["Precision", "Recall", "F1-score", "Support"]);
    assert!(report.contains("Accuracy 100.00"), "{report}");
    assert!(report.contains("CNN 100.00"), "{report}");
    assert!(fs::read_to_string(&csv).unwrap().contains("Avg/Total"));
    assert_eq!(fs::read_to_string(&confusion).unwrap().lines().count(), 5);

    // A lyric carrying only Sadness signals plus shared filler.
    let cfg = SyntheticConfig::default();
    let mut words = vec!["w200".to_string(); 10];
    for (a, b) in signal_bigrams(&cfg, MoodLabel::Sadness) {
        words.extend([a, b, "w200".to_string()]);
    }
    let lyric = path(dir.path(), "lyric.txt");
    fs::write(&lyric, words.join(" ")).unwrap();
    let tagged = ok(&["tag", "--model", &model, "--input", &lyric, "--tokens"]);
    let mut lines = tagged.lines();
    assert_eq!(lines.next(), Some("label Sadness"));
    let probs: Vec<(String, f64)> = lines
        .map(|l| {
            let (name, p) = l.split_once(' ').unwrap();
            (name.to_string(), p.parse().unwrap())
        })
        .collect();
    assert_eq!(probs.len(), 4);
    assert!((probs.iter().map(|(_, p)| p).sum::<f64>() - 1.0).abs() < 1e-9);
    assert_eq!(probs[2].0, "Sadness");
    assert!(probs[2].1 > 0.9, "{tagged}");

    let timestamps = path(dir.path(), "empty.lrc");
    fs::write(&timestamps, "[00:01.00]\n[00:02.50]\n").unwrap();
    let empty = cli(&["tag", "--model", &model, "--input", &timestamps]);
    assert_eq!(empty.code, 2);
}

#[test]
fn recurrent_models_train_and_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let (ds, emb) = small_corpus(dir.path(), "0.1");
    for (kind, name) in [("rnn", "RNN"), ("lstm", "LSTM")] {
        let model = path(dir.path(), &format!("{kind}.model"));
        let summary = ok(&with_small(&[
            "train",
            "--model",
            kind,
            "--dataset",
            &ds,
            "--embeddings",
            &emb,
            "--out",
            &model,
        ]));
        assert!(summary.contains("loss"));
        let report = ok(&["evaluate", "--model", &model, "--dataset", &ds, "--split", "train"]);
        assert!(report.lines().any(|l| l.starts_with(&format!("{name} "))), "{report}");
    }
}

#[test]
fn missing_inputs_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "m.model");
    assert_eq!(cli(&["train", "--model", "svm-tfidf", "--out", &out]).code, 2);
    let ds = path(dir.path(), "ds.jsonl");
    ok(&with_small(&["synth", "--out", &ds]));
    assert_eq!(
        cli(&["train", "--model", "cnn", "--dataset", &ds, "--out", &out]).code,
        2
    );
    assert_eq!(
        cli(&["train", "--model", "svm-liwc", "--dataset", &ds, "--out", &out]).code,
        2
    );
    let missing = path(dir.path(), "nope.jsonl");
    assert_eq!(
        cli(&["train", "--model", "svm-tfidf", "--dataset", &missing, "--out", &out]).code,
        2
    );
    assert!(!Path::new(&out).exists());
}

#[test]
fn empty_test_split_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let ds = path(dir.path(), "ds.jsonl");
    ok(&with_small(&["synth", "--out", &ds]));
    let all_train = fs::read_to_string(&ds)
        .unwrap()
        .replace("\"split\":\"test\"", "\"split\":\"train\"");
    fs::write(&ds, all_train).unwrap();
    let model = path(dir.path(), "svm.model");
    ok(&["train", "--model", "svm-tfidf", "--dataset", &ds, "--out", &model]);
    let o = cli(&["evaluate", "--model", &model, "--dataset", &ds]);
    assert_eq!(o.code, 2);
    assert!(o.err.contains("test"), "{}", o.err);
}

#[test]
fn exploding_training_exits_numerical() {
    let dir = tempfile::tempdir().unwrap();
    let (ds, emb) = small_corpus(dir.path(), "0.1");
    let model = path(dir.path(), "rnn.model");
    let o = cli(&with_small(&[
        "--set",
        "train.lr=1e300",
        "--set",
        "train.clip=off",
        "train",
        "--model",
        "rnn",
        "--dataset",
        &ds,
        "--embeddings",
        &emb,
        "--out",
        &model,
    ]));
    assert_eq!(o.code, 3, "{}", o.err);
}

fn write_raw_corpus(dir: &Path) -> PathBuf {
    let words = [
        ("happiness", ["快乐", "开心", "阳光"]),
        ("catharsis", ["自由", "呐喊", "燃烧"]),
        ("sadness", ["眼泪", "伤心", "离别"]),
        ("quiet", ["月光", "安静", "微风"]),
    ];
    let filler = ["我们", "一起", "走过", "这条", "路"];
    let mut lines = Vec::new();
    for (label, ws) in words {
        for i in 0..15 {
            let mut text = String::from("[ti:歌]\n[ar:某人]\n");
            for (k, f) in filler.iter().enumerate() {
                let w = ws[(i + k) % 3];
                text.push_str(&format!("[00:{:02}.{:02}]{f}{w}，{}\n", k * 7, i, filler[(i + k) % 5]));
            }
            let rec = serde_json::json!({ "id": format!("{label}-{i}"), "label": label, "text": text });
            lines.push(rec.to_string());
        }
    }
    // An exact duplicate of the first record's text under a new id.
    let mut dup: serde_json::Value = serde_json::from_str(&lines[0]).unwrap();
    dup["id"] = "dup".into();
    lines.push(dup.to_string());
    let raw = dir.join("raw.jsonl");
    fs::write(&raw, lines.join("\n")).unwrap();
    let lexicon: Vec<&str> = words
        .iter()
        .flat_map(|(_, ws)| ws.iter().copied())
        .chain(filler)
        .collect();
    fs::write(dir.join("words.txt"), lexicon.join("\n")).unwrap();
    raw
}

#[test]
fn preprocess_and_svm_baselines() {
    let dir = tempfile::tempdir().unwrap();
    let raw = write_raw_corpus(dir.path());
    let seg = path(dir.path(), "words.txt");
    let ds = path(dir.path(), "ds.jsonl");
    let raw_s = raw.to_string_lossy().into_owned();
    let o = cli(&[
        "--set",
        "split.test_fraction=0.2",
        "preprocess",
        "--input",
        &raw_s,
        "--segmenter",
        &seg,
        "--out",
        &ds,
    ]);
    assert_eq!(o.code, 0, "{}", o.err);
    assert!(o.err.contains("1 duplicate"), "{}", o.err);
    assert!(o.out.contains("60"), "{}", o.out);
    let data = load_processed(&ds).unwrap();
    assert_eq!(data.len(), 60);
    assert!(
        data.documents[0].tokens.iter().any(|t| t == "快乐"),
        "{:?}",
        data.documents[0].tokens
    );
    assert!(data
        .documents
        .iter()
        .all(|d| !d.tokens.iter().any(|t| t.contains('歌'))));

    // Lexicon segmentation without a word list is a usage error.
    assert_eq!(cli(&["preprocess", "--input", &raw_s, "--out", &ds]).code, 2);

    let tfidf = path(dir.path(), "tfidf.model");
    ok(&["train", "--model", "svm-tfidf", "--dataset", &ds, "--out", &tfidf]);
    let report = ok(&["evaluate", "--model", &tfidf, "--dataset", &ds]);
    assert!(report.contains("TF-IDF+SVM 100.00"), "{report}");

    let lyric = dir.path().join("song.lrc");
    fs::write(&lyric, "[ti:新歌]\n[00:01.00]眼泪 伤心\n[00:05.20]离别 我们\n").unwrap();
    let lyric_s = lyric.to_string_lossy().into_owned();
    let tagged = ok(&["tag", "--model", &tfidf, "--input", &lyric_s, "--segmenter", &seg]);
    assert!(tagged.starts_with("label Sadness\n"), "{tagged}");

    let lex = dir.path().join("liwc.tsv");
    fs::write(
        &lex,
        "快乐\tposemo\n开心\tposemo\n阳光\tposemo\n眼泪\tnegemo\n伤心\tnegemo\n离别\tnegemo\n自由\tanger\n呐喊\tanger\n燃烧\tanger\n月光\tcalm\n安静\tcalm\n微风\tcalm\n",
    )
    .unwrap();
    let lex_s = lex.to_string_lossy().into_owned();
    let liwc = path(dir.path(), "liwc.model");
    ok(&[
        "train",
        "--model",
        "svm-liwc",
        "--dataset",
        &ds,
        "--lexicon",
        &lex_s,
        "--out",
        &liwc,
    ]);
    let report = ok(&["evaluate", "--model", &liwc, "--dataset", &ds]);
    assert!(report.contains("LIWC+SVM 100.00"), "{report}");
    let tagged = ok(&["tag", "--model", &liwc, "--input", &lyric_s, "--segmenter", &seg]);
    assert!(tagged.starts_with("label Sadness\n"), "{tagged}");
}

#[test]
fn unknown_label_names_the_document() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw.jsonl");
    fs::write(
        &raw,
        "{\"id\":\"song-7\",\"label\":\"angry\",\"text\":\"[00:01.00]你好\"}\n",
    )
    .unwrap();
    let o = cli(&[
        "--set",
        "segment.mode=whitespace",
        "preprocess",
        "--input",
        &raw.to_string_lossy(),
        "--out",
        &path(dir.path(), "ds.jsonl"),
    ]);
    assert_eq!(o.code, 2);
    assert!(o.err.contains("song-7"), "{}", o.err);
}

#[test]
fn gradcheck_reports_and_catches_faults() {
    let o = cli(&["gradcheck"]);
    assert_eq!(o.code, 0, "{}", o.out);
    for comp in ["conv1d", "tanh", "batchnorm", "cnn", "rnn", "lstm", "cbow"] {
        assert!(
            o.out.lines().any(|l| l.starts_with(&format!("PASS {comp} "))),
            "{comp}\n{}",
            o.out
        );
    }
    assert!(o.out.contains("  input"), "cbow parameter groups missing:\n{}", o.out);

    lyricmood::nn::set_tanh_derivative_fault(true);
    let faulty = cli(&["gradcheck", "--arch", "layers"]);
    lyricmood::nn::set_tanh_derivative_fault(false);
    assert_eq!(faulty.code, 1);
    assert!(faulty.out.contains("FAIL tanh"), "{}", faulty.out);
    assert!(faulty.err.contains("tanh"), "{}", faulty.err);
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_lyricmood");
    let status = std::process::Command::new(bin)
        .args(["gradcheck", "--arch", "rnn"])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&status.stdout).starts_with("PASS rnn"));
    let bad = std::process::Command::new(bin)
        .args(["gradcheck", "--arch", "nope"])
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}
