//! JSON Lines readers and writers for raw and processed lyric corpora.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{LabeledDataset, LyricDocument, MoodLabel, Split};

#[derive(Debug, Deserialize)]
struct RawRecord {
    id: String,
    #[serde(default)]
    title: Option<String>,
    #[serde(default)]
    artist: Option<String>,
    #[serde(default)]
    label: Option<String>,
    text: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct ProcessedRecord {
    id: String,
    label_code: usize,
    tokens: Vec<String>,
    split: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lines: Option<usize>,
}

fn parse_label(id: &str, raw: &str) -> Result<MoodLabel> {
    raw.parse().map_err(|label| Error::UnknownLabel {
        id: id.to_string(),
        label,
    })
}

/// Reads `{id, title, artist, label, text}` records. Labels are matched
/// case-insensitively against the four class names.
pub fn parse_raw_jsonl(text: &str) -> Result<Vec<LyricDocument>> {
    let mut docs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: RawRecord = serde_json::from_str(line).map_err(|source| Error::Json { line: i + 1, source })?;
        if rec.id.is_empty() {
            return Err(Error::parse(i + 1, "empty document id"));
        }
        let label = rec.label.as_deref().map(|l| parse_label(&rec.id, l)).transpose()?;
        docs.push(LyricDocument {
            id: rec.id,
            title: rec.title,
            artist: rec.artist,
            raw_text: rec.text,
            label,
            ..Default::default()
        });
    }
    Ok(docs)
}

/// Loads raw lyrics from a JSON Lines file, or from a directory whose
/// subdirectories are named after the classes and hold one lyric file each.
pub fn read_raw_input(path: impl AsRef<Path>) -> Result<Vec<LyricDocument>> {
    let path = path.as_ref();
    if path.is_dir() {
        return read_raw_dir(path);
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_raw_jsonl(&text)
}

fn sorted_entries(dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    let mut entries = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<Vec<_>>>()?;
    entries.sort();
    Ok(entries)
}

fn read_raw_dir(dir: &Path) -> Result<Vec<LyricDocument>> {
    let mut docs = Vec::new();
    for class_dir in sorted_entries(dir)? {
        if !class_dir.is_dir() {
            continue;
        }
        let name = class_dir.file_name().unwrap_or_default().to_string_lossy().to_string();
        let label = parse_label(&name, &name)?;
        for file in sorted_entries(&class_dir)? {
            if !file.is_file() {
                continue;
            }
            let text = fs::read_to_string(&file).map_err(|e| Error::io(&file, e))?;
            let stem = file.file_stem().unwrap_or_default().to_string_lossy();
            let mut doc = LyricDocument::new(format!("{name}/{stem}"), text);
            doc.label = Some(label);
            docs.push(doc);
        }
    }
    Ok(docs)
}

/// Writes one `{id, label_code, tokens, split, lines}` record per document.
pub fn write_processed<W: Write>(ds: &LabeledDataset, mut out: W) -> std::io::Result<()> {
    for (i, (doc, split)) in ds.documents.iter().zip(&ds.split).enumerate() {
        let rec = ProcessedRecord {
            id: doc.id.clone(),
            label_code: ds.label(i).code(),
            tokens: doc.tokens.clone(),
            split: split.as_str().to_string(),
            lines: (doc.line_count > 0).then_some(doc.line_count),
        };
        serde_json::to_writer(&mut out, &rec)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn save_processed(ds: &LabeledDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_processed(ds, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_processed<R: BufRead>(input: R, seed: u64) -> Result<LabeledDataset> {
    let mut docs = Vec::new();
    let mut splits = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<processed>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ProcessedRecord = serde_json::from_str(&line).map_err(|source| Error::Json { line: i + 1, source })?;
        let label = MoodLabel::from_code(rec.label_code)
            .ok_or_else(|| Error::parse(i + 1, format!("label_code {} out of range", rec.label_code)))?;
        let split: Split = rec.split.parse().map_err(|m: String| Error::parse(i + 1, m))?;
        let mut doc = LyricDocument::from_tokens(rec.id, rec.tokens, Some(label));
        doc.line_count = rec.lines.unwrap_or(doc.line_count);
        docs.push(doc);
        splits.push(split);
    }
    LabeledDataset::from_parts(docs, splits, seed)
}

pub fn load_processed(path: impl AsRef<Path>) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_processed(BufReader::new(file), 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn raw_jsonl_labels() {
        let text = r#"{"id":"1","title":"t","artist":"a","label":"HAPPINESS","text":"[00:01]快乐"}
{"id":"2","label":"quiet","text":"安静"}
"#;
        let docs = parse_raw_jsonl(text).unwrap();
        assert_eq!(docs.len(), 2);
        assert_eq!(docs[0].label, Some(MoodLabel::Happiness));
        assert_eq!(docs[0].title.as_deref(), Some("t"));
        assert_eq!(docs[1].label, Some(MoodLabel::Quiet));
    }

    #[test]
    fn unknown_label_names_the_document() {
        let text = r#"{"id":"song-9","label":"angry","text":"x"}"#;
        match parse_raw_jsonl(text) {
            Err(Error::UnknownLabel { id, label }) => {
                assert_eq!(id, "song-9");
                assert_eq!(label, "angry");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn processed_round_trip() {
        let docs = vec![
            LyricDocument::from_tokens("a", vec!["爱".into(), "你".into()], Some(MoodLabel::Sadness)),
            LyricDocument::from_tokens("b", vec!["走".into()], Some(MoodLabel::Quiet)),
        ];
        let ds = LabeledDataset::from_parts(docs, vec![Split::Train, Split::Test], 0).unwrap();
        let mut buf = Vec::new();
        write_processed(&ds, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(r#"{"id":"a","label_code":2,"tokens":["爱","你"],"split":"train""#));
        let back = read_processed(buf.as_slice(), 0).unwrap();
        assert_eq!(back, ds);
    }
}
