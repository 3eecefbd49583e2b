//! Versioned plain-text container for trained models.
//!
//! ```text
//! lyricmood-model 1
//! kind <kind>
//! meta <key> <value>
//! strings <name> <count>
//! <one string per line>
//! tensor <name> <dim>...
//! <values, one innermost row per line, 17 significant digits>
//! end
//! ```

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::{format_exact, Scalar};

pub const MAGIC: &str = "lyricmood-model";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModelFile {
    pub kind: String,
    meta: Vec<(String, String)>,
    strings: Vec<(String, Vec<String>)>,
    tensors: Vec<(String, Vec<usize>, Vec<f64>)>,
}

fn format_err(m: impl Into<String>) -> Error {
    Error::ModelFormat(m.into())
}

impl ModelFile {
    pub fn new(kind: impl Into<String>) -> Self {
        Self {
            kind: kind.into(),
            ..Default::default()
        }
    }

    pub fn set_meta(&mut self, key: &str, value: impl ToString) {
        let value = value.to_string();
        match self.meta.iter_mut().find(|(k, _)| k == key) {
            Some(slot) => slot.1 = value,
            None => self.meta.push((key.to_string(), value)),
        }
    }

    pub fn push_strings(&mut self, name: &str, values: Vec<String>) {
        self.strings.push((name.to_string(), values));
    }

    pub fn push_tensor<T: Scalar>(&mut self, name: &str, shape: &[usize], values: &[T]) {
        debug_assert_eq!(shape.iter().product::<usize>(), values.len());
        self.tensors.push((
            name.to_string(),
            shape.to_vec(),
            values.iter().map(|v| v.as_f64()).collect(),
        ));
    }

    pub fn meta(&self, key: &str) -> Result<&str> {
        self.meta
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| format_err(format!("missing meta key {key:?}")))
    }

    pub fn meta_opt(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn parse_meta<V: std::str::FromStr>(&self, key: &str) -> Result<V> {
        let raw = self.meta(key)?;
        raw.parse()
            .map_err(|_| format_err(format!("meta {key:?}: cannot parse {raw:?}")))
    }

    pub fn strings(&self, name: &str) -> Result<&[String]> {
        self.strings
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
            .ok_or_else(|| format_err(format!("missing string table {name:?}")))
    }

    /// Tensor values converted to `T`, checked against `expected` shape when
    /// given.
    pub fn tensor<T: Scalar>(&self, name: &str, expected: Option<&[usize]>) -> Result<(Vec<usize>, Vec<T>)> {
        let (_, shape, values) = self
            .tensors
            .iter()
            .find(|(n, _, _)| n == name)
            .ok_or_else(|| format_err(format!("missing tensor {name:?}")))?;
        if let Some(exp) = expected {
            if exp != shape.as_slice() {
                return Err(format_err(format!(
                    "tensor {name:?} has shape {shape:?}, expected {exp:?}"
                )));
            }
        }
        Ok((shape.clone(), values.iter().map(|&v| T::lit(v)).collect()))
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{MAGIC} {VERSION}");
        let _ = writeln!(s, "kind {}", self.kind);
        for (k, v) in &self.meta {
            let _ = writeln!(s, "meta {k} {v}");
        }
        for (name, values) in &self.strings {
            let _ = writeln!(s, "strings {name} {}", values.len());
            for v in values {
                let _ = writeln!(s, "{v}");
            }
        }
        for (name, shape, values) in &self.tensors {
            let dims: Vec<String> = shape.iter().map(usize::to_string).collect();
            let _ = writeln!(s, "tensor {name} {}", dims.join(" "));
            let row = shape.last().copied().unwrap_or(1).max(1);
            for chunk in values.chunks(row) {
                let line: Vec<String> = chunk.iter().map(|&v| format_exact(v)).collect();
                let _ = writeln!(s, "{}", line.join(" "));
            }
        }
        s.push_str("end\n");
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().peekable();
        let mut next = |what: &str| -> Result<(usize, &str)> {
            lines
                .next()
                .map(|(i, l)| (i + 1, l))
                .ok_or_else(|| format_err(format!("unexpected end of file, expected {what}")))
        };
        let (_, magic) = next("header")?;
        let version = magic
            .strip_prefix(MAGIC)
            .map(str::trim)
            .ok_or_else(|| format_err("not a lyricmood model file"))?;
        if version != VERSION.to_string() {
            return Err(format_err(format!("unsupported version {version}")));
        }
        let (_, kind_line) = next("kind")?;
        let kind = kind_line
            .strip_prefix("kind ")
            .ok_or_else(|| format_err("missing kind line"))?;
        let mut file = ModelFile::new(kind.trim());
        loop {
            let (no, line) = next("section or end")?;
            let bad = |m: &str| format_err(format!("line {no}: {m}"));
            if line == "end" {
                break;
            }
            let (head, rest) = line.split_once(' ').unwrap_or((line, ""));
            match head {
                "meta" => {
                    let (k, v) = rest.split_once(' ').unwrap_or((rest, ""));
                    file.meta.push((k.to_string(), v.to_string()));
                }
                "strings" => {
                    let (name, count) = rest
                        .rsplit_once(' ')
                        .ok_or_else(|| bad("strings needs name and count"))?;
                    let count: usize = count.parse().map_err(|_| bad("bad string count"))?;
                    let mut values = Vec::with_capacity(count);
                    for _ in 0..count {
                        values.push(next("string")?.1.to_string());
                    }
                    file.strings.push((name.to_string(), values));
                }
                "tensor" => {
                    let mut parts = rest.split(' ');
                    let name = parts
                        .next()
                        .filter(|n| !n.is_empty())
                        .ok_or_else(|| bad("tensor needs a name"))?;
                    let shape: Vec<usize> = parts
                        .filter(|p| !p.is_empty())
                        .map(|p| p.parse().map_err(|_| bad("bad tensor dimension")))
                        .collect::<Result<_>>()?;
                    let total: usize = shape.iter().product();
                    let row = shape.last().copied().unwrap_or(1).max(1);
                    let mut values = Vec::with_capacity(total);
                    while values.len() < total {
                        let (vno, vline) = next("tensor values")?;
                        let before = values.len();
                        for tok in vline.split(' ').filter(|t| !t.is_empty()) {
                            let v: f64 = tok
                                .parse()
                                .map_err(|_| format_err(format!("line {vno}: bad value {tok:?}")))?;
                            values.push(v);
                        }
                        if values.len() - before != row {
                            return Err(format_err(format!("line {vno}: expected {row} values")));
                        }
                    }
                    file.tensors.push((name.to_string(), shape, values));
                }
                other => return Err(bad(&format!("unknown section {other:?}"))),
            }
        }
        Ok(file)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bitwise() {
        let mut f = ModelFile::new("demo");
        f.set_meta("c", 1.5);
        f.set_meta("note", "two words");
        f.push_strings("vocab", vec!["爱".into(), "<unk>".into()]);
        let vals = [0.1f64, -2.0 / 3.0, 1e-300, 7.0, 0.0, -0.0];
        f.push_tensor("w", &[2, 3], &vals);
        f.push_tensor("s", &[], &[42.0f64]);
        let text = f.to_text();
        let back = ModelFile::parse(&text).unwrap();
        assert_eq!(back.to_text(), text);
        let (shape, got) = back.tensor::<f64>("w", Some(&[2, 3])).unwrap();
        assert_eq!(shape, vec![2, 3]);
        for (a, b) in got.iter().zip(vals) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(back.meta("note").unwrap(), "two words");
        assert_eq!(back.parse_meta::<f64>("c").unwrap(), 1.5);
        assert_eq!(back.strings("vocab").unwrap()[0], "爱");
        assert!(back.tensor::<f64>("w", Some(&[3, 2])).is_err());
    }

    #[test]
    fn rejects_bad_headers() {
        assert!(ModelFile::parse("").is_err());
        assert!(ModelFile::parse("something 1\nkind x\nend\n").is_err());
        assert!(ModelFile::parse("lyricmood-model 9\nkind x\nend\n").is_err());
        assert!(ModelFile::parse("lyricmood-model 1\nkind x\n").is_err());
        assert!(ModelFile::parse("lyricmood-model 1\nkind x\ntensor w 2\n1\nend\n").is_err());
    }
}
