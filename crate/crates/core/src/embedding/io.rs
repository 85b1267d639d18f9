//! Text and binary embedding files.
//!
//! Both formats start with an ASCII header line `"<vocab_size> <dim>"`.
//! Text rows are `"<token> <f1> ... <fd>"`; binary rows are `"<token> "`
//! followed by `dim` little-endian `f32` values.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::store::EmbeddingStore;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Text,
    Binary,
}

impl Format {
    /// `.bin` means binary, anything else text.
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin") => Format::Binary,
            _ => Format::Text,
        }
    }
}

pub fn load_embeddings<T: Scalar>(path: &Path, format: Format) -> Result<EmbeddingStore<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    match format {
        Format::Text => read_text(&mut reader),
        Format::Binary => read_binary(&mut reader),
    }
}

pub fn save_embeddings<T: Scalar>(store: &EmbeddingStore<T>, path: &Path, format: Format) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    match format {
        Format::Text => write_text(store, &mut w)?,
        Format::Binary => write_binary(store, &mut w)?,
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn parse_header(line: &str) -> Result<(usize, usize)> {
    let fields: Vec<&str> = line.trim_end_matches(['\n', '\r']).split(' ').collect();
    if fields.len() != 2 {
        return Err(Error::MalformedHeader(line.trim_end().to_string()));
    }
    let n = fields[0]
        .parse()
        .map_err(|_| Error::MalformedHeader(line.trim_end().to_string()))?;
    let d: usize = fields[1]
        .parse()
        .map_err(|_| Error::MalformedHeader(line.trim_end().to_string()))?;
    if d == 0 {
        return Err(Error::MalformedHeader("dimension must be at least 1".into()));
    }
    Ok((n, d))
}

pub fn read_text<T: Scalar, R: BufRead>(reader: &mut R) -> Result<EmbeddingStore<T>> {
    let mut header = String::new();
    if reader.read_line(&mut header)? == 0 {
        return Err(Error::MalformedHeader("empty file".into()));
    }
    let (n, d) = parse_header(&header)?;

    let mut vocab = Vec::with_capacity(n);
    let mut rows = Vec::with_capacity(n);
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_ascii_whitespace();
        let token = parts.next().expect("non-empty line");
        let row = parts
            .map(|v| {
                v.parse::<f64>()
                    .ok()
                    .and_then(T::from_f64)
                    .ok_or_else(|| Error::BadNumber {
                        line: line_no,
                        value: v.to_string(),
                    })
            })
            .collect::<Result<Vec<T>>>()?;
        if row.len() != d {
            return Err(Error::DimensionMismatch {
                line: line_no,
                expected: d,
                found: row.len(),
            });
        }
        vocab.push(token.to_string());
        rows.push(row);
    }
    if vocab.len() != n {
        return Err(Error::VocabCount {
            declared: n,
            found: vocab.len(),
        });
    }
    build(vocab, rows, d)
}

pub fn read_binary<T: Scalar, R: BufRead>(reader: &mut R) -> Result<EmbeddingStore<T>> {
    let mut header = Vec::new();
    reader.read_until(b'\n', &mut header)?;
    let header = String::from_utf8(header)
        .map_err(|_| Error::MalformedHeader("header is not ASCII".into()))?;
    if header.is_empty() {
        return Err(Error::MalformedHeader("empty file".into()));
    }
    let (n, d) = parse_header(&header)?;

    let mut vocab = Vec::with_capacity(n);
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let mut raw = Vec::new();
        reader.read_until(b' ', &mut raw)?;
        if raw.last() != Some(&b' ') {
            return Err(Error::VocabCount {
                declared: n,
                found: i,
            });
        }
        raw.pop();
        // Tolerate the newline the reference word2vec writer puts after each vector.
        let start = raw.iter().position(|b| !b.is_ascii_whitespace()).unwrap_or(raw.len());
        let token = String::from_utf8(raw[start..].to_vec())
            .map_err(|_| Error::MalformedHeader(format!("token {i} is not UTF-8")))?;
        let mut row = Vec::with_capacity(d);
        for _ in 0..d {
            let v = reader.read_f32::<LittleEndian>().map_err(|e| {
                if e.kind() == std::io::ErrorKind::UnexpectedEof {
                    Error::DimensionMismatch {
                        line: i + 2,
                        expected: d,
                        found: row.len(),
                    }
                } else {
                    Error::Stream(e)
                }
            })?;
            row.push(T::lit(v as f64));
        }
        vocab.push(token);
        rows.push(row);
    }
    let mut rest = Vec::new();
    reader.read_to_end(&mut rest)?;
    if rest.iter().any(|b| !b.is_ascii_whitespace()) {
        return Err(Error::VocabCount {
            declared: n,
            found: n + 1,
        });
    }
    build(vocab, rows, d)
}

fn build<T: Scalar>(vocab: Vec<String>, rows: Vec<Vec<T>>, d: usize) -> Result<EmbeddingStore<T>> {
    if vocab.is_empty() {
        return EmbeddingStore::from_parts(Vec::new(), Vec::new(), d);
    }
    EmbeddingStore::new(vocab, rows)
}

/// Writes the text format with 17 significant digits per component.
pub fn write_text<T: Scalar, W: Write>(store: &EmbeddingStore<T>, w: &mut W) -> Result<()> {
    writeln!(w, "{} {}", store.len(), store.dim())?;
    for (token, row) in store.iter() {
        w.write_all(token.as_bytes())?;
        for x in row {
            write!(w, " {:.16e}", x.to_f64_lossy())?;
        }
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn write_binary<T: Scalar, W: Write>(store: &EmbeddingStore<T>, w: &mut W) -> Result<()> {
    writeln!(w, "{} {}", store.len(), store.dim())?;
    for (token, row) in store.iter() {
        w.write_all(token.as_bytes())?;
        w.write_all(b" ")?;
        for x in row {
            w.write_f32::<LittleEndian>(x.to_f64_lossy() as f32)?;
        }
    }
    Ok(())
}
