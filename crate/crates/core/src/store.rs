//! Embedding tables for words and sentences.
//!
//! Two text formats are supported:
//!
//! * word vectors: `token v1 ... vd` per line, with an optional leading
//!   `count dim` line (the GloVe and word2vec text layouts);
//! * sentence embeddings: a mandatory `count dim` line followed by
//!   `id<TAB>v1 ... vd` rows, so that ids may contain spaces.
//!
//! Norms are computed once when the table is built and every similarity
//! computation reads them from the cache.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// What an encoder does with a token that has no vector.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OovMode {
    #[default]
    Error,
    SkipToken,
    ZeroVector,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OovPolicy {
    pub mode: OovMode,
    /// Log every out-of-vocabulary token at warn level.
    pub report: bool,
}

impl OovPolicy {
    pub fn new(mode: OovMode) -> Self {
        OovPolicy {
            mode,
            report: false,
        }
    }
}

/// Immutable id-to-vector store with cached L2 norms.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    ids: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f64>,
    norms: Vec<f64>,
}

impl EmbeddingTable {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn id(&self, idx: usize) -> &str {
        &self.ids[idx]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn vector(&self, idx: usize) -> &[f64] {
        &self.data[idx * self.dim..(idx + 1) * self.dim]
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.index_of(id).map(|i| self.vector(i))
    }

    pub fn norm(&self, idx: usize) -> f64 {
        self.norms[idx]
    }

    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    /// Cosine similarity between two stored items.
    ///
    /// Zero-norm vectors are legal to store but not to compare.
    pub fn cosine(&self, i: usize, j: usize) -> Result<f64> {
        let (ni, nj) = (self.norms[i], self.norms[j]);
        if ni == 0.0 {
            return Err(Error::ZeroNorm(self.ids[i].clone()));
        }
        if nj == 0.0 {
            return Err(Error::ZeroNorm(self.ids[j].clone()));
        }
        let cos = dot(self.vector(i), self.vector(j)) / (ni * nj);
        Ok(cos.clamp(-1.0, 1.0))
    }

    /// Returns a new table whose vectors are `f(id, vector)`.
    pub fn map_vectors<F>(&self, mut f: F) -> Result<EmbeddingTable>
    where
        F: FnMut(&str, &[f64]) -> Vec<f64>,
    {
        let mut builder = TableBuilder::new(None);
        for (i, id) in self.ids.iter().enumerate() {
            builder.push(id.clone(), f(id, self.vector(i)))?;
        }
        Ok(builder.finish_with_dim(self.dim))
    }
}

/// Accumulates rows and freezes them into an [`EmbeddingTable`].
#[derive(Debug, Default)]
pub struct TableBuilder {
    dim: Option<usize>,
    ids: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f64>,
}

impl TableBuilder {
    pub fn new(dim: Option<usize>) -> Self {
        TableBuilder {
            dim,
            ..Default::default()
        }
    }

    pub fn with_capacity(dim: usize, rows: usize) -> Self {
        TableBuilder {
            dim: Some(dim),
            ids: Vec::with_capacity(rows),
            index: HashMap::with_capacity(rows),
            data: Vec::with_capacity(rows * dim),
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn push(&mut self, id: impl Into<String>, vector: Vec<f64>) -> Result<()> {
        let id = id.into();
        let dim = *self.dim.get_or_insert(vector.len());
        if vector.len() != dim {
            return Err(Error::Dimension {
                expected: dim,
                actual: vector.len(),
            });
        }
        if dim == 0 {
            return Err(Error::Config("embedding dimension must be positive".into()));
        }
        if let Some(bad) = vector.iter().find(|v| !v.is_finite()) {
            return Err(Error::Config(format!("non-finite component {bad} for `{id}`")));
        }
        if self.index.contains_key(&id) {
            return Err(Error::DuplicateId {
                source_name: "<table>".into(),
                line: self.ids.len() + 1,
                id,
            });
        }
        self.index.insert(id.clone(), self.ids.len());
        self.ids.push(id);
        self.data.extend_from_slice(&vector);
        Ok(())
    }

    /// Freezes the table. `default_dim` is used only when no row was pushed
    /// and no dimension was fixed up front.
    pub fn finish_with_dim(self, default_dim: usize) -> EmbeddingTable {
        let dim = self.dim.unwrap_or(default_dim);
        let norms = self
            .data
            .chunks_exact(dim.max(1))
            .map(|v| dot(v, v).sqrt())
            .collect();
        EmbeddingTable {
            dim,
            ids: self.ids,
            index: self.index,
            data: self.data,
            norms,
        }
    }

    pub fn finish(self) -> Result<EmbeddingTable> {
        match self.dim {
            Some(d) => Ok(self.finish_with_dim(d)),
            None => Err(Error::Config("cannot infer dimension of an empty table".into())),
        }
    }
}

/// Dot product with a fixed four-lane accumulation order, so results are
/// reproducible across call sites and thread counts.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for k in 0..chunks {
        let i = k * 4;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in chunks * 4..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

pub fn l2_norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Formats a float with 9 significant digits, using the shortest decimal
/// string that parses back to the rounded value.
pub fn format_float(x: f64) -> String {
    let rounded: f64 = format!("{x:.8e}").parse().expect("formatted float parses");
    let mut s = String::new();
    write!(s, "{rounded}").unwrap();
    s
}

fn parse_floats(
    fields: &mut dyn Iterator<Item = &str>,
    source_name: &str,
    line: usize,
) -> Result<Vec<f64>> {
    fields
        .map(|f| {
            let v: f64 = f
                .parse()
                .map_err(|_| Error::parse(source_name, line, format!("cannot parse `{f}` as a number")))?;
            if !v.is_finite() {
                return Err(Error::parse(source_name, line, format!("non-finite value `{f}`")));
            }
            Ok(v)
        })
        .collect()
}

fn is_count_dim_header(line: &str) -> Option<(usize, usize)> {
    let mut fields = line.split_whitespace();
    let count = fields.next()?.parse().ok()?;
    let dim = fields.next()?.parse().ok()?;
    if fields.next().is_some() {
        return None;
    }
    Some((count, dim))
}

/// Options for reading word vectors.
#[derive(Clone, Debug, Default)]
pub struct WordVectorOptions<'a> {
    pub expected_dim: Option<usize>,
    /// When set, only these tokens are kept. Lines are still validated.
    pub vocabulary: Option<&'a HashSet<String>>,
}

pub fn read_word_vectors<R: BufRead>(
    reader: R,
    source_name: &str,
    opts: &WordVectorOptions<'_>,
) -> Result<EmbeddingTable> {
    let mut builder = TableBuilder::new(opts.expected_dim);
    let mut dim = opts.expected_dim;
    let mut seen_data = false;
    let mut seen_tokens: HashSet<String> = HashSet::new();

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::parse(source_name, line_no, e.to_string()))?;
        let line = line.trim_end_matches(['\r', '\n']);
        if line.trim().is_empty() {
            continue;
        }
        if line_no == 1 {
            if let Some((_, header_dim)) = is_count_dim_header(line) {
                if let Some(expected) = opts.expected_dim {
                    if expected != header_dim {
                        return Err(Error::parse(
                            source_name,
                            line_no,
                            format!("header dimension {header_dim} does not match expected {expected}"),
                        ));
                    }
                }
                dim = Some(header_dim);
                continue;
            }
        }

        let mut fields = line.split(' ').filter(|f| !f.is_empty());
        let token = fields
            .next()
            .ok_or_else(|| Error::parse(source_name, line_no, "missing token"))?;
        let values = parse_floats(&mut fields, source_name, line_no)?;
        let d = *dim.get_or_insert(values.len());
        if values.len() != d {
            return Err(Error::parse(
                source_name,
                line_no,
                format!("expected {d} components, found {}", values.len()),
            ));
        }
        if d == 0 {
            return Err(Error::parse(source_name, line_no, "vector has no components"));
        }
        seen_data = true;

        let keep = opts.vocabulary.is_none_or(|v| v.contains(token));
        if keep {
            if builder.contains(token) {
                return Err(Error::DuplicateId {
                    source_name: source_name.to_owned(),
                    line: line_no,
                    id: token.to_owned(),
                });
            }
            builder.push(token, values)?;
        } else if !seen_tokens.insert(token.to_owned()) {
            return Err(Error::DuplicateId {
                source_name: source_name.to_owned(),
                line: line_no,
                id: token.to_owned(),
            });
        }
    }

    if !seen_data {
        return Err(Error::EmptyInput(source_name.to_owned()));
    }
    Ok(builder.finish_with_dim(dim.unwrap_or(0)))
}

pub fn load_word_vectors(path: impl AsRef<Path>, expected_dim: Option<usize>) -> Result<EmbeddingTable> {
    load_word_vectors_with(
        path,
        &WordVectorOptions {
            expected_dim,
            vocabulary: None,
        },
    )
}

pub fn load_word_vectors_with(path: impl AsRef<Path>, opts: &WordVectorOptions<'_>) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_word_vectors(BufReader::new(file), &path.display().to_string(), opts)
}

pub fn read_sentence_embeddings<R: BufRead>(reader: R, source_name: &str) -> Result<EmbeddingTable> {
    let mut lines = reader.lines().enumerate();
    let (count, dim) = loop {
        match lines.next() {
            None => return Err(Error::EmptyInput(source_name.to_owned())),
            Some((idx, line)) => {
                let line = line.map_err(|e| Error::parse(source_name, idx + 1, e.to_string()))?;
                if line.trim().is_empty() {
                    continue;
                }
                break is_count_dim_header(&line).ok_or_else(|| {
                    Error::parse(source_name, idx + 1, "expected a `count dim` header")
                })?;
            }
        }
    };
    if dim == 0 {
        return Err(Error::parse(source_name, 1, "dimension must be positive"));
    }

    let mut builder = TableBuilder::with_capacity(dim, count);
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::parse(source_name, line_no, e.to_string()))?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let (id, rest) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(source_name, line_no, "expected `id<TAB>values`"))?;
        let values = parse_floats(&mut rest.split(' ').filter(|f| !f.is_empty()), source_name, line_no)?;
        if values.len() != dim {
            return Err(Error::parse(
                source_name,
                line_no,
                format!("expected {dim} components, found {}", values.len()),
            ));
        }
        if builder.contains(id) {
            return Err(Error::DuplicateId {
                source_name: source_name.to_owned(),
                line: line_no,
                id: id.to_owned(),
            });
        }
        builder.push(id, values)?;
    }
    if builder.len() != count {
        return Err(Error::parse(
            source_name,
            1,
            format!("header declares {count} rows, found {}", builder.len()),
        ));
    }
    Ok(builder.finish_with_dim(dim))
}

pub fn load_sentence_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_sentence_embeddings(BufReader::new(file), &path.display().to_string())
}

fn write_values<W: Write>(w: &mut W, values: &[f64]) -> std::io::Result<()> {
    for (k, v) in values.iter().enumerate() {
        if k > 0 {
            w.write_all(b" ")?;
        }
        w.write_all(format_float(*v).as_bytes())?;
    }
    w.write_all(b"\n")
}

pub fn write_sentence_embeddings<W: Write>(table: &EmbeddingTable, writer: W) -> std::io::Result<()> {
    let mut w = BufWriter::new(writer);
    writeln!(w, "{} {}", table.len(), table.dim())?;
    for (i, id) in table.ids().iter().enumerate() {
        if id.contains(['\t', '\n']) {
            return Err(std::io::Error::new(
                std::io::ErrorKind::InvalidData,
                format!("id `{id}` contains a tab or newline"),
            ));
        }
        w.write_all(id.as_bytes())?;
        w.write_all(b"\t")?;
        write_values(&mut w, table.vector(i))?;
    }
    w.flush()
}

pub fn save_sentence_embeddings(table: &EmbeddingTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_sentence_embeddings(table, file).map_err(|e| Error::io(path, e))
}

/// Writes the word-vector format, with the `count dim` header when asked.
pub fn write_word_vectors<W: Write>(table: &EmbeddingTable, writer: W, header: bool) -> std::io::Result<()> {
    let mut w = BufWriter::new(writer);
    if header {
        writeln!(w, "{} {}", table.len(), table.dim())?;
    }
    for (i, id) in table.ids().iter().enumerate() {
        w.write_all(id.as_bytes())?;
        w.write_all(b" ")?;
        write_values(&mut w, table.vector(i))?;
    }
    w.flush()
}
