//! Line-delimited JSON input and output.
//!
//! Readers skip blank lines and lines starting with `#`, which lets
//! producers prepend provenance comments (model name, version) to a file.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

pub fn read_jsonl<T, R>(reader: R, source_name: &str) -> Result<Vec<T>>
where
    T: DeserializeOwned,
    R: BufRead,
{
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::parse(source_name, line_no, e.to_string()))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let value = serde_json::from_str(trimmed)
            .map_err(|e| Error::parse(source_name, line_no, e.to_string()))?;
        out.push(value);
    }
    Ok(out)
}

pub fn read_jsonl_file<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_jsonl(BufReader::new(file), &path.display().to_string())
}

pub fn write_jsonl<'a, T, W, I>(writer: W, items: I) -> std::io::Result<()>
where
    T: Serialize + 'a,
    W: Write,
    I: IntoIterator<Item = &'a T>,
{
    let mut writer = BufWriter::new(writer);
    for item in items {
        serde_json::to_writer(&mut writer, item)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}

pub fn write_jsonl_file<'a, T, I>(path: impl AsRef<Path>, items: I) -> Result<()>
where
    T: Serialize + 'a,
    I: IntoIterator<Item = &'a T>,
{
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_jsonl(file, items).map_err(|e| Error::io(path, e))
}
