//! Self-describing columnar text files: `#` metadata lines, one header row
//! of column names, then comma-separated records.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::{Error, Result};

pub const FORMAT_LINE: &str = "# wpcoh table v1";

/// First 16 hex digits of the SHA-256 of `bytes`.
pub fn short_hash(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// Streaming writer for a columnar table.
pub struct TableWriter {
    inner: csv::Writer<BufWriter<File>>,
    columns: usize,
}

impl TableWriter {
    pub fn create(path: &Path, config_hash: &str, meta: &[String], columns: &[&str]) -> Result<Self> {
        let mut file = BufWriter::new(File::create(path)?);
        writeln!(file, "{FORMAT_LINE}")?;
        writeln!(file, "# config_hash: {config_hash}")?;
        for m in meta {
            writeln!(file, "# {m}")?;
        }
        let mut inner = csv::WriterBuilder::new().from_writer(file);
        inner.write_record(columns)?;
        Ok(TableWriter {
            inner,
            columns: columns.len(),
        })
    }

    pub fn row(&mut self, values: &[f64]) -> Result<()> {
        debug_assert_eq!(values.len(), self.columns);
        self.inner.write_record(values.iter().map(|v| format!("{v}")))?;
        Ok(())
    }

    pub fn text_row<S: AsRef<[u8]>>(&mut self, values: &[S]) -> Result<()> {
        self.inner.write_record(values)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}

/// A fully loaded numeric table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub path: PathBuf,
    pub meta: Vec<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.columns.iter().position(|c| c == name).ok_or_else(|| Error::Malformed {
            path: self.path.clone(),
            line: 0,
            reason: format!("missing column {name:?}"),
        })
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let i = self.column_index(name)?;
        Ok(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.meta.iter().find_map(|m| m.strip_prefix(key).and_then(|r| r.strip_prefix(':')).map(str::trim))
    }
}

/// Split the leading `#` lines off a file, returning them (without the
/// marker) and the number of lines consumed.
pub fn read_meta(reader: &mut impl BufRead) -> Result<(Vec<String>, u64)> {
    let mut meta = Vec::new();
    let mut consumed = 0;
    loop {
        let buf = reader.fill_buf()?;
        if buf.first() != Some(&b'#') {
            break;
        }
        let mut line = String::new();
        reader.read_line(&mut line)?;
        consumed += 1;
        meta.push(line.trim_start_matches('#').trim().to_string());
    }
    Ok((meta, consumed))
}

pub fn read_table(path: &Path) -> Result<Table> {
    let mut reader = BufReader::new(File::open(path)?);
    let (meta, skipped) = read_meta(&mut reader)?;
    let mut csv = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let columns: Vec<String> = csv.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for (k, rec) in csv.records().enumerate() {
        let line = skipped + 2 + k as u64;
        let rec = rec.map_err(|e| Error::Malformed {
            path: path.to_path_buf(),
            line,
            reason: e.to_string(),
        })?;
        if rec.len() != columns.len() {
            return Err(Error::Malformed {
                path: path.to_path_buf(),
                line,
                reason: format!("expected {} fields, got {}", columns.len(), rec.len()),
            });
        }
        let row = rec
            .iter()
            .map(|f| {
                f.trim().parse::<f64>().map_err(|_| Error::Malformed {
                    path: path.to_path_buf(),
                    line,
                    reason: format!("not a number: {f:?}"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(Table {
        path: path.to_path_buf(),
        meta,
        columns,
        rows,
    })
}
