//! Native on-disk table format.
//!
//! A table is a directory holding `manifest.txt` plus one binary block per
//! column. Each block is `n_rows` little-endian `f64` bit patterns followed by
//! `n_rows` mask bytes (1 = missing). The manifest is line oriented:
//!
//! ```text
//! mailrisk-table 1
//! rows 3
//! source data.csv
//! column 0 raw col_0000.bin a
//! log ingest<TAB>source=data.csv rows=3 columns=2
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use super::{Column, ColumnKind, Provenance, StageEntry, Table};
use crate::error::{Error, Result};

const MAGIC: &str = "mailrisk-table 1";
const MANIFEST: &str = "manifest.txt";

pub fn save_table(table: &Table, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut manifest = format!("{MAGIC}\nrows {}\n", table.n_rows());
    if let Some(src) = &table.provenance().source {
        manifest.push_str(&format!("source {}\n", src.display()));
    }
    for (i, col) in table.columns().iter().enumerate() {
        let file = format!("col_{i:04}.bin");
        manifest.push_str(&format!(
            "column {i} {} {file} {}\n",
            col.kind().as_str(),
            col.name()
        ));
        let mut bytes = Vec::with_capacity(col.len() * 9);
        for v in col.raw_values() {
            bytes.extend_from_slice(&v.to_bits().to_le_bytes());
        }
        bytes.extend(col.missing_mask().iter().map(|&m| m as u8));
        let path = dir.join(&file);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    }
    for entry in &table.provenance().log {
        manifest.push_str(&format!(
            "log {}\t{}\n",
            escape(&entry.stage),
            escape(&entry.detail)
        ));
    }
    let path = dir.join(MANIFEST);
    fs::write(&path, manifest).map_err(|e| Error::io(&path, e))
}

pub fn load_table(dir: impl AsRef<Path>) -> Result<Table> {
    let dir = dir.as_ref();
    let mpath = dir.join(MANIFEST);
    let text = fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?;
    let mut lines = text.lines();
    if lines.next() != Some(MAGIC) {
        return Err(Error::artifact(&mpath, "missing or unsupported header"));
    }
    let mut n_rows: Option<usize> = None;
    let mut source: Option<PathBuf> = None;
    let mut columns = Vec::new();
    let mut log = Vec::new();
    for line in lines {
        let (key, rest) = line.split_once(' ').unwrap_or((line, ""));
        match key {
            "rows" => {
                n_rows = Some(
                    rest.parse()
                        .map_err(|_| Error::artifact(&mpath, format!("bad row count `{rest}`")))?,
                )
            }
            "source" => source = Some(PathBuf::from(rest)),
            "column" => {
                let n = n_rows.ok_or_else(|| Error::artifact(&mpath, "column before rows"))?;
                let mut parts = rest.splitn(4, ' ');
                let (_idx, kind, file, name) =
                    match (parts.next(), parts.next(), parts.next(), parts.next()) {
                        (Some(a), Some(b), Some(c), Some(d)) => (a, b, c, d),
                        _ => return Err(Error::artifact(&mpath, format!("bad column line `{line}`"))),
                    };
                let kind = ColumnKind::parse(kind)
                    .ok_or_else(|| Error::artifact(&mpath, format!("bad kind `{kind}`")))?;
                columns.push(read_block(&dir.join(file), name, kind, n)?);
            }
            "log" => {
                let (stage, detail) = rest.split_once('\t').unwrap_or((rest, ""));
                log.push(StageEntry {
                    stage: unescape(stage),
                    detail: unescape(detail),
                });
            }
            "" => {}
            other => return Err(Error::artifact(&mpath, format!("unknown key `{other}`"))),
        }
    }
    let table = Table::new(columns)?;
    if let Some(n) = n_rows {
        if table.n_cols() > 0 && table.n_rows() != n {
            return Err(Error::artifact(&mpath, "row count mismatch"));
        }
    }
    Ok(table.with_provenance(Provenance { source, log }))
}

fn read_block(path: &Path, name: &str, kind: ColumnKind, n: usize) -> Result<Column> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() != n * 9 {
        return Err(Error::artifact(
            path,
            format!("expected {} bytes, found {}", n * 9, bytes.len()),
        ));
    }
    let (vals, mask) = bytes.split_at(n * 8);
    let values = vals
        .chunks_exact(8)
        .map(|c| f64::from_bits(u64::from_le_bytes(c.try_into().expect("8-byte chunk"))))
        .collect();
    let missing = mask.iter().map(|&b| b != 0).collect();
    Ok(Column::from_parts(name.to_string(), values, missing, kind))
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('\t', "\\t").replace('\n', "\\n")
}

fn unescape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            match chars.next() {
                Some('t') => out.push('\t'),
                Some('n') => out.push('\n'),
                Some(other) => out.push(other),
                None => out.push('\\'),
            }
        } else {
            out.push(c);
        }
    }
    out
}
