//! Columnar numeric table with a per-cell missing mask.
//!
//! Every stage of the pipeline consumes and produces [`Table`]s. Tables are
//! never mutated in place: transforms return a new table and append a
//! [`StageEntry`] to the provenance log so reports can state the full
//! preprocessing lineage.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub mod store;

/// Name given to the column appended by [`derive_target`].
pub const TARGET_COLUMN: &str = "target";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ColumnKind {
    Raw,
    Continuous,
    Discrete,
    Target,
}

impl ColumnKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ColumnKind::Raw => "raw",
            ColumnKind::Continuous => "continuous",
            ColumnKind::Discrete => "discrete",
            ColumnKind::Target => "target",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "raw" => Some(ColumnKind::Raw),
            "continuous" => Some(ColumnKind::Continuous),
            "discrete" => Some(ColumnKind::Discrete),
            "target" => Some(ColumnKind::Target),
            _ => None,
        }
    }
}

/// A named column of `f64` cells. Missing cells carry a mask bit and a
/// canonical `0.0` payload that is never read.
#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    name: String,
    values: Vec<f64>,
    missing: Vec<bool>,
    kind: ColumnKind,
}

impl Column {
    pub fn new(name: impl Into<String>, cells: Vec<Option<f64>>) -> Self {
        let mut values = Vec::with_capacity(cells.len());
        let mut missing = Vec::with_capacity(cells.len());
        for c in cells {
            values.push(c.unwrap_or(0.0));
            missing.push(c.is_none());
        }
        Column {
            name: name.into(),
            values,
            missing,
            kind: ColumnKind::Raw,
        }
    }

    /// Column without missing cells.
    pub fn from_values(name: impl Into<String>, values: Vec<f64>) -> Self {
        let missing = vec![false; values.len()];
        Column {
            name: name.into(),
            values,
            missing,
            kind: ColumnKind::Raw,
        }
    }

    pub(crate) fn from_parts(
        name: String,
        values: Vec<f64>,
        missing: Vec<bool>,
        kind: ColumnKind,
    ) -> Self {
        debug_assert_eq!(values.len(), missing.len());
        let values = values
            .into_iter()
            .zip(&missing)
            .map(|(v, &m)| if m { 0.0 } else { v })
            .collect();
        Column {
            name,
            values,
            missing,
            kind,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> ColumnKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, row: usize) -> Option<f64> {
        if self.missing[row] {
            None
        } else {
            Some(self.values[row])
        }
    }

    pub fn is_missing(&self, row: usize) -> bool {
        self.missing[row]
    }

    pub fn cells(&self) -> impl Iterator<Item = Option<f64>> + '_ {
        self.values
            .iter()
            .zip(&self.missing)
            .map(|(&v, &m)| if m { None } else { Some(v) })
    }

    /// Non-missing values in row order.
    pub fn present(&self) -> impl Iterator<Item = f64> + '_ {
        self.cells().flatten()
    }

    /// Raw storage; entries under the missing mask are `0.0`.
    pub fn raw_values(&self) -> &[f64] {
        &self.values
    }

    pub fn missing_mask(&self) -> &[bool] {
        &self.missing
    }

    pub fn missing_count(&self) -> usize {
        self.missing.iter().filter(|&&m| m).count()
    }

    pub fn missing_fraction(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.missing_count() as f64 / self.len() as f64
        }
    }

    /// Returns the column relabelled as `Continuous` or `Discrete`.
    ///
    /// Only `Raw` columns may be classified, and only into those two kinds;
    /// re-classifying an already classified column to the same kind is a no-op.
    pub fn classified(mut self, kind: ColumnKind) -> Result<Self> {
        let allowed = matches!(kind, ColumnKind::Continuous | ColumnKind::Discrete)
            && (self.kind == ColumnKind::Raw || self.kind == kind);
        if !allowed {
            return Err(Error::Data(format!(
                "column `{}`: cannot change kind {} -> {}",
                self.name,
                self.kind.as_str(),
                kind.as_str()
            )));
        }
        self.kind = kind;
        Ok(self)
    }

    /// The `target` column holding the given 0/1 labels.
    pub fn target(labels: &[u8]) -> Self {
        Column::from_values(TARGET_COLUMN, labels.iter().map(|&l| f64::from(l)).collect()).into_target()
    }

    pub(crate) fn into_target(mut self) -> Self {
        self.kind = ColumnKind::Target;
        self
    }

    /// Same column with `f` applied to every cell.
    pub fn map_cells(&self, mut f: impl FnMut(Option<f64>) -> Option<f64>) -> Column {
        let cells: Vec<Option<f64>> = self.cells().map(&mut f).collect();
        let mut col = Column::new(self.name.clone(), cells);
        col.kind = self.kind;
        col
    }

    pub fn take_rows(&self, rows: &[usize]) -> Column {
        Column {
            name: self.name.clone(),
            values: rows.iter().map(|&r| self.values[r]).collect(),
            missing: rows.iter().map(|&r| self.missing[r]).collect(),
            kind: self.kind,
        }
    }

    /// Number of distinct non-missing values (bitwise, `-0.0 == 0.0`).
    pub fn distinct_count(&self) -> usize {
        let mut v: Vec<f64> = self.present().collect();
        v.sort_by(f64::total_cmp);
        v.dedup_by(|a, b| a == b);
        v.len()
    }
}

/// One transform applied to a table, in application order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageEntry {
    pub stage: String,
    pub detail: String,
}

impl fmt::Display for StageEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.stage, self.detail)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: Option<PathBuf>,
    pub log: Vec<StageEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    columns: Vec<Column>,
    n_rows: usize,
    provenance: Provenance,
}

impl Table {
    pub fn new(columns: Vec<Column>) -> Result<Self> {
        let n_rows = columns.first().map_or(0, Column::len);
        let mut seen = HashSet::new();
        for c in &columns {
            if c.name.is_empty() {
                return Err(Error::Data("empty column name".into()));
            }
            if !seen.insert(c.name.as_str()) {
                return Err(Error::Data(format!("duplicate column name `{}`", c.name)));
            }
            if c.len() != n_rows {
                return Err(Error::Data(format!(
                    "column `{}` has {} cells, expected {n_rows}",
                    c.name,
                    c.len()
                )));
            }
        }
        Ok(Table {
            columns,
            n_rows,
            provenance: Provenance::default(),
        })
    }

    pub(crate) fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(Column::name)
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn require(&self, name: &str) -> Result<&Column> {
        self.column(name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// The column produced by [`derive_target`], if any.
    pub fn target(&self) -> Option<&Column> {
        self.columns.iter().find(|c| c.kind == ColumnKind::Target)
    }

    pub fn require_target(&self) -> Result<&Column> {
        self.target()
            .ok_or_else(|| Error::Data("table has no target column".into()))
    }

    /// Target labels as `0/1` bytes. Missing or non-binary labels are an error.
    pub fn labels(&self) -> Result<Vec<u8>> {
        labels_of(self.require_target()?)
    }

    pub fn predictors(&self) -> impl Iterator<Item = &Column> {
        self.columns.iter().filter(|c| c.kind != ColumnKind::Target)
    }

    pub fn predictor_names(&self) -> Vec<String> {
        self.predictors().map(|c| c.name.clone()).collect()
    }

    /// Appends a provenance entry.
    pub fn logged(mut self, stage: &str, detail: impl Into<String>) -> Self {
        self.provenance.log.push(StageEntry {
            stage: stage.to_string(),
            detail: detail.into(),
        });
        self
    }

    /// New table with the same provenance and the given columns.
    pub fn with_columns(&self, columns: Vec<Column>) -> Result<Table> {
        Ok(Table::new(columns)?.with_provenance(self.provenance.clone()))
    }

    /// Replaces columns by name; columns not in `replacements` are kept.
    pub fn replace_columns(&self, mut replacements: HashMap<String, Column>) -> Result<Table> {
        let cols = self
            .columns
            .iter()
            .map(|c| replacements.remove(&c.name).unwrap_or_else(|| c.clone()))
            .collect();
        if let Some(name) = replacements.keys().next() {
            return Err(Error::UnknownColumn(name.clone()));
        }
        self.with_columns(cols)
    }

    pub fn push_column(&self, column: Column) -> Result<Table> {
        let mut cols = self.columns.clone();
        cols.push(column);
        self.with_columns(cols)
    }

    /// Keeps only the listed rows, in the given order.
    pub fn take_rows(&self, rows: &[usize]) -> Table {
        let columns = self.columns.iter().map(|c| c.take_rows(rows)).collect();
        Table {
            columns,
            n_rows: rows.len(),
            provenance: self.provenance.clone(),
        }
    }

    /// Keeps the target plus the named predictors, in the given order.
    pub fn restrict(&self, predictors: &[String]) -> Result<Table> {
        let mut cols = Vec::with_capacity(predictors.len() + 1);
        for name in predictors {
            cols.push(self.require(name)?.clone());
        }
        if let Some(t) = self.target() {
            cols.push(t.clone());
        }
        self.with_columns(cols)
    }

    /// Removes the named columns, recording `reason` in the provenance log.
    pub fn drop_columns(&self, names: &HashSet<String>, reason: &str) -> Result<Table> {
        if let Some(bad) = names.iter().find(|n| self.column(n).is_none()) {
            return Err(Error::UnknownColumn(bad.clone()));
        }
        if names.is_empty() {
            return Ok(self.clone());
        }
        let cols = self
            .columns
            .iter()
            .filter(|c| !names.contains(&c.name))
            .cloned()
            .collect();
        let mut sorted: Vec<&str> = names.iter().map(String::as_str).collect();
        sorted.sort_unstable();
        Ok(self
            .with_columns(cols)?
            .logged("drop", format!("reason={reason} columns={}", sorted.join(" "))))
    }
}

pub(crate) fn labels_of(col: &Column) -> Result<Vec<u8>> {
    col.cells()
        .enumerate()
        .map(|(i, c)| match c {
            Some(v) if v == 0.0 => Ok(0),
            Some(v) if v == 1.0 => Ok(1),
            other => Err(Error::Data(format!(
                "column `{}` row {i}: label {other:?} is not 0/1",
                col.name()
            ))),
        })
        .collect()
}

/// Policy drop as a free function; see [`Table::drop_columns`].
pub fn drop_columns(table: &Table, names: &HashSet<String>, reason: &str) -> Result<Table> {
    table.drop_columns(names, reason)
}

/// Reads a header-first CSV of numeric cells.
///
/// Empty fields and fields in `missing_tokens` become missing cells. Row
/// indices in errors count data rows from zero.
pub fn load_csv(path: impl AsRef<Path>, missing_tokens: &HashSet<String>) -> Result<Table> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let table = parse_csv(BufReader::new(file), missing_tokens, path)?;
    let detail = format!(
        "source={} rows={} columns={}",
        path.display(),
        table.n_rows(),
        table.n_cols()
    );
    Ok(table
        .with_provenance(Provenance {
            source: Some(path.to_path_buf()),
            log: Vec::new(),
        })
        .logged("ingest", detail))
}

fn parse_csv<R: BufRead>(reader: R, missing_tokens: &HashSet<String>, path: &Path) -> Result<Table> {
    let mut lines = reader.lines();
    let header = match lines.next() {
        Some(l) => l.map_err(|e| Error::io(path, e))?,
        None => return Err(Error::Data(format!("{}: empty file", path.display()))),
    };
    let names: Vec<String> = header
        .trim_end_matches('\r')
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    let mut cells: Vec<Vec<Option<f64>>> = vec![Vec::new(); names.len()];
    let mut row = 0usize;
    for line in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != names.len() {
            return Err(Error::RaggedRow {
                row,
                expected: names.len(),
                found: fields.len(),
            });
        }
        for (j, raw) in fields.into_iter().enumerate() {
            let f = raw.trim();
            let cell = if f.is_empty() || missing_tokens.contains(f) {
                None
            } else {
                match f.parse::<f64>() {
                    Ok(v) if v.is_finite() => Some(v),
                    _ => {
                        return Err(Error::BadField {
                            row,
                            column: names[j].clone(),
                            value: f.to_string(),
                        })
                    }
                }
            };
            cells[j].push(cell);
        }
        row += 1;
    }
    let columns = names
        .into_iter()
        .zip(cells)
        .map(|(n, c)| Column::new(n, c))
        .collect();
    Table::new(columns)
}

/// Writes the table as CSV; missing cells become empty fields. Values use the
/// shortest representation that parses back to the same `f64`.
pub fn write_csv(table: &Table, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    let names: Vec<&str> = table.names().collect();
    out.push_str(&names.join(","));
    out.push('\n');
    for r in 0..table.n_rows() {
        for (j, c) in table.columns().iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            if let Some(v) = c.get(r) {
                out.push_str(&v.to_string());
            }
        }
        out.push('\n');
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    MailOrDont,
    Responders,
    Credit,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::MailOrDont => "mail_or_dont",
            ModelKind::Responders => "responders",
            ModelKind::Credit => "credit",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "mail_or_dont" | "mail" => Some(ModelKind::MailOrDont),
            "responders" => Some(ModelKind::Responders),
            "credit" => Some(ModelKind::Credit),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub model_kind: ModelKind,
    pub positive_label_meaning: String,
}

impl TargetSpec {
    pub fn new(model_kind: ModelKind) -> Self {
        let meaning = match model_kind {
            ModelKind::MailOrDont => "mail: responded and stayed current",
            ModelKind::Responders => "responded to the campaign",
            ModelKind::Credit => "delinquent after opening",
        };
        TargetSpec {
            model_kind,
            positive_label_meaning: meaning.to_string(),
        }
    }

    /// The label counted as the favorable outcome when computing good rates:
    /// no delinquency for the credit model, a positive label otherwise.
    pub fn favorable_label(&self) -> u8 {
        match self.model_kind {
            ModelKind::Credit => 0,
            ModelKind::MailOrDont | ModelKind::Responders => 1,
        }
    }
}

/// Appends the binary target for `spec` and removes `goodbad_col` from the
/// predictors.
///
/// A missing goodbad cell marks a non-responder. The credit target keeps only
/// responder rows.
pub fn derive_target(table: &Table, spec: &TargetSpec, goodbad_col: &str) -> Result<Table> {
    let gb = table.require(goodbad_col)?;
    for (i, c) in gb.cells().enumerate() {
        if let Some(v) = c {
            if v != 0.0 && v != 1.0 {
                return Err(Error::Data(format!(
                    "column `{goodbad_col}` row {i}: value {v} outside {{0, 1, missing}}"
                )));
            }
        }
    }
    let rows: Vec<usize> = match spec.model_kind {
        ModelKind::Credit => (0..table.n_rows()).filter(|&r| !gb.is_missing(r)).collect(),
        _ => (0..table.n_rows()).collect(),
    };
    let labels: Vec<f64> = rows
        .iter()
        .map(|&r| {
            let g = gb.get(r);
            let pos = match spec.model_kind {
                ModelKind::Responders => g.is_some(),
                ModelKind::Credit => g == Some(1.0),
                ModelKind::MailOrDont => g == Some(0.0),
            };
            if pos {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    if table.column(TARGET_COLUMN).is_some() && goodbad_col != TARGET_COLUMN {
        return Err(Error::Data(format!(
            "table already has a `{TARGET_COLUMN}` column"
        )));
    }
    let mut cols: Vec<Column> = table
        .columns()
        .iter()
        .filter(|c| c.name() != goodbad_col && c.kind() != ColumnKind::Target)
        .map(|c| c.take_rows(&rows))
        .collect();
    cols.push(Column::from_values(TARGET_COLUMN, labels).into_target());
    let positives = cols.last().map_or(0, |c| c.present().filter(|&v| v == 1.0).count());
    Ok(table.with_columns(cols)?.logged(
        "derive_target",
        format!(
            "kind={} source={goodbad_col} rows={} positives={positives}",
            spec.model_kind.as_str(),
            rows.len()
        ),
    ))
}
