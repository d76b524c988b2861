//! Sentinel detection and removal of uninformative columns.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::table::{Column, ColumnKind, Table};

/// The seventeen bureau sentinel codes observed in the campaign data.
pub const BUREAU_CODES: [i64; 17] = [
    96, 97, 98, 99, 9444, 9996, 9997, 9998, 9999, 99994, 99996, 99997, 99998, 99999, 9999996,
    9999997, 9999998,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CodeMode {
    /// Integers of at least `min_digits` digits starting with 9 and ending in 4..=9.
    Pattern,
    /// Exactly the configured values.
    ExplicitList,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodedValueRule {
    pub mode: CodeMode,
    pub explicit_values: BTreeSet<i64>,
    pub min_digits: usize,
}

impl Default for CodedValueRule {
    fn default() -> Self {
        CodedValueRule {
            mode: CodeMode::ExplicitList,
            explicit_values: BUREAU_CODES.iter().copied().collect(),
            min_digits: 2,
        }
    }
}

impl CodedValueRule {
    pub fn pattern() -> Self {
        CodedValueRule {
            mode: CodeMode::Pattern,
            ..Self::default()
        }
    }

    /// The cell value as a code, if it is one under this rule.
    pub fn code_of(&self, v: f64) -> Option<i64> {
        let r = v.round();
        if !v.is_finite() || (v - r).abs() >= 1e-9 || r < 0.0 || r > 9.0e15 {
            return None;
        }
        let n = r as i64;
        let hit = match self.mode {
            CodeMode::ExplicitList => self.explicit_values.contains(&n),
            CodeMode::Pattern => {
                let digits = n.to_string();
                let b = digits.as_bytes();
                b.len() >= self.min_digits.max(1)
                    && b[0] == b'9'
                    && (b'4'..=b'9').contains(&b[b.len() - 1])
            }
        };
        hit.then_some(n)
    }
}

/// Distinct cell values of `column` that are sentinel codes under `rule`.
pub fn detect_coded(column: &Column, rule: &CodedValueRule) -> BTreeSet<i64> {
    column.present().filter_map(|v| rule.code_of(v)).collect()
}

/// Runs [`detect_coded`] over every predictor, keeping columns with hits.
pub fn detect_all(table: &Table, rule: &CodedValueRule) -> BTreeMap<String, BTreeSet<i64>> {
    table
        .predictors()
        .map(|c| (c.name().to_string(), detect_coded(c, rule)))
        .filter(|(_, s)| !s.is_empty())
        .collect()
}

pub(crate) fn is_code(v: f64, codes: &BTreeSet<i64>) -> bool {
    let r = v.round();
    (v - r).abs() < 1e-9 && r >= i64::MIN as f64 && r <= i64::MAX as f64 && codes.contains(&(r as i64))
}

/// Turns every cell matching its column's code set into a missing cell.
pub fn recode_as_missing(table: &Table, per_column_codes: &BTreeMap<String, BTreeSet<i64>>) -> Table {
    let mut counts = Vec::new();
    let cols: Vec<Column> = table
        .columns()
        .iter()
        .map(|c| match per_column_codes.get(c.name()) {
            Some(codes) if !codes.is_empty() && c.kind() != ColumnKind::Target => {
                let mut n = 0usize;
                let out = c.map_cells(|cell| match cell {
                    Some(v) if is_code(v, codes) => {
                        n += 1;
                        None
                    }
                    other => other,
                });
                counts.push(format!("{}:{n}", c.name()));
                out
            }
            _ => c.clone(),
        })
        .collect();
    let t = table
        .with_columns(cols)
        .expect("recoding preserves table shape");
    if counts.is_empty() {
        t
    } else {
        t.logged("recode_missing", counts.join(" "))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DropReason {
    HighMissing,
    Constant,
    Policy,
}

impl DropReason {
    pub fn as_str(self) -> &'static str {
        match self {
            DropReason::HighMissing => "high_missing",
            DropReason::Constant => "constant",
            DropReason::Policy => "policy",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropEntry {
    pub column: String,
    pub reason: DropReason,
    /// Missing fraction for `HighMissing`, the single value for `Constant`.
    pub statistic: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DropLog {
    pub entries: Vec<DropEntry>,
}

impl DropLog {
    pub fn names(&self) -> HashSet<String> {
        self.entries.iter().map(|e| e.column.clone()).collect()
    }

    pub fn extend(&mut self, other: DropLog) {
        self.entries.extend(other.entries);
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `column,reason,statistic` rows with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("column,reason,statistic\n");
        for e in &self.entries {
            let stat = e.statistic.map(|s| s.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{},{},{stat}", e.column, e.reason.as_str());
        }
        out
    }
}

/// Removes predictors whose missing fraction is strictly above `threshold`.
pub fn drop_high_missing(table: &Table, threshold: f64) -> Result<(Table, DropLog)> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::Config(format!(
            "missing threshold {threshold} outside (0, 1]"
        )));
    }
    let entries: Vec<DropEntry> = table
        .predictors()
        .filter(|c| c.missing_fraction() > threshold)
        .map(|c| DropEntry {
            column: c.name().to_string(),
            reason: DropReason::HighMissing,
            statistic: Some(c.missing_fraction()),
        })
        .collect();
    finish(table, entries, DropReason::HighMissing)
}

/// Removes predictors with at most one distinct non-missing value.
pub fn drop_constant(table: &Table) -> Result<(Table, DropLog)> {
    let entries: Vec<DropEntry> = table
        .predictors()
        .filter(|c| c.distinct_count() <= 1)
        .map(|c| DropEntry {
            column: c.name().to_string(),
            reason: DropReason::Constant,
            statistic: c.present().next(),
        })
        .collect();
    finish(table, entries, DropReason::Constant)
}

/// Removes columns named by policy (for example protected attributes).
pub fn drop_policy(table: &Table, names: &BTreeSet<String>) -> Result<(Table, DropLog)> {
    let entries = names
        .iter()
        .map(|n| {
            table.require(n)?;
            Ok(DropEntry {
                column: n.clone(),
                reason: DropReason::Policy,
                statistic: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    finish(table, entries, DropReason::Policy)
}

fn finish(table: &Table, entries: Vec<DropEntry>, reason: DropReason) -> Result<(Table, DropLog)> {
    let log = DropLog { entries };
    let t = table.drop_columns(&log.names(), reason.as_str())?;
    Ok((t, log))
}
