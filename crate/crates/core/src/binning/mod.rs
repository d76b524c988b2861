//! Prebinning, IV-optimal merging and the WoE transform.

mod merge;
mod prebin;
mod woe;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use merge::{optimal_merge, partition_iv, Direction, MergeConstraints, MergeResult, Monotonic};
pub use prebin::{prebin, quantile_cuts, BinMode, Layout, PreBins};
pub use woe::{woe_iv, BinCounts};

use crate::error::{Error, Result};
use crate::table::{Column, Table};

pub const DEFAULT_IV_THRESHOLD: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinningConfig {
    pub mode: BinMode,
    pub max_prebins: usize,
    pub constraints: MergeConstraints,
}

impl Default for BinningConfig {
    fn default() -> Self {
        BinningConfig {
            mode: BinMode::Quantile,
            max_prebins: 20,
            constraints: MergeConstraints::default(),
        }
    }
}

/// Fitted bins of one variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableBinning {
    pub name: String,
    pub mode: BinMode,
    pub layout: Layout,
    pub counts: Vec<BinCounts>,
    pub woe: Vec<f64>,
    pub iv: f64,
    pub missing: Option<BinCounts>,
    /// WoE for missing cells and unseen categories; zero when no missing
    /// cell was seen at fit time.
    pub missing_woe: f64,
    pub direction: Direction,
    pub fallback: bool,
}

impl VariableBinning {
    pub fn woe_of(&self, cell: Option<f64>) -> f64 {
        match cell.and_then(|x| self.layout.bin_of(x)) {
            Some(bin) => self.woe[bin],
            None => self.missing_woe,
        }
    }
}

/// Fits one variable. A target with a single class yields one bin with IV 0.
pub fn fit_variable(column: &Column, labels: &[u8], cfg: &BinningConfig) -> Result<VariableBinning> {
    let pre = prebin(column, labels, cfg.mode, cfg.max_prebins)?;
    if pre.counts.is_empty() {
        return Err(Error::Data(format!("column `{}` has no values to bin", column.name())));
    }
    let total = BinCounts::merged(&pre.counts);
    let total_all = BinCounts::merged(&[total, pre.missing.unwrap_or_default()]);
    let degenerate = total_all.good == 0 || total_all.bad == 0;

    let merged = if degenerate {
        warn!("column `{}`: single-class target, IV is 0", column.name());
        MergeResult {
            parts: vec![(0, pre.counts.len())],
            iv: 0.0,
            direction: Direction::Free,
            fallback: true,
        }
    } else {
        optimal_merge(&pre.counts, pre.missing, &cfg.constraints)
    };
    let counts: Vec<BinCounts> = merged
        .parts
        .iter()
        .map(|&(a, b)| BinCounts::merged(&pre.counts[a..b]))
        .collect();

    let (woe, iv, missing_woe) = if degenerate {
        (vec![0.0; counts.len()], 0.0, 0.0)
    } else {
        let mut all = counts.clone();
        all.extend(pre.missing);
        let (mut woe, iv) = woe_iv(&all, cfg.constraints.smoothing)
            .map_err(|e| Error::Data(format!("column `{}`: {e}", column.name())))?;
        let missing_woe = if pre.missing.is_some() { woe.pop().unwrap() } else { 0.0 };
        (woe, iv, missing_woe)
    };

    Ok(VariableBinning {
        name: column.name().to_string(),
        mode: pre.mode,
        layout: pre.layout.merged(&merged.parts),
        counts,
        woe,
        iv,
        missing: pre.missing,
        missing_woe,
        direction: merged.direction,
        fallback: merged.fallback,
    })
}

/// Per-variable binnings keyed by column name.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BinningModel {
    pub config: Option<BinningConfig>,
    pub variables: BTreeMap<String, VariableBinning>,
}

impl BinningModel {
    /// Fits every predictor of `table` against its target, in parallel.
    pub fn fit(table: &Table, cfg: &BinningConfig) -> Result<Self> {
        let labels = table.labels()?;
        let fitted: Vec<VariableBinning> = table
            .predictors()
            .collect::<Vec<_>>()
            .par_iter()
            .map(|col| fit_variable(col, &labels, cfg))
            .collect::<Result<_>>()?;
        Ok(BinningModel {
            config: Some(*cfg),
            variables: fitted.into_iter().map(|v| (v.name.clone(), v)).collect(),
        })
    }

    pub fn get(&self, name: &str) -> Option<&VariableBinning> {
        self.variables.get(name)
    }

    /// Replaces every predictor cell with its bin's WoE.
    pub fn transform(&self, table: &Table) -> Result<Table> {
        let mut replaced = std::collections::HashMap::new();
        for col in table.predictors() {
            let var = self
                .variables
                .get(col.name())
                .ok_or_else(|| Error::UnknownColumn(format!("{} (no binning model)", col.name())))?;
            let mut unseen = 0usize;
            let woe = col.map_cells(|cell| {
                if let (Some(x), Layout::Groups(_)) = (cell, &var.layout) {
                    if var.layout.bin_of(x).is_none() {
                        unseen += 1;
                    }
                }
                Some(var.woe_of(cell))
            });
            if unseen > 0 {
                warn!("column `{}`: {unseen} unseen categories mapped to the missing-bin WoE", col.name());
            }
            replaced.insert(col.name().to_string(), woe);
        }
        Ok(table
            .replace_columns(replaced)?
            .logged("woe", format!("variables={}", self.variables.len())))
    }

    /// `(name, iv)` pairs sorted by name.
    pub fn ivs(&self) -> Vec<(String, f64)> {
        self.variables.iter().map(|(n, v)| (n.clone(), v.iv)).collect()
    }

    /// `name,iv` CSV with a header.
    pub fn iv_table(&self) -> String {
        let mut out = String::from("name,iv\n");
        for (name, iv) in self.ivs() {
            let _ = writeln!(out, "{name},{iv:.6}");
        }
        out
    }

    /// Text table: per variable its bins, counts, WoE and IV.
    pub fn to_manifest(&self) -> String {
        let mut out = String::from("mailrisk-binning 1\n");
        for var in self.variables.values() {
            let _ = writeln!(
                out,
                "variable {} mode={} iv={:.6} direction={:?}{}",
                var.name,
                var.mode.as_str(),
                var.iv,
                var.direction,
                if var.fallback { " fallback" } else { "" }
            );
            for (i, (c, w)) in var.counts.iter().zip(&var.woe).enumerate() {
                let _ = writeln!(out, "  bin {i} {} good={} bad={} woe={w:.6}", bin_label(&var.layout, i), c.good, c.bad);
            }
            if let Some(m) = var.missing {
                let _ = writeln!(out, "  bin missing good={} bad={} woe={:.6}", m.good, m.bad, var.missing_woe);
            }
        }
        out
    }
}

fn bin_label(layout: &Layout, i: usize) -> String {
    match layout {
        Layout::Cuts(c) => {
            let lo = if i == 0 { "-inf".to_string() } else { c[i - 1].to_string() };
            let hi = if i == c.len() { "inf".to_string() } else { c[i].to_string() };
            format!("({lo},{hi}]")
        }
        Layout::Groups(g) => {
            let vals: Vec<String> = g[i].iter().map(f64::to_string).collect();
            format!("{{{}}}", vals.join(","))
        }
    }
}

/// Variables with IV strictly above `threshold`, sorted by name.
pub fn select_by_iv(model: &BinningModel, threshold: f64) -> Result<Vec<String>> {
    let kept: Vec<String> = model
        .variables
        .values()
        .filter(|v| v.iv > threshold)
        .map(|v| v.name.clone())
        .collect();
    if kept.is_empty() {
        return Err(Error::NoSurvivors {
            threshold,
            table: model.iv_table(),
        });
    }
    info!("IV filter kept {} of {} variables", kept.len(), model.variables.len());
    Ok(kept)
}
