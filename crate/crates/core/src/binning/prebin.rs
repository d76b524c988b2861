use std::collections::BTreeSet;

use log::info;
use serde::{Deserialize, Serialize};

use super::woe::BinCounts;
use crate::error::{Error, Result};
use crate::table::Column;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BinMode {
    Quantile,
    Categorical,
}

impl BinMode {
    pub fn as_str(self) -> &'static str {
        match self {
            BinMode::Quantile => "quantile",
            BinMode::Categorical => "categorical",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "quantile" => Some(BinMode::Quantile),
            "categorical" => Some(BinMode::Categorical),
            _ => None,
        }
    }
}

/// How raw values map onto ordered bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Layout {
    /// Inclusive upper edges; bin `i` holds `cuts[i-1] < x <= cuts[i]`, and
    /// values past either end clamp to the edge bins.
    Cuts(Vec<f64>),
    /// Sorted distinct values, one per bin (prebins) or one range per bin
    /// after merging.
    Groups(Vec<Vec<f64>>),
}

impl Layout {
    pub fn n_bins(&self) -> usize {
        match self {
            Layout::Cuts(c) => c.len() + 1,
            Layout::Groups(g) => g.len(),
        }
    }

    /// Bin of a present value, or `None` for a category never seen at fit.
    pub fn bin_of(&self, x: f64) -> Option<usize> {
        match self {
            Layout::Cuts(c) => Some(c.partition_point(|&e| e < x)),
            Layout::Groups(groups) => groups
                .iter()
                .position(|g| g.binary_search_by(|v| v.total_cmp(&x)).is_ok()),
        }
    }

    /// Layout after merging the half-open prebin ranges in `parts`.
    pub fn merged(&self, parts: &[(usize, usize)]) -> Layout {
        match self {
            Layout::Cuts(c) => Layout::Cuts(parts[..parts.len() - 1].iter().map(|&(_, b)| c[b - 1]).collect()),
            Layout::Groups(g) => Layout::Groups(parts.iter().map(|&(a, b)| g[a..b].concat()).collect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreBins {
    pub mode: BinMode,
    pub layout: Layout,
    pub counts: Vec<BinCounts>,
    pub missing: Option<BinCounts>,
}

/// Cut points splitting the sorted `values` into at most `max_bins`
/// equal-frequency bins. Tied values always share a bin.
pub fn quantile_cuts(sorted: &[f64], max_bins: usize) -> Vec<f64> {
    let n = sorted.len();
    let mut cuts: Vec<f64> = Vec::new();
    if n == 0 {
        return cuts;
    }
    let last = sorted[n - 1];
    for i in 1..max_bins {
        let pos = i * n / max_bins;
        if pos == 0 {
            continue;
        }
        let cut = sorted[pos - 1];
        if cut >= last || cuts.last().is_some_and(|&c| cut <= c) {
            continue;
        }
        cuts.push(cut);
    }
    cuts
}

/// Builds the prebins of `column` against binary `labels`. Missing cells are
/// counted in a separate bin.
pub fn prebin(column: &Column, labels: &[u8], mode: BinMode, max_prebins: usize) -> Result<PreBins> {
    if labels.len() != column.len() {
        return Err(Error::Data(format!(
            "column `{}` has {} rows but the target has {}",
            column.name(),
            column.len(),
            labels.len()
        )));
    }
    if let Some(bad) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::Data(format!("target is not binary: saw label {bad}")));
    }
    if max_prebins == 0 {
        return Err(Error::Config("max_prebins must be positive".into()));
    }

    let mut present: Vec<f64> = column.present().collect();
    present.sort_by(f64::total_cmp);

    let mut mode = mode;
    let layout = match mode {
        BinMode::Categorical => {
            let distinct: BTreeSet<u64> = present.iter().map(|v| v.to_bits()).collect();
            if distinct.len() <= max_prebins {
                let mut values: Vec<f64> = distinct.into_iter().map(f64::from_bits).collect();
                values.sort_by(f64::total_cmp);
                Layout::Groups(values.into_iter().map(|v| vec![v]).collect())
            } else {
                info!(
                    "column `{}`: {} categories exceed {max_prebins}; using quantile prebins",
                    column.name(),
                    distinct.len()
                );
                mode = BinMode::Quantile;
                Layout::Cuts(quantile_cuts(&present, max_prebins))
            }
        }
        BinMode::Quantile => Layout::Cuts(quantile_cuts(&present, max_prebins)),
    };

    let mut counts = vec![BinCounts::default(); if present.is_empty() { 0 } else { layout.n_bins() }];
    let mut missing = BinCounts::default();
    for (cell, &label) in column.cells().zip(labels) {
        match cell {
            Some(x) => {
                let bin = layout.bin_of(x).expect("every fit value has a bin");
                counts[bin].add(label);
            }
            None => missing.add(label),
        }
    }

    Ok(PreBins {
        mode,
        layout,
        counts,
        missing: (missing.total() > 0).then_some(missing),
    })
}
