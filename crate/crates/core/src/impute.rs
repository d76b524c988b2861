//! Missing-value and sentinel imputation.
//!
//! Two strategies are supported. `Median` fills gaps with the training
//! median. `CustomBins` splits the genuine (non-sentinel) values into five
//! equal-frequency bins, measures the good rate of each bin and of each
//! sentinel code, and replaces every code with the representative value of
//! the bin whose good rate is closest.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::cleanse::is_code;
use crate::error::{Error, Result};
use crate::table::{Column, Table};

pub const DEFAULT_GOOD_RATE_BINS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ImputeStrategy {
    Median,
    CustomBins,
}

impl ImputeStrategy {
    pub fn as_str(self) -> &'static str {
        match self {
            ImputeStrategy::Median => "median",
            ImputeStrategy::CustomBins => "custom_bins",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "median" => Some(ImputeStrategy::Median),
            "custom_bins" | "custom" => Some(ImputeStrategy::CustomBins),
            _ => None,
        }
    }
}

/// Which per-bin statistic replaces a sentinel code.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum BinValue {
    #[default]
    Median,
    Mean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoodRateBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    pub good_rate: f64,
    pub median_value: f64,
    pub mean_value: f64,
}

impl GoodRateBin {
    fn value(&self, which: BinValue) -> f64 {
        match which {
            BinValue::Median => self.median_value,
            BinValue::Mean => self.mean_value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ColumnImputer {
    /// Missing cells, and any cell holding one of `codes`, become `median`.
    Median { median: f64, codes: BTreeSet<i64> },
    CustomBins {
        bins: Vec<GoodRateBin>,
        global_median: f64,
        codes: BTreeSet<i64>,
        /// Per observed code: (good rate of its rows, chosen bin, replacement).
        assignments: BTreeMap<i64, CodeAssignment>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeAssignment {
    pub rate: f64,
    pub bin: usize,
    pub value: f64,
}

impl ColumnImputer {
    fn fill(&self, cell: Option<f64>, column: &str) -> f64 {
        match self {
            ColumnImputer::Median { median, codes } => match cell {
                Some(v) if !is_code(v, codes) => v,
                _ => *median,
            },
            ColumnImputer::CustomBins {
                global_median,
                codes,
                assignments,
                ..
            } => match cell {
                None => *global_median,
                Some(v) if is_code(v, codes) => {
                    let code = v.round() as i64;
                    match assignments.get(&code) {
                        Some(a) => a.value,
                        None => {
                            debug!("column `{column}`: code {code} unseen at fit, using global median");
                            *global_median
                        }
                    }
                }
                Some(v) => v,
            },
        }
    }

    /// Every value `apply` can write into a cell.
    pub fn fitted_values(&self) -> Vec<f64> {
        match self {
            ColumnImputer::Median { median, .. } => vec![*median],
            ColumnImputer::CustomBins {
                global_median,
                assignments,
                ..
            } => std::iter::once(*global_median)
                .chain(assignments.values().map(|a| a.value))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputationModel {
    pub strategy: ImputeStrategy,
    pub columns: BTreeMap<String, ColumnImputer>,
}

/// Sample median of the non-missing cells; even counts average the middle pair.
pub fn fit_median(column: &Column) -> Result<f64> {
    let mut v: Vec<f64> = column.present().collect();
    median_of(&mut v).ok_or_else(|| {
        Error::Data(format!(
            "column `{}` has no observed values to take a median of",
            column.name()
        ))
    })
}

fn median_of(v: &mut [f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CustomBinsConfig {
    pub n_bins: usize,
    /// Label counted as a good outcome.
    pub favorable_label: u8,
    pub bin_value: BinValue,
}

impl Default for CustomBinsConfig {
    fn default() -> Self {
        CustomBinsConfig {
            n_bins: DEFAULT_GOOD_RATE_BINS,
            favorable_label: 0,
            bin_value: BinValue::Median,
        }
    }
}

/// Fits the good-rate bin imputer for one column.
///
/// `column` must still contain its sentinel codes. Columns with fewer than
/// `n_bins` distinct genuine values fall back to median imputation with the
/// codes treated as missing.
pub fn fit_custom_bins(
    column: &Column,
    labels: &[u8],
    codes: &BTreeSet<i64>,
    config: &CustomBinsConfig,
) -> Result<ColumnImputer> {
    if labels.len() != column.len() {
        return Err(Error::Data(format!(
            "column `{}`: {} labels for {} rows",
            column.name(),
            labels.len(),
            column.len()
        )));
    }
    if labels.iter().any(|&l| l > 1) {
        return Err(Error::Data("labels must be 0/1".into()));
    }
    let good = |row: usize| labels[row] == config.favorable_label;

    // (value, row) of genuine cells, sorted by value then row
    let mut genuine: Vec<(f64, usize)> = column
        .cells()
        .enumerate()
        .filter_map(|(r, c)| c.filter(|&v| !is_code(v, codes)).map(|v| (v, r)))
        .collect();
    genuine.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut sorted_vals: Vec<f64> = genuine.iter().map(|g| g.0).collect();
    let global_median = median_of(&mut sorted_vals).ok_or_else(|| {
        Error::Data(format!(
            "column `{}` has no genuine values to impute from",
            column.name()
        ))
    })?;

    let mut distinct = sorted_vals.clone();
    distinct.dedup();
    let n_bins = config.n_bins.max(1);
    if distinct.len() < n_bins {
        warn!(
            "column `{}`: {} distinct genuine values, falling back to median imputation",
            column.name(),
            distinct.len()
        );
        return Ok(ColumnImputer::Median {
            median: global_median,
            codes: codes.clone(),
        });
    }

    let n = genuine.len();
    let bins: Vec<GoodRateBin> = (0..n_bins)
        .map(|k| {
            let slice = &genuine[k * n / n_bins..(k + 1) * n / n_bins];
            let mut vals: Vec<f64> = slice.iter().map(|g| g.0).collect();
            let goods = slice.iter().filter(|g| good(g.1)).count();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            GoodRateBin {
                lower: vals[0],
                upper: vals[vals.len() - 1],
                count: vals.len(),
                good_rate: goods as f64 / vals.len() as f64,
                median_value: median_of(&mut vals).expect("non-empty bin"),
                mean_value: mean,
            }
        })
        .collect();

    let mut per_code: BTreeMap<i64, (usize, usize)> = BTreeMap::new();
    for (r, c) in column.cells().enumerate() {
        if let Some(v) = c {
            if is_code(v, codes) {
                let e = per_code.entry(v.round() as i64).or_default();
                e.0 += usize::from(good(r));
                e.1 += 1;
            }
        }
    }
    let assignments = per_code
        .into_iter()
        .map(|(code, (goods, total))| {
            let rate = goods as f64 / total as f64;
            let bin = closest_bin(&bins, rate);
            let value = bins[bin].value(config.bin_value);
            (code, CodeAssignment { rate, bin, value })
        })
        .collect();

    Ok(ColumnImputer::CustomBins {
        bins,
        global_median,
        codes: codes.clone(),
        assignments,
    })
}

/// Index of the bin whose good rate is nearest `rate`; ties go to the lower index.
fn closest_bin(bins: &[GoodRateBin], rate: f64) -> usize {
    let mut best = 0;
    for (i, b) in bins.iter().enumerate().skip(1) {
        if (b.good_rate - rate).abs() < (bins[best].good_rate - rate).abs() {
            best = i;
        }
    }
    best
}

impl ImputationModel {
    /// Median model over every predictor of `table`.
    pub fn fit_median(table: &Table) -> Result<Self> {
        let columns = table
            .predictors()
            .map(|c| {
                Ok((
                    c.name().to_string(),
                    ColumnImputer::Median {
                        median: fit_median(c)?,
                        codes: BTreeSet::new(),
                    },
                ))
            })
            .collect::<Result<_>>()?;
        Ok(ImputationModel {
            strategy: ImputeStrategy::Median,
            columns,
        })
    }

    /// Custom-bin model over every predictor; `table` must carry a target.
    pub fn fit_custom_bins(
        table: &Table,
        codes: &BTreeSet<i64>,
        config: &CustomBinsConfig,
    ) -> Result<Self> {
        let labels = table.labels()?;
        let columns = table
            .predictors()
            .map(|c| Ok((c.name().to_string(), fit_custom_bins(c, &labels, codes, config)?)))
            .collect::<Result<_>>()?;
        Ok(ImputationModel {
            strategy: ImputeStrategy::CustomBins,
            columns,
        })
    }

    /// Fills every predictor cell from the stored values. Never refits.
    pub fn apply(&self, table: &Table) -> Result<Table> {
        let mut filled = 0usize;
        let cols = table
            .columns()
            .iter()
            .map(|c| {
                if c.kind() == crate::table::ColumnKind::Target {
                    return Ok(c.clone());
                }
                let imp = self.columns.get(c.name()).ok_or_else(|| {
                    Error::Data(format!("column `{}` was not present when fitting", c.name()))
                })?;
                Ok(c.map_cells(|cell| {
                    let v = imp.fill(cell, c.name());
                    if cell != Some(v) {
                        filled += 1;
                    }
                    Some(v)
                }))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(table.with_columns(cols)?.logged(
            "impute",
            format!("strategy={} cells_replaced={filled}", self.strategy.as_str()),
        ))
    }

    /// Human-readable manifest of the fitted values.
    pub fn to_manifest(&self) -> String {
        let mut out = format!("mailrisk-imputation 1\nstrategy {}\n", self.strategy.as_str());
        for (name, imp) in &self.columns {
            match imp {
                ColumnImputer::Median { median, codes } => {
                    let _ = writeln!(out, "column {name} median {median}");
                    if !codes.is_empty() {
                        let list: Vec<String> = codes.iter().map(i64::to_string).collect();
                        let _ = writeln!(out, "  codes_as_missing {}", list.join(" "));
                    }
                }
                ColumnImputer::CustomBins {
                    bins,
                    global_median,
                    assignments,
                    ..
                } => {
                    let _ = writeln!(out, "column {name} custom_bins global_median {global_median}");
                    for (i, b) in bins.iter().enumerate() {
                        let _ = writeln!(
                            out,
                            "  bin {i} lower {} upper {} count {} good_rate {} median {} mean {}",
                            b.lower, b.upper, b.count, b.good_rate, b.median_value, b.mean_value
                        );
                    }
                    for (code, a) in assignments {
                        let _ = writeln!(
                            out,
                            "  assign {code} rate {} bin {} value {}",
                            a.rate, a.bin, a.value
                        );
                    }
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn medians() {
        let c = Column::new("a", vec![Some(1.0), Some(2.0), Some(3.0), None]);
        assert_eq!(fit_median(&c).unwrap(), 2.0);
        assert_eq!(fit_median(&Column::from_values("a", vec![1.0, 2.0, 3.0, 4.0])).unwrap(), 2.5);
        assert_eq!(fit_median(&Column::from_values("a", vec![5.0])).unwrap(), 5.0);
        assert!(fit_median(&Column::new("a", vec![None, None])).is_err());
    }

    /// Genuine values 101..=200 (clear of the coded values); the first 20 rows have 18 good, then 14, 10, 6, 2.
    fn rate_fixture(code_goods: usize, code_total: usize) -> (Column, Vec<u8>) {
        let mut cells = Vec::new();
        let mut labels = Vec::new();
        let goods_per_bin = [18, 14, 10, 6, 2];
        for (k, &g) in goods_per_bin.iter().enumerate() {
            for j in 0..20 {
                cells.push(Some((k * 20 + j + 101) as f64));
                labels.push(if j < g { 0 } else { 1 });
            }
        }
        for j in 0..code_total {
            cells.push(Some(9998.0));
            labels.push(if j < code_goods { 0 } else { 1 });
        }
        (Column::new("x", cells), labels)
    }

    fn codes() -> BTreeSet<i64> {
        crate::cleanse::BUREAU_CODES.iter().copied().collect()
    }

    #[test]
    fn code_matched_to_closest_good_rate() {
        // code rate 13/20 = 0.65; |0.9-0.65|=0.25, |0.7-0.65|=0.05, |0.5-0.65|=0.15
        let (c, y) = rate_fixture(13, 20);
        let imp = fit_custom_bins(&c, &y, &codes(), &CustomBinsConfig::default()).unwrap();
        let ColumnImputer::CustomBins { bins, assignments, .. } = &imp else {
            panic!("expected custom bins");
        };
        let rates: Vec<f64> = bins.iter().map(|b| b.good_rate).collect();
        assert_eq!(rates, vec![0.9, 0.7, 0.5, 0.3, 0.1]);
        let a = &assignments[&9998];
        assert_eq!(a.bin, 1);
        // bin 1 holds 121..=140, median (130+131)/2
        assert_eq!(a.value, 130.5);
        assert_eq!(bins[1].median_value, 130.5);
    }

    #[test]
    fn tie_goes_to_lower_bin() {
        let (c, y) = rate_fixture(12, 20);
        let imp = fit_custom_bins(&c, &y, &codes(), &CustomBinsConfig::default()).unwrap();
        let ColumnImputer::CustomBins { assignments, .. } = &imp else {
            panic!()
        };
        assert_eq!(assignments[&9998].bin, 1);
    }

    #[test]
    fn mean_switch() {
        let (c, y) = rate_fixture(13, 20);
        let cfg = CustomBinsConfig {
            bin_value: BinValue::Mean,
            ..Default::default()
        };
        let imp = fit_custom_bins(&c, &y, &codes(), &cfg).unwrap();
        let ColumnImputer::CustomBins { assignments, .. } = &imp else {
            panic!()
        };
        assert_eq!(assignments[&9998].value, 130.5);
    }

    #[test]
    fn no_codes_equals_median() {
        let cells: Vec<Option<f64>> = (0..50).map(|i| (i % 7 != 0).then_some(i as f64)).collect();
        let c = Column::new("x", cells);
        let y: Vec<u8> = (0..50).map(|i| (i % 3 == 0) as u8).collect();
        let t = Table::new(vec![c.clone()]).unwrap();
        let imp = fit_custom_bins(&c, &y, &codes(), &CustomBinsConfig::default()).unwrap();
        let custom = ImputationModel {
            strategy: ImputeStrategy::CustomBins,
            columns: BTreeMap::from([("x".to_string(), imp)]),
        };
        let med = ImputationModel::fit_median(&t).unwrap();
        let a = custom.apply(&t).unwrap();
        let b = med.apply(&t).unwrap();
        assert_eq!(a.columns(), b.columns());
    }

    #[test]
    fn few_distinct_falls_back() {
        let c = Column::from_values("x", vec![1.0, 2.0, 1.0, 96.0, 2.0]);
        let y = vec![0, 1, 0, 1, 1];
        let imp = fit_custom_bins(&c, &y, &codes(), &CustomBinsConfig::default()).unwrap();
        assert!(matches!(imp, ColumnImputer::Median { median, .. } if median == 1.5));
    }

    #[test]
    fn apply_median_and_identity() {
        let t = Table::new(vec![Column::new("a", vec![None, Some(7.0)])]).unwrap();
        let m = ImputationModel {
            strategy: ImputeStrategy::Median,
            columns: BTreeMap::from([(
                "a".to_string(),
                ColumnImputer::Median {
                    median: 2.0,
                    codes: BTreeSet::new(),
                },
            )]),
        };
        let out = m.apply(&t).unwrap();
        assert_eq!(out.column("a").unwrap().raw_values(), &[2.0, 7.0]);
        let again = m.apply(&out).unwrap();
        assert_eq!(again.columns(), out.columns());

        let extra = Table::new(vec![Column::from_values("b", vec![1.0, 1.0])]).unwrap();
        assert!(m.apply(&extra).is_err());
    }

    #[test]
    fn held_out_codes_use_assignment() {
        let (c, y) = rate_fixture(13, 20);
        let train = Table::new(vec![c.clone()]).unwrap();
        let mut cfg = CustomBinsConfig::default();
        cfg.favorable_label = 0;
        let imp = fit_custom_bins(&c, &y, &codes(), &cfg).unwrap();
        let model = ImputationModel {
            strategy: ImputeStrategy::CustomBins,
            columns: BTreeMap::from([("x".to_string(), imp.clone())]),
        };
        let ColumnImputer::CustomBins { assignments, global_median, .. } = &imp else {
            panic!()
        };
        let held = Table::new(vec![Column::new(
            "x",
            vec![Some(9998.0), Some(3.0), Some(9998.0), Some(96.0), None],
        )])
        .unwrap();
        let out = model.apply(&held).unwrap();
        let v = out.column("x").unwrap().raw_values();
        assert_eq!(v[0], assignments[&9998].value);
        assert_eq!(v[2], assignments[&9998].value);
        assert_eq!(v[1], 3.0);
        // 96 never appeared in training
        assert_eq!(v[3], *global_median);
        assert_eq!(v[4], *global_median);
        assert_eq!(model.apply(&train).unwrap().n_rows(), 120);
    }

    #[test]
    fn sentinel_outliers_are_removed() {
        let mut cells = Vec::new();
        let mut y = Vec::new();
        for i in 0..200 {
            if i % 10 == 0 {
                cells.push(Some(9999998.0));
            } else {
                cells.push(Some(i as f64 * 0.5));
            }
            y.push((i % 4 == 0) as u8);
        }
        let c = Column::new("x", cells);
        let max_genuine = c.present().filter(|&v| v < 9e6).fold(f64::MIN, f64::max);
        let imp = fit_custom_bins(&c, &y, &codes(), &CustomBinsConfig::default()).unwrap();
        let model = ImputationModel {
            strategy: ImputeStrategy::CustomBins,
            columns: BTreeMap::from([("x".to_string(), imp)]),
        };
        let t = Table::new(vec![c.clone()]).unwrap();
        let out = model.apply(&t).unwrap();
        let max_after = out.column("x").unwrap().present().fold(f64::MIN, f64::max);
        assert_eq!(max_after, max_genuine);
        assert!(c.present().fold(f64::MIN, f64::max) > max_genuine);
    }

    proptest! {
        #[test]
        fn median_permutation_invariant(mut v in prop::collection::vec(-1e6f64..1e6, 1..60), seed in 0u64..1000) {
            let a = fit_median(&Column::from_values("a", v.clone())).unwrap();
            // deterministic shuffle
            let n = v.len();
            let mut s = seed;
            for i in (1..n).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                v.swap(i, (s >> 33) as usize % (i + 1));
            }
            let b = fit_median(&Column::from_values("a", v)).unwrap();
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }

        #[test]
        fn equal_frequency_counts(n in 5usize..200, y_seed in 0u64..100) {
            let c = Column::from_values("x", (0..n).map(|i| i as f64 * 1.25).collect());
            let y: Vec<u8> = (0..n).map(|i| ((i as u64 * 31 + y_seed) % 3 == 0) as u8).collect();
            let imp = fit_custom_bins(&c, &y, &BTreeSet::new(), &CustomBinsConfig::default()).unwrap();
            let ColumnImputer::CustomBins { bins, .. } = imp else { panic!() };
            let counts: Vec<usize> = bins.iter().map(|b| b.count).collect();
            prop_assert_eq!(counts.iter().sum::<usize>(), n);
            prop_assert!(counts.iter().max().unwrap() - counts.iter().min().unwrap() <= 1);
            for w in bins.windows(2) {
                prop_assert!(w[0].upper <= w[1].lower);
            }
            for b in &bins {
                prop_assert!(b.lower <= b.median_value && b.median_value <= b.upper);
                prop_assert!((0.0..=1.0).contains(&b.good_rate));
            }
        }

        #[test]
        fn imputed_values_come_from_model(
            cells in prop::collection::vec(prop::option::weighted(0.7, prop_oneof![0.0f64..50.0, Just(96.0), Just(9999.0)]), 20..80),
        ) {
            let c = Column::new("x", cells);
            prop_assume!(c.present().filter(|&v| v != 96.0 && v != 9999.0).count() > 0);
            let y: Vec<u8> = (0..c.len()).map(|i| (i % 2) as u8).collect();
            let imp = fit_custom_bins(&c, &y, &codes(), &CustomBinsConfig::default()).unwrap();
            let allowed = imp.fitted_values();
            let model = ImputationModel {
                strategy: ImputeStrategy::CustomBins,
                columns: BTreeMap::from([("x".to_string(), imp)]),
            };
            let out = model.apply(&Table::new(vec![c.clone()]).unwrap()).unwrap();
            let col = out.column("x").unwrap();
            prop_assert_eq!(col.missing_count(), 0);
            for (before, after) in c.cells().zip(col.present()) {
                match before {
                    Some(v) if v != 96.0 && v != 9999.0 => prop_assert_eq!(v, after),
                    _ => prop_assert!(allowed.contains(&after)),
                }
            }
        }
    }
}
