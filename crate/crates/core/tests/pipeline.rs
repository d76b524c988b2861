use std::collections::HashMap;
use std::fs;

use mailrisk_core::experiment::{
    cleanse_for, fit_group, generate_synthetic, run_grid, stratified_split, BinningAxis, Cleansed, ExperimentGrid, Link,
    Split, SynthSpec,
};
use mailrisk_core::impute::ImputeStrategy;
use mailrisk_core::learners::Learner;
use mailrisk_core::resample::Sampling;
use mailrisk_core::{Column, Table};

fn small(n_rows: usize, link: Link, seed: u64) -> Table {
    generate_synthetic(&SynthSpec {
        n_rows,
        link,
        seed,
        ..Default::default()
    })
    .unwrap()
}

fn split_for(grid: &ExperimentGrid, c: &Cleansed) -> Split {
    let s = &grid.split;
    stratified_split(&c.table.labels().unwrap(), s.train_frac, s.stratified, s.seed).unwrap()
}

/// Scrambles every predictor cell of the given rows.
fn scramble(table: &Table, rows: &[usize]) -> Table {
    let hit: std::collections::HashSet<usize> = rows.iter().copied().collect();
    let replaced: HashMap<String, Column> = table
        .predictors()
        .map(|c| {
            let cells = c
                .cells()
                .enumerate()
                .map(|(i, v)| match (hit.contains(&i), i % 3) {
                    (false, _) => v,
                    (true, 0) => None,
                    (true, 1) => Some(-1.0e6),
                    (true, _) => Some(v.unwrap_or(0.0) * 37.0 + 5.0),
                })
                .collect();
            (c.name().to_string(), Column::new(c.name(), cells))
        })
        .collect();
    table.replace_columns(replaced).unwrap()
}

#[test]
fn test_rows_never_reach_fitted_models() {
    let data = small(3000, Link::Xor, 5);
    let grid = ExperimentGrid::default();
    for imp in [ImputeStrategy::Median, ImputeStrategy::CustomBins] {
        let clean = cleanse_for(&grid, &data, imp).unwrap();
        let split = split_for(&grid, &clean);
        let dirty = Cleansed {
            table: scramble(&clean.table, &split.test),
            ..clean.clone()
        };
        for axis in [BinningAxis::Quantile, BinningAxis::Categorical, BinningAxis::None] {
            let a = fit_group(&grid, &clean, &split, axis).unwrap();
            let b = fit_group(&grid, &dirty, &split, axis).unwrap();
            assert_eq!(a.imputation, b.imputation);
            assert_eq!(a.profiles, b.profiles);
            assert_eq!(a.binning, b.binning);
            assert_eq!(a.iv_kept, b.iv_kept);
            assert_eq!(a.selection, b.selection);
            assert_eq!(a.train, b.train);
            assert_ne!(a.test, b.test);
        }
    }
}

#[test]
fn persisted_split_reproduces_fitted_manifests() {
    let data = small(2500, Link::Xor, 8);
    let grid = ExperimentGrid {
        samplings: vec![Sampling::None],
        models: vec![Learner::LogReg],
        ..Default::default()
    };
    let dir = tempfile::tempdir().unwrap();
    run_grid(&grid, &data, Some(dir.path())).unwrap();

    let read_rows = |p: &std::path::Path| -> Vec<usize> {
        fs::read_to_string(p).unwrap().lines().map(|l| l.parse().unwrap()).collect()
    };
    for imp in &grid.imputations {
        for bin in &grid.binnings {
            let g = dir.path().join("groups").join(format!("{}-{}", imp.as_str(), bin.as_str()));
            let split = Split {
                train: read_rows(&g.join("train_rows.txt")),
                test: read_rows(&g.join("test_rows.txt")),
            };
            let mut all: Vec<usize> = split.train.iter().chain(&split.test).copied().collect();
            all.sort_unstable();
            assert_eq!(all, (0..data.n_rows()).collect::<Vec<_>>());

            let clean = cleanse_for(&grid, &data, *imp).unwrap();
            let gm = fit_group(&grid, &clean, &split, *bin).unwrap();
            assert_eq!(fs::read_to_string(g.join("imputation.txt")).unwrap(), gm.imputation.to_manifest());
            assert_eq!(fs::read_to_string(g.join("binning.txt")).unwrap(), gm.binning.to_manifest());
            assert_eq!(fs::read_to_string(g.join("selection.csv")).unwrap(), gm.selection.to_csv());
        }
    }
}

#[test]
fn reruns_write_identical_results() {
    let data = small(2000, Link::Xor, 3);
    let grid = ExperimentGrid {
        imputations: vec![ImputeStrategy::CustomBins],
        ..Default::default()
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = run_grid(&grid, &data, Some(a.path())).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let rb = pool.install(|| run_grid(&grid, &data, Some(b.path()))).unwrap();
    for (x, y) in ra.iter().zip(&rb) {
        assert_eq!(x.cell, y.cell);
        assert_eq!(x.report, y.report);
    }
    for f in ["results.json", "report.md", "report.csv", "config.txt"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn logreg_keeps_up_on_linear_task() {
    let data = small(8000, Link::Linear, 21);
    let grid = ExperimentGrid {
        binnings: vec![BinningAxis::Quantile, BinningAxis::None],
        samplings: vec![Sampling::None],
        ..Default::default()
    };
    let res = run_grid(&grid, &data, None).unwrap();
    for r in res.iter().filter(|r| r.cell.model == Learner::Gbt) {
        let lr = res
            .iter()
            .find(|q| q.cell.block_id() == r.cell.block_id() && q.cell.model == Learner::LogReg)
            .unwrap();
        let (gbt, logreg) = (r.report.as_ref().unwrap().auc, lr.report.as_ref().unwrap().auc);
        assert!(logreg >= gbt - 1.0, "{}: logreg {logreg:.2} vs gbt {gbt:.2}", r.cell.block_id());
    }
}
