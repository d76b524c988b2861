//! Deterministic fixtures shared by the benchmarks.

use mailrisk_core::binning::BinCounts;
use mailrisk_core::experiment::{
    cleanse_for, fit_group, generate_synthetic, stratified_split, BinningAxis, ExperimentGrid, GroupModels, SynthSpec,
};
use mailrisk_core::impute::ImputeStrategy;
use mailrisk_core::linalg::{Matrix, SymMatrix};
use mailrisk_core::Table;

pub fn synthetic(n_rows: usize) -> Table {
    generate_synthetic(&SynthSpec {
        n_rows,
        ..Default::default()
    })
    .expect("default synthetic spec is valid")
}

/// Prebins whose bad rate drifts upward with some wobble.
pub fn prebins(n: usize) -> Vec<BinCounts> {
    (0..n as u64)
        .map(|i| BinCounts::new(400 - 7 * i + (i * 37) % 11, 60 + 5 * i + (i * 53) % 17))
        .collect()
}

/// Symmetric matrix with entries from a fixed integer hash.
pub fn sym_matrix(n: usize) -> SymMatrix {
    let mut a = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let h = ((i * 7919 + j * 104_729) % 1000) as f64 / 500.0 - 1.0;
            a[(i, j)] = h;
            a[(j, i)] = h;
        }
    }
    SymMatrix::new(a).expect("built symmetric")
}

/// Median-imputed, quantile-binned group fitted on synthetic data.
pub fn fitted_group(n_rows: usize) -> GroupModels {
    let grid = ExperimentGrid::default();
    let data = synthetic(n_rows);
    let clean = cleanse_for(&grid, &data, ImputeStrategy::Median).expect("synthetic data cleanses");
    let labels = clean.table.labels().expect("target derived");
    let split = stratified_split(&labels, 0.8, true, 42).expect("both classes present");
    fit_group(&grid, &clean, &split, BinningAxis::Quantile).expect("group fits")
}
