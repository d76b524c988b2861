//! Results matrix: sampling rows by imputation/binning/model columns, five
//! metrics per cell, followed by the lineage of every group.

use std::fmt::Write as _;

use super::{CellResult, ExperimentGrid};
use crate::error::{Error, Result};
use crate::evaluate::{EvalReport, DEFAULT_THRESHOLD};
use crate::impute::ImputeStrategy;
use crate::learners::Learner;
use crate::resample::Sampling;

use super::BinningAxis;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
}

impl ReportFormat {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "csv" => Some(ReportFormat::Csv),
            "md" | "markdown" => Some(ReportFormat::Markdown),
            _ => None,
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Markdown => "md",
        }
    }
}

const METRICS: [(&str, &str); 5] = [
    ("Accuracy", "accuracy"),
    ("Precision", "precision"),
    ("Recall", "recall"),
    ("F-Score", "f1"),
    ("AUC", "auc"),
];

fn metric(r: &EvalReport, i: usize) -> f64 {
    [r.accuracy, r.precision, r.recall, r.f1, r.auc][i]
}

type Column = (ImputeStrategy, BinningAxis, Learner);

struct Matrix<'a> {
    rows: Vec<Sampling>,
    cols: Vec<Column>,
    results: &'a [CellResult],
}

impl<'a> Matrix<'a> {
    fn new(results: &'a [CellResult], grid: &ExperimentGrid) -> Self {
        let mut ordered: Vec<&CellResult> = results.iter().collect();
        ordered.sort_by_key(|r| grid.coordinates(&r.cell));
        let mut rows = Vec::new();
        let mut cols = Vec::new();
        let mut col_keys: Vec<([usize; 3], Column)> = Vec::new();
        let mut row_keys: Vec<(usize, Sampling)> = Vec::new();
        for r in &ordered {
            let c = grid.coordinates(&r.cell);
            let col = (r.cell.imputation, r.cell.binning, r.cell.model);
            if !col_keys.iter().any(|(_, k)| *k == col) {
                col_keys.push(([c[0], c[1], c[3]], col));
            }
            if !row_keys.iter().any(|(_, s)| *s == r.cell.sampling) {
                row_keys.push((c[2], r.cell.sampling));
            }
        }
        col_keys.sort_by_key(|(k, _)| *k);
        row_keys.sort_by_key(|(k, _)| *k);
        cols.extend(col_keys.into_iter().map(|(_, c)| c));
        rows.extend(row_keys.into_iter().map(|(_, s)| s));
        Matrix { rows, cols, results }
    }

    fn find(&self, s: Sampling, c: Column) -> Option<&'a CellResult> {
        self.results
            .iter()
            .find(|r| r.cell.sampling == s && (r.cell.imputation, r.cell.binning, r.cell.model) == c)
    }

    /// Cell text and whether it is flagged best.
    fn cell(&self, s: Sampling, c: Column, m: usize) -> (String, bool) {
        match self.find(s, c) {
            Some(CellResult { report: Some(rep), best, .. }) => (format!("{:.2}", metric(rep, m)), *best),
            Some(CellResult { failure: Some(f), .. }) => (format!("FAILED({})", f.stage), false),
            _ => ("n/a".to_string(), false),
        }
    }
}

fn col_label(c: &Column) -> String {
    format!("{} / {} / {}", c.0.as_str(), c.1.as_str(), c.2.as_str())
}

fn protocol(grid: &ExperimentGrid) -> String {
    let s = &grid.split;
    let train = (s.train_frac * 100.0).round();
    format!(
        "{} {}/{} train/test split, seed {}; classification threshold {}; metrics are test-partition percentages",
        if s.stratified { "stratified" } else { "random" },
        train,
        100.0 - train,
        s.seed,
        DEFAULT_THRESHOLD
    )
}

/// Lineage lines shared by both formats: one per group, then failures.
fn lineage_lines(results: &[CellResult]) -> Vec<String> {
    let mut out = Vec::new();
    let mut seen = Vec::new();
    for r in results {
        let g = r.cell.group_id();
        if r.failure.as_ref().is_some_and(|f| f.stage != "resample" && f.stage != "train" && f.stage != "evaluate") {
            continue;
        }
        if seen.contains(&g) {
            continue;
        }
        seen.push(g.clone());
        let l = &r.lineage;
        let none = |v: &[String]| if v.is_empty() { "none".to_string() } else { v.join(" ") };
        out.push(format!(
            "group {g}: train rows {}, test rows {}; dropped: {}; iv kept: {}; selected: {}",
            l.train_rows,
            l.test_rows,
            none(&l.dropped),
            none(&l.iv_kept),
            none(&l.features)
        ));
    }
    for r in results {
        if let Some(f) = &r.failure {
            out.push(format!("failed {}: {}: {}", r.cell.id(), f.stage, f.message.replace('\n', " ")));
        } else if r.lineage.synthetic_rows > 0 {
            out.push(format!(
                "cell {}: {} training rows after resampling ({} added)",
                r.cell.id(),
                r.lineage.resampled_rows,
                r.lineage.synthetic_rows
            ));
        }
    }
    out
}

/// Renders `results` as a metrics matrix with a lineage appendix. The output
/// depends only on the results and the grid, never on timing.
pub fn emit_report(results: &[CellResult], grid: &ExperimentGrid, format: ReportFormat) -> Result<String> {
    if results.is_empty() {
        return Err(Error::Data("no results to report".into()));
    }
    let mut ordered = results.to_vec();
    ordered.sort_by_key(|r| grid.coordinates(&r.cell));
    let m = Matrix::new(&ordered, grid);
    let mut s = String::new();
    match format {
        ReportFormat::Markdown => {
            let _ = writeln!(s, "# Experiment results: {}\n", grid.target.model_kind.as_str());
            let _ = writeln!(s, "Protocol: {}.", protocol(grid));
            let _ = writeln!(
                s,
                "Bold marks the best model of each sampling row and imputation/binning block (AUC, then F-score, then accuracy).\n"
            );
            s.push_str("| Sampling | Metric |");
            for c in &m.cols {
                let _ = write!(s, " {} |", col_label(c));
            }
            s.push_str("\n|---|---|");
            for _ in &m.cols {
                s.push_str("---:|");
            }
            s.push('\n');
            for &row in &m.rows {
                for (i, (name, _)) in METRICS.iter().enumerate() {
                    let label = if i == 0 { row.as_str() } else { "" };
                    let _ = write!(s, "| {label} | {name} |");
                    for &c in &m.cols {
                        let (text, best) = m.cell(row, c, i);
                        if best {
                            let _ = write!(s, " **{text}** |");
                        } else {
                            let _ = write!(s, " {text} |");
                        }
                    }
                    s.push('\n');
                }
            }
            s.push_str("\n## Lineage\n\n```text\n");
            s.push_str(&grid.to_config_text());
            s.push_str("```\n\n");
            for line in lineage_lines(&ordered) {
                let _ = writeln!(s, "- {line}");
            }
        }
        ReportFormat::Csv => {
            let _ = writeln!(s, "# mailrisk-report 1");
            let _ = writeln!(s, "# target {}; {}", grid.target.model_kind.as_str(), protocol(grid));
            let _ = writeln!(s, "# a trailing * marks the best cell of its block");
            s.push_str("sampling,metric");
            for c in &m.cols {
                let _ = write!(s, ",{}", col_label(c).replace(" / ", "/"));
            }
            s.push('\n');
            for &row in &m.rows {
                for (i, (_, key)) in METRICS.iter().enumerate() {
                    let _ = write!(s, "{},{key}", row.as_str());
                    for &c in &m.cols {
                        let (text, best) = m.cell(row, c, i);
                        let _ = write!(s, ",{text}{}", if best { "*" } else { "" });
                    }
                    s.push('\n');
                }
            }
            s.push_str("# lineage\n");
            for line in grid.to_config_text().lines() {
                let _ = writeln!(s, "# config {line}");
            }
            for line in lineage_lines(&ordered) {
                let _ = writeln!(s, "# {line}");
            }
        }
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluate::EvalReport;
    use crate::experiment::{mark_best, CellFailure, CellKey, CellLineage};

    fn result(cell: CellKey, auc_hint: f64) -> CellResult {
        let scores = [0.9, auc_hint, 0.4, 0.1];
        let report = EvalReport::new(&scores, &[1, 0, 1, 0]).unwrap();
        CellResult {
            cell,
            report: Some(report),
            failure: None,
            lineage: CellLineage::default(),
            model_path: None,
            best: false,
            wall_time_ms: 7,
        }
    }

    #[test]
    fn full_grid_shape_and_flags() {
        let grid = ExperimentGrid::default();
        let mut results: Vec<CellResult> = grid
            .cells()
            .into_iter()
            .enumerate()
            .map(|(i, k)| result(k, if i % 2 == 0 { 0.95 } else { 0.2 }))
            .collect();
        assert_eq!(results.len(), 24);
        mark_best(&mut results);
        assert_eq!(results.iter().filter(|r| r.best).count(), 12);

        let md = emit_report(&results, &grid, ReportFormat::Markdown).unwrap();
        let header = md.lines().find(|l| l.starts_with("| Sampling")).unwrap();
        assert_eq!(header.matches(" / ").count(), 16);
        let body: Vec<&str> = md.lines().filter(|l| l.starts_with("| ") && !l.starts_with("| Sampling")).collect();
        assert_eq!(body.len(), 15);
        assert_eq!(md.matches("**").count(), 2 * 12 * 5);

        let csv = emit_report(&results, &grid, ReportFormat::Csv).unwrap();
        let rows: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(rows.len(), 16);
        assert!(rows.iter().all(|r| r.split(',').count() == 10));
    }

    #[test]
    fn single_and_failed_cells() {
        let grid = ExperimentGrid::default();
        let mut one = vec![result(grid.cells()[0], 0.3)];
        mark_best(&mut one);
        let md = emit_report(&one, &grid, ReportFormat::Markdown).unwrap();
        assert!(md.contains("| median / quantile / logreg |"));
        assert_eq!(md.matches("**").count(), 10);

        let mut bad = result(grid.cells()[1], 0.3);
        bad.report = None;
        bad.failure = Some(CellFailure {
            stage: "select".into(),
            message: "boom".into(),
        });
        one.push(bad);
        mark_best(&mut one);
        let csv = emit_report(&one, &grid, ReportFormat::Csv).unwrap();
        assert!(csv.contains("FAILED(select)"));
        assert!(csv.contains("failed median-quantile-none-gbt: select: boom"));
        assert!(emit_report(&[], &grid, ReportFormat::Csv).is_err());
    }

    #[test]
    fn ties_fall_to_f1_then_order() {
        let grid = ExperimentGrid::default();
        let cells = grid.cells();
        let mut rs = vec![result(cells[0], 0.3), result(cells[1], 0.3)];
        mark_best(&mut rs);
        assert!(rs[0].best && !rs[1].best);
        rs[1].report.as_mut().unwrap().f1 += 1.0;
        mark_best(&mut rs);
        assert!(!rs[0].best && rs[1].best);
    }
}
