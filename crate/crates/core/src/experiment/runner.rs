use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;

use super::pipeline::{cleanse_for, fit_group, stratified_split, AtStage, Cleansed, GroupModels, Split, StageError};
use super::report::{emit_report, ReportFormat};
use super::{BinningAxis, CellFailure, CellKey, CellLineage, CellResult, ExperimentGrid};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::evaluate::{render_chart, ChartKind, EvalReport};
use crate::impute::ImputeStrategy;
use crate::learners::train;
use crate::profile::profiles_csv;
use crate::resample::{resample, ResamplePlan, Resampled, TrainingSet};
use crate::table::Table;

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Runs every cell of `grid` on `data`.
///
/// Cell failures are recorded in the results, never returned as errors.
/// With `out_dir`, per-group fitted models, per-cell models and charts, the
/// reports and `results.json` are written there. Output order follows the
/// grid axes regardless of which cells finish first.
pub fn run_grid(grid: &ExperimentGrid, data: &Table, out_dir: Option<&Path>) -> Result<Vec<CellResult>> {
    grid.validate()?;
    data.require(&grid.goodbad_column)?;
    let mut groups = Vec::new();
    for &imp in &grid.imputations {
        for &bin in &grid.binnings {
            groups.push((imp, bin));
        }
    }
    let per_group = groups
        .par_iter()
        .map(|&(imp, bin)| run_group(grid, data, imp, bin, out_dir))
        .collect::<Result<Vec<_>>>()?;
    let mut results: Vec<CellResult> = per_group.into_iter().flatten().collect();
    results.sort_by_key(|r| grid.coordinates(&r.cell));
    mark_best(&mut results);

    let failed = results.iter().filter(|r| r.failure.is_some()).count();
    info!("grid finished: {} cells, {failed} failed", results.len());
    if let Some(dir) = out_dir {
        write(&dir.join("config.txt"), &grid.to_config_text())?;
        write(&dir.join("report.md"), &emit_report(&results, grid, ReportFormat::Markdown)?)?;
        write(&dir.join("report.csv"), &emit_report(&results, grid, ReportFormat::Csv)?)?;
        let json = serde_json::to_string_pretty(&results).map_err(|e| Error::Data(e.to_string()))?;
        write(&dir.join("results.json"), &json)?;
        let mut timings = String::from("cell,wall_ms\n");
        for r in &results {
            let _ = writeln!(timings, "{},{}", r.cell.id(), r.wall_time_ms);
        }
        write(&dir.join("timings.csv"), &timings)?;
    }
    Ok(results)
}

/// Flags one cell per (sampling, imputation, binning) block: highest AUC,
/// then F1, then accuracy. Remaining ties go to the earlier cell.
pub fn mark_best(results: &mut [CellResult]) {
    for r in results.iter_mut() {
        r.best = false;
    }
    let mut blocks: Vec<String> = results.iter().map(|r| r.cell.block_id()).collect();
    blocks.sort();
    blocks.dedup();
    for block in blocks {
        let mut best: Option<usize> = None;
        for (i, r) in results.iter().enumerate() {
            let Some(rep) = r.report.as_ref().filter(|_| r.cell.block_id() == block) else {
                continue;
            };
            let better = match best.and_then(|b| results[b].report.as_ref()) {
                None => true,
                Some(cur) => {
                    let key = |e: &EvalReport| [e.auc, e.f1, e.accuracy];
                    key(rep)
                        .iter()
                        .zip(key(cur).iter())
                        .map(|(a, b)| a.total_cmp(b))
                        .find(|o| o.is_ne())
                        .is_some_and(|o| o.is_gt())
                }
            };
            if better {
                best = Some(i);
            }
        }
        if let Some(b) = best {
            results[b].best = true;
        }
    }
}

fn failed(cell: CellKey, err: &StageError, lineage: CellLineage) -> CellResult {
    let first = err.to_string();
    warn!("cell {} failed at {}", cell.id(), first.lines().next().unwrap_or_default());
    CellResult {
        cell,
        report: None,
        failure: Some(CellFailure {
            stage: err.stage.to_string(),
            message: err.error.to_string(),
        }),
        lineage,
        model_path: None,
        best: false,
        wall_time_ms: 0,
    }
}

fn prepare(
    grid: &ExperimentGrid,
    data: &Table,
    imp: ImputeStrategy,
    bin: BinningAxis,
) -> std::result::Result<(Cleansed, Split, std::result::Result<GroupModels, StageError>), StageError> {
    let cleansed = cleanse_for(grid, data, imp)?;
    let labels = cleansed.table.labels().at("split")?;
    let s = &grid.split;
    let split = stratified_split(&labels, s.train_frac, s.stratified, s.seed).at("split")?;
    let models = fit_group(grid, &cleansed, &split, bin);
    Ok((cleansed, split, models))
}

fn rows_text(rows: &[usize]) -> String {
    let mut s = String::new();
    for r in rows {
        let _ = writeln!(s, "{r}");
    }
    s
}

fn run_group(
    grid: &ExperimentGrid,
    data: &Table,
    imp: ImputeStrategy,
    bin: BinningAxis,
    out_dir: Option<&Path>,
) -> Result<Vec<CellResult>> {
    let keys: Vec<CellKey> = grid
        .cells()
        .into_iter()
        .filter(|k| k.imputation == imp && k.binning == bin)
        .collect();
    let gdir = out_dir.map(|d| d.join("groups").join(keys[0].group_id()));

    let (cleansed, split, models) = match prepare(grid, data, imp, bin) {
        Ok(v) => v,
        Err(e) => {
            if let Some(g) = &gdir {
                write(&g.join("error.txt"), &format!("{e}\n"))?;
            }
            return Ok(keys.into_iter().map(|k| failed(k, &e, CellLineage::default())).collect());
        }
    };
    let mut lineage = CellLineage {
        dropped: cleansed
            .drops
            .entries
            .iter()
            .map(|d| format!("{} ({})", d.column, d.reason.as_str()))
            .collect(),
        train_rows: split.train.len(),
        test_rows: split.test.len(),
        ..Default::default()
    };
    if let Some(g) = &gdir {
        write(&g.join("train_rows.txt"), &rows_text(&split.train))?;
        write(&g.join("test_rows.txt"), &rows_text(&split.test))?;
        write(&g.join("drops.csv"), &cleansed.drops.to_csv())?;
    }
    let gm = match models {
        Ok(m) => m,
        Err(e) => {
            if let Some(g) = &gdir {
                write(&g.join("error.txt"), &format!("{e}\n"))?;
            }
            return Ok(keys.into_iter().map(|k| failed(k, &e, lineage.clone())).collect());
        }
    };
    lineage.dropped.extend(gm.profile_drops.iter().map(|n| format!("{n} (profile)")));
    lineage.iv_kept = gm.iv_kept.clone();
    lineage.features = gm.selection.final_variables.clone();
    if let Some(g) = &gdir {
        write(&g.join("imputation.txt"), &gm.imputation.to_manifest())?;
        write(&g.join("profiles.csv"), &profiles_csv(&gm.profiles))?;
        write(&g.join("binning.txt"), &gm.binning.to_manifest())?;
        write(&g.join("iv.csv"), &gm.binning.iv_table())?;
        write(&g.join("selection.csv"), &gm.selection.to_csv())?;
        if let Some(root) = out_dir {
            write(
                &root.join("charts").join(format!("selection_{}.pov.svg", keys[0].group_id())),
                &gm.selection.pov_svg()?,
            )?;
        }
    }

    let train_set = TrainingSet::new(gm.train.clone());
    let per_sampling = grid
        .samplings
        .par_iter()
        .map(|&sampling| {
            let cells: Vec<CellKey> = keys.iter().copied().filter(|k| k.sampling == sampling).collect();
            let plan = ResamplePlan {
                k_neighbors: grid.smote_k,
                target_ratio: grid.target_ratio,
                ..ResamplePlan::new(sampling, grid.split.seed)
            };
            let resampled = match resample(&train_set, &plan).at("resample") {
                Ok(r) => r,
                Err(e) => return Ok(cells.into_iter().map(|k| failed(k, &e, lineage.clone())).collect()),
            };
            if let Some(g) = &gdir {
                write_resampled(&g.join(sampling.as_str()), &resampled)?;
            }
            let mut lin = lineage.clone();
            lin.resampled_rows = resampled.data.n_rows();
            lin.synthetic_rows = resampled.data.n_rows() - gm.train.n_rows();
            cells
                .par_iter()
                .map(|&k| run_cell(grid, k, &resampled.data, &gm.test, lin.clone(), out_dir))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<Vec<_>>>>()?;
    Ok(per_sampling.into_iter().flatten().collect())
}

fn write_resampled(dir: &Path, r: &Resampled) -> Result<()> {
    let [zeros, ones] = r.data.class_counts();
    write(&dir.join("counts.txt"), &format!("label0 {zeros}\nlabel1 {ones}\n"))?;
    if !r.origins.is_empty() {
        let mut s = String::from("a,b,u\n");
        for o in &r.origins {
            let _ = writeln!(s, "{},{},{}", o.a, o.b, o.u);
        }
        write(&dir.join("origins.csv"), &s)?;
    }
    Ok(())
}

fn run_cell(
    grid: &ExperimentGrid,
    cell: CellKey,
    train_data: &Dataset,
    test: &Dataset,
    lineage: CellLineage,
    out_dir: Option<&Path>,
) -> Result<CellResult> {
    let start = Instant::now();
    let outcome = train(cell.model, train_data, &grid.hyperparams)
        .at("train")
        .and_then(|m| {
            let scores = m.predict_dataset(test).at("evaluate")?;
            let rep = EvalReport::new(&scores, test.labels()).at("evaluate")?;
            Ok((m, rep))
        });
    let (model, report) = match outcome {
        Ok(v) => v,
        Err(e) => return Ok(failed(cell, &e, lineage)),
    };
    let wall_time_ms = start.elapsed().as_millis();
    let model_path = format!("cells/{}/model.txt", cell.id());
    if let Some(dir) = out_dir {
        write(&dir.join(&model_path), &model.to_text())?;
        write(&dir.join("cells").join(cell.id()).join("eval.md"), &report.to_markdown())?;
        let model_name = cell.model.as_str();
        let block = cell.block_id();
        for (kind, curve) in [(ChartKind::Roc, report.roc_points.clone()), (ChartKind::Gain, report.gain_curve())] {
            let title = format!("{model_name} {block} {}", kind.as_str());
            let svg = render_chart(&curve, kind, &title)?;
            write(&dir.join("charts").join(format!("{model_name}_{block}.{}.svg", kind.as_str())), &svg)?;
        }
    }
    Ok(CellResult {
        cell,
        report: Some(report),
        failure: None,
        lineage,
        model_path: Some(model_path),
        best: false,
        wall_time_ms,
    })
}
