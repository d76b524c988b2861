//! Variable clustering, representative picking, PoV cut-off and VIF pruning.

use std::fmt::Write as _;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluate::{render_chart, ChartKind};
use crate::linalg::{correlation_matrix, design_with_intercept, eigen_sym, least_squares, SymMatrix};
use crate::table::Table;

pub const MAX_REASSIGN_PASSES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectConfig {
    pub split_threshold: f64,
    pub coverage: f64,
    pub vif_threshold: f64,
}

impl Default for SelectConfig {
    fn default() -> Self {
        SelectConfig {
            split_threshold: 1.0,
            coverage: 0.99,
            vif_threshold: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarCluster {
    /// Sorted by name.
    pub members: Vec<String>,
    /// Correlation of each member with the cluster's first component.
    pub first_pc_loadings: Vec<f64>,
    /// First eigenvalue of the members' correlation matrix.
    pub explained: f64,
}

/// First eigenpair of the sub-correlation matrix on `members`.
fn first_pc(corr: &SymMatrix, members: &[usize]) -> Result<(f64, Vec<f64>)> {
    if members.len() == 1 {
        return Ok((1.0, vec![1.0]));
    }
    let e = eigen_sym(&corr.submatrix(members))?;
    Ok((e.values[0], e.vector(0)))
}

/// Correlation of standardized variable `i` with the component `weights`
/// over `members` whose variance is `lambda`.
fn corr_with_pc(corr: &SymMatrix, i: usize, members: &[usize], weights: &[f64], lambda: f64) -> f64 {
    let cov: f64 = members.iter().zip(weights).map(|(&j, w)| w * corr.get(i, j)).sum();
    cov / lambda.sqrt()
}

fn second_eigenvalue(corr: &SymMatrix, members: &[usize]) -> Result<Option<f64>> {
    if members.len() < 2 {
        return Ok(None);
    }
    Ok(Some(eigen_sym(&corr.submatrix(members))?.values[1]))
}

/// Splits `members` along their top two components, then moves variables
/// between the halves until each sits with the component it correlates with
/// more.
fn split(corr: &SymMatrix, members: &[usize], names: &[String]) -> Result<(Vec<usize>, Vec<usize>)> {
    let e = eigen_sym(&corr.submatrix(members))?;
    let (v1, v2) = (e.vector(0), e.vector(1));
    let (l1, l2) = (e.values[0], e.values[1]);
    let mut side: Vec<bool> = (0..members.len())
        .map(|k| v2[k] * v2[k] * l2 > v1[k] * v1[k] * l1)
        .collect();
    // keep both halves non-empty
    for target in [false, true] {
        if side.iter().all(|&s| s != target) {
            let lean = |k: usize| {
                let d = v2[k] * v2[k] * l2 - v1[k] * v1[k] * l1;
                if target { d } else { -d }
            };
            let mut best = 0;
            for k in 1..members.len() {
                if lean(k) > lean(best) {
                    best = k;
                }
            }
            side[best] = target;
        }
    }

    let mut order: Vec<usize> = (0..members.len()).collect();
    order.sort_by(|&a, &b| names[members[a]].cmp(&names[members[b]]));
    for _ in 0..MAX_REASSIGN_PASSES {
        let a: Vec<usize> = (0..members.len()).filter(|&k| !side[k]).map(|k| members[k]).collect();
        let b: Vec<usize> = (0..members.len()).filter(|&k| side[k]).map(|k| members[k]).collect();
        let (la, wa) = first_pc(corr, &a)?;
        let (lb, wb) = first_pc(corr, &b)?;
        let mut moved = false;
        let (mut n_a, mut n_b) = (a.len(), b.len());
        for &k in &order {
            let i = members[k];
            let ra = corr_with_pc(corr, i, &a, &wa, la).powi(2);
            let rb = corr_with_pc(corr, i, &b, &wb, lb).powi(2);
            let want = if side[k] { ra > rb } else { rb > ra };
            let donor = if side[k] { &mut n_b } else { &mut n_a };
            if want && *donor > 1 {
                *donor -= 1;
                if side[k] { n_a += 1 } else { n_b += 1 }
                side[k] = !side[k];
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
    let a = (0..members.len()).filter(|&k| !side[k]).map(|k| members[k]).collect();
    let b = (0..members.len()).filter(|&k| side[k]).map(|k| members[k]).collect();
    Ok((a, b))
}

/// Divisive clustering: keep splitting the cluster with the largest second
/// eigenvalue while it exceeds `split_threshold`. Clusters come back ordered
/// by their smallest member name.
pub fn varclus(corr: &SymMatrix, names: &[String], split_threshold: f64) -> Result<Vec<VarCluster>> {
    if names.len() != corr.order() {
        return Err(Error::Data(format!(
            "{} names for a correlation matrix of order {}",
            names.len(),
            corr.order()
        )));
    }
    let sort_by_name = |v: &mut Vec<usize>| v.sort_by(|&a, &b| names[a].cmp(&names[b]));
    let mut all: Vec<usize> = (0..names.len()).collect();
    sort_by_name(&mut all);
    let mut clusters = if all.is_empty() { vec![] } else { vec![all] };

    loop {
        let mut pick: Option<(f64, usize)> = None;
        for (c, members) in clusters.iter().enumerate() {
            let Some(l2) = second_eigenvalue(corr, members)? else { continue };
            if l2 <= split_threshold {
                continue;
            }
            let better = match pick {
                None => true,
                Some((best, bc)) => l2 > best || (l2 == best && names[members[0]] < names[clusters[bc][0]]),
            };
            if better {
                pick = Some((l2, c));
            }
        }
        let Some((_, c)) = pick else { break };
        let members = clusters.swap_remove(c);
        let (mut a, mut b) = split(corr, &members, names)?;
        sort_by_name(&mut a);
        sort_by_name(&mut b);
        clusters.push(a);
        clusters.push(b);
    }

    clusters.sort_by(|a, b| names[a[0]].cmp(&names[b[0]]));
    clusters
        .into_iter()
        .map(|members| {
            let (lambda, w) = first_pc(corr, &members)?;
            let loadings = members.iter().map(|&i| corr_with_pc(corr, i, &members, &w, lambda)).collect();
            Ok(VarCluster {
                members: members.iter().map(|&i| names[i].clone()).collect(),
                first_pc_loadings: loadings,
                explained: lambda,
            })
        })
        .collect()
}

/// `(1 - r2_own) / (1 - r2_next)`; infinite when the next cluster explains
/// the variable completely.
pub fn one_minus_r2_ratio(r2_own: f64, r2_next: f64) -> f64 {
    let num = 1.0 - r2_own;
    let den = 1.0 - r2_next;
    if num <= 0.0 {
        0.0
    } else if den <= 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub name: String,
    pub cluster: usize,
    pub r2_own: f64,
    pub r2_next: f64,
    pub ratio: f64,
}

/// 1-R^2 ratio of every variable against the clusters' first components.
pub fn cluster_ratios(corr: &SymMatrix, names: &[String], clusters: &[VarCluster]) -> Result<Vec<RatioRow>> {
    let index = |n: &String| names.iter().position(|m| m == n).ok_or_else(|| Error::UnknownColumn(n.clone()));
    let mut pcs = Vec::with_capacity(clusters.len());
    for c in clusters {
        let members = c.members.iter().map(index).collect::<Result<Vec<_>>>()?;
        let (lambda, w) = first_pc(corr, &members)?;
        pcs.push((members, w, lambda));
    }
    let mut rows = Vec::new();
    for (ci, c) in clusters.iter().enumerate() {
        for name in &c.members {
            let i = index(name)?;
            let r2 = |k: usize| {
                let (m, w, l) = &pcs[k];
                corr_with_pc(corr, i, m, w, *l).powi(2).min(1.0)
            };
            let r2_own = r2(ci);
            let r2_next = (0..clusters.len()).filter(|&k| k != ci).map(r2).fold(0.0, f64::max);
            let ratio = one_minus_r2_ratio(r2_own, r2_next);
            if ratio.is_infinite() {
                warn!("variable `{name}` is fully explained by another cluster");
            }
            rows.push(RatioRow {
                name: name.clone(),
                cluster: ci,
                r2_own,
                r2_next,
                ratio,
            });
        }
    }
    Ok(rows)
}

/// One member per cluster with the smallest ratio (ties by name), ordered by
/// descending cluster `explained`.
pub fn pick_representatives(clusters: &[VarCluster], ratios: &[RatioRow]) -> Vec<String> {
    let mut picks: Vec<(f64, &str)> = Vec::with_capacity(clusters.len());
    for c in clusters {
        let mut best: Option<&RatioRow> = None;
        for name in &c.members {
            let Some(r) = ratios.iter().find(|r| &r.name == name) else { continue };
            best = match best {
                Some(b) if b.ratio < r.ratio || (b.ratio == r.ratio && b.name <= r.name) => Some(b),
                _ => Some(r),
            };
        }
        if let Some(b) = best {
            picks.push((c.explained, &b.name));
        }
    }
    picks.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(b.1)));
    picks.into_iter().map(|p| p.1.to_string()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PovResult {
    pub eigenvalues: Vec<f64>,
    pub curve: Vec<f64>,
    pub chosen_k: usize,
}

/// Cumulative eigenvalue fractions of a correlation matrix and the smallest
/// prefix reaching `coverage`.
pub fn pov(corr: &SymMatrix, coverage: f64) -> Result<PovResult> {
    if !(coverage > 0.0 && coverage <= 1.0) {
        return Err(Error::Config(format!("coverage {coverage} is not in (0, 1]")));
    }
    let p = corr.order();
    if p == 0 {
        return Err(Error::Data("PoV needs at least one variable".into()));
    }
    let eigenvalues = eigen_sym(corr)?.values;
    let mut curve = Vec::with_capacity(p);
    let mut acc = 0.0;
    for l in &eigenvalues {
        acc += l;
        curve.push(acc / p as f64);
    }
    // rounding can leave a full-coverage curve a hair under 1
    let chosen_k = curve.iter().position(|&c| c >= coverage - 1e-12).map_or(p, |k| k + 1);
    Ok(PovResult {
        eigenvalues,
        curve,
        chosen_k,
    })
}

/// Keeps the first `chosen_k` representatives by PoV on their own correlation
/// matrix.
pub fn select_by_pov(representatives: &[String], corr: &SymMatrix, names: &[String], coverage: f64) -> Result<(Vec<String>, PovResult)> {
    let idx = representatives
        .iter()
        .map(|r| names.iter().position(|n| n == r).ok_or_else(|| Error::UnknownColumn(r.clone())))
        .collect::<Result<Vec<_>>>()?;
    let result = pov(&corr.submatrix(&idx), coverage)?;
    Ok((representatives[..result.chosen_k].to_vec(), result))
}

/// VIF of each column against all the others, in input order. A single
/// column has VIF 1.
pub fn vifs(columns: &[&[f64]]) -> Result<Vec<f64>> {
    if columns.len() < 2 {
        return Ok(vec![1.0; columns.len()]);
    }
    (0..columns.len())
        .into_par_iter()
        .map(|j| {
            let others: Vec<&[f64]> = columns.iter().enumerate().filter(|&(k, _)| k != j).map(|(_, c)| *c).collect();
            let fit = least_squares(&design_with_intercept(&others), columns[j])?;
            Ok(if fit.r_squared >= 1.0 {
                f64::INFINITY
            } else {
                1.0 / (1.0 - fit.r_squared)
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VifResult {
    pub kept: Vec<String>,
    /// `(removed variable, its VIF at removal)` in removal order.
    pub trace: Vec<(String, f64)>,
    pub final_vifs: Vec<f64>,
}

/// Repeatedly drops the variable with the highest VIF while it is strictly
/// above `threshold`. Ties go to the lexicographically smallest name.
pub fn vif_reduce(columns: &[(String, &[f64])], threshold: f64) -> Result<VifResult> {
    let mut live: Vec<usize> = (0..columns.len()).collect();
    let mut trace = Vec::new();
    loop {
        let cols: Vec<&[f64]> = live.iter().map(|&i| columns[i].1).collect();
        let v = vifs(&cols)?;
        let mut worst: Option<usize> = None;
        for k in 0..live.len() {
            let better = match worst {
                None => true,
                Some(w) => v[k] > v[w] || (v[k] == v[w] && columns[live[k]].0 < columns[live[w]].0),
            };
            if better {
                worst = Some(k);
            }
        }
        match worst {
            Some(w) if live.len() > 1 && v[w] > threshold => {
                let name = columns[live[w]].0.clone();
                info!("VIF removes `{name}` ({:.3})", v[w]);
                trace.push((name, v[w]));
                live.remove(w);
            }
            _ => {
                return Ok(VifResult {
                    kept: live.iter().map(|&i| columns[i].0.clone()).collect(),
                    trace,
                    final_vifs: v,
                })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub clusters: Vec<VarCluster>,
    pub ratios: Vec<RatioRow>,
    pub representatives: Vec<String>,
    pub pov_curve: Vec<f64>,
    pub chosen_k: usize,
    /// Variance of each PoV-kept variable explained by the kept components.
    pub communalities: Vec<(String, f64)>,
    pub vif_trace: Vec<(String, f64)>,
    pub final_variables: Vec<String>,
}

/// Clustering, PoV and VIF on the predictors of a fully imputed table.
pub fn select_features(table: &Table, cfg: &SelectConfig) -> Result<SelectionReport> {
    let names = table.predictor_names();
    if names.is_empty() {
        return Err(Error::Data("no predictors to select from".into()));
    }
    let cols: Vec<&[f64]> = table.predictors().map(|c| c.raw_values()).collect();
    let corr = correlation_matrix(&cols, &names)?;
    let clusters = varclus(&corr, &names, cfg.split_threshold)?;
    let ratios = cluster_ratios(&corr, &names, &clusters)?;
    let representatives = pick_representatives(&clusters, &ratios);
    let (chosen, pov_result) = select_by_pov(&representatives, &corr, &names, cfg.coverage)?;

    let idx: Vec<usize> = chosen.iter().map(|c| names.iter().position(|n| n == c).unwrap()).collect();
    let communalities = communalities(&corr.submatrix(&idx), &chosen, pov_result.chosen_k)?;

    let vif_input: Vec<(String, &[f64])> = idx.iter().map(|&i| (names[i].clone(), cols[i])).collect();
    let vif = vif_reduce(&vif_input, cfg.vif_threshold)?;
    info!(
        "selection: {} clusters, {} kept by PoV, {} after VIF",
        clusters.len(),
        chosen.len(),
        vif.kept.len()
    );
    Ok(SelectionReport {
        clusters,
        ratios,
        representatives,
        pov_curve: pov_result.curve,
        chosen_k: pov_result.chosen_k,
        communalities,
        vif_trace: vif.trace,
        final_variables: vif.kept,
    })
}

fn communalities(corr: &SymMatrix, names: &[String], k: usize) -> Result<Vec<(String, f64)>> {
    let e = eigen_sym(corr)?;
    Ok(names
        .iter()
        .enumerate()
        .map(|(i, n)| {
            let h: f64 = (0..k).map(|c| e.values[c].max(0.0) * e.vectors[(i, c)].powi(2)).sum();
            (n.clone(), h)
        })
        .collect())
}

impl SelectionReport {
    /// Sections for clusters, ratios, PoV curve and VIF trace, separated by
    /// `# name` lines.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("# clusters\ncluster,variable,loading,explained\n");
        for (i, c) in self.clusters.iter().enumerate() {
            for (m, l) in c.members.iter().zip(&c.first_pc_loadings) {
                let _ = writeln!(s, "{i},{m},{l:.6},{:.6}", c.explained);
            }
        }
        s.push_str("\n# ratios\nvariable,cluster,r2_own,r2_next,ratio\n");
        for r in &self.ratios {
            let _ = writeln!(s, "{},{},{:.6},{:.6},{:.6}", r.name, r.cluster, r.r2_own, r.r2_next, r.ratio);
        }
        s.push_str("\n# representatives\nrank,variable\n");
        for (i, r) in self.representatives.iter().enumerate() {
            let _ = writeln!(s, "{},{r}", i + 1);
        }
        let _ = write!(s, "\n# pov\nk,cumulative\n");
        for (i, c) in self.pov_curve.iter().enumerate() {
            let _ = writeln!(s, "{},{c:.6}", i + 1);
        }
        let _ = writeln!(s, "chosen,{}", self.chosen_k);
        s.push_str("\n# communalities\nvariable,communality\n");
        for (n, h) in &self.communalities {
            let _ = writeln!(s, "{n},{h:.6}");
        }
        s.push_str("\n# vif\nremoved,vif\n");
        for (n, v) in &self.vif_trace {
            let _ = writeln!(s, "{n},{v:.6}");
        }
        s.push_str("\n# final\nvariable\n");
        for n in &self.final_variables {
            let _ = writeln!(s, "{n}");
        }
        s
    }

    pub fn pov_svg(&self) -> Result<String> {
        let curve: Vec<(f64, f64)> = self.pov_curve.iter().enumerate().map(|(i, &c)| ((i + 1) as f64, c)).collect();
        render_chart(&curve, ChartKind::Pov, "Proportion of variance")
    }
}
