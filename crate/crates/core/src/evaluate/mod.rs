//! Threshold metrics, ROC/AUC, gain/lift tables and their charts.

mod chart;

use std::fmt::Write as _;

use log::warn;
use serde::{Deserialize, Serialize};

pub use chart::{render_chart, ChartKind};

use crate::error::{Error, Result};

pub const DEFAULT_THRESHOLD: f64 = 0.5;
pub const DEFAULT_BUCKETS: usize = 10;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl Confusion {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// Threshold metrics, all in percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdMetrics {
    pub confusion: Confusion,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn check_inputs(scores: &[f64], y: &[u8]) -> Result<()> {
    if scores.len() != y.len() {
        return Err(Error::Data(format!("{} scores for {} labels", scores.len(), y.len())));
    }
    if scores.is_empty() {
        return Err(Error::Data("no scores to evaluate".into()));
    }
    if let Some(l) = y.iter().find(|&&l| l > 1) {
        return Err(Error::Data(format!("label {l} is not 0/1")));
    }
    if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::Data(format!("score {s} is not finite")));
    }
    Ok(())
}

fn class_totals(y: &[u8]) -> Result<(u64, u64)> {
    let pos = y.iter().filter(|&&l| l == 1).count() as u64;
    let neg = y.len() as u64 - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Data("both classes must be present".into()));
    }
    Ok((pos, neg))
}

/// Predicts 1 iff `score >= threshold`. Precision is 0 when nothing is
/// predicted positive.
pub fn confusion_metrics(scores: &[f64], y: &[u8], threshold: f64) -> Result<ThresholdMetrics> {
    check_inputs(scores, y)?;
    let mut c = Confusion::default();
    for (&s, &l) in scores.iter().zip(y) {
        match (s >= threshold, l == 1) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    if c.tp + c.fp == 0 {
        warn!("no positive predictions at threshold {threshold}; precision set to 0");
    }
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(ThresholdMetrics {
        confusion: c,
        accuracy: 100.0 * ratio(c.tp + c.tn, c.total()),
        precision: 100.0 * precision,
        recall: 100.0 * recall,
        f1: 100.0 * f1,
    })
}

/// Score indices sorted by descending score, ties in original order.
fn ranked(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    idx
}

/// ROC points from `(0,0)` to `(1,1)` and the area under them as a fraction.
///
/// Equal scores form one step, so tied positive/negative pairs earn half
/// credit. The area is accumulated in integers and divided once.
pub fn roc_auc(scores: &[f64], y: &[u8]) -> Result<(Vec<(f64, f64)>, f64)> {
    check_inputs(scores, y)?;
    let (pos, neg) = class_totals(y)?;
    let order = ranked(scores);
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut twice_area: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let (tp0, fp0) = (tp, fp);
        while i < order.len() && scores[order[i]] == s {
            if y[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        twice_area += (fp - fp0) as u128 * (tp + tp0) as u128;
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
    }
    let auc = twice_area as f64 / (2 * pos as u128 * neg as u128) as f64;
    Ok((points, auc))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainRow {
    pub bucket: usize,
    pub population_frac: f64,
    pub capture_frac: f64,
    pub lift: f64,
}

/// Cumulative gain and lift over `n_buckets` near-equal buckets of the
/// descending score order.
pub fn gain_lift(scores: &[f64], y: &[u8], n_buckets: usize) -> Result<Vec<GainRow>> {
    check_inputs(scores, y)?;
    let (pos, _) = class_totals(y)?;
    let n = scores.len();
    if n_buckets == 0 || n_buckets > n {
        return Err(Error::Config(format!("{n_buckets} buckets for {n} rows")));
    }
    let order = ranked(scores);
    let mut rows = Vec::with_capacity(n_buckets);
    let mut captured = 0u64;
    let mut start = 0;
    for k in 1..=n_buckets {
        let end = k * n / n_buckets;
        captured += order[start..end].iter().filter(|&&i| y[i] == 1).count() as u64;
        start = end;
        let population_frac = end as f64 / n as f64;
        let capture_frac = captured as f64 / pos as f64;
        rows.push(GainRow {
            bucket: k,
            population_frac,
            capture_frac,
            lift: capture_frac / population_frac,
        });
    }
    Ok(rows)
}

/// Test-set evaluation of one model. Metric fields are percentages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub threshold: f64,
    pub confusion: Confusion,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub auc: f64,
    pub roc_points: Vec<(f64, f64)>,
    pub gain_lift: Vec<GainRow>,
}

impl EvalReport {
    pub fn new(scores: &[f64], y: &[u8]) -> Result<Self> {
        let m = confusion_metrics(scores, y, DEFAULT_THRESHOLD)?;
        let (roc_points, auc) = roc_auc(scores, y)?;
        let gain_lift = gain_lift(scores, y, DEFAULT_BUCKETS.min(scores.len()))?;
        Ok(EvalReport {
            threshold: DEFAULT_THRESHOLD,
            confusion: m.confusion,
            accuracy: m.accuracy,
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
            auc: 100.0 * auc,
            roc_points,
            gain_lift,
        })
    }

    /// Gain curve including the origin.
    pub fn gain_curve(&self) -> Vec<(f64, f64)> {
        std::iter::once((0.0, 0.0))
            .chain(self.gain_lift.iter().map(|r| (r.population_frac, r.capture_frac)))
            .collect()
    }

    pub const CSV_HEADER: &'static str = "accuracy,precision,recall,f1,auc,tp,fp,tn,fn";

    pub fn csv_fields(&self) -> String {
        let c = &self.confusion;
        format!(
            "{:.2},{:.2},{:.2},{:.2},{:.2},{},{},{},{}",
            self.accuracy, self.precision, self.recall, self.f1, self.auc, c.tp, c.fp, c.tn, c.fn_
        )
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::from("| metric | value |\n|---|---|\n");
        for (name, v) in [
            ("Accuracy", self.accuracy),
            ("Precision", self.precision),
            ("Recall", self.recall),
            ("F-Score", self.f1),
            ("AUC", self.auc),
        ] {
            let _ = writeln!(s, "| {name} | {v:.2} |");
        }
        let _ = writeln!(s, "\nThreshold {}.\n", self.threshold);
        s.push_str("| decile | population | captured | lift |\n|---|---|---|---|\n");
        for r in &self.gain_lift {
            let _ = writeln!(
                s,
                "| {} | {:.2} | {:.2} | {:.3} |",
                r.bucket,
                100.0 * r.population_frac,
                100.0 * r.capture_frac,
                r.lift
            );
        }
        s
    }
}
