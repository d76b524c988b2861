//! Cross-product experiment runner, report writer and synthetic data.

mod config;
mod pipeline;
mod report;
mod runner;
mod synth;

use serde::{Deserialize, Serialize};

pub use config::{parse_config, CONFIG_HEADER};
pub use pipeline::{cleanse_for, fit_group, stratified_split, Cleansed, GroupModels, Split, StageError};
pub use report::{emit_report, ReportFormat};
pub use runner::{mark_best, run_grid};
pub use synth::{generate_synthetic, Link, SynthSpec};

use crate::binning::{BinMode, BinningConfig};
use crate::cleanse::CodedValueRule;
use crate::error::{Error, Result};
use crate::evaluate::EvalReport;
use crate::impute::ImputeStrategy;
use crate::learners::{Hyperparams, Learner};
use crate::resample::Sampling;
use crate::table::{ModelKind, TargetSpec};

/// Binning axis of the grid. `None` feeds imputed raw values to the models;
/// the IV screen still runs on quantile bins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BinningAxis {
    Quantile,
    Categorical,
    None,
}

impl BinningAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            BinningAxis::Quantile => "quantile",
            BinningAxis::Categorical => "categorical",
            BinningAxis::None => "none",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "quantile" => Some(BinningAxis::Quantile),
            "categorical" => Some(BinningAxis::Categorical),
            "none" => Some(BinningAxis::None),
            _ => None,
        }
    }

    /// Prebinning mode used for the fitted bins.
    pub fn mode(self) -> BinMode {
        match self {
            BinningAxis::Categorical => BinMode::Categorical,
            BinningAxis::Quantile | BinningAxis::None => BinMode::Quantile,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub stratified: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub missing: f64,
    pub iv: f64,
    pub vif: f64,
    pub pov: f64,
    /// Second-eigenvalue limit for cluster splitting.
    pub split_eigenvalue: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            missing: 0.30,
            iv: 0.1,
            vif: 3.0,
            pov: 0.99,
            split_eigenvalue: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentGrid {
    pub target: TargetSpec,
    pub goodbad_column: String,
    pub imputations: Vec<ImputeStrategy>,
    pub binnings: Vec<BinningAxis>,
    pub samplings: Vec<Sampling>,
    pub models: Vec<Learner>,
    pub split: SplitSpec,
    pub hyperparams: Hyperparams,
    pub thresholds: Thresholds,
    /// Prebin and merge settings; the mode comes from the binning axis.
    pub binning: BinningConfig,
    pub coded: CodedValueRule,
    pub policy_drops: Vec<String>,
    pub smote_k: usize,
    pub target_ratio: f64,
}

impl Default for ExperimentGrid {
    fn default() -> Self {
        ExperimentGrid {
            target: TargetSpec::new(ModelKind::Responders),
            goodbad_column: "goodbad".into(),
            imputations: vec![ImputeStrategy::Median, ImputeStrategy::CustomBins],
            binnings: vec![BinningAxis::Quantile, BinningAxis::Categorical],
            samplings: vec![Sampling::None, Sampling::RandomOver, Sampling::Smote],
            models: vec![Learner::LogReg, Learner::Gbt],
            split: SplitSpec {
                train_frac: 0.8,
                stratified: true,
                seed: 42,
            },
            hyperparams: Hyperparams::default(),
            thresholds: Thresholds::default(),
            binning: BinningConfig::default(),
            coded: CodedValueRule::default(),
            policy_drops: Vec::new(),
            smote_k: 5,
            target_ratio: 1.0,
        }
    }
}

impl ExperimentGrid {
    pub fn validate(&self) -> Result<()> {
        if self.imputations.is_empty() || self.binnings.is_empty() || self.samplings.is_empty() || self.models.is_empty() {
            return Err(Error::Config("every grid axis needs at least one value".into()));
        }
        let s = &self.split;
        if !(s.train_frac > 0.0 && s.train_frac < 1.0) {
            return Err(Error::Config(format!("train_frac {} is not in (0, 1)", s.train_frac)));
        }
        let t = &self.thresholds;
        if !(t.missing > 0.0 && t.missing <= 1.0) || !(t.pov > 0.0 && t.pov <= 1.0) || !(t.vif >= 1.0) || !(t.iv >= 0.0) {
            return Err(Error::Config("thresholds out of range".into()));
        }
        if self.smote_k == 0 || !(self.target_ratio > 0.0 && self.target_ratio <= 1.0) {
            return Err(Error::Config("smote_k must be positive and target_ratio in (0, 1]".into()));
        }
        Ok(())
    }

    /// Every cell in coordinate order.
    pub fn cells(&self) -> Vec<CellKey> {
        let mut out = Vec::new();
        for &imputation in &self.imputations {
            for &binning in &self.binnings {
                for &sampling in &self.samplings {
                    for &model in &self.models {
                        out.push(CellKey {
                            imputation,
                            binning,
                            sampling,
                            model,
                        });
                    }
                }
            }
        }
        out
    }

    /// Position of `key` along each axis, for ordering.
    pub fn coordinates(&self, key: &CellKey) -> [usize; 4] {
        let pos = |i: Option<usize>| i.unwrap_or(usize::MAX);
        [
            pos(self.imputations.iter().position(|&v| v == key.imputation)),
            pos(self.binnings.iter().position(|&v| v == key.binning)),
            pos(self.samplings.iter().position(|&v| v == key.sampling)),
            pos(self.models.iter().position(|&v| v == key.model)),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CellKey {
    pub imputation: ImputeStrategy,
    pub binning: BinningAxis,
    pub sampling: Sampling,
    pub model: Learner,
}

impl CellKey {
    /// Preprocessing part of the id, shared by both models.
    pub fn block_id(&self) -> String {
        format!("{}-{}-{}", self.imputation.as_str(), self.binning.as_str(), self.sampling.as_str())
    }

    pub fn group_id(&self) -> String {
        format!("{}-{}", self.imputation.as_str(), self.binning.as_str())
    }

    pub fn id(&self) -> String {
        format!("{}-{}", self.block_id(), self.model.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub stage: String,
    pub message: String,
}

/// What a cell saw upstream of its model.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CellLineage {
    pub dropped: Vec<String>,
    pub iv_kept: Vec<String>,
    pub features: Vec<String>,
    pub train_rows: usize,
    pub test_rows: usize,
    pub resampled_rows: usize,
    pub synthetic_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub cell: CellKey,
    pub report: Option<EvalReport>,
    pub failure: Option<CellFailure>,
    pub lineage: CellLineage,
    /// Relative to the output directory.
    pub model_path: Option<String>,
    pub best: bool,
    /// Excluded from every emitted document so reruns stay byte-identical.
    #[serde(skip)]
    pub wall_time_ms: u128,
}
