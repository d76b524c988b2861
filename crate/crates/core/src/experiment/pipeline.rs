//! Stages shared by every cell of one imputation x binning group.
//!
//! Cleansing sees all rows, as it only applies fixed rules. Everything
//! fitted after the split (imputation, bins, selection) reads training rows
//! only; the test rows are transformed with the stored models.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{BinningAxis, ExperimentGrid};
use crate::binning::{select_by_iv, BinningConfig, BinningModel};
use crate::cleanse::{detect_all, drop_constant, drop_high_missing, drop_policy, recode_as_missing, DropLog};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::impute::{CustomBinsConfig, ImputationModel, ImputeStrategy};
use crate::profile::{profile, ColumnProfile};
use crate::select::{select_features, SelectConfig, SelectionReport};
use crate::table::{derive_target, Table};

/// An error tagged with the pipeline stage that raised it.
#[derive(Debug)]
pub struct StageError {
    pub stage: &'static str,
    pub error: Error,
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.stage, self.error)
    }
}

impl std::error::Error for StageError {}

pub(crate) trait AtStage<T> {
    fn at(self, stage: &'static str) -> std::result::Result<T, StageError>;
}

impl<T> AtStage<T> for Result<T> {
    fn at(self, stage: &'static str) -> std::result::Result<T, StageError> {
        self.map_err(|error| StageError { stage, error })
    }
}

#[derive(Debug, Clone)]
pub struct Cleansed {
    /// Median arm: codes already missing. Custom arm: codes still in place.
    pub table: Table,
    pub strategy: ImputeStrategy,
    pub drops: DropLog,
    /// Codes seen in the surviving columns.
    pub codes: BTreeSet<i64>,
}

/// Target derivation and the column drop rules for one imputation arm.
///
/// Drop decisions are always made on the recoded view so both arms keep the
/// same columns.
pub fn cleanse_for(grid: &ExperimentGrid, data: &Table, imputation: ImputeStrategy) -> std::result::Result<Cleansed, StageError> {
    let with_target = derive_target(data, &grid.target, &grid.goodbad_column).at("derive_target")?;
    let per_column = detect_all(&with_target, &grid.coded);
    let recoded = recode_as_missing(&with_target, &per_column);

    let policy: BTreeSet<String> = grid.policy_drops.iter().cloned().collect();
    let (t, mut drops) = drop_policy(&recoded, &policy).at("cleanse")?;
    let (t, log) = drop_high_missing(&t, grid.thresholds.missing).at("cleanse")?;
    drops.extend(log);
    let (recoded_kept, log) = drop_constant(&t).at("cleanse")?;
    drops.extend(log);
    if recoded_kept.predictors().next().is_none() {
        return Err(StageError {
            stage: "cleanse",
            error: Error::Data("every predictor was dropped".into()),
        });
    }

    let table = match imputation {
        ImputeStrategy::Median => recoded_kept,
        ImputeStrategy::CustomBins => with_target.drop_columns(&drops.names(), "cleanse").at("cleanse")?,
    };
    let codes = per_column
        .iter()
        .filter(|(name, _)| table.column(name).is_some())
        .flat_map(|(_, c)| c.iter().copied())
        .collect();
    Ok(Cleansed {
        table,
        strategy: imputation,
        drops,
        codes,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded train/test split. With `stratified` each class is shuffled and cut
/// separately, so both partitions keep the class ratio.
pub fn stratified_split(labels: &[u8], train_frac: f64, stratified: bool, seed: u64) -> Result<Split> {
    if !(train_frac > 0.0 && train_frac < 1.0) {
        return Err(Error::Config(format!("train_frac {train_frac} is not in (0, 1)")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let strata: Vec<Vec<usize>> = if stratified {
        (0..=1u8)
            .map(|c| (0..labels.len()).filter(|&i| labels[i] == c).collect())
            .collect()
    } else {
        vec![(0..labels.len()).collect()]
    };
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for mut rows in strata {
        rows.shuffle(&mut rng);
        let cut = (train_frac * rows.len() as f64).round() as usize;
        train.extend_from_slice(&rows[..cut]);
        test.extend_from_slice(&rows[cut..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    for (name, part) in [("train", &train), ("test", &test)] {
        let ones = part.iter().filter(|&&i| labels[i] == 1).count();
        if ones == 0 || ones == part.len() {
            return Err(Error::Data(format!("{name} partition lacks one of the classes")));
        }
    }
    Ok(Split { train, test })
}

/// Everything fitted on the training rows of one group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupModels {
    pub imputation: ImputationModel,
    pub profiles: Vec<ColumnProfile>,
    /// Columns whose profile could not be computed on the training rows.
    pub profile_drops: Vec<String>,
    pub binning: BinningModel,
    pub iv_kept: Vec<String>,
    pub selection: SelectionReport,
    pub train: Dataset,
    pub test: Dataset,
}

pub fn fit_group(
    grid: &ExperimentGrid,
    cleansed: &Cleansed,
    split: &Split,
    binning: BinningAxis,
) -> std::result::Result<GroupModels, StageError> {
    let train = cleansed.table.take_rows(&split.train);
    let test = cleansed.table.take_rows(&split.test);

    let imputation = match cleansed.strategy {
        ImputeStrategy::Median => ImputationModel::fit_median(&train),
        ImputeStrategy::CustomBins => {
            let cfg = CustomBinsConfig {
                favorable_label: grid.target.favorable_label(),
                ..Default::default()
            };
            ImputationModel::fit_custom_bins(&train, &cleansed.codes, &cfg)
        }
    }
    .at("impute")?;
    let train = imputation.apply(&train).at("impute")?;
    let test = imputation.apply(&test).at("impute")?;

    let mut profiles = Vec::new();
    let mut profile_drops = Vec::new();
    let mut kinds = HashMap::new();
    for c in train.predictors() {
        match profile(c) {
            Ok(p) => {
                kinds.insert(c.name().to_string(), p.kind);
                profiles.push(p);
            }
            Err(e) => {
                log::warn!("dropping `{}`: {e}", c.name());
                profile_drops.push(c.name().to_string());
            }
        }
    }
    let classify = |t: &Table| -> Result<Table> {
        let cols: HashMap<String, _> = t
            .predictors()
            .filter_map(|c| kinds.get(c.name()).map(|&k| (c.name().to_string(), c.clone().classified(k))))
            .map(|(n, c)| c.map(|c| (n, c)))
            .collect::<Result<_>>()?;
        let kept: Vec<String> = t.predictor_names().into_iter().filter(|n| kinds.contains_key(n)).collect();
        t.replace_columns(cols)?.restrict(&kept)
    };
    let train = classify(&train).at("profile")?;
    let test = classify(&test).at("profile")?;

    let cfg = BinningConfig {
        mode: binning.mode(),
        ..grid.binning
    };
    let bins = BinningModel::fit(&train, &cfg).at("bin")?;
    let iv_kept = select_by_iv(&bins, grid.thresholds.iv).at("iv_filter")?;
    let train = train.restrict(&iv_kept).at("iv_filter")?;
    let test = test.restrict(&iv_kept).at("iv_filter")?;
    let (train, test) = if binning == BinningAxis::None {
        (train, test)
    } else {
        (bins.transform(&train).at("bin")?, bins.transform(&test).at("bin")?)
    };

    let select_cfg = SelectConfig {
        split_threshold: grid.thresholds.split_eigenvalue,
        coverage: grid.thresholds.pov,
        vif_threshold: grid.thresholds.vif,
    };
    let selection = select_features(&train, &select_cfg).at("select")?;
    let train = train.restrict(&selection.final_variables).at("select")?;
    let test = test.restrict(&selection.final_variables).at("select")?;

    Ok(GroupModels {
        imputation,
        profiles,
        profile_drops,
        binning: bins,
        iv_kept,
        selection,
        train: Dataset::from_table(&train).at("select")?,
        test: Dataset::from_table(&test).at("select")?,
    })
}
