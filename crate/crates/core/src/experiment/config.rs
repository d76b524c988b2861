//! Text grid configuration: a header line, then `key = value` lines.
//! Axis keys may repeat; every other key may appear once.
//!
//! ```text
//! mailrisk-grid 1
//! target = responders
//! imputation = median
//! imputation = custom_bins
//! model = gbt
//! gbt.n_trees = 100
//! ```

use std::collections::{BTreeSet, HashSet};
use std::fmt::Write as _;
use std::str::FromStr;

use super::{BinningAxis, ExperimentGrid, Link, SynthSpec};
use crate::binning::Monotonic;
use crate::cleanse::{CodeMode, CodedValueRule};
use crate::error::{Error, Result};
use crate::impute::ImputeStrategy;
use crate::learners::Learner;
use crate::resample::Sampling;
use crate::table::{ModelKind, TargetSpec};

pub const CONFIG_HEADER: &str = "mailrisk-grid 1";

const AXIS_KEYS: [&str; 5] = ["imputation", "binning", "sampling", "model", "policy_drop"];

fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Config(format!("`{key}`: cannot parse `{v}`")))
}

fn flag(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("`{key}`: expected true or false, got `{v}`"))),
    }
}

fn axis<T>(key: &str, v: &str, parse: impl Fn(&str) -> Option<T>) -> Result<T> {
    parse(v).ok_or_else(|| Error::Config(format!("`{key}`: unknown value `{v}`")))
}

/// Parses a grid config and the optional `synth.*` keys. Axes that never
/// appear keep their defaults.
pub fn parse_config(text: &str) -> Result<(ExperimentGrid, SynthSpec)> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    match lines.next() {
        Some((_, h)) if h == CONFIG_HEADER => {}
        Some((_, h)) => {
            return Err(Error::Config(format!("expected header `{CONFIG_HEADER}`, found `{h}`")));
        }
        None => return Err(Error::Config("empty config".into())),
    }

    let mut grid = ExperimentGrid::default();
    let mut synth = SynthSpec::default();
    let mut seen = HashSet::new();
    let mut axes_seen = HashSet::new();
    let mut code_list: Option<BTreeSet<i64>> = None;

    for (lineno, line) in lines {
        let (key, value) = line
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| Error::Config(format!("line {lineno}: expected `key = value`")))?;
        if AXIS_KEYS.contains(&key) {
            if axes_seen.insert(key) {
                match key {
                    "imputation" => grid.imputations.clear(),
                    "binning" => grid.binnings.clear(),
                    "sampling" => grid.samplings.clear(),
                    "model" => grid.models.clear(),
                    _ => grid.policy_drops.clear(),
                }
            }
            match key {
                "imputation" => push_unique(&mut grid.imputations, axis(key, value, ImputeStrategy::parse)?, key)?,
                "binning" => push_unique(&mut grid.binnings, axis(key, value, BinningAxis::parse)?, key)?,
                "sampling" => push_unique(&mut grid.samplings, axis(key, value, Sampling::parse)?, key)?,
                "model" => push_unique(&mut grid.models, axis(key, value, Learner::parse)?, key)?,
                _ => push_unique(&mut grid.policy_drops, value.to_string(), key)?,
            }
            continue;
        }
        if !seen.insert(key.to_string()) {
            return Err(Error::Config(format!("line {lineno}: `{key}` given twice")));
        }
        let hp = &mut grid.hyperparams;
        let c = &mut grid.binning.constraints;
        match key {
            "target" => grid.target = TargetSpec::new(axis(key, value, ModelKind::parse)?),
            "goodbad_column" => grid.goodbad_column = value.to_string(),
            "seed" => grid.split.seed = num(key, value)?,
            "train_frac" => grid.split.train_frac = num(key, value)?,
            "stratified" => grid.split.stratified = flag(key, value)?,
            "missing_threshold" => grid.thresholds.missing = num(key, value)?,
            "iv_threshold" => grid.thresholds.iv = num(key, value)?,
            "vif_threshold" => grid.thresholds.vif = num(key, value)?,
            "pov_coverage" => grid.thresholds.pov = num(key, value)?,
            "split_eigenvalue" => grid.thresholds.split_eigenvalue = num(key, value)?,
            "max_prebins" => grid.binning.max_prebins = num(key, value)?,
            "min_bin_frac" => c.min_bin_frac = num(key, value)?,
            "max_bins" => c.max_bins = num(key, value)?,
            "monotonic" => {
                c.monotonic = match value {
                    "auto" => Monotonic::Auto,
                    "none" => Monotonic::None,
                    _ => return Err(Error::Config(format!("`{key}`: expected auto or none"))),
                }
            }
            "smoothing" => c.smoothing = num(key, value)?,
            "code_mode" => {
                grid.coded.mode = match value {
                    "explicit" => CodeMode::ExplicitList,
                    "pattern" => CodeMode::Pattern,
                    _ => return Err(Error::Config(format!("`{key}`: expected explicit or pattern"))),
                }
            }
            "codes" => {
                code_list = Some(
                    value
                        .split(',')
                        .map(|t| num::<i64>(key, t.trim()))
                        .collect::<Result<_>>()?,
                )
            }
            "code_min_digits" => grid.coded.min_digits = num(key, value)?,
            "smote_k" => grid.smote_k = num(key, value)?,
            "target_ratio" => grid.target_ratio = num(key, value)?,
            "logreg.l2" => hp.logreg.l2 = num(key, value)?,
            "logreg.max_iter" => hp.logreg.max_iter = num(key, value)?,
            "logreg.tol" => hp.logreg.tol = num(key, value)?,
            "gbt.n_trees" => hp.gbt.n_trees = num(key, value)?,
            "gbt.max_depth" => hp.gbt.max_depth = num(key, value)?,
            "gbt.eta" => hp.gbt.eta = num(key, value)?,
            "gbt.lambda" => hp.gbt.lambda = num(key, value)?,
            "gbt.gamma" => hp.gbt.gamma = num(key, value)?,
            "gbt.min_child_weight" => hp.gbt.min_child_weight = num(key, value)?,
            "synth.n_rows" => synth.n_rows = num(key, value)?,
            "synth.n_features" => synth.n_features = num(key, value)?,
            "synth.n_informative" => synth.n_informative = num(key, value)?,
            "synth.link" => synth.link = axis(key, value, Link::parse)?,
            "synth.coded_rate" => synth.coded_rate = num(key, value)?,
            "synth.missing_rate" => synth.missing_rate = num(key, value)?,
            "synth.responder_frac" => synth.responder_frac = num(key, value)?,
            "synth.bad_frac_among_responders" => synth.bad_frac_among_responders = num(key, value)?,
            "synth.seed" => synth.seed = num(key, value)?,
            other => return Err(Error::Config(format!("line {lineno}: unknown key `{other}`"))),
        }
    }
    if let Some(list) = code_list {
        grid.coded = CodedValueRule {
            explicit_values: list,
            ..grid.coded
        };
    }
    grid.validate()?;
    Ok((grid, synth))
}

fn push_unique<T: PartialEq>(v: &mut Vec<T>, item: T, key: &str) -> Result<()> {
    if v.contains(&item) {
        return Err(Error::Config(format!("`{key}` value repeated")));
    }
    v.push(item);
    Ok(())
}

impl ExperimentGrid {
    /// Config text that [`parse_config`] reads back into an equal grid.
    pub fn to_config_text(&self) -> String {
        let mut s = format!("{CONFIG_HEADER}\n");
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("target", self.target.model_kind.as_str().into());
        kv("goodbad_column", self.goodbad_column.clone());
        for v in &self.imputations {
            kv("imputation", v.as_str().into());
        }
        for v in &self.binnings {
            kv("binning", v.as_str().into());
        }
        for v in &self.samplings {
            kv("sampling", v.as_str().into());
        }
        for v in &self.models {
            kv("model", v.as_str().into());
        }
        for v in &self.policy_drops {
            kv("policy_drop", v.clone());
        }
        kv("seed", self.split.seed.to_string());
        kv("train_frac", self.split.train_frac.to_string());
        kv("stratified", self.split.stratified.to_string());
        let t = &self.thresholds;
        kv("missing_threshold", t.missing.to_string());
        kv("iv_threshold", t.iv.to_string());
        kv("vif_threshold", t.vif.to_string());
        kv("pov_coverage", t.pov.to_string());
        kv("split_eigenvalue", t.split_eigenvalue.to_string());
        let c = &self.binning.constraints;
        kv("max_prebins", self.binning.max_prebins.to_string());
        kv("min_bin_frac", c.min_bin_frac.to_string());
        kv("max_bins", c.max_bins.to_string());
        kv(
            "monotonic",
            match c.monotonic {
                Monotonic::Auto => "auto",
                Monotonic::None => "none",
            }
            .into(),
        );
        kv("smoothing", c.smoothing.to_string());
        kv(
            "code_mode",
            match self.coded.mode {
                CodeMode::ExplicitList => "explicit",
                CodeMode::Pattern => "pattern",
            }
            .into(),
        );
        let codes: Vec<String> = self.coded.explicit_values.iter().map(i64::to_string).collect();
        kv("codes", codes.join(","));
        kv("code_min_digits", self.coded.min_digits.to_string());
        kv("smote_k", self.smote_k.to_string());
        kv("target_ratio", self.target_ratio.to_string());
        let hp = &self.hyperparams;
        kv("logreg.l2", hp.logreg.l2.to_string());
        kv("logreg.max_iter", hp.logreg.max_iter.to_string());
        kv("logreg.tol", hp.logreg.tol.to_string());
        kv("gbt.n_trees", hp.gbt.n_trees.to_string());
        kv("gbt.max_depth", hp.gbt.max_depth.to_string());
        kv("gbt.eta", hp.gbt.eta.to_string());
        kv("gbt.lambda", hp.gbt.lambda.to_string());
        kv("gbt.gamma", hp.gbt.gamma.to_string());
        kv("gbt.min_child_weight", hp.gbt.min_child_weight.to_string());
        s
    }
}
