//! Credit-risk and mail-response modeling pipeline.
//!
//! The stages mirror a classic scorecard workflow: load sparse bureau-style
//! data, turn sentinel codes into missing cells, impute, profile and bin each
//! variable into weight-of-evidence space, select variables by clustering,
//! proportion of variance and VIF, rebalance the training classes, train a
//! logistic regression or a gradient-boosted tree ensemble and evaluate it.
//! [`experiment`] runs the whole cross-product of preprocessing choices.

pub mod binning;
pub mod cleanse;
pub mod dataset;
pub mod error;
pub mod evaluate;
pub mod experiment;
pub mod impute;
pub mod learners;
pub mod linalg;
pub mod profile;
pub mod resample;
pub mod select;
pub mod table;

pub use error::{Error, Result};
pub use table::{Column, ColumnKind, ModelKind, Table, TargetSpec};
