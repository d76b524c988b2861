//! Skewness/kurtosis profiling and the continuous-vs-discrete call.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::table::{Column, ColumnKind};

pub const SKEW_LIMIT: f64 = 2.0;
pub const KURTOSIS_LIMIT: f64 = 20.0;
pub const DISCRETE_UNIQUE_LIMIT: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SkewClass {
    High,
    LowModerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KurtClass {
    High,
    Low,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnProfile {
    pub name: String,
    pub skewness: f64,
    /// Excess kurtosis; a normal distribution sits at zero.
    pub kurtosis: f64,
    pub unique_count: usize,
    pub skew_class: SkewClass,
    pub kurt_class: KurtClass,
    pub kind: ColumnKind,
}

/// Population-moment skewness and excess kurtosis of `values`.
pub fn moments(values: &[f64]) -> Result<(f64, f64)> {
    if values.len() < 3 {
        return Err(Error::Data(format!(
            "need at least 3 values to profile, got {}",
            values.len()
        )));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &v in values {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    if m2 <= 0.0 || m2 <= (f64::EPSILON * mean.abs()).powi(2) {
        return Err(Error::Data("zero variance".into()));
    }
    Ok((m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0))
}

/// Classification rule, a pure function of the three statistics.
pub fn classify(unique_count: usize, skewness: f64, kurtosis: f64) -> (SkewClass, KurtClass, ColumnKind) {
    let skew = if skewness > SKEW_LIMIT || skewness < -SKEW_LIMIT {
        SkewClass::High
    } else {
        SkewClass::LowModerate
    };
    let kurt = if kurtosis > KURTOSIS_LIMIT {
        KurtClass::High
    } else {
        KurtClass::Low
    };
    let kind = if unique_count < DISCRETE_UNIQUE_LIMIT
        && skew == SkewClass::High
        && kurt == KurtClass::High
    {
        ColumnKind::Discrete
    } else {
        ColumnKind::Continuous
    };
    (skew, kurt, kind)
}

pub fn profile(column: &Column) -> Result<ColumnProfile> {
    let values: Vec<f64> = column.present().collect();
    let (skewness, kurtosis) =
        moments(&values).map_err(|e| Error::Data(format!("column `{}`: {e}", column.name())))?;
    let unique_count = column.distinct_count();
    let (skew_class, kurt_class, kind) = classify(unique_count, skewness, kurtosis);
    Ok(ColumnProfile {
        name: column.name().to_string(),
        skewness,
        kurtosis,
        unique_count,
        skew_class,
        kurt_class,
        kind,
    })
}

/// `name,skew,kurt,unique,kind` rows with a header.
pub fn profiles_csv(profiles: &[ColumnProfile]) -> String {
    let mut out = String::from("name,skew,kurt,unique,kind\n");
    for p in profiles {
        let _ = writeln!(
            out,
            "{},{:.6},{:.6},{},{}",
            p.name,
            p.skewness,
            p.kurtosis,
            p.unique_count,
            p.kind.as_str()
        );
    }
    out
}
