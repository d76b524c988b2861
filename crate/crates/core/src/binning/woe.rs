use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Good (label 0) and bad (label 1) counts of one bin.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinCounts {
    pub good: u64,
    pub bad: u64,
}

impl BinCounts {
    pub fn new(good: u64, bad: u64) -> Self {
        BinCounts { good, bad }
    }

    pub fn total(&self) -> u64 {
        self.good + self.bad
    }

    pub fn add(&mut self, label: u8) {
        if label == 0 {
            self.good += 1;
        } else {
            self.bad += 1;
        }
    }

    pub fn merged(bins: &[BinCounts]) -> BinCounts {
        bins.iter().fold(BinCounts::default(), |acc, b| BinCounts {
            good: acc.good + b.good,
            bad: acc.bad + b.bad,
        })
    }
}

/// Column-level totals and the smoothing context shared by every bin.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Shares {
    total_good: f64,
    total_bad: f64,
    smoothing: f64,
    n_bins: usize,
}

impl Shares {
    pub(crate) fn new(total: BinCounts, smoothing: f64, n_bins: usize) -> Self {
        Shares {
            total_good: total.good as f64,
            total_bad: total.bad as f64,
            smoothing,
            n_bins,
        }
    }

    pub(crate) fn woe(&self, bin: BinCounts) -> f64 {
        let (gs, bs) = self.shares(bin);
        (gs / bs).ln()
    }

    fn shares(&self, bin: BinCounts) -> (f64, f64) {
        let s = self.smoothing;
        let k = self.n_bins as f64;
        (
            (bin.good as f64 + s) / (self.total_good + s * k),
            (bin.bad as f64 + s) / (self.total_bad + s * k),
        )
    }

    /// `(good_share - bad_share) * woe` for one bin.
    pub(crate) fn iv_term(&self, bin: BinCounts) -> f64 {
        let (gs, bs) = self.shares(bin);
        (gs - bs) * (gs / bs).ln()
    }
}

/// WoE per bin and total IV.
///
/// With `smoothing = s`, shares are `(g_i + s) / (G + s * n_bins)` and likewise
/// for bads. `smoothing = 0` is the plain formula and rejects bins with a zero
/// count, whose WoE would be infinite.
pub fn woe_iv(bins: &[BinCounts], smoothing: f64) -> Result<(Vec<f64>, f64)> {
    let total = BinCounts::merged(bins);
    if total.good == 0 || total.bad == 0 {
        return Err(Error::Data(format!(
            "degenerate target: {} goods, {} bads",
            total.good, total.bad
        )));
    }
    if smoothing < 0.0 {
        return Err(Error::Config(format!("negative smoothing {smoothing}")));
    }
    if smoothing == 0.0 && bins.iter().any(|b| b.good == 0 || b.bad == 0) {
        return Err(Error::Data(
            "bin with a zero count has infinite WoE without smoothing".into(),
        ));
    }
    let shares = Shares::new(total, smoothing, bins.len());
    let woe = bins.iter().map(|&b| shares.woe(b)).collect();
    let mut iv = 0.0;
    for &b in bins {
        iv += shares.iv_term(b);
    }
    Ok((woe, iv))
}
