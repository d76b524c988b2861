//! Exact IV-maximizing merge of contiguous prebins.
//!
//! For a fixed final bin count `k` the objective is a sum of per-bin terms,
//! so a dynamic program over (last bin start, last bin end, bins used) finds
//! the optimum. The WoE smoothing makes the terms depend on `k`, which is
//! why every `k` gets its own pass. Monotonicity only couples neighbouring
//! bins, so remembering where the last bin starts is enough to check it.

use log::warn;
use serde::{Deserialize, Serialize};

use super::woe::{BinCounts, Shares};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Monotonic {
    None,
    /// Event rate must be non-decreasing or non-increasing; the direction
    /// with the higher achievable IV wins.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Free,
    Ascending,
    Descending,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MergeConstraints {
    pub min_bin_frac: f64,
    pub max_bins: usize,
    pub monotonic: Monotonic,
    pub smoothing: f64,
}

impl Default for MergeConstraints {
    fn default() -> Self {
        MergeConstraints {
            min_bin_frac: 0.05,
            max_bins: 10,
            monotonic: Monotonic::Auto,
            smoothing: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeResult {
    /// Half-open prebin ranges `[start, end)` of each final bin.
    pub parts: Vec<(usize, usize)>,
    pub iv: f64,
    pub direction: Direction,
    /// True when no partition met the constraints and everything was merged.
    pub fallback: bool,
}

/// IV of merging `prebins` according to `parts`, with an optional missing bin
/// appended last. This is the single arithmetic path both the optimizer and
/// its tests use.
pub fn partition_iv(
    prebins: &[BinCounts],
    parts: &[(usize, usize)],
    missing: Option<BinCounts>,
    smoothing: f64,
) -> f64 {
    let shares = shares_for(prebins, missing, smoothing, parts.len());
    let mut iv = 0.0;
    for &(a, b) in parts {
        iv += shares.iv_term(BinCounts::merged(&prebins[a..b]));
    }
    if let Some(m) = missing {
        iv += shares.iv_term(m);
    }
    iv
}

fn shares_for(prebins: &[BinCounts], missing: Option<BinCounts>, smoothing: f64, k: usize) -> Shares {
    let mut total = BinCounts::merged(prebins);
    if let Some(m) = missing {
        total.good += m.good;
        total.bad += m.bad;
    }
    Shares::new(total, smoothing, k + usize::from(missing.is_some()))
}

/// Whether bin `[a, b)` then bin `[b, c)` respects `dir` (compared exactly).
fn ordered(dir: Direction, left: BinCounts, right: BinCounts) -> bool {
    // bad_l / n_l  vs  bad_r / n_r
    let l = left.bad as u128 * right.total() as u128;
    let r = right.bad as u128 * left.total() as u128;
    match dir {
        Direction::Free => true,
        Direction::Ascending => l <= r,
        Direction::Descending => l >= r,
    }
}

/// Finds the contiguous partition of `prebins` with maximal IV subject to
/// `constraints`. Among equal IVs the partition with fewer bins wins.
pub fn optimal_merge(
    prebins: &[BinCounts],
    missing: Option<BinCounts>,
    constraints: &MergeConstraints,
) -> MergeResult {
    let n = prebins.len();
    let single = |fallback| MergeResult {
        parts: if n == 0 { vec![] } else { vec![(0, n)] },
        iv: partition_iv(prebins, &[(0, n)], missing, constraints.smoothing),
        direction: Direction::Free,
        fallback,
    };
    if n <= 1 {
        return single(false);
    }

    // prefix sums for O(1) range counts
    let mut prefix = vec![BinCounts::default(); n + 1];
    for i in 0..n {
        prefix[i + 1] = BinCounts::new(
            prefix[i].good + prebins[i].good,
            prefix[i].bad + prebins[i].bad,
        );
    }
    let range = |a: usize, b: usize| {
        BinCounts::new(prefix[b].good - prefix[a].good, prefix[b].bad - prefix[a].bad)
    };
    let total_rows = prefix[n].total() as f64;
    let min_rows = constraints.min_bin_frac * total_rows;
    let need_positive = constraints.smoothing == 0.0;
    let feasible = |a: usize, b: usize| {
        let c = range(a, b);
        c.total() as f64 >= min_rows && (!need_positive || (c.good > 0 && c.bad > 0))
    };

    let directions: &[Direction] = match constraints.monotonic {
        Monotonic::None => &[Direction::Free],
        Monotonic::Auto => &[Direction::Ascending, Direction::Descending],
    };
    let max_k = constraints.max_bins.min(n);

    let mut best: Option<(f64, Vec<(usize, usize)>, Direction)> = None;
    for k in 1..=max_k {
        let shares = shares_for(prebins, missing, constraints.smoothing, k);
        for &dir in directions {
            if let Some((value, parts)) = solve_k(n, k, dir, &shares, &range, &feasible) {
                let value = match missing {
                    Some(m) => value + shares.iv_term(m),
                    None => value,
                };
                if best.as_ref().is_none_or(|b| value > b.0) {
                    best = Some((value, parts, dir));
                }
            }
        }
    }

    match best {
        Some((value, parts, direction)) => {
            let iv = partition_iv(prebins, &parts, missing, constraints.smoothing);
            debug_assert_eq!(iv.to_bits(), value.to_bits());
            let direction = if parts.len() == 1 { Direction::Free } else { direction };
            MergeResult {
                parts,
                iv,
                direction,
                fallback: false,
            }
        }
        None => {
            warn!("no bin partition satisfies the constraints; merging into one bin");
            single(true)
        }
    }
}

/// Best value and partition using exactly `k` bins, or `None` if infeasible.
fn solve_k(
    n: usize,
    k: usize,
    dir: Direction,
    shares: &Shares,
    range: &impl Fn(usize, usize) -> BinCounts,
    feasible: &impl Fn(usize, usize) -> bool,
) -> Option<(f64, Vec<(usize, usize)>)> {
    // value[i][j]: best sum over bins covering [0, j) whose last bin is [i, j)
    let idx = |i: usize, j: usize| i * (n + 1) + j;
    let mut value = vec![f64::NEG_INFINITY; (n + 1) * (n + 1)];
    let mut back: Vec<Vec<usize>> = Vec::with_capacity(k);

    for j in 1..=n {
        if feasible(0, j) {
            value[idx(0, j)] = shares.iv_term(range(0, j));
        }
    }
    back.push(vec![usize::MAX; (n + 1) * (n + 1)]);

    for _ in 2..=k {
        let mut next = vec![f64::NEG_INFINITY; (n + 1) * (n + 1)];
        let mut from = vec![usize::MAX; (n + 1) * (n + 1)];
        for i in 1..n {
            for j in i + 1..=n {
                if !feasible(i, j) {
                    continue;
                }
                let cur = range(i, j);
                let term = shares.iv_term(cur);
                for h in 0..i {
                    let prev = value[idx(h, i)];
                    if prev == f64::NEG_INFINITY || !ordered(dir, range(h, i), cur) {
                        continue;
                    }
                    let cand = prev + term;
                    if cand > next[idx(i, j)] {
                        next[idx(i, j)] = cand;
                        from[idx(i, j)] = h;
                    }
                }
            }
        }
        value = next;
        back.push(from);
    }

    let mut best: Option<(f64, usize)> = None;
    for i in 0..n {
        let v = value[idx(i, n)];
        if v != f64::NEG_INFINITY && best.is_none_or(|b| v > b.0) {
            best = Some((v, i));
        }
    }
    let (v, mut start) = best?;
    let mut end = n;
    let mut parts = vec![(start, end)];
    // back[layer] holds predecessors for states with layer + 1 bins
    for layer in (1..k).rev() {
        let h = back[layer][idx(start, end)];
        parts.push((h, start));
        end = start;
        start = h;
    }
    parts.reverse();
    Some((v, parts))
}
