//! Class rebalancing of training partitions: random oversampling and SMOTE.

use log::{info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Sampling {
    None,
    RandomOver,
    Smote,
}

impl Sampling {
    pub fn as_str(self) -> &'static str {
        match self {
            Sampling::None => "none",
            Sampling::RandomOver => "random_over",
            Sampling::Smote => "smote",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "none" => Some(Sampling::None),
            "random_over" | "random" => Some(Sampling::RandomOver),
            "smote" => Some(Sampling::Smote),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResamplePlan {
    pub strategy: Sampling,
    pub seed: u64,
    pub k_neighbors: usize,
    /// Desired minority:majority ratio after resampling.
    pub target_ratio: f64,
}

impl ResamplePlan {
    pub fn new(strategy: Sampling, seed: u64) -> Self {
        ResamplePlan {
            strategy,
            seed,
            k_neighbors: 5,
            target_ratio: 1.0,
        }
    }
}

/// Rows of a training partition. Resamplers only accept this type, so
/// evaluation rows cannot reach them by accident.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet(Dataset);

impl TrainingSet {
    /// Marks `data` as training rows.
    pub fn new(data: Dataset) -> Self {
        TrainingSet(data)
    }

    pub fn data(&self) -> &Dataset {
        &self.0
    }

    pub fn into_inner(self) -> Dataset {
        self.0
    }
}

/// Where a SMOTE row came from: `a + u * (b - a)` over training row indices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticOrigin {
    pub a: usize,
    pub b: usize,
    pub u: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Resampled {
    /// Original rows first, then the added rows.
    pub data: Dataset,
    /// One entry per added row for SMOTE; empty otherwise.
    pub origins: Vec<SyntheticOrigin>,
}

pub fn resample(train: &TrainingSet, plan: &ResamplePlan) -> Result<Resampled> {
    match plan.strategy {
        Sampling::None => Ok(Resampled {
            data: train.data().clone(),
            origins: Vec::new(),
        }),
        Sampling::RandomOver => random_oversample(train, plan),
        Sampling::Smote => smote(train, plan),
    }
}

/// Minority label, its row indices and how many rows to add.
fn deficit(data: &Dataset, plan: &ResamplePlan) -> Result<(u8, Vec<usize>, usize)> {
    let [zeros, ones] = data.class_counts();
    if zeros == 0 || ones == 0 {
        return Err(Error::Data("resampling needs both classes in the training rows".into()));
    }
    if !(plan.target_ratio > 0.0 && plan.target_ratio <= 1.0) {
        return Err(Error::Config(format!("target_ratio {} is not in (0, 1]", plan.target_ratio)));
    }
    let (minority, min_n, maj_n) = if ones < zeros { (1, ones, zeros) } else { (0, zeros, ones) };
    let want = (plan.target_ratio * maj_n as f64).round() as usize;
    let rows = data
        .labels()
        .iter()
        .enumerate()
        .filter(|&(_, &l)| l == minority)
        .map(|(i, _)| i)
        .collect();
    Ok((minority, rows, want.saturating_sub(min_n)))
}

fn with_extra_rows(data: &Dataset, extra: Vec<f64>, label: u8) -> Result<Dataset> {
    let added = extra.len() / data.n_features();
    let mut x = data.values().to_vec();
    x.extend(extra);
    let mut y = data.labels().to_vec();
    y.extend(std::iter::repeat_n(label, added));
    Dataset::new(data.names().to_vec(), x, y)
}

/// Duplicates minority rows, drawn uniformly with replacement, until the
/// classes balance.
pub fn random_oversample(train: &TrainingSet, plan: &ResamplePlan) -> Result<Resampled> {
    let data = train.data();
    let (label, minority, needed) = deficit(data, plan)?;
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let mut extra = Vec::with_capacity(needed * data.n_features());
    for _ in 0..needed {
        let i = minority[rng.random_range(0..minority.len())];
        extra.extend_from_slice(data.row(i));
    }
    info!("random oversampling added {needed} rows of class {label}");
    Ok(Resampled {
        data: with_extra_rows(data, extra, label)?,
        origins: Vec::new(),
    })
}

/// Per-feature mean and standard deviation; constant features get scale 1.
fn standardizer(data: &Dataset) -> (Vec<f64>, Vec<f64>) {
    let n = data.n_rows() as f64;
    let p = data.n_features();
    let mut mean = vec![0.0; p];
    for row in data.rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; p];
    for row in data.rows() {
        for j in 0..p {
            var[j] += (row[j] - mean[j]).powi(2);
        }
    }
    let sd = var
        .into_iter()
        .map(|v| {
            let s = (v / n).sqrt();
            if s > 0.0 { s } else { 1.0 }
        })
        .collect();
    (mean, sd)
}

/// `k` nearest other minority rows of each minority row, as positions into
/// `minority`, ordered by distance then position.
fn neighbours(data: &Dataset, minority: &[usize], k: usize) -> Vec<Vec<usize>> {
    let (mean, sd) = standardizer(data);
    let z: Vec<Vec<f64>> = minority
        .iter()
        .map(|&i| data.row(i).iter().zip(&mean).zip(&sd).map(|((v, m), s)| (v - m) / s).collect())
        .collect();
    (0..minority.len())
        .into_par_iter()
        .map(|a| {
            let mut d: Vec<(f64, usize)> = (0..minority.len())
                .filter(|&b| b != a)
                .map(|b| {
                    let dist: f64 = z[a].iter().zip(&z[b]).map(|(x, y)| (x - y) * (x - y)).sum();
                    (dist, b)
                })
                .collect();
            d.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
            d.into_iter().take(k).map(|(_, b)| b).collect()
        })
        .collect()
}

/// SMOTE: each added row interpolates between a random minority row and one
/// of its `k` nearest minority neighbours (found on standardized features).
pub fn smote(train: &TrainingSet, plan: &ResamplePlan) -> Result<Resampled> {
    let data = train.data();
    let (label, minority, needed) = deficit(data, plan)?;
    if minority.len() == 1 {
        warn!("a single minority row cannot be interpolated; using random oversampling");
        return random_oversample(train, plan);
    }
    let mut k = plan.k_neighbors.max(1);
    if minority.len() <= k {
        k = minority.len() - 1;
        warn!("only {} minority rows; SMOTE uses k = {k}", minority.len());
    }
    let nn = neighbours(data, &minority, k);

    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let mut extra = Vec::with_capacity(needed * data.n_features());
    let mut origins = Vec::with_capacity(needed);
    for _ in 0..needed {
        let pa = rng.random_range(0..minority.len());
        let pb = nn[pa][rng.random_range(0..k)];
        let u: f64 = rng.random();
        let (a, b) = (minority[pa], minority[pb]);
        extra.extend(interpolate(data.row(a), data.row(b), u));
        origins.push(SyntheticOrigin { a, b, u });
    }
    info!("SMOTE added {needed} rows of class {label} (k = {k})");
    Ok(Resampled {
        data: with_extra_rows(data, extra, label)?,
        origins,
    })
}

/// `a + u * (b - a)`, the point SMOTE emits for an origin triple.
pub fn interpolate<'a>(a: &'a [f64], b: &'a [f64], u: f64) -> impl Iterator<Item = f64> + 'a {
    a.iter().zip(b).map(move |(x, y)| x + u * (y - x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(x: Vec<f64>, p: usize, y: Vec<u8>) -> TrainingSet {
        let names = (0..p).map(|j| format!("f{j}")).collect();
        TrainingSet::new(Dataset::new(names, x, y).unwrap())
    }

    #[test]
    fn random_over_balances() {
        let y: Vec<u8> = [vec![0; 10], vec![1; 5]].concat();
        let x: Vec<f64> = (0..15).map(f64::from).collect();
        let r = random_oversample(&set(x.clone(), 1, y), &ResamplePlan::new(Sampling::RandomOver, 1)).unwrap();
        assert_eq!(r.data.class_counts(), [10, 10]);
        assert_eq!(&r.data.values()[..15], &x[..]);
        for row in 15..20 {
            let v = r.data.row(row)[0];
            assert!((10..15).any(|i| x[i].to_bits() == v.to_bits()));
        }
    }

    #[test]
    fn balanced_is_unchanged() {
        let t = set(vec![1.0, 2.0, 3.0, 4.0], 1, vec![0, 1, 0, 1]);
        let r = random_oversample(&t, &ResamplePlan::new(Sampling::RandomOver, 1)).unwrap();
        assert_eq!(&r.data, t.data());
        assert!(random_oversample(&set(vec![1.0], 1, vec![1]), &ResamplePlan::new(Sampling::RandomOver, 1)).is_err());
    }

    #[test]
    fn smote_on_a_segment() {
        let x = vec![0.0, 0.0, 1.0, 1.0, 5.0, 3.0, 6.0, 2.0, 7.0, 9.0, 4.0, 4.0];
        let y = vec![1, 1, 0, 0, 0, 0];
        let mut plan = ResamplePlan::new(Sampling::Smote, 3);
        plan.k_neighbors = 1;
        let r = smote(&set(x, 2, y), &plan).unwrap();
        assert_eq!(r.data.class_counts(), [4, 4]);
        for i in 6..8 {
            let row = r.data.row(i);
            assert_eq!(row[0], row[1]);
            assert!((0.0..1.0).contains(&row[0]));
        }
    }

    #[test]
    fn identical_minority_points() {
        let x = vec![2.0, 2.0, 2.0, 0.0, 1.0, 3.0, 4.0, 5.0];
        let y = vec![1, 1, 1, 0, 0, 0, 0, 0];
        let r = smote(&set(x, 1, y), &ResamplePlan::new(Sampling::Smote, 9)).unwrap();
        assert_eq!(r.data.class_counts(), [5, 5]);
        assert!(r.data.values()[8..].iter().all(|&v| v == 2.0));
    }

    #[test]
    fn single_minority_row_falls_back() {
        let r = smote(&set(vec![1.0, 2.0, 3.0], 1, vec![1, 0, 0]), &ResamplePlan::new(Sampling::Smote, 1)).unwrap();
        assert!(r.origins.is_empty());
        assert_eq!(r.data.row(3), &[1.0]);
    }

    fn fixture() -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
        prop::collection::vec((prop::collection::vec(-50.0f64..50.0, 3), 0u8..4), 8..60).prop_map(|rows| {
            let y = rows.iter().map(|r| (r.1 == 0) as u8).collect();
            (rows.into_iter().flat_map(|r| r.0).collect(), y)
        })
    }

    proptest! {
        #[test]
        fn smote_rows_reproduce_from_origins((x, y) in fixture(), seed in any::<u64>()) {
            let t = set(x, 3, y);
            let [z, o] = t.data().class_counts();
            prop_assume!(z > 0 && o > 0);
            let r = smote(&t, &ResamplePlan::new(Sampling::Smote, seed)).unwrap();
            let [a, b] = r.data.class_counts();
            prop_assert!(a.abs_diff(b) <= 1);
            let n = t.data().n_rows();
            prop_assert_eq!(&r.data.values()[..n * 3], t.data().values());
            for (i, o) in r.origins.iter().enumerate() {
                prop_assert!((0.0..1.0).contains(&o.u));
                let want: Vec<f64> = interpolate(t.data().row(o.a), t.data().row(o.b), o.u).collect();
                prop_assert_eq!(r.data.row(n + i), &want[..]);
            }
            let again = smote(&t, &ResamplePlan::new(Sampling::Smote, seed)).unwrap();
            prop_assert_eq!(again, r);
        }
    }

    #[test]
    fn seed_stable_across_thread_counts() {
        let x: Vec<f64> = (0..300).map(|i| ((i * 37) % 101) as f64 / 7.0).collect();
        let y: Vec<u8> = (0..100).map(|i| (i % 5 == 0) as u8).collect();
        let t = set(x, 3, y);
        let plan = ResamplePlan::new(Sampling::Smote, 42);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| smote(&t, &plan).unwrap())
        };
        assert_eq!(run(1), run(4));
    }
}
