//! Seeded stand-in for the campaign data.
//!
//! Informative columns come in pairs of noisy copies of a latent factor.
//! The response depends on the factors through a linear score or, in XOR
//! mode, through a linear score plus products of signs of factor pairs.
//! The linear part keeps every informative column visible to a univariate
//! screen; the sign products carry no marginal signal at all, so only a
//! model with interactions can use them. Noise columns are a mix of normal,
//! log-normal and small-integer variables.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::cleanse::BUREAU_CODES;
use crate::error::{Error, Result};
use crate::learners::sigmoid;
use crate::table::{Column, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Link {
    Linear,
    Xor,
}

impl Link {
    pub fn as_str(self) -> &'static str {
        match self {
            Link::Linear => "linear",
            Link::Xor => "xor",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "linear" => Some(Link::Linear),
            "xor" => Some(Link::Xor),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_rows: usize,
    pub n_features: usize,
    pub n_informative: usize,
    pub link: Link,
    pub coded_rate: f64,
    pub missing_rate: f64,
    pub responder_frac: f64,
    pub bad_frac_among_responders: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_rows: 20_000,
            n_features: 30,
            n_informative: 10,
            link: Link::Xor,
            coded_rate: 0.02,
            missing_rate: 0.02,
            responder_frac: 0.248,
            bad_frac_among_responders: 0.373,
            seed: 42,
        }
    }
}

const COPY_NOISE: f64 = 0.1;

/// Linear and interaction weights for the two labels.
struct Weights {
    linear: f64,
    interaction: f64,
    /// Alternate the sign of the linear terms.
    alternate: bool,
}

impl Weights {
    fn score(&self, f: &[f64], link: Link) -> f64 {
        let lin: f64 = f
            .iter()
            .enumerate()
            .map(|(k, v)| if self.alternate && k % 2 == 1 { -v } else { *v })
            .sum();
        let mut s = self.linear * lin;
        // Factors pair up as (0,1), (2,3), ...; an odd one out pairs with 0.
        if link == Link::Xor && f.len() >= 2 {
            for k in (0..f.len()).step_by(2) {
                let other = f[(k + 1) % f.len()];
                s += self.interaction * f[k].signum() * other.signum();
            }
        }
        s
    }
}

fn weights(link: Link, for_bad: bool) -> Weights {
    match (link, for_bad) {
        (Link::Linear, false) => Weights { linear: 0.8, interaction: 0.0, alternate: false },
        (Link::Linear, true) => Weights { linear: 0.6, interaction: 0.0, alternate: true },
        (Link::Xor, false) => Weights { linear: 1.5, interaction: 4.5, alternate: false },
        (Link::Xor, true) => Weights { linear: 0.6, interaction: 2.0, alternate: true },
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Intercept `a` with mean(sigmoid(a + s)) = `frac`, by bisection.
fn calibrate(scores: &[f64], frac: f64) -> f64 {
    let mean = |a: f64| scores.iter().map(|s| sigmoid(a + s)).sum::<f64>() / scores.len() as f64;
    let (mut lo, mut hi) = (-50.0, 50.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if mean(mid) < frac {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Columns `x01..` plus `goodbad` (missing for non-responders, 1 = bad).
pub fn generate_synthetic(spec: &SynthSpec) -> Result<Table> {
    let frac_ok = |f: f64| f > 0.0 && f < 1.0;
    let rate_ok = |r: f64| (0.0..1.0).contains(&r);
    if spec.n_informative > spec.n_features {
        return Err(Error::Config(format!(
            "n_informative {} exceeds n_features {}",
            spec.n_informative, spec.n_features
        )));
    }
    if spec.n_rows == 0 || spec.n_features == 0 {
        return Err(Error::Config("synthetic data needs rows and features".into()));
    }
    if !frac_ok(spec.responder_frac) || !frac_ok(spec.bad_frac_among_responders) {
        return Err(Error::Config("class fractions must lie in (0, 1)".into()));
    }
    if !rate_ok(spec.coded_rate) || !rate_ok(spec.missing_rate) || spec.coded_rate + spec.missing_rate >= 1.0 {
        return Err(Error::Config("coded_rate and missing_rate must lie in [0, 1) with a sum below 1".into()));
    }

    let n = spec.n_rows;
    let n_factors = spec.n_informative.div_ceil(2);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let factors: Vec<Vec<f64>> = (0..n).map(|_| (0..n_factors).map(|_| normal(&mut rng)).collect()).collect();

    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(spec.n_features);
    for j in 0..spec.n_informative {
        let k = j / 2;
        columns.push((0..n).map(|i| factors[i][k] + COPY_NOISE * normal(&mut rng)).collect());
    }
    for j in spec.n_informative..spec.n_features {
        let col = match j % 3 {
            0 => (0..n).map(|_| normal(&mut rng)).collect(),
            1 => (0..n).map(|_| normal(&mut rng).exp()).collect(),
            _ => (0..n).map(|_| f64::from(rng.random_range(0..10u8))).collect(),
        };
        columns.push(col);
    }

    let resp_scores: Vec<f64> = factors.iter().map(|f| weights(spec.link, false).score(f, spec.link)).collect();
    let a = calibrate(&resp_scores, spec.responder_frac);
    let responder: Vec<bool> = resp_scores.iter().map(|s| rng.random::<f64>() < sigmoid(a + s)).collect();

    let resp_rows: Vec<usize> = (0..n).filter(|&i| responder[i]).collect();
    let bad_scores: Vec<f64> = resp_rows
        .iter()
        .map(|&i| weights(spec.link, true).score(&factors[i], spec.link))
        .collect();
    let b = if resp_rows.is_empty() { 0.0 } else { calibrate(&bad_scores, spec.bad_frac_among_responders) };
    let mut goodbad = vec![None; n];
    for (&i, s) in resp_rows.iter().zip(&bad_scores) {
        goodbad[i] = Some(if rng.random::<f64>() < sigmoid(b + s) { 1.0 } else { 0.0 });
    }

    let mut out = Vec::with_capacity(spec.n_features + 1);
    for (j, values) in columns.into_iter().enumerate() {
        let cells = values
            .into_iter()
            .map(|v| {
                let u: f64 = rng.random();
                if u < spec.coded_rate {
                    Some(BUREAU_CODES[rng.random_range(0..BUREAU_CODES.len())] as f64)
                } else if u < spec.coded_rate + spec.missing_rate {
                    None
                } else {
                    Some(v)
                }
            })
            .collect();
        out.push(Column::new(format!("x{:02}", j + 1), cells));
    }
    out.push(Column::new("goodbad", goodbad));
    Ok(Table::new(out)?.logged(
        "synth",
        format!(
            "rows={n} features={} informative={} link={} seed={}",
            spec.n_features,
            spec.n_informative,
            spec.link.as_str(),
            spec.seed
        ),
    ))
}
