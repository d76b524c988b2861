use log::debug;
use serde::{Deserialize, Serialize};

use super::sigmoid;
use crate::error::{Error, Result};
use crate::linalg::{solve_spd, Matrix};

pub const PROB_CLAMP: f64 = 1e-12;
pub const MAX_HALVINGS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRegParams {
    pub l2: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for LogRegParams {
    fn default() -> Self {
        LogRegParams {
            l2: 1e-4,
            max_iter: 100,
            tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    pub names: Vec<String>,
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub l2: f64,
    /// Objective after each accepted step, starting from the initial point.
    pub trace: Vec<f64>,
}

/// Row-major features `x` with `p` columns.
struct Problem<'a> {
    x: &'a [f64],
    y: &'a [u8],
    p: usize,
    l2: f64,
}

impl Problem<'_> {
    fn rows(&self) -> impl Iterator<Item = (&[f64], u8)> {
        self.x.chunks_exact(self.p).zip(self.y.iter().copied())
    }

    fn margin(row: &[f64], beta: &[f64]) -> f64 {
        beta[0] + row.iter().zip(&beta[1..]).map(|(x, b)| x * b).sum::<f64>()
    }

    fn loss(&self, beta: &[f64]) -> f64 {
        let n = self.y.len() as f64;
        let mut total = 0.0;
        for (row, y) in self.rows() {
            let pr = sigmoid(Self::margin(row, beta)).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            total -= if y == 1 { pr.ln() } else { (1.0 - pr).ln() };
        }
        let penalty: f64 = beta[1..].iter().map(|b| b * b).sum();
        total / n + 0.5 * self.l2 * penalty
    }

    fn gradient(&self, beta: &[f64]) -> Vec<f64> {
        let n = self.y.len() as f64;
        let mut g = vec![0.0; self.p + 1];
        for (row, y) in self.rows() {
            let r = sigmoid(Self::margin(row, beta)) - f64::from(y);
            g[0] += r;
            for (gj, x) in g[1..].iter_mut().zip(row) {
                *gj += r * x;
            }
        }
        for (j, gj) in g.iter_mut().enumerate() {
            *gj /= n;
            if j > 0 {
                *gj += self.l2 * beta[j];
            }
        }
        g
    }

    fn hessian(&self, beta: &[f64]) -> Matrix {
        let n = self.y.len() as f64;
        let d = self.p + 1;
        let mut h = Matrix::zeros(d, d);
        let mut ext = vec![1.0; d];
        for (row, _) in self.rows() {
            let pr = sigmoid(Self::margin(row, beta));
            let w = pr * (1.0 - pr);
            ext[1..].copy_from_slice(row);
            for a in 0..d {
                let wa = w * ext[a];
                for b in 0..=a {
                    h[(a, b)] += wa * ext[b];
                }
            }
        }
        for a in 0..d {
            for b in 0..=a {
                h[(a, b)] /= n;
                h[(b, a)] = h[(a, b)];
            }
            if a > 0 {
                h[(a, a)] += self.l2;
            }
        }
        h
    }
}

/// Objective and gradient at `beta = [intercept, coefficients...]`.
pub fn loss_and_gradient(x: &[f64], y: &[u8], p: usize, l2: f64, beta: &[f64]) -> (f64, Vec<f64>) {
    let prob = Problem { x, y, p, l2 };
    (prob.loss(beta), prob.gradient(beta))
}

/// The Newton direction `-H^{-1} g` at `beta`.
pub fn newton_direction(x: &[f64], y: &[u8], p: usize, l2: f64, beta: &[f64]) -> Result<Vec<f64>> {
    let prob = Problem { x, y, p, l2 };
    let g = prob.gradient(beta);
    let (step, _) = solve_spd(&prob.hessian(beta), &g)?;
    Ok(step.into_iter().map(|s| -s).collect())
}

/// Newton's method with step halving on mean log-loss plus an L2 penalty
/// that leaves the intercept alone.
pub fn train_logreg(names: &[String], x: &[f64], y: &[u8], params: &LogRegParams) -> Result<LogRegModel> {
    let p = names.len();
    if p == 0 || x.len() != p * y.len() || y.is_empty() {
        return Err(Error::Data("logistic regression needs a non-empty n x p design".into()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("non-finite feature value".into()));
    }
    if !(params.l2 >= 0.0) || params.tol <= 0.0 {
        return Err(Error::Config("logreg needs l2 >= 0 and tol > 0".into()));
    }
    let prob = Problem { x, y, p, l2: params.l2 };
    let mut beta = vec![0.0; p + 1];
    let mut loss = prob.loss(&beta);
    let mut trace = vec![loss];

    for iter in 0..params.max_iter {
        let g = prob.gradient(&beta);
        if g.iter().fold(0.0f64, |m, v| m.max(v.abs())) < params.tol {
            break;
        }
        let (step, _) = solve_spd(&prob.hessian(&beta), &g)?;
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..=MAX_HALVINGS {
            let cand: Vec<f64> = beta.iter().zip(&step).map(|(b, s)| b - t * s).collect();
            let cand_loss = prob.loss(&cand);
            if !cand_loss.is_finite() {
                return Err(Error::Numerical(format!("non-finite logreg loss at iteration {iter}")));
            }
            if cand_loss < loss {
                beta = cand;
                loss = cand_loss;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            debug!("logreg line search stalled at iteration {iter}");
            break;
        }
        trace.push(loss);
    }

    Ok(LogRegModel {
        names: names.to_vec(),
        intercept: beta[0],
        coefficients: beta[1..].to_vec(),
        l2: params.l2,
        trace,
    })
}

impl LogRegModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let z = self.intercept + row.iter().zip(&self.coefficients).map(|(x, b)| x * b).sum::<f64>();
        sigmoid(z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn names(p: usize) -> Vec<String> {
        (0..p).map(|i| format!("f{i}")).collect()
    }

    #[test]
    fn separable_converges() {
        let x: Vec<f64> = (0..20).map(|i| i as f64 - 9.5).collect();
        let y: Vec<u8> = (0..20).map(|i| (i >= 10) as u8).collect();
        let m = train_logreg(&names(1), &x, &y, &LogRegParams { l2: 1e-2, ..Default::default() }).unwrap();
        assert!(m.coefficients[0].is_finite() && m.coefficients[0] > 0.0);
        for (xi, yi) in x.iter().zip(&y) {
            assert_eq!((m.predict_row(&[*xi]) >= 0.5) as u8, *yi);
        }
        assert!(m.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn coin_flips() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 20_000;
        let x: Vec<f64> = (0..n * 2).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let y: Vec<u8> = (0..n).map(|_| rng.random_bool(0.3) as u8).collect();
        let m = train_logreg(&names(2), &x, &y, &LogRegParams::default()).unwrap();
        let mean = y.iter().map(|&v| v as f64).sum::<f64>() / n as f64;
        assert!((m.intercept - (mean / (1.0 - mean)).ln()).abs() < 0.05);
        assert!(m.coefficients.iter().all(|c| c.abs() < 0.05));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..5 {
            let (n, p) = (60, 5);
            let x: Vec<f64> = (0..n * p).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
            let y: Vec<u8> = (0..n).map(|_| rng.random_bool(0.4) as u8).collect();
            let beta: Vec<f64> = (0..=p).map(|_| rng.random::<f64>() - 0.5).collect();
            let (_, g) = loss_and_gradient(&x, &y, p, 0.1, &beta);
            for j in 0..=p {
                let eps = 1e-6;
                let mut hi = beta.clone();
                hi[j] += eps;
                let mut lo = beta.clone();
                lo[j] -= eps;
                let fd = (loss_and_gradient(&x, &y, p, 0.1, &hi).0 - loss_and_gradient(&x, &y, p, 0.1, &lo).0) / (2.0 * eps);
                assert!((fd - g[j]).abs() <= 1e-6 * g[j].abs().max(1e-3), "{fd} vs {}", g[j]);
            }
        }
    }

    #[test]
    fn newton_direction_solves_system() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (n, p) = (40, 3);
        let x: Vec<f64> = (0..n * p).map(|_| rng.random::<f64>()).collect();
        let y: Vec<u8> = (0..n).map(|_| rng.random_bool(0.5) as u8).collect();
        let beta = vec![0.1, -0.2, 0.3, 0.0];
        let d = newton_direction(&x, &y, p, 0.01, &beta).unwrap();
        let prob = Problem { x: &x, y: &y, p, l2: 0.01 };
        let hd = prob.hessian(&beta).mul_vec(&d);
        let g = prob.gradient(&beta);
        for (a, b) in hd.iter().zip(&g) {
            assert!((a + b).abs() < 1e-10);
        }
    }
}
