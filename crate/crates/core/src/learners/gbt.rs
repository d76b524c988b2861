use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sigmoid;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbtParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub eta: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub min_child_weight: f64,
}

impl Default for GbtParams {
    fn default() -> Self {
        GbtParams {
            n_trees: 200,
            max_depth: 4,
            eta: 0.1,
            lambda: 1.0,
            gamma: 0.0,
            min_child_weight: 1.0,
        }
    }
}

/// Tree node in preorder. `g` and `h` are the gradient and hessian sums of
/// the training rows that reached the node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split {
        feature: usize,
        /// Rows with `x < threshold` go left.
        threshold: f64,
        left: usize,
        right: usize,
        gain: f64,
        g: f64,
        h: f64,
    },
    Leaf {
        weight: f64,
        g: f64,
        h: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf_of(&self, row: &[f64]) -> usize {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => at = if row[feature] < threshold { left } else { right },
                Node::Leaf { .. } => return at,
            }
        }
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        match self.nodes[self.leaf_of(row)] {
            Node::Leaf { weight, .. } => weight,
            Node::Split { .. } => unreachable!(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    pub names: Vec<String>,
    pub params: GbtParams,
    pub base_score: f64,
    pub trees: Vec<Tree>,
    /// Mean training log-loss before the first tree and after each tree.
    pub trace: Vec<f64>,
}

impl GbtModel {
    pub fn margin(&self, row: &[f64]) -> f64 {
        let mut z = self.base_score;
        for t in &self.trees {
            z += self.params.eta * t.predict(row);
        }
        z
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        sigmoid(self.margin(row))
    }
}

pub fn leaf_weight(g: f64, h: f64, lambda: f64) -> f64 {
    -g / (h + lambda)
}

fn score(g: f64, h: f64, lambda: f64) -> f64 {
    g * g / (h + lambda)
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

struct Builder<'a> {
    x: &'a [f64],
    p: usize,
    grad: &'a [f64],
    hess: &'a [f64],
    params: &'a GbtParams,
}

impl Builder<'_> {
    fn value(&self, row: usize, f: usize) -> f64 {
        self.x[row * self.p + f]
    }

    /// Best split of feature `f` over `rows` sorted by that feature.
    fn best_for_feature(&self, f: usize, rows: &[usize], g: f64, h: f64) -> Option<Candidate> {
        let lambda = self.params.lambda;
        let parent = score(g, h, lambda);
        let (mut gl, mut hl) = (0.0, 0.0);
        let mut best: Option<Candidate> = None;
        for k in 0..rows.len() - 1 {
            gl += self.grad[rows[k]];
            hl += self.hess[rows[k]];
            let (lo, hi) = (self.value(rows[k], f), self.value(rows[k + 1], f));
            if lo == hi {
                continue;
            }
            let (gr, hr) = (g - gl, h - hl);
            if hl < self.params.min_child_weight || hr < self.params.min_child_weight {
                continue;
            }
            let gain = 0.5 * (score(gl, hl, lambda) + score(gr, hr, lambda) - parent) - self.params.gamma;
            if best.is_none_or(|b| gain > b.gain) {
                let mut threshold = lo + (hi - lo) / 2.0;
                if threshold <= lo {
                    threshold = hi;
                }
                best = Some(Candidate {
                    gain,
                    feature: f,
                    threshold,
                });
            }
        }
        best
    }

    /// Grows the subtree for the rows in `sorted` (one row list per feature,
    /// each ordered by that feature) and appends it to `nodes` in preorder.
    fn grow(&self, sorted: Vec<Vec<usize>>, depth: usize, nodes: &mut Vec<Node>) -> usize {
        let rows = &sorted[0];
        let g: f64 = rows.iter().map(|&r| self.grad[r]).sum();
        let h: f64 = rows.iter().map(|&r| self.hess[r]).sum();
        let me = nodes.len();
        let leaf = Node::Leaf {
            weight: leaf_weight(g, h, self.params.lambda),
            g,
            h,
        };
        if depth >= self.params.max_depth || rows.len() < 2 {
            nodes.push(leaf);
            return me;
        }
        // features in order so equal gains keep the smallest index
        let found: Vec<Option<Candidate>> = (0..self.p)
            .into_par_iter()
            .map(|f| self.best_for_feature(f, &sorted[f], g, h))
            .collect();
        let mut best: Option<Candidate> = None;
        for c in found.into_iter().flatten() {
            if best.is_none_or(|b| c.gain > b.gain) {
                best = Some(c);
            }
        }
        let Some(best) = best.filter(|b| b.gain > 0.0) else {
            nodes.push(leaf);
            return me;
        };

        let goes_left = |r: usize| self.value(r, best.feature) < best.threshold;
        let (mut left, mut right) = (Vec::with_capacity(self.p), Vec::with_capacity(self.p));
        for list in &sorted {
            let (l, r): (Vec<usize>, Vec<usize>) = list.iter().partition(|&&r| goes_left(r));
            left.push(l);
            right.push(r);
        }
        drop(sorted);
        nodes.push(Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left: 0,
            right: 0,
            gain: best.gain,
            g,
            h,
        });
        let l = self.grow(left, depth + 1, nodes);
        let r = self.grow(right, depth + 1, nodes);
        if let Node::Split { left, right, .. } = &mut nodes[me] {
            *left = l;
            *right = r;
        }
        me
    }
}

fn mean_log_loss(margins: &[f64], y: &[u8]) -> f64 {
    let total: f64 = margins
        .iter()
        .zip(y)
        .map(|(&z, &l)| {
            // log(1 + e^z) - y z, computed without overflow
            let softplus = if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() };
            softplus - f64::from(l) * z
        })
        .sum();
    total / y.len() as f64
}

/// Second-order boosting of depth-limited regression trees on log-loss,
/// with exact greedy split search.
pub fn train_gbt(names: &[String], x: &[f64], y: &[u8], params: &GbtParams) -> Result<GbtModel> {
    let p = names.len();
    let n = y.len();
    if p == 0 || n == 0 || x.len() != n * p {
        return Err(Error::Data("boosting needs a non-empty n x p design".into()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("non-finite feature value".into()));
    }
    if !(params.eta > 0.0) || params.lambda < 0.0 || params.gamma < 0.0 || params.min_child_weight < 0.0 {
        return Err(Error::Config("boosting needs eta > 0 and non-negative lambda, gamma, min_child_weight".into()));
    }
    let mean = y.iter().map(|&l| f64::from(l)).sum::<f64>() / n as f64;
    let mean = mean.clamp(1e-12, 1.0 - 1e-12);
    let base_score = (mean / (1.0 - mean)).ln();

    let presorted: Vec<Vec<usize>> = (0..p)
        .into_par_iter()
        .map(|f| {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| x[a * p + f].total_cmp(&x[b * p + f]).then(a.cmp(&b)));
            idx
        })
        .collect();

    let mut margins = vec![base_score; n];
    let mut trace = vec![mean_log_loss(&margins, y)];
    let mut trees = Vec::with_capacity(params.n_trees);
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    for _ in 0..params.n_trees {
        for i in 0..n {
            let pr = sigmoid(margins[i]);
            grad[i] = pr - f64::from(y[i]);
            hess[i] = pr * (1.0 - pr);
        }
        let builder = Builder {
            x,
            p,
            grad: &grad,
            hess: &hess,
            params,
        };
        let mut nodes = Vec::new();
        builder.grow(presorted.clone(), 0, &mut nodes);
        let tree = Tree { nodes };
        for (i, m) in margins.iter_mut().enumerate() {
            *m += params.eta * tree.predict(&x[i * p..(i + 1) * p]);
        }
        trace.push(mean_log_loss(&margins, y));
        trees.push(tree);
    }

    Ok(GbtModel {
        names: names.to_vec(),
        params: *params,
        base_score,
        trees,
        trace,
    })
}
