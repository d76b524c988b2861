//! Logistic regression and gradient-boosted trees, plus their text format.

mod gbt;
mod logreg;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub use gbt::{leaf_weight, train_gbt, GbtModel, GbtParams, Node, Tree};
pub use logreg::{loss_and_gradient, newton_direction, train_logreg, LogRegModel, LogRegParams};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Learner {
    LogReg,
    Gbt,
}

impl Learner {
    pub fn as_str(self) -> &'static str {
        match self {
            Learner::LogReg => "logreg",
            Learner::Gbt => "gbt",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "logreg" => Some(Learner::LogReg),
            "gbt" | "xgboost" => Some(Learner::Gbt),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub logreg: LogRegParams,
    pub gbt: GbtParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TrainedModel {
    LogReg(LogRegModel),
    Gbt(GbtModel),
}

pub fn train(learner: Learner, data: &Dataset, hyper: &Hyperparams) -> Result<TrainedModel> {
    let (names, x, y) = (data.names(), data.values(), data.labels());
    Ok(match learner {
        Learner::LogReg => TrainedModel::LogReg(train_logreg(names, x, y, &hyper.logreg)?),
        Learner::Gbt => TrainedModel::Gbt(train_gbt(names, x, y, &hyper.gbt)?),
    })
}

const LOGREG_HEADER: &str = "mailrisk-logreg 1";
const GBT_HEADER: &str = "mailrisk-gbt 1";

impl TrainedModel {
    pub fn learner(&self) -> Learner {
        match self {
            TrainedModel::LogReg(_) => Learner::LogReg,
            TrainedModel::Gbt(_) => Learner::Gbt,
        }
    }

    pub fn names(&self) -> &[String] {
        match self {
            TrainedModel::LogReg(m) => &m.names,
            TrainedModel::Gbt(m) => &m.names,
        }
    }

    /// Probabilities for row-major `x` with the training feature count.
    pub fn predict_proba(&self, x: &[f64], n_features: usize) -> Result<Vec<f64>> {
        let p = self.names().len();
        if n_features != p || x.len() % p != 0 {
            return Err(Error::Data(format!("model expects {p} features, got {n_features}")));
        }
        Ok(x.chunks_exact(p)
            .map(|row| match self {
                TrainedModel::LogReg(m) => m.predict_row(row),
                TrainedModel::Gbt(m) => m.predict_row(row),
            })
            .collect())
    }

    /// Predicts a dataset whose feature names must match the model's.
    pub fn predict_dataset(&self, data: &Dataset) -> Result<Vec<f64>> {
        if data.names() != self.names() {
            return Err(Error::Data(format!(
                "feature mismatch: model has [{}], data has [{}]",
                self.names().join(","),
                data.names().join(",")
            )));
        }
        self.predict_proba(data.values(), data.n_features())
    }

    /// Versioned text dump. Numbers use the shortest exact decimal form, so
    /// [`TrainedModel::from_text`] restores the model bit for bit.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        match self {
            TrainedModel::LogReg(m) => {
                let _ = writeln!(s, "{LOGREG_HEADER}");
                let _ = writeln!(s, "l2 {}", m.l2);
                let _ = writeln!(s, "intercept {}", m.intercept);
                for (c, n) in m.coefficients.iter().zip(&m.names) {
                    let _ = writeln!(s, "coef {c} {n}");
                }
                for t in &m.trace {
                    let _ = writeln!(s, "trace {t}");
                }
            }
            TrainedModel::Gbt(m) => {
                let p = &m.params;
                let _ = writeln!(s, "{GBT_HEADER}");
                let _ = writeln!(
                    s,
                    "params {} {} {} {} {} {}",
                    p.n_trees, p.max_depth, p.eta, p.lambda, p.gamma, p.min_child_weight
                );
                let _ = writeln!(s, "base_score {}", m.base_score);
                for n in &m.names {
                    let _ = writeln!(s, "feature {n}");
                }
                for t in &m.trace {
                    let _ = writeln!(s, "trace {t}");
                }
                for t in &m.trees {
                    let _ = writeln!(s, "tree {}", t.nodes.len());
                    for node in &t.nodes {
                        match node {
                            Node::Split {
                                feature,
                                threshold,
                                left,
                                right,
                                gain,
                                g,
                                h,
                            } => {
                                let _ = writeln!(s, "split {feature} {threshold} {left} {right} {gain} {g} {h}");
                            }
                            Node::Leaf { weight, g, h } => {
                                let _ = writeln!(s, "leaf {weight} {g} {h}");
                            }
                        }
                    }
                }
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |why: String| Error::artifact("<model>", why);
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default();
        let num = |tok: Option<&str>| -> Result<f64> {
            let t = tok.ok_or_else(|| bad("truncated line".into()))?;
            t.parse::<f64>().map_err(|_| bad(format!("bad number `{t}`")))
        };
        let int = |tok: Option<&str>| -> Result<usize> {
            let t = tok.ok_or_else(|| bad("truncated line".into()))?;
            t.parse::<usize>().map_err(|_| bad(format!("bad integer `{t}`")))
        };

        if header == LOGREG_HEADER {
            let mut m = LogRegModel {
                names: vec![],
                intercept: 0.0,
                coefficients: vec![],
                l2: 0.0,
                trace: vec![],
            };
            for line in lines {
                let (key, rest) = line.split_once(' ').unwrap_or((line, ""));
                match key {
                    "l2" => m.l2 = num(Some(rest))?,
                    "intercept" => m.intercept = num(Some(rest))?,
                    "coef" => {
                        let (c, name) = rest.split_once(' ').ok_or_else(|| bad("coef without a name".into()))?;
                        m.coefficients.push(num(Some(c))?);
                        m.names.push(name.to_string());
                    }
                    "trace" => m.trace.push(num(Some(rest))?),
                    "" => {}
                    other => return Err(bad(format!("unknown logreg key `{other}`"))),
                }
            }
            return Ok(TrainedModel::LogReg(m));
        }
        if header != GBT_HEADER {
            return Err(bad(format!("unknown model header `{header}`")));
        }

        let mut m = GbtModel {
            names: vec![],
            params: GbtParams::default(),
            base_score: 0.0,
            trees: vec![],
            trace: vec![],
        };
        let mut expected_nodes = Vec::new();
        for line in lines {
            let (key, rest) = line.split_once(' ').unwrap_or((line, ""));
            let mut tok = rest.split(' ');
            match key {
                "params" => {
                    m.params = GbtParams {
                        n_trees: int(tok.next())?,
                        max_depth: int(tok.next())?,
                        eta: num(tok.next())?,
                        lambda: num(tok.next())?,
                        gamma: num(tok.next())?,
                        min_child_weight: num(tok.next())?,
                    }
                }
                "base_score" => m.base_score = num(Some(rest))?,
                "feature" => m.names.push(rest.to_string()),
                "trace" => m.trace.push(num(Some(rest))?),
                "tree" => {
                    expected_nodes.push(int(Some(rest))?);
                    m.trees.push(Tree { nodes: vec![] });
                }
                "split" | "leaf" => {
                    let tree = m.trees.last_mut().ok_or_else(|| bad("node before any tree".into()))?;
                    let node = if key == "split" {
                        Node::Split {
                            feature: int(tok.next())?,
                            threshold: num(tok.next())?,
                            left: int(tok.next())?,
                            right: int(tok.next())?,
                            gain: num(tok.next())?,
                            g: num(tok.next())?,
                            h: num(tok.next())?,
                        }
                    } else {
                        Node::Leaf {
                            weight: num(tok.next())?,
                            g: num(tok.next())?,
                            h: num(tok.next())?,
                        }
                    };
                    tree.nodes.push(node);
                }
                "" => {}
                other => return Err(bad(format!("unknown gbt key `{other}`"))),
            }
        }
        for (t, &n) in m.trees.iter().zip(&expected_nodes) {
            if t.nodes.len() != n {
                return Err(bad(format!("tree declares {n} nodes but has {}", t.nodes.len())));
            }
            for node in &t.nodes {
                if let Node::Split { feature, left, right, .. } = *node {
                    if feature >= m.names.len() || left >= n || right >= n {
                        return Err(bad("split points outside the tree".into()));
                    }
                }
            }
        }
        Ok(TrainedModel::Gbt(m))
    }
}
