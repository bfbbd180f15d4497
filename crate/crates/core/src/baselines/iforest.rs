use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::numerics::{Matrix, SeededRng, Stream};

pub const DEFAULT_TREES: usize = 100;
pub const DEFAULT_SUBSAMPLE: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Leaf { size: usize },
    Split { dim: usize, value: f64, left: usize, right: usize },
}

/// Nodes stored in an arena; index 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsolationTree {
    pub nodes: Vec<Node>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsolationForestModel {
    pub trees: Vec<IsolationTree>,
    /// Subsample size actually used, `min(ψ, N)`.
    pub subsample: usize,
    pub height_limit: usize,
    pub dim: usize,
}

/// Average unsuccessful-search path length in a binary search tree of `n`
/// keys: `2H(n−1) − 2(n−1)/n`, zero for `n ≤ 1`.
pub fn average_path_length(n: usize) -> f64 {
    if n <= 1 {
        return 0.0;
    }
    let m = n - 1;
    let harmonic: f64 = (1..=m).map(|k| 1.0 / k as f64).sum();
    2.0 * harmonic - 2.0 * m as f64 / n as f64
}

fn ceil_log2(n: usize) -> usize {
    if n <= 1 {
        0
    } else {
        (usize::BITS - (n - 1).leading_zeros()) as usize
    }
}

struct Builder<'a> {
    x: &'a Matrix<f64>,
    limit: usize,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn grow(&mut self, idx: &mut [usize], depth: usize, rng: &mut SeededRng) -> usize {
        let at = self.nodes.len();
        self.nodes.push(Node::Leaf { size: idx.len() });
        if depth >= self.limit || idx.len() <= 1 {
            return at;
        }
        let d = self.x.cols();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for &i in idx.iter() {
            for (k, &v) in self.x.row(i).iter().enumerate() {
                lo[k] = lo[k].min(v);
                hi[k] = hi[k].max(v);
            }
        }
        let varying: Vec<usize> = (0..d).filter(|&k| hi[k] > lo[k]).collect();
        if varying.is_empty() {
            return at;
        }
        let dim = varying[rng.below(varying.len())];
        let value = rng.uniform(lo[dim], hi[dim]);
        let mut split = 0;
        for i in 0..idx.len() {
            if self.x.get(idx[i], dim) < value {
                idx.swap(i, split);
                split += 1;
            }
        }
        let (left_idx, right_idx) = idx.split_at_mut(split);
        let left = self.grow(left_idx, depth + 1, rng);
        let right = self.grow(right_idx, depth + 1, rng);
        self.nodes[at] = Node::Split { dim, value, left, right };
        at
    }
}

/// `t` trees, each grown on its own subsample of `min(ψ, N)` rows drawn
/// without replacement, to depth `⌈log₂ min(ψ, N)⌉`.
pub fn iforest_fit(data: &Dataset, trees: usize, subsample: usize, seed: u64) -> Result<IsolationForestModel> {
    if trees == 0 {
        return Err(Error::invalid("trees", "must be at least 1"));
    }
    if subsample < 2 {
        return Err(Error::invalid("subsample", format!("must be at least 2, got {subsample}")));
    }
    let n = data.n_rows();
    if n < 2 {
        return Err(Error::invalid("data", format!("isolation forest needs at least 2 rows, got {n}")));
    }
    let psi = subsample.min(n);
    let limit = ceil_log2(psi);
    let mut rng = SeededRng::new(seed, Stream::IsolationForest);
    let mut forest = Vec::with_capacity(trees);
    for _ in 0..trees {
        let mut idx = rng.sample_indices(n, psi);
        let mut b = Builder {
            x: data.x(),
            limit,
            nodes: Vec::new(),
        };
        b.grow(&mut idx, 0, &mut rng);
        forest.push(IsolationTree { nodes: b.nodes });
    }
    Ok(IsolationForestModel {
        trees: forest,
        subsample: psi,
        height_limit: limit,
        dim: data.n_cols(),
    })
}

impl IsolationTree {
    /// Edges walked to the leaf plus the correction for the points left there.
    pub fn path_length(&self, query: &[f64]) -> f64 {
        let mut at = 0;
        let mut depth = 0.0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { size } => return depth + average_path_length(*size),
                Node::Split { dim, value, left, right } => {
                    at = if query[*dim] < *value { *left } else { *right };
                    depth += 1.0;
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

/// `2^(−E[h(x)] / c(ψ))`, in `(0, 1]`; higher is more anomalous.
pub fn iforest_score(model: &IsolationForestModel, query: &[f64]) -> Result<f64> {
    if query.len() != model.dim {
        return Err(Error::DimensionMismatch {
            op: "isolation forest query",
            left_rows: 1,
            left_cols: query.len(),
            right_rows: 1,
            right_cols: model.dim,
        });
    }
    let mean = model.trees.iter().map(|t| t.path_length(query)).sum::<f64>() / model.trees.len() as f64;
    Ok(score_from_mean_path(mean, model.subsample))
}

fn score_from_mean_path(mean: f64, subsample: usize) -> f64 {
    let c = average_path_length(subsample);
    if c == 0.0 {
        return 1.0;
    }
    2f64.powf(-mean / c)
}

pub fn iforest_score_all(model: &IsolationForestModel, data: &Dataset) -> Result<Vec<f64>> {
    if data.is_empty() {
        return Ok(Vec::new());
    }
    data.x().iter_rows().map(|q| iforest_score(model, q)).collect()
}
