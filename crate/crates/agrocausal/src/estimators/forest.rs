//! Random forest regression: CART trees with variance-reduction splits,
//! bootstrap row sampling and per-split feature subsampling.
//!
//! Per-tree RNGs derive from the master seed, so fits are bit-reproducible
//! regardless of whether trees are built in parallel or sequentially.

use super::EstimatorError;
use crate::exec;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub min_leaf: usize,
    /// `None` grows until the leaf-size floor stops splitting.
    pub max_depth: Option<usize>,
    /// `None` defaults to ceil(p / 3).
    pub features_per_split: Option<usize>,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 200,
            min_leaf: 5,
            max_depth: None,
            features_per_split: None,
            seed: 0,
        }
    }
}

impl ForestParams {
    pub fn with_seed(&self, seed: u64) -> ForestParams {
        ForestParams { seed, ..*self }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn predict(&self, row: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if row[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForestModel {
    trees: Vec<Tree>,
    pub params: ForestParams,
}

impl ForestModel {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict(row)).sum();
        sum / self.trees.len() as f64
    }

    pub fn predict_all(&self, x: &[Vec<f64>]) -> Vec<f64> {
        x.iter().map(|r| self.predict(r)).collect()
    }
}

struct TreeBuilder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    min_leaf: usize,
    max_depth: usize,
    features_per_split: usize,
    nodes: Vec<Node>,
}

impl TreeBuilder<'_> {
    fn build(&mut self, indices: &mut [usize], depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let n = indices.len();
        let mean = indices.iter().map(|&i| self.y[i]).sum::<f64>() / n as f64;
        let leaf = |nodes: &mut Vec<Node>| {
            nodes.push(Node::Leaf { value: mean });
            nodes.len() - 1
        };
        if depth >= self.max_depth || n < 2 * self.min_leaf {
            return leaf(&mut self.nodes);
        }

        let p = self.x[0].len();
        let mut features: Vec<usize> = (0..p).collect();
        features.shuffle(rng);
        features.truncate(self.features_per_split);
        features.sort_unstable(); // deterministic scan order

        let total_sum: f64 = indices.iter().map(|&i| self.y[i]).sum();
        let mut best: Option<(f64, usize, f64)> = None; // (score, feature, threshold)
        let mut sorted = indices.to_vec();
        for &f in &features {
            sorted.sort_by(|&a, &b| self.x[a][f].partial_cmp(&self.x[b][f]).unwrap());
            let mut left_sum = 0.0;
            for k in 0..n - 1 {
                left_sum += self.y[sorted[k]];
                let nl = k + 1;
                let nr = n - nl;
                if nl < self.min_leaf || nr < self.min_leaf {
                    continue;
                }
                let xv = self.x[sorted[k]][f];
                let xn = self.x[sorted[k + 1]][f];
                if xv == xn {
                    continue;
                }
                let right_sum = total_sum - left_sum;
                // maximizing sum_l^2/n_l + sum_r^2/n_r minimizes SSE
                let score = left_sum * left_sum / nl as f64 + right_sum * right_sum / nr as f64;
                if best.map_or(true, |(s, _, _)| score > s) {
                    best = Some((score, f, 0.5 * (xv + xn)));
                }
            }
        }

        let Some((_, feature, threshold)) = best else {
            return leaf(&mut self.nodes);
        };
        let mid = stable_partition(indices, |&i| self.x[i][feature] <= threshold);
        let (left_idx, right_idx) = indices.split_at_mut(mid);
        // placeholder so child ids are stable
        self.nodes.push(Node::Leaf { value: mean });
        let this = self.nodes.len() - 1;
        let left = self.build(left_idx, depth + 1, rng);
        let right = self.build(right_idx, depth + 1, rng);
        self.nodes[this] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        this
    }
}

/// Stable partition returning the split point.
fn stable_partition(slice: &mut [usize], pred: impl Fn(&usize) -> bool) -> usize {
    let mut buf: Vec<usize> = Vec::with_capacity(slice.len());
    for &v in slice.iter() {
        if pred(&v) {
            buf.push(v);
        }
    }
    let mid = buf.len();
    for &v in slice.iter() {
        if !pred(&v) {
            buf.push(v);
        }
    }
    slice.copy_from_slice(&buf);
    mid
}

/// Fits a regression forest; deterministic for a fixed seed and params.
pub fn fit_forest(
    x: &[Vec<f64>],
    y: &[f64],
    params: &ForestParams,
) -> Result<ForestModel, EstimatorError> {
    assert_eq!(x.len(), y.len());
    let n = x.len();
    if n < params.min_leaf.max(1) {
        return Err(EstimatorError::TooFewRows {
            needed: params.min_leaf.max(1),
            available: n,
        });
    }
    let p = x[0].len();
    let features_per_split = params
        .features_per_split
        .unwrap_or_else(|| p.div_ceil(3))
        .clamp(1, p.max(1));
    let max_depth = params.max_depth.unwrap_or(usize::MAX);

    let trees = exec::map_replicates(params.n_trees, |k| {
        let mut rng = ChaCha8Rng::seed_from_u64(exec::derive_seed(params.seed, k as u64));
        let mut indices: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
        let mut builder = TreeBuilder {
            x,
            y,
            min_leaf: params.min_leaf,
            max_depth,
            features_per_split: if p == 0 { 0 } else { features_per_split },
            nodes: Vec::new(),
        };
        if p == 0 {
            builder.nodes.push(Node::Leaf {
                value: y.iter().sum::<f64>() / n as f64,
            });
        } else {
            builder.build(&mut indices, 0, &mut rng);
        }
        Tree {
            nodes: builder.nodes,
        }
    });

    Ok(ForestModel {
        trees,
        params: *params,
    })
}
