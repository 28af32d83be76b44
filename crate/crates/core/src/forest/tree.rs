use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ForestParams, MaxFeatures};

/// A node of a fitted regression tree. `n` counts the training samples
/// (with bootstrap multiplicity) that reached the node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TreeNode {
    /// Routes `x[feature] <= threshold` to `left`, everything else to `right`.
    Internal {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        n: usize,
    },
    Leaf {
        value: f64,
        n: usize,
    },
}

impl TreeNode {
    pub fn n(&self) -> usize {
        match self {
            TreeNode::Internal { n, .. } | TreeNode::Leaf { n, .. } => *n,
        }
    }
}

/// Regression tree stored as a node arena rooted at index 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn leaf(value: f64, n: usize) -> Self {
        Self {
            nodes: vec![TreeNode::Leaf { value, n }],
        }
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                TreeNode::Leaf { value, .. } => return *value,
                TreeNode::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => idx = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    /// Expected output over the training samples, i.e. leaf values weighted
    /// by their sample counts.
    pub fn expected_value(&self) -> f64 {
        let total = self.nodes[0].n() as f64;
        self.nodes
            .iter()
            .filter_map(|node| match node {
                TreeNode::Leaf { value, n } => Some(value * *n as f64),
                _ => None,
            })
            .sum::<f64>()
            / total
    }

    pub fn depth(&self) -> usize {
        fn walk(t: &Tree, idx: usize) -> usize {
            match &t.nodes[idx] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Internal { left, right, .. } => 1 + walk(t, *left).max(walk(t, *right)),
            }
        }
        walk(self, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, TreeNode::Leaf { .. })).count()
    }

    /// Features used by at least one split.
    pub fn split_features(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            TreeNode::Internal { feature, .. } => Some(*feature),
            _ => None,
        })
    }
}

struct Candidate {
    score: f64,
    feature: usize,
    threshold: f64,
    /// Number of samples routed left.
    n_left: usize,
}

impl Candidate {
    /// Higher score wins, then lower feature index, then lower threshold.
    fn beats(&self, other: &Candidate) -> bool {
        if self.score != other.score {
            return self.score > other.score;
        }
        (self.feature, self.threshold) < (other.feature, other.threshold)
    }
}

pub(super) struct Grower<'a, R: Rng + ?Sized> {
    pub x: &'a [Vec<f64>],
    pub y: &'a [f64],
    pub params: &'a ForestParams,
    pub n_features: usize,
    pub rng: &'a mut R,
    pub nodes: Vec<TreeNode>,
}

impl<R: Rng + ?Sized> Grower<'_, R> {
    pub fn grow(&mut self, indices: &mut [usize], depth: usize) -> usize {
        let id = self.nodes.len();
        let n = indices.len();
        let first = self.y[indices[0]];
        let pure = indices.iter().all(|&i| self.y[i] == first);
        // A pure node keeps its target exactly instead of a rounded mean.
        let mean = if pure {
            first
        } else {
            indices.iter().map(|&i| self.y[i]).sum::<f64>() / n as f64
        };
        self.nodes.push(TreeNode::Leaf { value: mean, n });

        let at_depth_limit = self.params.max_depth.is_some_and(|d| depth >= d);
        if at_depth_limit || pure || n < 2 * self.params.min_samples_leaf {
            return id;
        }

        let Some(best) = self.best_split(indices, mean) else {
            return id;
        };

        let f = best.feature;
        let x = self.x;
        indices.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]).then(a.cmp(&b)));
        let (left_idx, right_idx) = indices.split_at_mut(best.n_left);
        let left = self.grow(left_idx, depth + 1);
        let right = self.grow(right_idx, depth + 1);
        self.nodes[id] = TreeNode::Internal {
            feature: f,
            threshold: best.threshold,
            left,
            right,
            n,
        };
        id
    }

    /// Features are visited in random order until `max_features` of them
    /// have shown more than one distinct value in this node; constant
    /// features do not count against the budget.
    fn best_split(&mut self, indices: &[usize], mean: f64) -> Option<Candidate> {
        let budget = self.params.max_features.resolve(self.n_features);
        let mut order: Vec<usize> = (0..self.n_features).collect();
        let mut best: Option<Candidate> = None;
        let mut visited = 0;
        let mut sorted: Vec<usize> = indices.to_vec();
        let msl = self.params.min_samples_leaf;
        let n = indices.len();

        for k in 0..self.n_features {
            if visited >= budget {
                break;
            }
            let f = if budget >= self.n_features {
                k
            } else {
                let j = self.rng.random_range(k..self.n_features);
                order.swap(k, j);
                order[k]
            };

            let x = self.x;
            sorted.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]).then(a.cmp(&b)));
            if x[sorted[0]][f] == x[sorted[n - 1]][f] {
                continue;
            }
            visited += 1;

            let total: f64 = sorted.iter().map(|&i| self.y[i] - mean).sum();
            let mut left_sum = 0.0;
            for pos in 1..n {
                left_sum += self.y[sorted[pos - 1]] - mean;
                if pos < msl || n - pos < msl {
                    continue;
                }
                let lo = x[sorted[pos - 1]][f];
                let hi = x[sorted[pos]][f];
                if lo == hi {
                    continue;
                }
                let right_sum = total - left_sum;
                let score = left_sum * left_sum / pos as f64 + right_sum * right_sum / (n - pos) as f64;
                let mut threshold = lo + (hi - lo) / 2.0;
                if threshold >= hi {
                    threshold = lo;
                }
                let cand = Candidate {
                    score,
                    feature: f,
                    threshold,
                    n_left: pos,
                };
                if best.as_ref().is_none_or(|b| cand.beats(b)) {
                    best = Some(cand);
                }
            }
        }
        best
    }
}

impl MaxFeatures {
    pub fn resolve(self, p: usize) -> usize {
        match self {
            MaxFeatures::All => p,
            MaxFeatures::Third => p.div_ceil(3).max(1),
            MaxFeatures::Count(k) => k.clamp(1, p.max(1)),
        }
    }
}
