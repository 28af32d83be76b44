//! Random-forest regression surrogate.
//!
//! Trees are CART regressors grown on bootstrap resamples; each tree gets
//! its own seed derived from the forest seed, so fitting in parallel gives
//! the same forest as fitting sequentially.

mod tree;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use tree::{Tree, TreeNode};

use crate::seeds;
use crate::study::EncodedMatrix;

/// Identifier written into serialized forests.
pub const FOREST_FORMAT: &str = "hpscope-forest";
pub const FOREST_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ForestError {
    #[error("invalid forest parameters: {0}")]
    InvalidParams(String),
    #[error("training data is empty")]
    EmptyData,
    #[error("training data is ragged: row {row} has {got} columns, expected {expected}")]
    Ragged { row: usize, expected: usize, got: usize },
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("expected {expected} values, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("need at least two rows to split, got {0}")]
    TooFewRows(usize),
    #[error("test fraction must lie in (0, 1), got {0}")]
    BadFraction(f64),
    #[error("malformed forest document: {0}")]
    Format(String),
}

/// How many features each split considers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    All,
    /// `ceil(p / 3)`.
    Third,
    Count(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    /// `None` grows until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub max_features: MaxFeatures,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 200,
            max_depth: None,
            min_samples_leaf: 2,
            max_features: MaxFeatures::Third,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<(), ForestError> {
        if self.n_trees == 0 {
            return Err(ForestError::InvalidParams("n_trees must be at least 1".into()));
        }
        if self.min_samples_leaf == 0 {
            return Err(ForestError::InvalidParams("min_samples_leaf must be at least 1".into()));
        }
        if self.max_features == MaxFeatures::Count(0) {
            return Err(ForestError::InvalidParams("max_features must be at least 1".into()));
        }
        Ok(())
    }
}

/// Seed used for tree `index` of a forest seeded with `seed`.
pub fn tree_seed(seed: u64, index: usize) -> u64 {
    seeds::derive(seed, index as u64)
}

fn check_data(x: &[Vec<f64>], y: &[f64]) -> Result<usize, ForestError> {
    if x.is_empty() {
        return Err(ForestError::EmptyData);
    }
    if x.len() != y.len() {
        return Err(ForestError::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    let p = x[0].len();
    for (r, row) in x.iter().enumerate() {
        if row.len() != p {
            return Err(ForestError::Ragged {
                row: r,
                expected: p,
                got: row.len(),
            });
        }
        if let Some(c) = row.iter().position(|v| !v.is_finite()) {
            return Err(ForestError::NonFinite { row: r, col: c });
        }
    }
    if let Some(r) = y.iter().position(|v| !v.is_finite()) {
        return Err(ForestError::NonFinite { row: r, col: p });
    }
    Ok(p)
}

fn grow_tree<R: Rng + ?Sized>(
    x: &[Vec<f64>],
    y: &[f64],
    params: &ForestParams,
    indices: &mut [usize],
    rng: &mut R,
) -> Tree {
    let mut grower = tree::Grower {
        x,
        y,
        params,
        n_features: x[0].len(),
        rng,
        nodes: Vec::new(),
    };
    grower.grow(indices, 0);
    Tree { nodes: grower.nodes }
}

/// Fits one CART regression tree on all rows (no resampling).
pub fn fit_tree<R: Rng + ?Sized>(
    x: &[Vec<f64>],
    y: &[f64],
    params: &ForestParams,
    rng: &mut R,
) -> Result<Tree, ForestError> {
    params.validate()?;
    check_data(x, y)?;
    let mut indices: Vec<usize> = (0..x.len()).collect();
    Ok(grow_tree(x, y, params, &mut indices, rng))
}

/// Ensemble of regression trees; predictions are the mean over trees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionForest {
    pub trees: Vec<Tree>,
    pub params: ForestParams,
    pub columns: Vec<String>,
    /// Mean training target.
    pub base_value: f64,
}

#[derive(Serialize, Deserialize)]
struct ForestDocument {
    format: String,
    version: u32,
    forest: RegressionForest,
}

/// Fits a forest. Column names default to `x0, x1, ...`.
pub fn fit_forest(x: &[Vec<f64>], y: &[f64], params: &ForestParams) -> Result<RegressionForest, ForestError> {
    params.validate()?;
    let p = check_data(x, y)?;
    let n = x.len();
    let trees: Vec<Tree> = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = seeds::rng(tree_seed(params.seed, t));
            let mut indices: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            grow_tree(x, y, params, &mut indices, &mut rng)
        })
        .collect();
    Ok(RegressionForest {
        trees,
        params: params.clone(),
        columns: (0..p).map(|j| format!("x{j}")).collect(),
        base_value: y.iter().sum::<f64>() / n as f64,
    })
}

/// Fits a forest on an encoded study matrix, keeping its column names.
pub fn fit_matrix(m: &EncodedMatrix, params: &ForestParams) -> Result<RegressionForest, ForestError> {
    let mut f = fit_forest(&m.x, &m.y, params)?;
    f.columns = m.columns.clone();
    Ok(f)
}

impl RegressionForest {
    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn predict(&self, row: &[f64]) -> Result<f64, ForestError> {
        if row.len() != self.n_features() {
            return Err(ForestError::DimensionMismatch {
                expected: self.n_features(),
                got: row.len(),
            });
        }
        let first = self.trees[0].predict(row);
        let mut sum = first;
        let mut uniform = true;
        for t in &self.trees[1..] {
            let v = t.predict(row);
            uniform &= v == first;
            sum += v;
        }
        // Agreeing trees return their common value without rounding.
        Ok(if uniform { first } else { sum / self.trees.len() as f64 })
    }

    pub fn predict_rows(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>, ForestError> {
        rows.iter().map(|r| self.predict(r)).collect()
    }

    /// Mean over trees of each tree's sample-weighted expected output.
    pub fn expected_value(&self) -> f64 {
        self.trees.iter().map(Tree::expected_value).sum::<f64>() / self.trees.len() as f64
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&ForestDocument {
            format: FOREST_FORMAT.to_string(),
            version: FOREST_FORMAT_VERSION,
            forest: self.clone(),
        })
        .expect("forest serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, ForestError> {
        let doc: ForestDocument = serde_json::from_str(s).map_err(|e| ForestError::Format(e.to_string()))?;
        if doc.format != FOREST_FORMAT {
            return Err(ForestError::Format(format!("unexpected format `{}`", doc.format)));
        }
        if doc.version != FOREST_FORMAT_VERSION {
            return Err(ForestError::Format(format!("unsupported version {}", doc.version)));
        }
        let forest = doc.forest;
        if forest.trees.is_empty() {
            return Err(ForestError::Format("forest has no trees".into()));
        }
        for tree in &forest.trees {
            validate_tree(tree, forest.columns.len())?;
        }
        Ok(forest)
    }
}

fn validate_tree(tree: &Tree, p: usize) -> Result<(), ForestError> {
    let len = tree.nodes.len();
    if len == 0 {
        return Err(ForestError::Format("tree has no nodes".into()));
    }
    for (i, node) in tree.nodes.iter().enumerate() {
        if let TreeNode::Internal {
            feature, left, right, ..
        } = node
        {
            if *feature >= p || *left >= len || *right >= len || *left <= i || *right <= i {
                return Err(ForestError::Format(format!("node {i} has invalid links")));
            }
        }
    }
    Ok(())
}

/// Random partition into train and test rows. The test side gets
/// `round(test_fraction * n)` rows, and both sides keep at least one.
pub fn train_test_split<R: Rng + ?Sized>(
    m: &EncodedMatrix,
    test_fraction: f64,
    rng: &mut R,
) -> Result<(EncodedMatrix, EncodedMatrix), ForestError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(ForestError::BadFraction(test_fraction));
    }
    let n = m.n_rows();
    if n < 2 {
        return Err(ForestError::TooFewRows(n));
    }
    let n_test = ((test_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut test: Vec<usize> = rand::seq::index::sample(rng, n, n_test).into_vec();
    test.sort_unstable();
    let mut is_test = vec![false; n];
    test.iter().for_each(|&i| is_test[i] = true);
    let train: Vec<usize> = (0..n).filter(|&i| !is_test[i]).collect();
    Ok((m.select_rows(&train), m.select_rows(&test)))
}

/// Mean squared error.
pub fn mse(predictions: &[f64], targets: &[f64]) -> Result<f64, ForestError> {
    if predictions.len() != targets.len() {
        return Err(ForestError::DimensionMismatch {
            expected: targets.len(),
            got: predictions.len(),
        });
    }
    if predictions.is_empty() {
        return Err(ForestError::EmptyData);
    }
    Ok(predictions
        .iter()
        .zip(targets)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / predictions.len() as f64)
}

/// Coefficient of determination `1 - MSE / Var(targets)`.
pub fn r_squared(predictions: &[f64], targets: &[f64]) -> Result<f64, ForestError> {
    let err = mse(predictions, targets)?;
    let mean = targets.iter().sum::<f64>() / targets.len() as f64;
    let var = targets.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / targets.len() as f64;
    Ok(1.0 - err / var)
}
