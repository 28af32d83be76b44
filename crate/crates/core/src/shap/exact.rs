//! Shapley values by full coalition enumeration.
//!
//! Exponential in the number of features; used as a reference for the
//! polynomial tree algorithm.

use super::{ShapError, ShapRow};
use crate::forest::{RegressionForest, Tree, TreeNode};

/// Largest feature count the enumerator accepts.
pub const MAX_EXACT_FEATURES: usize = 20;

/// Shapley values of a set function over `p` players.
///
/// `value` receives a membership mask and returns `v(S)`. The returned row
/// has `base = v(empty)` and `prediction = v(all)`.
pub fn shapley_from_value_fn(p: usize, mut value: impl FnMut(&[bool]) -> f64) -> Result<ShapRow, ShapError> {
    if p > MAX_EXACT_FEATURES {
        return Err(ShapError::TooManyFeatures(p));
    }
    let n_sets = 1usize << p;
    let mut mask = vec![false; p];
    let values: Vec<f64> = (0..n_sets)
        .map(|s| {
            for (i, m) in mask.iter_mut().enumerate() {
                *m = s & (1 << i) != 0;
            }
            value(&mask)
        })
        .collect();

    // weight[k] = k! (p - k - 1)! / p!
    let mut weight = vec![0.0; p.max(1)];
    for (k, w) in weight.iter_mut().enumerate().take(p) {
        let mut acc = 1.0 / p as f64;
        // 1 / (p * C(p-1, k))
        for j in 0..k {
            acc *= (j + 1) as f64 / (p - 1 - j) as f64;
        }
        *w = acc;
    }

    let mut phi = vec![0.0; p];
    for (i, phi_i) in phi.iter_mut().enumerate() {
        let bit = 1usize << i;
        for s in 0..n_sets {
            if s & bit != 0 {
                continue;
            }
            let k = s.count_ones() as usize;
            *phi_i += weight[k] * (values[s | bit] - values[s]);
        }
    }
    Ok(ShapRow {
        attributions: phi,
        base: values[0],
        prediction: values[n_sets - 1],
    })
}

/// Interventional Shapley values of `model` at `x`: features outside a
/// coalition take their values from each background row in turn and the
/// model output is averaged.
pub fn shapley_bruteforce(
    model: impl Fn(&[f64]) -> f64,
    background: &[Vec<f64>],
    x: &[f64],
) -> Result<ShapRow, ShapError> {
    if background.is_empty() {
        return Err(ShapError::EmptyBackground);
    }
    let p = x.len();
    if let Some(bad) = background.iter().find(|b| b.len() != p) {
        return Err(ShapError::DimensionMismatch {
            expected: p,
            got: bad.len(),
        });
    }
    let mut probe = vec![0.0; p];
    let mut row = shapley_from_value_fn(p, |mask| {
        let mut total = 0.0;
        for b in background {
            for j in 0..p {
                probe[j] = if mask[j] { x[j] } else { b[j] };
            }
            total += model(&probe);
        }
        total / background.len() as f64
    })?;
    row.prediction = model(x);
    Ok(row)
}

/// Expected tree output when the features in `coalition` are fixed to `x`
/// and the others are integrated out along the training-sample flow
/// (children weighted by their sample counts).
pub fn tree_path_expectation(tree: &Tree, x: &[f64], coalition: &[bool]) -> f64 {
    fn walk(tree: &Tree, idx: usize, x: &[f64], coalition: &[bool]) -> f64 {
        match &tree.nodes[idx] {
            TreeNode::Leaf { value, .. } => *value,
            TreeNode::Internal {
                feature,
                threshold,
                left,
                right,
                n,
            } => {
                if coalition[*feature] {
                    let next = if x[*feature] <= *threshold { *left } else { *right };
                    walk(tree, next, x, coalition)
                } else {
                    let nl = tree.nodes[*left].n() as f64;
                    let nr = tree.nodes[*right].n() as f64;
                    (nl * walk(tree, *left, x, coalition) + nr * walk(tree, *right, x, coalition)) / *n as f64
                }
            }
        }
    }
    walk(tree, 0, x, coalition)
}

/// Enumeration reference for the path-dependent semantics used by
/// [`super::tree_shap`].
pub fn forest_shapley_bruteforce(forest: &RegressionForest, x: &[f64]) -> Result<ShapRow, ShapError> {
    let p = forest.n_features();
    if x.len() != p {
        return Err(ShapError::DimensionMismatch {
            expected: p,
            got: x.len(),
        });
    }
    let n_trees = forest.trees.len() as f64;
    shapley_from_value_fn(p, |mask| {
        forest
            .trees
            .iter()
            .map(|t| tree_path_expectation(t, x, mask))
            .sum::<f64>()
            / n_trees
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn additive_model_with_zero_background() {
        let row = shapley_bruteforce(|r| r[0] + r[1], &[vec![0.0, 0.0]], &[3.0, -2.0]).unwrap();
        assert!((row.attributions[0] - 3.0).abs() < 1e-15);
        assert!((row.attributions[1] + 2.0).abs() < 1e-15);
        assert_eq!(row.base, 0.0);
    }

    #[test]
    fn ignored_feature_gets_zero() {
        let bg = vec![vec![0.3, 0.1, 0.9], vec![0.5, 0.7, 0.2]];
        let row = shapley_bruteforce(|r| r[0] * r[2], &bg, &[1.0, 4.0, 2.0]).unwrap();
        assert_eq!(row.attributions[1], 0.0);
    }

    #[test]
    fn stump_enumeration() {
        // Coalitions: {} -> 0, {1} -> 1, {2} -> 0, {1,2} -> 1.
        let stump = |r: &[f64]| if r[0] > 0.0 { 1.0 } else { 0.0 };
        let row = shapley_bruteforce(stump, &[vec![-1.0, 0.0]], &[1.0, 5.0]).unwrap();
        assert_eq!(row.attributions, vec![1.0, 0.0]);
        assert_eq!(row.base, 0.0);
        assert_eq!(row.prediction, 1.0);
    }

    #[test]
    fn refuses_large_inputs() {
        let x = vec![0.0; 21];
        assert!(matches!(
            shapley_bruteforce(|_| 0.0, std::slice::from_ref(&x), &x),
            Err(ShapError::TooManyFeatures(21))
        ));
        assert!(matches!(
            shapley_bruteforce(|_| 0.0, &[], &[0.0]),
            Err(ShapError::EmptyBackground)
        ));
    }

    #[test]
    fn weights_sum_to_one_per_feature() {
        // v(S) = 1 whenever feature 0 is present: phi_0 = 1, the rest 0.
        let row = shapley_from_value_fn(5, |m| if m[0] { 1.0 } else { 0.0 }).unwrap();
        assert!((row.attributions[0] - 1.0).abs() < 1e-15);
        assert!(row.attributions[1..].iter().all(|&a| a == 0.0));
    }
}
