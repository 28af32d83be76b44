//! Shapley attributions for the forest surrogate.
//!
//! [`tree_shap`] is the production path. [`exact`] enumerates coalitions
//! and serves as its reference. Attributions use path-dependent
//! semantics: a feature left out of a coalition is integrated out along
//! the training-sample flow of each tree.

pub mod exact;
mod treeshap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::advisor::stats::pearson;
use crate::csv_field;
use crate::forest::RegressionForest;

/// Correlations weaker than this make an interaction choice low-confidence.
pub const LOW_CONFIDENCE_CORRELATION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ShapError {
    #[error("exact enumeration supports at most 20 features, got {0}")]
    TooManyFeatures(usize),
    #[error("background dataset is empty")]
    EmptyBackground,
    #[error("expected {expected} values, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("need at least two columns to pick an interaction partner")]
    TooFewColumns,
    #[error("no column has a defined correlation with `{0}`")]
    NoInteractionCandidate(String),
    #[error("attribution matrix has no rows")]
    EmptyMatrix,
}

/// Attributions for one explained row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapRow {
    pub attributions: Vec<f64>,
    /// Expected model output.
    pub base: f64,
    pub prediction: f64,
}

impl ShapRow {
    /// `base + sum(attributions) - prediction`.
    pub fn efficiency_gap(&self) -> f64 {
        self.base + self.attributions.iter().sum::<f64>() - self.prediction
    }
}

/// Attributions for a set of rows, with the encoded feature values kept
/// alongside for plotting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapMatrix {
    pub columns: Vec<String>,
    pub rows: Vec<ShapRow>,
    pub feature_values: Vec<Vec<f64>>,
    pub trial_ids: Vec<String>,
}

impl ShapMatrix {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Result<usize, ShapError> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| ShapError::UnknownColumn(name.to_string()))
    }

    /// Attributions of one column across rows.
    pub fn column_shap(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r.attributions[j]).collect()
    }

    pub fn column_values(&self, j: usize) -> Vec<f64> {
        self.feature_values.iter().map(|r| r[j]).collect()
    }

    /// CSV: `trial_id, base, prediction`, one `shap:<col>` per column, then
    /// one `value:<col>` per column.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("trial_id,base,prediction");
        for c in &self.columns {
            out.push(',');
            out.push_str(&csv_field(&format!("shap:{c}")));
        }
        for c in &self.columns {
            out.push(',');
            out.push_str(&csv_field(&format!("value:{c}")));
        }
        out.push('\n');
        for ((row, values), id) in self.rows.iter().zip(&self.feature_values).zip(&self.trial_ids) {
            out.push_str(&csv_field(id));
            out.push_str(&format!(",{},{}", row.base, row.prediction));
            for a in &row.attributions {
                out.push_str(&format!(",{a}"));
            }
            for v in values {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Attributions of the forest prediction at `x`.
pub fn tree_shap(forest: &RegressionForest, x: &[f64]) -> Result<ShapRow, ShapError> {
    let p = forest.n_features();
    if x.len() != p {
        return Err(ShapError::DimensionMismatch {
            expected: p,
            got: x.len(),
        });
    }
    let mut phi = vec![0.0; p];
    for tree in &forest.trees {
        treeshap::tree_shap_into(tree, x, &mut phi);
    }
    let n_trees = forest.trees.len() as f64;
    phi.iter_mut().for_each(|v| *v /= n_trees);
    Ok(ShapRow {
        attributions: phi,
        base: forest.expected_value(),
        prediction: forest.predict(x).expect("dimension checked"),
    })
}

/// Explains every row, in order. Rows are processed in parallel.
pub fn explain_all(
    forest: &RegressionForest,
    x: &[Vec<f64>],
    trial_ids: Option<&[String]>,
) -> Result<ShapMatrix, ShapError> {
    let rows = x
        .par_iter()
        .map(|r| tree_shap(forest, r))
        .collect::<Result<Vec<_>, _>>()?;
    let trial_ids = match trial_ids {
        Some(ids) => ids.to_vec(),
        None => (0..x.len()).map(|i| i.to_string()).collect(),
    };
    Ok(ShapMatrix {
        columns: forest.columns.clone(),
        rows,
        feature_values: x.to_vec(),
        trial_ids,
    })
}

/// Columns by descending mean absolute attribution; ties keep column order.
pub fn rank_features(m: &ShapMatrix) -> Result<Vec<(String, f64)>, ShapError> {
    if m.is_empty() {
        return Err(ShapError::EmptyMatrix);
    }
    let n = m.len() as f64;
    let mut ranked: Vec<(usize, f64)> = (0..m.columns.len())
        .map(|j| (j, m.rows.iter().map(|r| r.attributions[j].abs()).sum::<f64>() / n))
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(ranked.into_iter().map(|(j, v)| (m.columns[j].clone(), v)).collect())
}

/// Interaction partner picked for a feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionChoice {
    pub column: String,
    pub index: usize,
    /// Signed Pearson correlation with the feature.
    pub r: f64,
    /// Set when `|r|` is below [`LOW_CONFIDENCE_CORRELATION`].
    pub low_confidence: bool,
}

/// The other column with the largest absolute Pearson correlation to
/// `feature`. Columns with zero variance are skipped; ties keep column
/// order.
pub fn select_interaction(x: &[Vec<f64>], columns: &[String], feature: &str) -> Result<InteractionChoice, ShapError> {
    if columns.len() < 2 {
        return Err(ShapError::TooFewColumns);
    }
    let f = columns
        .iter()
        .position(|c| c == feature)
        .ok_or_else(|| ShapError::UnknownColumn(feature.to_string()))?;
    let col = |j: usize| -> Vec<f64> { x.iter().map(|r| r[j]).collect() };
    let target = col(f);
    let mut best: Option<(usize, f64)> = None;
    for j in (0..columns.len()).filter(|&j| j != f) {
        let Some(r) = pearson(&target, &col(j)) else {
            continue;
        };
        if best.is_none_or(|(_, br)| r.abs() > br.abs()) {
            best = Some((j, r));
        }
    }
    let (index, r) = best.ok_or_else(|| ShapError::NoInteractionCandidate(feature.to_string()))?;
    Ok(InteractionChoice {
        column: columns[index].clone(),
        index,
        r,
        low_confidence: r.abs() < LOW_CONFIDENCE_CORRELATION,
    })
}

/// Points of a dependence plot: feature value against its attribution,
/// coloured by the interaction feature's value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependenceSeries {
    pub feature: String,
    pub interaction: String,
    /// `(feature_value, shap_value, interaction_value)` per explained row.
    pub points: Vec<(f64, f64, f64)>,
}

impl DependenceSeries {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("feature_value,shap_value,interaction_value\n");
        for (v, s, i) in &self.points {
            out.push_str(&format!("{v},{s},{i}\n"));
        }
        out
    }
}

pub fn dependence_series(m: &ShapMatrix, feature: &str, interaction: &str) -> Result<DependenceSeries, ShapError> {
    let f = m.column_index(feature)?;
    let g = m.column_index(interaction)?;
    Ok(DependenceSeries {
        feature: feature.to_string(),
        interaction: interaction.to_string(),
        points: m
            .rows
            .iter()
            .zip(&m.feature_values)
            .map(|(row, vals)| (vals[f], row.attributions[f], vals[g]))
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest::{ForestParams, Tree, TreeNode};

    fn forest_of(trees: Vec<Tree>, p: usize) -> RegressionForest {
        RegressionForest {
            trees,
            params: ForestParams::default(),
            columns: (0..p).map(|j| format!("x{j}")).collect(),
            base_value: 0.0,
        }
    }

    fn stump() -> Tree {
        Tree {
            nodes: vec![
                TreeNode::Internal {
                    feature: 0,
                    threshold: 0.5,
                    left: 1,
                    right: 2,
                    n: 4,
                },
                TreeNode::Leaf { value: 0.0, n: 3 },
                TreeNode::Leaf { value: 1.0, n: 1 },
            ],
        }
    }

    #[test]
    fn single_leaf_has_zero_attributions() {
        let f = forest_of(vec![Tree::leaf(0.7, 5)], 3);
        let row = tree_shap(&f, &[0.1, 0.2, 0.3]).unwrap();
        assert_eq!(row.attributions, vec![0.0; 3]);
        assert_eq!(row.base, 0.7);
        assert_eq!(row.prediction, 0.7);
    }

    #[test]
    fn stump_matches_hand_values() {
        let f = forest_of(vec![stump()], 2);
        // base 0.25; x goes right -> prediction 1, phi_0 = 0.75.
        let row = tree_shap(&f, &[0.9, 3.0]).unwrap();
        assert!((row.base - 0.25).abs() < 1e-15);
        assert!((row.attributions[0] - 0.75).abs() < 1e-15);
        assert_eq!(row.attributions[1], 0.0);
        let exact = exact::forest_shapley_bruteforce(&f, &[0.9, 3.0]).unwrap();
        assert!((exact.attributions[0] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn explain_all_empty_and_duplicates() {
        let f = forest_of(vec![stump()], 2);
        let m = explain_all(&f, &[], None).unwrap();
        assert!(m.is_empty());
        let m = explain_all(&f, &[vec![0.2, 1.0], vec![0.2, 1.0]], None).unwrap();
        assert_eq!(m.rows[0], m.rows[1]);
        assert!(tree_shap(&f, &[0.2]).is_err());
    }

    #[test]
    fn ranking_puts_dummy_last() {
        let m = ShapMatrix {
            columns: vec!["a".into(), "b".into(), "c".into()],
            rows: vec![
                ShapRow {
                    attributions: vec![0.0, 0.2, -0.1],
                    base: 0.0,
                    prediction: 0.1,
                },
                ShapRow {
                    attributions: vec![0.0, -0.4, 0.1],
                    base: 0.0,
                    prediction: -0.3,
                },
            ],
            feature_values: vec![vec![0.0; 3]; 2],
            trial_ids: vec!["0".into(), "1".into()],
        };
        let ranked = rank_features(&m).unwrap();
        assert_eq!(ranked[0].0, "b");
        assert!((ranked[0].1 - 0.3).abs() < 1e-15);
        assert_eq!(ranked[2].0, "a");
    }

    #[test]
    fn interaction_prefers_correlated_and_skips_constant() {
        let x: Vec<Vec<f64>> = (0..20)
            .map(|i| {
                let a = i as f64;
                vec![a, 1.0, 2.0 * a + 1e-9 * ((i * 7) % 3) as f64, (a * 1.3).sin()]
            })
            .collect();
        let cols: Vec<String> = ["a", "const", "b", "c"].iter().map(|s| s.to_string()).collect();
        let choice = select_interaction(&x, &cols, "a").unwrap();
        assert_eq!(choice.column, "b");
        assert!(!choice.low_confidence);
        assert!(matches!(
            select_interaction(&x, &cols[..1], "a"),
            Err(ShapError::TooFewColumns)
        ));
        assert!(matches!(
            select_interaction(&x, &cols, "const"),
            Err(ShapError::NoInteractionCandidate(_))
        ));
    }

    #[test]
    fn dependence_points_follow_rows() {
        let f = forest_of(vec![stump()], 2);
        let m = explain_all(&f, &[vec![0.2, 1.0], vec![0.9, 2.0], vec![0.4, 3.0]], None).unwrap();
        let d = dependence_series(&m, "x0", "x1").unwrap();
        assert_eq!(d.points.len(), 3);
        assert_eq!(d.points[1].0, 0.9);
        assert_eq!(d.points[2].2, 3.0);
        let own = dependence_series(&m, "x0", "x0").unwrap();
        assert!(own.points.iter().all(|p| p.0 == p.2));
        assert!(dependence_series(&m, "x9", "x0").is_err());
    }
}
