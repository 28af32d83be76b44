//! Path-dependent TreeSHAP.
//!
//! Walks every root-to-leaf path once, maintaining for the features seen
//! so far the fraction of coalitions (by size) that reach the current
//! node. Cost is `O(leaves * depth^2)` per tree and row.

use crate::forest::{Tree, TreeNode};

#[derive(Debug, Clone, Copy, Default)]
struct PathElement {
    /// Feature split on, `None` for the root sentinel.
    feature: Option<usize>,
    /// Fraction of training flow kept when the feature is absent.
    zero_fraction: f64,
    /// 1 if `x` follows this branch when the feature is present, else 0.
    one_fraction: f64,
    /// Weight of coalitions of each size reaching this point.
    pweight: f64,
}

fn extend(path: &mut [PathElement], depth: usize, zero: f64, one: f64, feature: Option<usize>) {
    path[depth] = PathElement {
        feature,
        zero_fraction: zero,
        one_fraction: one,
        pweight: if depth == 0 { 1.0 } else { 0.0 },
    };
    let d1 = (depth + 1) as f64;
    for i in (0..depth).rev() {
        path[i + 1].pweight += one * path[i].pweight * (i + 1) as f64 / d1;
        path[i].pweight = zero * path[i].pweight * (depth - i) as f64 / d1;
    }
}

fn unwind(path: &mut [PathElement], depth: usize, index: usize) {
    let one = path[index].one_fraction;
    let zero = path[index].zero_fraction;
    let d1 = (depth + 1) as f64;
    let mut next = path[depth].pweight;
    for i in (0..depth).rev() {
        if one != 0.0 {
            let tmp = path[i].pweight;
            path[i].pweight = next * d1 / ((i + 1) as f64 * one);
            next = tmp - path[i].pweight * zero * (depth - i) as f64 / d1;
        } else {
            path[i].pweight = path[i].pweight * d1 / (zero * (depth - i) as f64);
        }
    }
    for i in index..depth {
        path[i].feature = path[i + 1].feature;
        path[i].zero_fraction = path[i + 1].zero_fraction;
        path[i].one_fraction = path[i + 1].one_fraction;
    }
}

/// Total weight of the path with element `index` removed.
fn unwound_sum(path: &[PathElement], depth: usize, index: usize) -> f64 {
    let one = path[index].one_fraction;
    let zero = path[index].zero_fraction;
    let d1 = (depth + 1) as f64;
    let mut next = path[depth].pweight;
    let mut total = 0.0;
    for i in (0..depth).rev() {
        if one != 0.0 {
            let tmp = next * d1 / ((i + 1) as f64 * one);
            total += tmp;
            next = path[i].pweight - tmp * zero * (depth - i) as f64 / d1;
        } else if zero != 0.0 {
            total += path[i].pweight / zero / ((depth - i) as f64 / d1);
        }
    }
    total
}

struct Walker<'a> {
    tree: &'a Tree,
    x: &'a [f64],
    phi: &'a mut [f64],
}

impl Walker<'_> {
    fn recurse(
        &mut self,
        node: usize,
        parent_path: &[PathElement],
        depth: usize,
        zero: f64,
        one: f64,
        feature: Option<usize>,
    ) {
        // Each level works on its own copy so siblings see the parent state.
        let mut path = Vec::with_capacity(depth + 1);
        path.extend_from_slice(&parent_path[..depth]);
        path.push(PathElement::default());
        extend(&mut path, depth, zero, one, feature);

        match &self.tree.nodes[node] {
            TreeNode::Leaf { value, .. } => {
                for i in 1..=depth {
                    let w = unwound_sum(&path, depth, i);
                    let el = path[i];
                    let f = el.feature.expect("only the root has no feature");
                    self.phi[f] += w * (el.one_fraction - el.zero_fraction) * value;
                }
            }
            TreeNode::Internal {
                feature: split,
                threshold,
                left,
                right,
                n,
            } => {
                let (hot, cold) = if self.x[*split] <= *threshold {
                    (*left, *right)
                } else {
                    (*right, *left)
                };
                let n = *n as f64;
                let hot_frac = self.tree.nodes[hot].n() as f64 / n;
                let cold_frac = self.tree.nodes[cold].n() as f64 / n;

                let mut depth = depth;
                let (mut inc_zero, mut inc_one) = (1.0, 1.0);
                if let Some(k) = (1..=depth).find(|&k| path[k].feature == Some(*split)) {
                    inc_zero = path[k].zero_fraction;
                    inc_one = path[k].one_fraction;
                    unwind(&mut path, depth, k);
                    depth -= 1;
                }
                self.recurse(hot, &path, depth + 1, hot_frac * inc_zero, inc_one, Some(*split));
                self.recurse(cold, &path, depth + 1, cold_frac * inc_zero, 0.0, Some(*split));
            }
        }
    }
}

/// Adds the attributions of one tree at `x` into `phi`.
pub(super) fn tree_shap_into(tree: &Tree, x: &[f64], phi: &mut [f64]) {
    let mut walker = Walker { tree, x, phi };
    walker.recurse(0, &[], 0, 1.0, 1.0, None);
}
