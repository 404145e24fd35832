//! Tree-structure prior: depth-dependent split probability times uniform
//! split-variable and split-value choices.

use super::hyper::BartSettings;
use super::tree::{DecisionTree, NodeId};

/// Probability that a node at `depth` is interior: `α(1+d)^{-β}`, or zero at
/// and beyond the optional depth cap.
pub fn split_probability(settings: &BartSettings, depth: usize) -> f64 {
    if settings.max_depth.is_some_and(|cap| depth >= cap) {
        return 0.0;
    }
    settings.alpha * (1.0 + depth as f64).powf(-settings.beta_depth)
}

/// Number of admissible split variables and split values at an interior node.
pub trait SplitCounts {
    fn counts(&self, tree: &DecisionTree, node: NodeId) -> (usize, usize);
}

impl<F: Fn(&DecisionTree, NodeId) -> (usize, usize)> SplitCounts for F {
    fn counts(&self, tree: &DecisionTree, node: NodeId) -> (usize, usize) {
        self(tree, node)
    }
}

/// Tempered log prior of a tree structure: for each interior node
/// `log α(1+d)^{-β} − log p − log V`, for each leaf `log(1 − α(1+d)^{-β})`,
/// all multiplied by `prior_temper`.
pub fn tree_log_prior(
    tree: &DecisionTree,
    settings: &BartSettings,
    prior_temper: f64,
    split_counts: &dyn SplitCounts,
) -> f64 {
    let mut total = 0.0;
    for id in tree.preorder() {
        let depth = tree.node(id).depth;
        let ps = split_probability(settings, depth);
        if tree.is_leaf(id) {
            total += (1.0 - ps).ln();
        } else {
            let (p, v) = split_counts.counts(tree, id);
            total += ps.ln() - (p as f64).ln() - (v as f64).ln();
        }
    }
    prior_temper * total
}

/// Untempered log prior ratio for growing a leaf at `depth` with `p`
/// variables and `v` candidate values.
pub fn grow_log_prior_ratio(settings: &BartSettings, depth: usize, p: usize, v: usize) -> f64 {
    let ps = split_probability(settings, depth);
    let pc = split_probability(settings, depth + 1);
    ps.ln() + 2.0 * (1.0 - pc).ln() - (1.0 - ps).ln() - (p as f64).ln() - (v as f64).ln()
}
