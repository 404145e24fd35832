//! Metropolis–Hastings proposals on one tree of the sum.
//!
//! Each acceptance ratio is the product of a transition ratio (from the
//! uniform node, variable and value choices), the integrated-likelihood ratio
//! under the shard's inflation, and the tree-structure prior ratio raised to
//! the prior exponent. Proposals that would leave a leaf without rows are
//! infeasible and count as rejections.

use rand::seq::IndexedRandom;
use rand::Rng;

use super::conditionals::{grow_likelihood_log_ratio, node_log_marginal, NodeSufficientStats};
use super::hyper::{BartHyper, InflationSpec};
use super::prior::grow_log_prior_ratio;
use super::tree::{DecisionTree, NodeId, SplitRule};
use crate::data::Dataset;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MoveKind {
    Grow,
    Prune,
    Change,
    Swap,
}

impl MoveKind {
    pub const ALL: [MoveKind; 4] = [
        MoveKind::Grow,
        MoveKind::Prune,
        MoveKind::Change,
        MoveKind::Swap,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            MoveKind::Grow => "grow",
            MoveKind::Prune => "prune",
            MoveKind::Change => "change",
            MoveKind::Swap => "swap",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Proposal {
    Grow {
        leaf: NodeId,
        rule: SplitRule,
        n_values: usize,
    },
    Prune {
        node: NodeId,
    },
    Change {
        node: NodeId,
        rule: SplitRule,
        n_values: usize,
    },
    Swap {
        parent: NodeId,
        child: NodeId,
    },
    /// The drawn move has no candidate in the current tree.
    Infeasible(MoveKind),
}

impl Proposal {
    pub fn kind(&self) -> MoveKind {
        match self {
            Proposal::Grow { .. } => MoveKind::Grow,
            Proposal::Prune { .. } => MoveKind::Prune,
            Proposal::Change { .. } => MoveKind::Change,
            Proposal::Swap { .. } => MoveKind::Swap,
            Proposal::Infeasible(k) => *k,
        }
    }
}

/// Everything a move needs besides the tree: shard rows, the partial
/// residuals for this tree, and where each row currently lands.
pub struct MoveContext<'a> {
    pub data: &'a Dataset,
    pub resid: &'a [f64],
    pub leaf_of: &'a [NodeId],
    pub hyper: &'a BartHyper,
    pub inflation: &'a InflationSpec,
    /// Current residual variance draw, before any working adjustment.
    pub sigma2: f64,
}

impl MoveContext<'_> {
    /// Rows whose leaf lies in the subtree rooted at `node`.
    pub fn rows_under(&self, tree: &DecisionTree, node: NodeId) -> Vec<usize> {
        if tree.is_leaf(node) {
            (0..self.leaf_of.len())
                .filter(|&i| self.leaf_of[i] == node)
                .collect()
        } else {
            (0..self.leaf_of.len())
                .filter(|&i| tree.is_descendant(self.leaf_of[i], node))
                .collect()
        }
    }

    fn stats(&self, rows: &[usize]) -> NodeSufficientStats {
        NodeSufficientStats::from_residuals(rows.iter().map(|&i| self.resid[i]))
            .centered(self.hyper.mu_mu)
    }

    fn split_stats(
        &self,
        rows: &[usize],
        rule: SplitRule,
    ) -> (NodeSufficientStats, NodeSufficientStats) {
        let mut l = NodeSufficientStats::default();
        let mut r = NodeSufficientStats::default();
        for &i in rows {
            if rule.goes_left(self.data.row(i)) {
                l.push(self.resid[i]);
            } else {
                r.push(self.resid[i]);
            }
        }
        (l.centered(self.hyper.mu_mu), r.centered(self.hyper.mu_mu))
    }

    fn working_sigma2(&self) -> f64 {
        self.inflation.working_sigma2(self.sigma2)
    }

    fn log_marginal(&self, s: &NodeSufficientStats) -> f64 {
        node_log_marginal(
            s,
            self.working_sigma2(),
            self.hyper.sigma_mu2(),
            self.inflation.kappa,
        )
    }

    fn grow_lik(
        &self,
        p: &NodeSufficientStats,
        l: &NodeSufficientStats,
        r: &NodeSufficientStats,
    ) -> f64 {
        grow_likelihood_log_ratio(
            p,
            l,
            r,
            self.working_sigma2(),
            self.hyper.sigma_mu2(),
            self.inflation.kappa,
        )
        .expect("positive residual variance")
    }
}

/// Sorted distinct values of predictor `var` over `rows`.
pub fn distinct_values(data: &Dataset, rows: &[usize], var: usize) -> Vec<f64> {
    let mut v: Vec<f64> = rows.iter().map(|&i| data.value(i, var)).collect();
    v.sort_unstable_by(f64::total_cmp);
    v.dedup();
    v
}

fn draw_rule<R: Rng + ?Sized>(
    ctx: &MoveContext<'_>,
    rows: &[usize],
    rng: &mut R,
) -> Option<(SplitRule, usize)> {
    let var = rng.random_range(0..ctx.data.p());
    let values = distinct_values(ctx.data, rows, var);
    let value = *values.choose(rng)?;
    Some((SplitRule { var, value }, values.len()))
}

fn draw_kind<R: Rng + ?Sized>(hyper: &BartHyper, rng: &mut R) -> MoveKind {
    let mp = hyper.settings.move_probs;
    let u: f64 = rng.random();
    if u < mp.grow {
        MoveKind::Grow
    } else if u < mp.grow + mp.prune {
        MoveKind::Prune
    } else if u < mp.grow + mp.prune + mp.change || mp.swap == 0.0 {
        MoveKind::Change
    } else {
        MoveKind::Swap
    }
}

/// Draws a move kind and its random details.
pub fn propose_move<R: Rng + ?Sized>(
    tree: &DecisionTree,
    ctx: &MoveContext<'_>,
    rng: &mut R,
) -> Proposal {
    match draw_kind(ctx.hyper, rng) {
        MoveKind::Grow => {
            let leaves = tree.leaves();
            let leaf = *leaves.choose(rng).expect("a tree has at least one leaf");
            let rows = ctx.rows_under(tree, leaf);
            match draw_rule(ctx, &rows, rng) {
                Some((rule, n_values)) => Proposal::Grow {
                    leaf,
                    rule,
                    n_values,
                },
                None => Proposal::Infeasible(MoveKind::Grow),
            }
        }
        MoveKind::Prune => match tree.prunable().choose(rng) {
            Some(&node) => Proposal::Prune { node },
            None => Proposal::Infeasible(MoveKind::Prune),
        },
        MoveKind::Change => match tree.prunable().choose(rng) {
            Some(&node) => {
                let rows = ctx.rows_under(tree, node);
                match draw_rule(ctx, &rows, rng) {
                    Some((rule, n_values)) => Proposal::Change {
                        node,
                        rule,
                        n_values,
                    },
                    None => Proposal::Infeasible(MoveKind::Change),
                }
            }
            None => Proposal::Infeasible(MoveKind::Change),
        },
        MoveKind::Swap => match tree.swappable().choose(rng) {
            Some(&(parent, child)) => Proposal::Swap { parent, child },
            None => Proposal::Infeasible(MoveKind::Swap),
        },
    }
}

/// Log Metropolis–Hastings ratio of `proposal`; `-inf` when infeasible.
pub fn log_acceptance_ratio(
    tree: &DecisionTree,
    ctx: &MoveContext<'_>,
    proposal: &Proposal,
) -> f64 {
    let settings = &ctx.hyper.settings;
    let mp = settings.move_probs;
    let temper = ctx.inflation.prior_temper;
    let p = ctx.data.p();
    match *proposal {
        Proposal::Infeasible(_) => f64::NEG_INFINITY,
        Proposal::Grow {
            leaf,
            rule,
            n_values,
        } => {
            let rows = ctx.rows_under(tree, leaf);
            let (l, r) = ctx.split_stats(&rows, rule);
            if l.n == 0 || r.n == 0 {
                return f64::NEG_INFINITY;
            }
            let depth = tree.node(leaf).depth;
            let prior = grow_log_prior_ratio(settings, depth, p, n_values);
            if prior == f64::NEG_INFINITY {
                return f64::NEG_INFINITY;
            }
            let b = tree.leaf_count() as f64;
            let sibling_is_leaf = tree.node(leaf).parent.is_some_and(|par| {
                let (a, c) = tree.children(par).unwrap();
                tree.is_leaf(if a == leaf { c } else { a })
            });
            let w2_after = (tree.prunable().len() + 1 - usize::from(sibling_is_leaf)) as f64;
            let trans = mp.prune.ln() - mp.grow.ln() + b.ln() - w2_after.ln()
                + (p as f64).ln()
                + (n_values as f64).ln();
            trans + ctx.grow_lik(&l.merge(&r), &l, &r) + temper * prior
        }
        Proposal::Prune { node } => {
            let (cl, cr) = tree.children(node).expect("prune target is a split");
            let rule = tree.rule(node).unwrap();
            let rows_l = ctx.rows_under(tree, cl);
            let rows_r = ctx.rows_under(tree, cr);
            let mut rows = rows_l.clone();
            rows.extend_from_slice(&rows_r);
            let n_values = distinct_values(ctx.data, &rows, rule.var).len();
            let l = ctx.stats(&rows_l);
            let r = ctx.stats(&rows_r);
            let depth = tree.node(node).depth;
            let prior = -grow_log_prior_ratio(settings, depth, p, n_values);
            let w2 = tree.prunable().len() as f64;
            let b_after = (tree.leaf_count() - 1) as f64;
            let trans = mp.grow.ln() - mp.prune.ln() + w2.ln()
                - b_after.ln()
                - (p as f64).ln()
                - (n_values as f64).ln();
            trans - ctx.grow_lik(&l.merge(&r), &l, &r) + temper * prior
        }
        Proposal::Change {
            node,
            rule,
            n_values,
        } => {
            let (cl, cr) = tree.children(node).expect("change target is a split");
            let old_rule = tree.rule(node).unwrap();
            let rows_l = ctx.rows_under(tree, cl);
            let rows_r = ctx.rows_under(tree, cr);
            let mut rows = rows_l.clone();
            rows.extend_from_slice(&rows_r);
            let (nl, nr) = ctx.split_stats(&rows, rule);
            if nl.n == 0 || nr.n == 0 {
                return f64::NEG_INFINITY;
            }
            let old_values = distinct_values(ctx.data, &rows, old_rule.var).len() as f64;
            let new_values = n_values as f64;
            let lik = ctx.log_marginal(&nl) + ctx.log_marginal(&nr)
                - ctx.log_marginal(&ctx.stats(&rows_l))
                - ctx.log_marginal(&ctx.stats(&rows_r));
            let trans = new_values.ln() - old_values.ln();
            let prior = old_values.ln() - new_values.ln();
            trans + lik + temper * prior
        }
        Proposal::Swap { parent, child } => swap_log_ratio(tree, ctx, parent, child),
    }
}

/// Leaf assignment of `rows` in `tree`, starting the descent at `from`.
fn route_rows(tree: &DecisionTree, data: &Dataset, rows: &[usize], from: NodeId) -> Vec<NodeId> {
    rows.iter()
        .map(|&i| tree.route_from(from, data.row(i)))
        .collect()
}

fn swap_log_ratio(
    tree: &DecisionTree,
    ctx: &MoveContext<'_>,
    parent: NodeId,
    child: NodeId,
) -> f64 {
    let rows = ctx.rows_under(tree, parent);
    let mut swapped = tree.clone();
    let (rp, rc) = (tree.rule(parent).unwrap(), tree.rule(child).unwrap());
    swapped.set_rule(parent, rc);
    swapped.set_rule(child, rp);
    let old_leaf: Vec<NodeId> = rows.iter().map(|&i| ctx.leaf_of[i]).collect();
    let new_leaf = route_rows(&swapped, ctx.data, &rows, parent);

    let subtree: Vec<NodeId> = tree
        .preorder()
        .into_iter()
        .filter(|&u| tree.is_descendant(u, parent))
        .collect();
    let mut lik = 0.0;
    let mut prior = 0.0;
    for &u in &subtree {
        let old_rows: Vec<usize> = rows
            .iter()
            .zip(&old_leaf)
            .filter(|(_, &lf)| tree.is_descendant(lf, u))
            .map(|(&i, _)| i)
            .collect();
        let new_rows: Vec<usize> = rows
            .iter()
            .zip(&new_leaf)
            .filter(|(_, &lf)| tree.is_descendant(lf, u))
            .map(|(&i, _)| i)
            .collect();
        if tree.is_leaf(u) {
            if new_rows.is_empty() {
                return f64::NEG_INFINITY;
            }
            lik +=
                ctx.log_marginal(&ctx.stats(&new_rows)) - ctx.log_marginal(&ctx.stats(&old_rows));
        } else {
            let v_old = distinct_values(ctx.data, &old_rows, tree.rule(u).unwrap().var).len();
            let v_new = distinct_values(ctx.data, &new_rows, swapped.rule(u).unwrap().var).len();
            if v_new == 0 {
                return f64::NEG_INFINITY;
            }
            prior += (v_old as f64).ln() - (v_new as f64).ln();
        }
    }
    lik + ctx.inflation.prior_temper * prior
}

/// Applies an accepted proposal to `tree` and keeps `leaf_of` in sync.
/// New leaves inherit their parent's mean until the leaf-mean update.
pub fn apply_proposal(
    tree: &mut DecisionTree,
    leaf_of: &mut [NodeId],
    data: &Dataset,
    proposal: &Proposal,
) {
    match *proposal {
        Proposal::Infeasible(_) => {}
        Proposal::Grow { leaf, rule, .. } => {
            let mu = tree.mu(leaf);
            let (l, r) = tree.grow(leaf, rule, mu, mu);
            for (i, lf) in leaf_of.iter_mut().enumerate() {
                if *lf == leaf {
                    *lf = if rule.goes_left(data.row(i)) { l } else { r };
                }
            }
        }
        Proposal::Prune { node } => {
            let (l, r) = tree.children(node).unwrap();
            let mu = tree.mu(l);
            tree.prune(node, mu);
            for lf in leaf_of.iter_mut() {
                if *lf == l || *lf == r {
                    *lf = node;
                }
            }
        }
        Proposal::Change { node, rule, .. } => {
            let (l, r) = tree.children(node).unwrap();
            tree.set_rule(node, rule);
            for (i, lf) in leaf_of.iter_mut().enumerate() {
                if *lf == l || *lf == r {
                    *lf = if rule.goes_left(data.row(i)) { l } else { r };
                }
            }
        }
        Proposal::Swap { parent, child } => {
            let (rp, rc) = (tree.rule(parent).unwrap(), tree.rule(child).unwrap());
            tree.set_rule(parent, rc);
            tree.set_rule(child, rp);
            for (i, lf) in leaf_of.iter_mut().enumerate() {
                if tree.is_descendant(*lf, parent) {
                    *lf = tree.route_from(parent, data.row(i));
                }
            }
        }
    }
}
