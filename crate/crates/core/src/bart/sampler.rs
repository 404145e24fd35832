use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::conditionals::{sample_leaf_mean, sample_sigma2, NodeSufficientStats};
use super::hyper::{BartHyper, InflationSpec};
use super::moves::{apply_proposal, log_acceptance_ratio, propose_move, MoveContext, MoveKind};
use super::prior::split_probability;
use super::tree::{DecisionTree, NodeId, SplitRule};
use crate::conjugate::sample_inv_gamma;
use crate::data::Dataset;
use crate::error::{Error, Result};

/// Sum-of-trees state: m trees plus the residual variance.
#[derive(Clone, Debug, PartialEq)]
pub struct Forest {
    pub trees: Vec<DecisionTree>,
    pub sigma2: f64,
    /// Predictor dimension the trees were fitted on.
    pub n_features: usize,
}

impl Forest {
    pub fn stumps(m: usize, mu: f64, sigma2: f64, n_features: usize) -> Self {
        Self {
            trees: vec![DecisionTree::stump(mu); m],
            sigma2,
            n_features,
        }
    }

    pub fn leaf_count(&self) -> usize {
        self.trees.iter().map(DecisionTree::leaf_count).sum()
    }

    pub fn mean_depth(&self) -> f64 {
        self.trees.iter().map(|t| t.depth() as f64).sum::<f64>() / self.trees.len() as f64
    }

    /// Sum of the leaf means reached by `x`, without dimension checks.
    #[inline]
    pub fn predict_unchecked(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum()
    }
}

/// Sum over trees of the leaf mean reached by `x`.
pub fn predict(forest: &Forest, x: &[f64]) -> Result<f64> {
    if x.len() != forest.n_features {
        return Err(Error::invalid(format!(
            "predictor vector has {} entries, forest expects {}",
            x.len(),
            forest.n_features
        )));
    }
    Ok(forest.predict_unchecked(x))
}

/// `y − Σ_{k≠j} g(x; T_k, M_k)` for every row of `data`.
pub fn compute_partial_residual(forest: &Forest, j: usize, data: &Dataset) -> Vec<f64> {
    (0..data.n())
        .map(|i| {
            let x = data.row(i);
            let others: f64 = forest
                .trees
                .iter()
                .enumerate()
                .filter(|(k, _)| *k != j)
                .map(|(_, t)| t.predict(x))
                .sum();
            data.response()[i] - others
        })
        .collect()
}

/// Proposed/accepted tallies per move kind.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MoveCounters {
    pub proposed: [u64; 4],
    pub accepted: [u64; 4],
}

impl MoveCounters {
    pub fn record(&mut self, kind: MoveKind, accepted: bool) {
        self.proposed[kind.index()] += 1;
        if accepted {
            self.accepted[kind.index()] += 1;
        }
    }

    pub fn add(&mut self, other: &MoveCounters) {
        for i in 0..4 {
            self.proposed[i] += other.proposed[i];
            self.accepted[i] += other.accepted[i];
        }
    }
}

/// One worker's BART chain on its own rows.
pub struct BartSampler {
    data: Dataset,
    hyper: BartHyper,
    inflation: InflationSpec,
    forest: Forest,
    leaf_of: Vec<Vec<NodeId>>,
    fit: Vec<f64>,
    resid: Vec<f64>,
    counters: MoveCounters,
}

impl BartSampler {
    /// Starts from stumps at `ȳ/m` and σ² at the sample variance of `y`.
    pub fn new(data: Dataset, hyper: BartHyper, inflation: InflationSpec) -> Result<Self> {
        let n = data.n();
        if n < 2 {
            return Err(Error::invalid("a chain needs at least two rows"));
        }
        let y = data.response();
        let mean = y.iter().sum::<f64>() / n as f64;
        let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let m = hyper.settings.m;
        let forest = Forest::stumps(m, mean / m as f64, var.max(f64::MIN_POSITIVE), data.p());
        Self::with_forest(data, hyper, inflation, forest)
    }

    pub fn with_forest(
        data: Dataset,
        hyper: BartHyper,
        inflation: InflationSpec,
        forest: Forest,
    ) -> Result<Self> {
        if forest.n_features != data.p() {
            return Err(Error::invalid("forest and data dimensions differ"));
        }
        if !(forest.sigma2 > 0.0) {
            return Err(Error::invalid("initial sigma2 must be positive"));
        }
        let n = data.n();
        let leaf_of = forest
            .trees
            .iter()
            .map(|t| (0..n).map(|i| t.route(data.row(i))).collect())
            .collect();
        let mut s = Self {
            data,
            hyper,
            inflation,
            forest,
            leaf_of,
            fit: vec![0.0; n],
            resid: vec![0.0; n],
            counters: MoveCounters::default(),
        };
        s.refresh_fit();
        Ok(s)
    }

    pub fn forest(&self) -> &Forest {
        &self.forest
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn hyper(&self) -> &BartHyper {
        &self.hyper
    }

    pub fn inflation(&self) -> &InflationSpec {
        &self.inflation
    }

    /// Totals since construction.
    pub fn counters(&self) -> MoveCounters {
        self.counters
    }

    /// Current in-sample sum-of-trees fit.
    pub fn fitted(&self) -> &[f64] {
        &self.fit
    }

    pub fn leaf_assignment(&self, j: usize) -> &[NodeId] {
        &self.leaf_of[j]
    }

    /// Replaces the response, keeping trees and predictors.
    pub fn set_response(&mut self, y: Vec<f64>) -> Result<()> {
        let x = self.data.predictors().to_vec();
        let mut data = Dataset::new(x, y, self.data.p())?;
        if let Some(names) = self.data.feature_names() {
            data = data.with_feature_names(names.to_vec())?;
        }
        if data.n() != self.data.n() {
            return Err(Error::invalid("response length changed"));
        }
        self.data = data;
        Ok(())
    }

    fn refresh_fit(&mut self) {
        self.fit.iter_mut().for_each(|f| *f = 0.0);
        for (tree, leaves) in self.forest.trees.iter().zip(&self.leaf_of) {
            for (f, &lf) in self.fit.iter_mut().zip(leaves) {
                *f += tree.mu(lf);
            }
        }
    }

    fn sum_squared_residuals(&self) -> f64 {
        self.data
            .response()
            .iter()
            .zip(&self.fit)
            .map(|(y, f)| (y - f) * (y - f))
            .sum()
    }

    fn load_partial_residual(&mut self, j: usize) {
        let tree = &self.forest.trees[j];
        let y = self.data.response();
        for (i, r) in self.resid.iter_mut().enumerate() {
            *r = y[i] - self.fit[i] + tree.mu(self.leaf_of[j][i]);
        }
    }

    /// Partial residual of tree `j` from the cached fit.
    pub fn partial_residual(&mut self, j: usize) -> Vec<f64> {
        self.load_partial_residual(j);
        self.resid.clone()
    }

    fn context(&self, j: usize) -> MoveContext<'_> {
        MoveContext {
            data: &self.data,
            resid: &self.resid,
            leaf_of: &self.leaf_of[j],
            hyper: &self.hyper,
            inflation: &self.inflation,
            sigma2: self.forest.sigma2,
        }
    }

    /// Draws σ² given the current trees.
    pub fn update_sigma2<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<f64> {
        let ssr = self.sum_squared_residuals();
        let s = &self.hyper.settings;
        let sigma2 = sample_sigma2(
            ssr,
            self.data.n(),
            s.nu,
            self.hyper.lambda,
            self.inflation.kappa,
            self.inflation.prior_temper,
            rng,
        )?;
        self.forest.sigma2 = sigma2;
        Ok(sigma2)
    }

    /// One Metropolis–Hastings update of tree `j` against its partial
    /// residual (which must already be loaded).
    fn mh_step(&mut self, j: usize, rng: &mut impl Rng) -> (MoveKind, bool) {
        let ctx = self.context(j);
        let tree = &self.forest.trees[j];
        let proposal = propose_move(tree, &ctx, rng);
        let log_ratio = log_acceptance_ratio(tree, &ctx, &proposal);
        let kind = proposal.kind();
        // draw the uniform even for infeasible moves so the stream layout
        // does not depend on feasibility
        let u: f64 = rng.random();
        let accept = log_ratio > f64::NEG_INFINITY && u.ln() < log_ratio;
        if accept {
            apply_proposal(
                &mut self.forest.trees[j],
                &mut self.leaf_of[j],
                &self.data,
                &proposal,
            );
        }
        (kind, accept)
    }

    /// Metropolis–Hastings step for tree `j` followed by its leaf-mean draw.
    pub fn mh_step_tree<R: Rng>(&mut self, j: usize, rng: &mut R) -> Result<(MoveKind, bool)> {
        self.load_partial_residual(j);
        let out = self.mh_step(j, rng);
        self.counters.record(out.0, out.1);
        self.update_leaf_means(j, rng)?;
        Ok(out)
    }

    /// Gibbs draw of every leaf mean of tree `j`; updates the cached fit.
    fn update_leaf_means<R: Rng + ?Sized>(&mut self, j: usize, rng: &mut R) -> Result<()> {
        let tree = &mut self.forest.trees[j];
        let leaves = &self.leaf_of[j];
        let mut stats = vec![NodeSufficientStats::default(); tree.capacity()];
        for (i, &lf) in leaves.iter().enumerate() {
            stats[lf].push(self.resid[i]);
        }
        for leaf in tree.leaves() {
            let mu = sample_leaf_mean(
                &stats[leaf],
                self.forest.sigma2,
                &self.hyper,
                &self.inflation,
                rng,
            )?;
            tree.set_mu(leaf, mu);
        }
        let y = self.data.response();
        for (i, &lf) in leaves.iter().enumerate() {
            self.fit[i] = y[i] - self.resid[i] + tree.mu(lf);
        }
        Ok(())
    }

    /// One full sweep: σ², then each tree's structure and leaf means in turn.
    /// Returns the move tallies of this sweep.
    pub fn gibbs_iteration<R: Rng>(&mut self, rng: &mut R) -> Result<MoveCounters> {
        self.refresh_fit();
        self.update_sigma2(rng)?;
        let mut sweep = MoveCounters::default();
        for j in 0..self.forest.trees.len() {
            self.load_partial_residual(j);
            let (kind, accepted) = self.mh_step(j, rng);
            sweep.record(kind, accepted);
            self.update_leaf_means(j, rng)?;
        }
        self.counters.add(&sweep);
        Ok(sweep)
    }
}

/// Draws a forest from the prior conditioned on every leaf holding at least
/// one row of `data`, by whole-tree rejection.
pub fn draw_forest_from_prior<R: Rng + ?Sized>(
    data: &Dataset,
    hyper: &BartHyper,
    rng: &mut R,
) -> Result<Forest> {
    let s = &hyper.settings;
    let leaf_prior =
        Normal::new(hyper.mu_mu, hyper.sigma_mu).map_err(|e| Error::invalid(e.to_string()))?;
    let mut trees = Vec::with_capacity(s.m);
    for _ in 0..s.m {
        let tree = loop {
            if let Some(t) = try_draw_tree(data, hyper, &leaf_prior, rng) {
                break t;
            }
        };
        trees.push(tree);
    }
    let sigma2 = sample_inv_gamma(s.nu / 2.0, s.nu * hyper.lambda / 2.0, rng)?;
    Ok(Forest {
        trees,
        sigma2,
        n_features: data.p(),
    })
}

fn try_draw_tree<R: Rng + ?Sized>(
    data: &Dataset,
    hyper: &BartHyper,
    leaf_prior: &Normal<f64>,
    rng: &mut R,
) -> Option<DecisionTree> {
    let mut tree = DecisionTree::stump(leaf_prior.sample(rng));
    let mut pending = vec![(DecisionTree::ROOT, (0..data.n()).collect::<Vec<usize>>())];
    while let Some((node, rows)) = pending.pop() {
        let depth = tree.node(node).depth;
        if rng.random::<f64>() >= split_probability(&hyper.settings, depth) {
            continue;
        }
        let var = rng.random_range(0..data.p());
        let values = super::moves::distinct_values(data, &rows, var);
        let value = values[rng.random_range(0..values.len())];
        let rule = SplitRule { var, value };
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
            rows.iter().partition(|&&i| rule.goes_left(data.row(i)));
        if left_rows.is_empty() || right_rows.is_empty() {
            return None;
        }
        let (l, r) = tree.grow(node, rule, leaf_prior.sample(rng), leaf_prior.sample(rng));
        pending.push((r, right_rows));
        pending.push((l, left_rows));
    }
    Some(tree)
}
