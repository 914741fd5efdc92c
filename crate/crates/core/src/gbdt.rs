//! Second-order gradient-boosted regression trees for binary classification.
//!
//! Each round fits a tree to the gradient `g = w (p - y)` and hessian
//! `h = w p (1 - p)` of the weighted logistic loss, with objective
//! regularizer `gamma * T + lambda/2 * sum(w_leaf^2)`. Splits are exact and
//! greedy over midpoints of sorted unique feature values, with gain
//!
//! ```text
//! gain = 1/2 [G_L^2/(H_L+lambda) + G_R^2/(H_R+lambda) - G^2/(H+lambda)]
//! ```
//!
//! accepted when `gain - gamma > 0`. Leaf weights are `-G / (H + lambda)`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::labels::{Label, LabelSet, Split};
use crate::math;
use crate::matrix::{EmbeddingMatrix, Matrix};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct GbdtParams {
    pub num_rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub reg_lambda: f64,
    pub gamma: f64,
    pub min_child_hessian: f64,
    /// Weight on positive samples; `None` means `#neg / #pos` on the train split.
    pub pos_weight: Option<f64>,
    /// Initial margin; `None` means the weighted log-odds of the train split.
    pub base_score: Option<f64>,
}

impl Default for GbdtParams {
    fn default() -> Self {
        GbdtParams {
            num_rounds: 100,
            max_depth: 4,
            learning_rate: 0.1,
            reg_lambda: 1.0,
            gamma: 0.0,
            min_child_hessian: 1.0,
            pos_weight: None,
            base_score: None,
        }
    }
}

impl GbdtParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(format!("gbdt: {what}")));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.reg_lambda >= 0.0 && self.gamma >= 0.0 && self.min_child_hessian >= 0.0) {
            return bad("reg_lambda, gamma and min_child_hessian must be non-negative");
        }
        if let Some(w) = self.pos_weight {
            if !(w > 0.0 && w.is_finite()) {
                return bad("pos_weight must be positive");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        /// Where non-finite values go.
        default_left: bool,
        left: usize,
        right: usize,
        /// Loss reduction of this split (before subtracting gamma).
        gain: f64,
    },
    Leaf {
        weight: f64,
    },
}

/// One regression tree; nodes are stored in preorder with the root first.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Tree {
    nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn leaf(weight: f64) -> Self {
        Tree {
            nodes: vec![TreeNode::Leaf { weight }],
        }
    }

    pub fn from_nodes(nodes: Vec<TreeNode>) -> Result<Self> {
        let t = Tree { nodes };
        t.validate()?;
        Ok(t)
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::InvalidConfig("tree has no nodes".into()));
        }
        for (i, n) in self.nodes.iter().enumerate() {
            match *n {
                TreeNode::Split {
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    if left <= i || right <= i || left >= self.nodes.len() || right >= self.nodes.len() {
                        return Err(Error::InvalidConfig(format!("tree node {i} has invalid children")));
                    }
                    if !threshold.is_finite() {
                        return Err(Error::InvalidConfig(format!("tree node {i} has a non-finite threshold")));
                    }
                }
                TreeNode::Leaf { weight } => {
                    if !weight.is_finite() {
                        return Err(Error::InvalidConfig(format!("tree node {i} has a non-finite weight")));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                TreeNode::Leaf { weight } => return weight,
                TreeNode::Split {
                    feature,
                    threshold,
                    default_left,
                    left,
                    right,
                    ..
                } => {
                    let v = row[feature];
                    let go_left = if v.is_finite() { v < threshold } else { default_left };
                    at = if go_left { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], at: usize) -> usize {
            match nodes[at] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn num_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, TreeNode::Leaf { .. })).count()
    }

    pub fn leaf_weights(&self) -> Vec<f64> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                TreeNode::Leaf { weight } => Some(*weight),
                _ => None,
            })
            .collect()
    }

    /// Index (into [`Tree::nodes`]) of the leaf reached by `row`.
    pub fn leaf_index(&self, row: &[f64]) -> usize {
        let mut at = 0;
        while let TreeNode::Split {
            feature,
            threshold,
            default_left,
            left,
            right,
            ..
        } = self.nodes[at]
        {
            let v = row[feature];
            let go_left = if v.is_finite() { v < threshold } else { default_left };
            at = if go_left { left } else { right };
        }
        at
    }
}

/// `-G / (H + lambda)`, or 0 when the denominator vanishes.
pub fn leaf_weight(grad_sum: f64, hess_sum: f64, lambda: f64) -> f64 {
    let denom = hess_sum + lambda;
    if denom > 0.0 {
        -grad_sum / denom
    } else {
        0.0
    }
}

/// Loss reduction of splitting `(G, H)` into left and right parts.
pub fn split_gain(gl: f64, hl: f64, gr: f64, hr: f64, lambda: f64) -> f64 {
    let score = |g: f64, h: f64| if h + lambda > 0.0 { g * g / (h + lambda) } else { 0.0 };
    0.5 * (score(gl, hl) + score(gr, hr) - score(gl + gr, hl + hr))
}

/// Second-order objective `sum_leaves (G w + (H + lambda) w^2 / 2) + gamma T`
/// of a tree evaluated on the given rows.
pub fn tree_objective(tree: &Tree, x: &Matrix, rows: &[usize], grad: &[f64], hess: &[f64], lambda: f64, gamma: f64) -> f64 {
    let n = tree.nodes.len();
    let mut g = vec![0.0; n];
    let mut h = vec![0.0; n];
    for &r in rows {
        let leaf = tree.leaf_index(x.row(r));
        g[leaf] += grad[r];
        h[leaf] += hess[r];
    }
    let mut obj = 0.0;
    for (i, node) in tree.nodes.iter().enumerate() {
        if let TreeNode::Leaf { weight } = node {
            obj += g[i] * weight + 0.5 * (h[i] + lambda) * weight * weight + gamma;
        }
    }
    obj
}

struct SplitChoice {
    feature: usize,
    threshold: f64,
    gain: f64,
}

struct Grower<'a> {
    x: &'a Matrix,
    grad: &'a [f64],
    hess: &'a [f64],
    params: &'a GbdtParams,
    nodes: Vec<TreeNode>,
}

impl Grower<'_> {
    /// `sorted[f]` lists this node's rows ordered by feature `f` (ties by row).
    fn grow(&mut self, rows: &[usize], sorted: Vec<Vec<usize>>, depth: usize) -> usize {
        let (mut g, mut h) = (0.0, 0.0);
        for &r in rows {
            g += self.grad[r];
            h += self.hess[r];
        }
        let index = self.nodes.len();
        let choice = if depth < self.params.max_depth {
            self.best_split(&sorted, g, h)
        } else {
            None
        };
        let Some(choice) = choice else {
            self.nodes.push(TreeNode::Leaf {
                weight: leaf_weight(g, h, self.params.reg_lambda),
            });
            return index;
        };

        self.nodes.push(TreeNode::Leaf { weight: 0.0 });
        let goes_left = |r: usize| self.x.get(r, choice.feature) < choice.threshold;
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&r| goes_left(r));
        let mut left_sorted = Vec::with_capacity(sorted.len());
        let mut right_sorted = Vec::with_capacity(sorted.len());
        for list in sorted {
            let (l, r): (Vec<usize>, Vec<usize>) = list.into_iter().partition(|&r| goes_left(r));
            left_sorted.push(l);
            right_sorted.push(r);
        }
        let left = self.grow(&left_rows, left_sorted, depth + 1);
        let right = self.grow(&right_rows, right_sorted, depth + 1);
        self.nodes[index] = TreeNode::Split {
            feature: choice.feature,
            threshold: choice.threshold,
            default_left: true,
            left,
            right,
            gain: choice.gain,
        };
        index
    }

    /// Best split by net gain; ties keep the lowest feature, then the lowest threshold.
    fn best_split(&self, sorted: &[Vec<usize>], g: f64, h: f64) -> Option<SplitChoice> {
        let lambda = self.params.reg_lambda;
        let min_h = self.params.min_child_hessian;
        let mut best: Option<SplitChoice> = None;
        let mut best_net = 0.0;
        for (feature, list) in sorted.iter().enumerate() {
            let (mut gl, mut hl) = (0.0, 0.0);
            for k in 0..list.len().saturating_sub(1) {
                let r = list[k];
                gl += self.grad[r];
                hl += self.hess[r];
                let a = self.x.get(r, feature);
                let b = self.x.get(list[k + 1], feature);
                if a == b {
                    continue;
                }
                let (gr, hr) = (g - gl, h - hl);
                if hl < min_h || hr < min_h {
                    continue;
                }
                let gain = split_gain(gl, hl, gr, hr, lambda);
                let net = gain - self.params.gamma;
                if net > best_net {
                    best_net = net;
                    best = Some(SplitChoice {
                        feature,
                        threshold: midpoint(a, b),
                        gain,
                    });
                }
            }
        }
        best
    }
}

/// Threshold strictly above `a` and at most `b`.
fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    if m > a {
        m
    } else {
        b
    }
}

/// Grows one tree on `rows` of `x` for the given per-row gradients and hessians
/// (indexed by row of `x`).
pub fn grow_tree(x: &Matrix, rows: &[usize], grad: &[f64], hess: &[f64], params: &GbdtParams) -> Tree {
    let sorted: Vec<Vec<usize>> = (0..x.cols())
        .map(|f| {
            let mut list = rows.to_vec();
            list.sort_by(|&a, &b| x.get(a, f).total_cmp(&x.get(b, f)).then(a.cmp(&b)));
            list
        })
        .collect();
    let mut grower = Grower {
        x,
        grad,
        hess,
        params,
        nodes: Vec::new(),
    };
    grower.grow(rows, sorted, 0);
    Tree { nodes: grower.nodes }
}

/// Fitted ensemble: `p = sigmoid(base_score + eta * sum_j f_j(x))`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TreeEnsemble {
    pub trees: Vec<Tree>,
    pub base_score: f64,
    pub num_features: usize,
    /// Hyperparameters with `pos_weight` and `base_score` resolved.
    pub params: GbdtParams,
}

impl TreeEnsemble {
    pub fn empty(num_features: usize, base_score: f64, params: GbdtParams) -> Self {
        TreeEnsemble {
            trees: Vec::new(),
            base_score,
            num_features,
            params,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !self.base_score.is_finite() {
            return Err(Error::InvalidConfig("base_score must be finite".into()));
        }
        for t in &self.trees {
            t.validate()?;
            for n in &t.nodes {
                if let TreeNode::Split { feature, .. } = n {
                    if *feature >= self.num_features {
                        return Err(Error::InvalidConfig(format!("split on feature {feature} out of range")));
                    }
                }
            }
        }
        Ok(())
    }

    fn check_width(&self, h: &Matrix) -> Result<()> {
        if h.cols() != self.num_features {
            return Err(Error::DimensionMismatch {
                expected: self.num_features,
                actual: h.cols(),
            });
        }
        Ok(())
    }

    pub fn predict_margin_row(&self, row: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict_row(row)).sum();
        self.base_score + self.params.learning_rate * sum
    }

    pub fn predict_margin(&self, h: &EmbeddingMatrix) -> Result<Vec<f64>> {
        self.check_width(h)?;
        Ok(h.iter_rows().map(|r| self.predict_margin_row(r)).collect())
    }

    /// Fraud probability per row.
    pub fn predict_proba(&self, h: &EmbeddingMatrix) -> Result<Vec<f64>> {
        Ok(self.predict_margin(h)?.into_iter().map(math::sigmoid).collect())
    }

    /// Total split gain per feature.
    pub fn feature_importance(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.num_features];
        for t in &self.trees {
            for n in &t.nodes {
                if let TreeNode::Split { feature, gain, .. } = n {
                    out[*feature] += gain;
                }
            }
        }
        out
    }
}

pub fn predict_proba(e: &TreeEnsemble, h: &EmbeddingMatrix) -> Result<Vec<f64>> {
    e.predict_proba(h)
}

pub fn feature_importance(e: &TreeEnsemble) -> Vec<f64> {
    e.feature_importance()
}

/// Weighted logistic loss `sum_i w_i * -[y ln p + (1-y) ln(1-p)]` from margins.
pub fn weighted_logloss(margins: &[f64], targets: &[f64], weights: &[f64]) -> f64 {
    margins
        .iter()
        .zip(targets)
        .zip(weights)
        .map(|((&m, &y), &w)| {
            // ln(1 + e^m) - y m, evaluated stably
            let softplus = if m > 0.0 {
                m + math::ln(1.0 + math::exp(-m))
            } else {
                math::ln(1.0 + math::exp(m))
            };
            w * (softplus - y * m)
        })
        .sum()
}

/// Fit result with the training loss before the first round and after each round.
#[derive(Debug, Clone)]
pub struct GbdtFit {
    pub ensemble: TreeEnsemble,
    pub train_loss: Vec<f64>,
}

/// Fits on the train split of `labels`.
pub fn fit_gbdt(h: &EmbeddingMatrix, labels: &LabelSet, params: &GbdtParams) -> Result<TreeEnsemble> {
    Ok(fit_gbdt_traced(h, labels, params)?.ensemble)
}

pub fn fit_gbdt_traced(h: &EmbeddingMatrix, labels: &LabelSet, params: &GbdtParams) -> Result<GbdtFit> {
    params.validate()?;
    if h.rows() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            actual: h.rows(),
        });
    }
    let rows = labels.indices(Split::Train);
    let (n_pos, n_neg) = labels.class_counts(Split::Train);
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass {
            fraud: n_pos,
            benign: n_neg,
        });
    }
    for &r in &rows {
        if let Some(c) = h.row(r).iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: r, col: c });
        }
    }
    let pos_weight = params.pos_weight.unwrap_or(n_neg as f64 / n_pos as f64);
    let base_score = params
        .base_score
        .unwrap_or_else(|| math::ln(pos_weight * n_pos as f64 / n_neg as f64));

    let n = h.rows();
    let mut target = vec![0.0; n];
    let mut weight = vec![0.0; n];
    for &r in &rows {
        let y = labels.label(r) == Label::Fraud;
        target[r] = if y { 1.0 } else { 0.0 };
        weight[r] = if y { pos_weight } else { 1.0 };
    }
    let mut margin = vec![base_score; n];
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];

    let sub = |v: &[f64]| rows.iter().map(|&r| v[r]).collect::<Vec<_>>();
    let (t_sub, w_sub) = (sub(&target), sub(&weight));
    let mut train_loss = Vec::with_capacity(params.num_rounds + 1);
    train_loss.push(weighted_logloss(&sub(&margin), &t_sub, &w_sub));

    let mut resolved = params.clone();
    resolved.pos_weight = Some(pos_weight);
    resolved.base_score = Some(base_score);
    let mut ensemble = TreeEnsemble::empty(h.cols(), base_score, resolved);

    for _ in 0..params.num_rounds {
        for &r in &rows {
            let p = math::sigmoid(margin[r]);
            grad[r] = weight[r] * (p - target[r]);
            hess[r] = weight[r] * p * (1.0 - p);
        }
        let tree = grow_tree(h, &rows, &grad, &hess, params);
        for &r in &rows {
            margin[r] += params.learning_rate * tree.predict_row(h.row(r));
        }
        ensemble.trees.push(tree);
        train_loss.push(weighted_logloss(&sub(&margin), &t_sub, &w_sub));
    }
    Ok(GbdtFit { ensemble, train_loss })
}
