//! Synthetic heterophilous fraud graphs with planted labels.
//!
//! Labels are Bernoulli draws with the configured fraud fraction. Features are
//! isotropic Gaussians; the fraud mean sits `feature_shift` away from the
//! benign mean along the all-ones direction. Each of the `n * avg_degree / 2`
//! base edges joins two nodes of the same class with probability `homophily`
//! and otherwise joins a fraud node to a benign node. Every fraud node then
//! gets about `camouflage_rate` extra edges to random benign nodes.
//!
//! Randomness comes from the `labels`, `features`, `edges` and `split`
//! streams of the seed (see [`crate::rng`]).

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::labels::{Label, LabelSet};
use crate::math;
use crate::matrix::{FeatureMatrix, Matrix};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct SyntheticConfig {
    pub n_nodes: usize,
    pub fraud_fraction: f64,
    pub feature_dim: usize,
    /// Probability a base edge joins same-class endpoints.
    pub homophily: f64,
    /// Expected extra fraud-to-benign edges per fraud node.
    pub camouflage_rate: f64,
    /// Distance between the class means.
    pub feature_shift: f64,
    pub noise_sigma: f64,
    pub avg_degree: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_nodes: 2000,
            fraud_fraction: 0.05,
            feature_dim: 16,
            homophily: 0.3,
            camouflage_rate: 0.5,
            feature_shift: 1.0,
            noise_sigma: 1.0,
            avg_degree: 10.0,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(format!("synthetic: {what}")));
        if self.n_nodes < 10 {
            return bad("n_nodes must be at least 10");
        }
        for (name, v) in [
            ("fraud_fraction", self.fraud_fraction),
            ("homophily", self.homophily),
            ("camouflage_rate", self.camouflage_rate),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(&format!("{name} must lie in [0, 1]"));
            }
        }
        if self.feature_dim == 0 {
            return bad("feature_dim must be positive");
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) || !self.feature_shift.is_finite() {
            return bad("noise_sigma and feature_shift must be finite, noise_sigma non-negative");
        }
        if !(self.avg_degree >= 0.0 && self.avg_degree.is_finite()) {
            return bad("avg_degree must be non-negative");
        }
        if self.avg_degree > (self.n_nodes - 1) as f64 / 2.0 {
            return Err(Error::Infeasible(format!(
                "avg_degree {} too dense for {} nodes (max {})",
                self.avg_degree,
                self.n_nodes,
                (self.n_nodes - 1) as f64 / 2.0
            )));
        }
        Ok(())
    }
}

/// A generated dataset. The label set carries a stratified 70/15/15 split
/// drawn from the same seed.
#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub graph: Graph,
    pub features: FeatureMatrix,
    pub labels: LabelSet,
}

pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<SyntheticData> {
    cfg.validate()?;
    let n = cfg.n_nodes;

    let mut label_rng = rng::stream(cfg.seed, rng::STREAM_LABELS);
    let labels: Vec<Label> = (0..n)
        .map(|_| {
            if label_rng.random_bool(cfg.fraud_fraction) {
                Label::Fraud
            } else {
                Label::Benign
            }
        })
        .collect();

    let mut feat_rng = rng::stream(cfg.seed, rng::STREAM_FEATURES);
    let offset = cfg.feature_shift / math::sqrt(cfg.feature_dim as f64);
    let mut data = Vec::with_capacity(n * cfg.feature_dim);
    for l in &labels {
        let mean = if *l == Label::Fraud { offset } else { 0.0 };
        for _ in 0..cfg.feature_dim {
            let z: f64 = StandardNormal.sample(&mut feat_rng);
            data.push(mean + cfg.noise_sigma * z);
        }
    }
    let features = Matrix::from_vec(n, cfg.feature_dim, data)?;

    let fraud: Vec<usize> = (0..n).filter(|&i| labels[i] == Label::Fraud).collect();
    let benign: Vec<usize> = (0..n).filter(|&i| labels[i] == Label::Benign).collect();
    let edges = sample_edges(cfg, &labels, &fraud, &benign)?;
    let graph = Graph::from_edges(n, edges)?;
    let labels = LabelSet::unsplit(labels).stratified_split(0.7, 0.15, cfg.seed)?;
    Ok(SyntheticData {
        graph,
        features,
        labels,
    })
}

fn sample_edges(cfg: &SyntheticConfig, labels: &[Label], fraud: &[usize], benign: &[usize]) -> Result<Vec<(usize, usize)>> {
    let n = cfg.n_nodes;
    let mut rng = rng::stream(cfg.seed, rng::STREAM_EDGES);
    let target = libm::round(n as f64 * cfg.avg_degree / 2.0) as usize;
    let cross_possible = !fraud.is_empty() && !benign.is_empty();
    let mut set: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut order: Vec<(usize, usize)> = Vec::with_capacity(target);
    let budget = 50 * target + 1000;
    let mut attempts = 0;

    let mut insert = |set: &mut BTreeSet<(usize, usize)>, u: usize, v: usize| -> bool {
        let key = (u.min(v), u.max(v));
        if u != v && set.insert(key) {
            order.push(key);
            true
        } else {
            false
        }
    };

    let mut placed = 0;
    while placed < target {
        attempts += 1;
        if attempts > budget {
            return Err(Error::Infeasible(format!(
                "placed only {placed} of {target} edges after {budget} attempts"
            )));
        }
        let same = !cross_possible || rng.random_bool(cfg.homophily);
        let (u, v) = if same {
            let u = rng.random_range(0..n);
            let class = if labels[u] == Label::Fraud { fraud } else { benign };
            if class.len() < 2 {
                continue;
            }
            (u, class[rng.random_range(0..class.len())])
        } else {
            (fraud[rng.random_range(0..fraud.len())], benign[rng.random_range(0..benign.len())])
        };
        if insert(&mut set, u, v) {
            placed += 1;
        }
    }

    if cross_possible && cfg.camouflage_rate > 0.0 {
        for &f in fraud {
            if rng.random_bool(cfg.camouflage_rate) {
                // a few retries in case of collisions with existing edges
                for _ in 0..16 {
                    let b = benign[rng.random_range(0..benign.len())];
                    if insert(&mut set, f, b) {
                        break;
                    }
                }
            }
        }
    }
    Ok(order)
}

/// Fraction of edges whose endpoints share a known label (unknown endpoints are skipped).
pub fn edge_homophily(g: &Graph, labels: &[Label]) -> f64 {
    let (mut same, mut total) = (0usize, 0usize);
    for (i, j, _) in g.edges() {
        if i == j || labels[i] == Label::Unknown || labels[j] == Label::Unknown {
            continue;
        }
        total += 1;
        if labels[i] == labels[j] {
            same += 1;
        }
    }
    if total == 0 {
        0.0
    } else {
        same as f64 / total as f64
    }
}
