//! Feature-space kNN similarity graph and the low-pass similarity path.
//!
//! The graph depends only on the feature matrix, never on the original
//! topology.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::filter::filter_apply;
use crate::graph::Graph;
use crate::math;
use crate::matrix::{EmbeddingMatrix, FeatureMatrix};

pub const DEFAULT_K: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Metric {
    #[default]
    Euclidean,
    Cosine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Weighting {
    /// Every kept edge has weight 1.
    #[default]
    Binary,
    /// Edge weight `1 / (1 + d)`.
    InverseDistance,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct KnnConfig {
    pub k: usize,
    pub metric: Metric,
    pub weighting: Weighting,
    /// `true`: keep an edge if either endpoint picked the other (union).
    /// `false`: keep it only if both did (mutual kNN).
    pub symmetrize: bool,
}

impl Default for KnnConfig {
    fn default() -> Self {
        KnnConfig {
            k: DEFAULT_K,
            metric: Metric::Euclidean,
            weighting: Weighting::Binary,
            symmetrize: true,
        }
    }
}

impl KnnConfig {
    pub fn validate(&self, num_nodes: usize) -> Result<()> {
        if self.k == 0 || self.k >= num_nodes {
            return Err(Error::InvalidK { k: self.k, num_nodes });
        }
        Ok(())
    }
}

/// Lazily evaluated pairwise distances over the rows of a feature matrix.
///
/// Cosine distance is `1 - x_i.x_j / (|x_i| |x_j|)`; a zero-norm row has
/// distance 1 to every other row.
#[derive(Debug, Clone)]
pub struct PairwiseDistance<'a> {
    x: &'a FeatureMatrix,
    metric: Metric,
    norms: Vec<f64>,
}

impl<'a> PairwiseDistance<'a> {
    pub fn new(x: &'a FeatureMatrix, metric: Metric) -> Self {
        let norms = match metric {
            Metric::Euclidean => Vec::new(),
            Metric::Cosine => x
                .iter_rows()
                .map(|r| math::sqrt(r.iter().map(|v| v * v).sum()))
                .collect(),
        };
        PairwiseDistance { x, metric, norms }
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        let a = self.x.row(i);
        let b = self.x.row(j);
        match self.metric {
            Metric::Euclidean => math::sqrt(a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum()),
            Metric::Cosine => {
                let (ni, nj) = (self.norms[i], self.norms[j]);
                if ni == 0.0 || nj == 0.0 {
                    return 1.0;
                }
                let dot: f64 = a.iter().zip(b).map(|(u, v)| u * v).sum();
                (1.0 - dot / (ni * nj)).clamp(0.0, 2.0)
            }
        }
    }
}

pub fn pairwise_distance(x: &FeatureMatrix, metric: Metric) -> PairwiseDistance<'_> {
    PairwiseDistance::new(x, metric)
}

/// The `k` nearest rows to `i` (self excluded) as `(j, d_ij)`, nearest first,
/// ties broken by lower index.
pub fn nearest_neighbors(dist: &PairwiseDistance<'_>, i: usize, k: usize) -> Vec<(usize, f64)> {
    let n = dist.x.rows();
    let mut cand: Vec<(usize, f64)> = (0..n).filter(|&j| j != i).map(|j| (j, dist.get(i, j))).collect();
    let cmp = |a: &(usize, f64), b: &(usize, f64)| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0));
    let k = k.min(cand.len());
    if k < cand.len() {
        cand.select_nth_unstable_by(k, cmp);
        cand.truncate(k);
    }
    cand.sort_by(cmp);
    cand
}

/// Builds the kNN similarity graph. Symmetrization merges the two directions
/// of a pair by max weight (distances are symmetric, so both agree).
pub fn build_knn_graph(x: &FeatureMatrix, cfg: &KnnConfig) -> Result<Graph> {
    let n = x.rows();
    cfg.validate(n)?;
    let dist = PairwiseDistance::new(x, cfg.metric);
    let weight = |d: f64| match cfg.weighting {
        Weighting::Binary => 1.0,
        Weighting::InverseDistance => 1.0 / (1.0 + d),
    };

    let picks: Vec<Vec<(usize, f64)>> = (0..n).map(|i| nearest_neighbors(&dist, i, cfg.k)).collect();

    let mut arcs: Vec<(usize, usize, f64)> = Vec::with_capacity(n * cfg.k);
    if cfg.symmetrize {
        for (i, row) in picks.iter().enumerate() {
            arcs.extend(row.iter().map(|&(j, d)| (i, j, weight(d))));
        }
    } else {
        let mut sorted: Vec<Vec<usize>> = picks.iter().map(|r| r.iter().map(|p| p.0).collect()).collect();
        for s in &mut sorted {
            s.sort_unstable();
        }
        for (i, row) in picks.iter().enumerate() {
            for &(j, d) in row {
                if i < j && sorted[j].binary_search(&i).is_ok() {
                    arcs.push((i, j, weight(d)));
                }
            }
        }
    }
    Graph::from_weighted_edges(n, arcs)
}

/// Low-pass similarity-path embedding `W_{0,C}` applied on the kNN graph.
pub fn similarity_path_embed(x: &FeatureMatrix, cfg: &KnnConfig, order: usize) -> Result<EmbeddingMatrix> {
    let g = build_knn_graph(x, cfg)?;
    filter_apply(&g, x, 0, order)
}
