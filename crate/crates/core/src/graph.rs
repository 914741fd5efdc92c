//! Undirected sparse graphs in compressed-row form and the symmetric
//! normalized Laplacian `L = I - D^{-1/2} A D^{-1/2}` as a matrix-free operator.
//!
//! Degree-zero nodes get `D^{-1/2} = 0` and a zero diagonal, so their rows and
//! columns of `L` vanish. Call [`Graph::add_self_loops`] first if isolated
//! nodes should instead keep a unit diagonal.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::matrix::Matrix;

/// Largest graph [`Graph::laplacian_dense`] will materialize by default.
pub const DEFAULT_ORACLE_CAP: usize = 256;

/// Immutable undirected graph. Every stored arc `(i, j, w)` has its mirror
/// `(j, i, w)`, columns within a row are strictly increasing, and
/// `degrees[i]` is the weight sum of row `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    num_nodes: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    edge_weights: Vec<f64>,
    degrees: Vec<f64>,
    inv_sqrt_degrees: Vec<f64>,
}

impl Graph {
    /// Unweighted edges; every edge gets weight 1.
    pub fn from_edges<I>(num_nodes: usize, edges: I) -> Result<Graph>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        Self::from_weighted_edges(num_nodes, edges.into_iter().map(|(i, j)| (i, j, 1.0)))
    }

    /// Builds a symmetric graph from possibly directed, possibly repeated arcs.
    ///
    /// Repeated copies of the same directed arc are summed in input order.
    /// The two directions of a pair are then merged by taking the larger
    /// weight, so `(0,1)` plus `(1,0)` is the same graph as `(0,1)` alone.
    /// Self-loops in the input are dropped; use [`Graph::add_self_loops`].
    pub fn from_weighted_edges<I>(num_nodes: usize, edges: I) -> Result<Graph>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut arcs: Vec<(usize, usize, f64)> = Vec::new();
        for (i, j, w) in edges {
            for index in [i, j] {
                if index >= num_nodes {
                    return Err(Error::NodeOutOfRange { index, num_nodes });
                }
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidWeight {
                    src: i,
                    dst: j,
                    weight: w,
                });
            }
            if i != j {
                arcs.push((i, j, w));
            }
        }

        // sum repeated directed arcs (stable sort keeps input order per key)
        arcs.sort_by_key(|a| (a.0, a.1));
        let mut summed: Vec<(usize, usize, f64)> = Vec::with_capacity(arcs.len());
        for (i, j, w) in arcs {
            match summed.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += w,
                _ => summed.push((i, j, w)),
            }
        }

        // merge the two directions of each pair by max
        let mut pairs: Vec<(usize, usize, f64)> = summed
            .into_iter()
            .map(|(i, j, w)| (i.min(j), i.max(j), w))
            .collect();
        pairs.sort_by_key(|a| (a.0, a.1));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(pairs.len());
        for (i, j, w) in pairs {
            match merged.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 = last.2.max(w),
                _ => merged.push((i, j, w)),
            }
        }

        let mut both: Vec<(usize, usize, f64)> = Vec::with_capacity(merged.len() * 2);
        for (i, j, w) in merged {
            both.push((i, j, w));
            both.push((j, i, w));
        }
        both.sort_by_key(|a| (a.0, a.1));
        Ok(Self::from_sorted_arcs(num_nodes, &both))
    }

    /// `arcs` must be sorted by (row, col) without duplicates and symmetric.
    fn from_sorted_arcs(num_nodes: usize, arcs: &[(usize, usize, f64)]) -> Graph {
        let mut row_offsets = vec![0usize; num_nodes + 1];
        for &(i, _, _) in arcs {
            row_offsets[i + 1] += 1;
        }
        for i in 0..num_nodes {
            row_offsets[i + 1] += row_offsets[i];
        }
        let col_indices = arcs.iter().map(|a| a.1).collect();
        let edge_weights: Vec<f64> = arcs.iter().map(|a| a.2).collect();
        let degrees: Vec<f64> = (0..num_nodes)
            .map(|i| edge_weights[row_offsets[i]..row_offsets[i + 1]].iter().sum())
            .collect();
        let inv_sqrt_degrees = degrees
            .iter()
            .map(|&d| if d > 0.0 { 1.0 / math::sqrt(d) } else { 0.0 })
            .collect();
        Graph {
            num_nodes,
            row_offsets,
            col_indices,
            edge_weights,
            degrees,
            inv_sqrt_degrees,
        }
    }

    #[inline]
    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// Number of stored directed arcs (twice the undirected edge count, plus loops).
    #[inline]
    pub fn num_arcs(&self) -> usize {
        self.col_indices.len()
    }

    #[inline]
    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn edge_weights(&self) -> &[f64] {
        &self.edge_weights
    }

    /// Neighbors of `node` with edge weights, in increasing index order.
    pub fn neighbors(&self, node: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_offsets[node]..self.row_offsets[node + 1];
        self.col_indices[range.clone()]
            .iter()
            .copied()
            .zip(self.edge_weights[range].iter().copied())
    }

    /// Undirected edges `(i, j, w)` with `i <= j`, sorted.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.num_nodes).flat_map(move |i| {
            self.neighbors(i)
                .filter(move |&(j, _)| j >= i)
                .map(move |(j, w)| (i, j, w))
        })
    }

    pub fn has_self_loops(&self) -> bool {
        (0..self.num_nodes).any(|i| self.neighbors(i).any(|(j, _)| j == i))
    }

    /// New graph with `weight` added on every diagonal entry.
    pub fn add_self_loops(&self, weight: f64) -> Result<Graph> {
        if !(weight >= 0.0) || !weight.is_finite() {
            return Err(Error::NegativeLoopWeight(weight));
        }
        if weight == 0.0 {
            return Ok(self.clone());
        }
        let mut arcs = Vec::with_capacity(self.num_arcs() + self.num_nodes);
        for i in 0..self.num_nodes {
            let mut placed = false;
            for (j, w) in self.neighbors(i) {
                if j == i {
                    arcs.push((i, j, w + weight));
                    placed = true;
                    continue;
                }
                if j > i && !placed {
                    arcs.push((i, i, weight));
                    placed = true;
                }
                arcs.push((i, j, w));
            }
            if !placed {
                arcs.push((i, i, weight));
            }
        }
        Ok(Self::from_sorted_arcs(self.num_nodes, &arcs))
    }

    /// Computes `L x` for a matrix with one row per node, without materializing `L`.
    pub fn normalized_laplacian_apply(&self, x: &Matrix) -> Result<Matrix> {
        self.check_rows(x)?;
        let mut out = Matrix::zeros(x.rows(), x.cols());
        self.laplacian_apply_into(x, &mut out);
        Ok(out)
    }

    /// `L x` for a single signal.
    pub fn normalized_laplacian_apply_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        let m = Matrix::column(x);
        Ok(self.normalized_laplacian_apply(&m)?.into_vec())
    }

    pub(crate) fn check_rows(&self, x: &Matrix) -> Result<()> {
        if x.rows() != self.num_nodes {
            return Err(Error::DimensionMismatch {
                expected: self.num_nodes,
                actual: x.rows(),
            });
        }
        Ok(())
    }

    /// Row sums run left to right over increasing column index, so results
    /// do not depend on how callers split work across rows.
    pub(crate) fn laplacian_apply_into(&self, x: &Matrix, out: &mut Matrix) {
        let d = x.cols();
        for i in 0..self.num_nodes {
            let ri = self.inv_sqrt_degrees[i];
            let out_row = out.row_mut(i);
            if self.degrees[i] > 0.0 {
                out_row.copy_from_slice(x.row(i));
            } else {
                out_row.iter_mut().for_each(|v| *v = 0.0);
                continue;
            }
            for k in self.row_offsets[i]..self.row_offsets[i + 1] {
                let j = self.col_indices[k];
                let coef = self.edge_weights[k] * ri * self.inv_sqrt_degrees[j];
                let xj = x.row(j);
                for c in 0..d {
                    out_row[c] -= coef * xj[c];
                }
            }
        }
    }

    /// Materializes `L` for graphs up to `cap` nodes.
    pub fn laplacian_dense_with_cap(&self, cap: usize) -> Result<Matrix> {
        let n = self.num_nodes;
        if n > cap {
            return Err(Error::OracleCapExceeded { num_nodes: n, cap });
        }
        let mut l = Matrix::zeros(n, n);
        for i in 0..n {
            if self.degrees[i] > 0.0 {
                l.set(i, i, 1.0);
            }
            for (j, w) in self.neighbors(i) {
                let v = l.get(i, j) - w * self.inv_sqrt_degrees[i] * self.inv_sqrt_degrees[j];
                l.set(i, j, v);
            }
        }
        Ok(l)
    }

    /// [`Graph::laplacian_dense_with_cap`] with [`DEFAULT_ORACLE_CAP`].
    pub fn laplacian_dense(&self) -> Result<Matrix> {
        self.laplacian_dense_with_cap(DEFAULT_ORACLE_CAP)
    }
}
