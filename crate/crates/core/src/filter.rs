//! Beta-wavelet spectral filters on the normalized Laplacian.
//!
//! The kernel of shape `(p, q)` is the Beta density rescaled to the spectral
//! range `[0, 2]`:
//!
//! ```text
//! beta*_{p,q}(w) = 1/2 * beta_{p,q}(w / 2)
//!                = (w/2)^p (1 - w/2)^q / (2 B(p+1, q+1)),   w in [0, 2]
//! ```
//!
//! With integer `p, q` it is a polynomial, so the operator
//! `W_{p,q} = beta*_{p,q}(L) = (L/2)^p (I - L/2)^q / (2 B(p+1, q+1))` is
//! evaluated with `p + q` sparse Laplacian products. A bank of order `C`
//! holds the `C + 1` kernels with `p + q = C`; `W_{0,C}` is low-pass and
//! `W_{C,0}` high-pass.

use alloc::vec::Vec;

use crate::eigen;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::math;
use crate::matrix::{EmbeddingMatrix, FeatureMatrix, Matrix};

/// Largest bank order accepted by [`KernelBank::new`].
pub const MAX_FILTER_ORDER: usize = 8;

/// Default bank order.
pub const DEFAULT_FILTER_ORDER: usize = 2;

/// One Beta kernel of a bank.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BetaKernel {
    pub p: usize,
    pub q: usize,
    /// `1 / (2 B(p+1, q+1)) = (p+q+1) * binom(p+q, p) / 2`.
    pub norm_const: f64,
}

impl BetaKernel {
    pub fn new(p: usize, q: usize) -> Self {
        BetaKernel {
            p,
            q,
            norm_const: norm_const(p, q),
        }
    }

    pub fn eval(&self, w: f64) -> f64 {
        if !(0.0..=2.0).contains(&w) {
            return 0.0;
        }
        self.norm_const * math::powi(w / 2.0, self.p) * math::powi(1.0 - w / 2.0, self.q)
    }
}

/// `1 / (2 B(p+1, q+1))` via `1/B(p+1, q+1) = (p+q+1)! / (p! q!)`.
pub fn norm_const(p: usize, q: usize) -> f64 {
    let c = p + q;
    (c + 1) as f64 * math::binomial(c, p) / 2.0
}

/// Evaluates `beta*_{p,q}(w)`; zero outside `[0, 2]`.
pub fn eval_kernel(p: usize, q: usize, w: f64) -> f64 {
    BetaKernel::new(p, q).eval(w)
}

/// The `C + 1` kernels `(0, C), (1, C-1), ..., (C, 0)`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KernelBank {
    order: usize,
    kernels: Vec<BetaKernel>,
}

impl KernelBank {
    pub fn new(order: usize) -> Result<Self> {
        if order > MAX_FILTER_ORDER {
            return Err(Error::FilterOrder {
                order,
                max: MAX_FILTER_ORDER,
            });
        }
        let kernels = (0..=order).map(|p| BetaKernel::new(p, order - p)).collect();
        Ok(KernelBank { order, kernels })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn kernels(&self) -> &[BetaKernel] {
        &self.kernels
    }

    pub fn low_pass(&self) -> BetaKernel {
        self.kernels[0]
    }

    pub fn high_pass(&self) -> BetaKernel {
        self.kernels[self.order]
    }
}

/// `y <- (I - L/2) y`, using `tmp` as scratch.
fn step_low(g: &Graph, y: &mut Matrix, tmp: &mut Matrix) {
    g.laplacian_apply_into(y, tmp);
    for (a, b) in y.as_mut_slice().iter_mut().zip(tmp.as_slice()) {
        *a -= 0.5 * b;
    }
}

/// `y <- (L/2) y`, using `tmp` as scratch.
fn step_high(g: &Graph, y: &mut Matrix, tmp: &mut Matrix) {
    g.laplacian_apply_into(y, tmp);
    for (a, b) in y.as_mut_slice().iter_mut().zip(tmp.as_slice()) {
        *a = 0.5 * b;
    }
}

/// Applies `W_{p,q}` to `x`: `q` steps of `(I - L/2)`, then `p` steps of
/// `L/2`, then the normalizing constant.
pub fn filter_apply(g: &Graph, x: &FeatureMatrix, p: usize, q: usize) -> Result<EmbeddingMatrix> {
    g.check_rows(x)?;
    let mut y = x.clone();
    let mut tmp = Matrix::zeros(x.rows(), x.cols());
    for _ in 0..q {
        step_low(g, &mut y, &mut tmp);
    }
    for _ in 0..p {
        step_high(g, &mut y, &mut tmp);
    }
    y.scale(norm_const(p, q));
    Ok(y)
}

/// Applies every kernel of `bank` and concatenates the outputs horizontally,
/// in bank order `[W_{0,C} x || W_{1,C-1} x || ... || W_{C,0} x]`.
///
/// The `(I - L/2)^q x` prefixes are shared between kernels; each block is
/// computed with exactly the same operation sequence as [`filter_apply`], so
/// the results agree bitwise.
pub fn adaptive_filter_bank(g: &Graph, x: &FeatureMatrix, bank: &KernelBank) -> Result<EmbeddingMatrix> {
    g.check_rows(x)?;
    let c = bank.order();
    let mut tmp = Matrix::zeros(x.rows(), x.cols());
    // low_powers[q] = (I - L/2)^q x
    let mut low_powers = Vec::with_capacity(c + 1);
    low_powers.push(x.clone());
    for q in 1..=c {
        let mut next = low_powers[q - 1].clone();
        step_low(g, &mut next, &mut tmp);
        low_powers.push(next);
    }
    let mut blocks = Vec::with_capacity(c + 1);
    for kernel in bank.kernels() {
        let mut y = low_powers[kernel.q].clone();
        for _ in 0..kernel.p {
            step_high(g, &mut y, &mut tmp);
        }
        y.scale(kernel.norm_const);
        blocks.push(y);
    }
    Matrix::hconcat_all(&blocks)
}

/// Dense eigendecomposition `L = U diag(lambda) U^T` used as ground truth for
/// the polynomial filters on small graphs.
#[derive(Debug, Clone)]
pub struct SpectralOracle {
    eigenvalues: Vec<f64>,
    eigenvectors: Matrix,
}

impl SpectralOracle {
    /// Decomposes the Laplacian of `g`; subject to the dense oracle cap.
    pub fn from_graph(g: &Graph) -> Result<Self> {
        let l = g.laplacian_dense()?;
        let (eigenvalues, eigenvectors) = eigen::symmetric_eigen(&l)?;
        Ok(SpectralOracle {
            eigenvalues,
            eigenvectors,
        })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Eigenvectors as columns.
    pub fn eigenvectors(&self) -> &Matrix {
        &self.eigenvectors
    }

    /// `U diag(beta*_{p,q}(lambda)) U^T x`.
    pub fn apply(&self, x: &Matrix, p: usize, q: usize) -> Result<Matrix> {
        let n = self.eigenvalues.len();
        if x.rows() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: x.rows(),
            });
        }
        let kernel = BetaKernel::new(p, q);
        let u = &self.eigenvectors;
        let mut coeffs = u.transpose().matmul(x)?;
        for (i, &lambda) in self.eigenvalues.iter().enumerate() {
            let h = kernel.eval(lambda.clamp(0.0, 2.0));
            for v in coeffs.row_mut(i) {
                *v *= h;
            }
        }
        u.matmul(&coeffs)
    }
}

/// Free-function form of [`SpectralOracle::apply`].
pub fn spectral_oracle_apply(oracle: &SpectralOracle, x: &Matrix, p: usize, q: usize) -> Result<Matrix> {
    oracle.apply(x, p, q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn single_edge() -> Graph {
        Graph::from_edges(2, [(0, 1)]).unwrap()
    }

    #[test]
    fn kernel_values() {
        assert_eq!(eval_kernel(0, 4, 0.0), 2.5);
        assert_eq!(eval_kernel(2, 2, 1.0), 0.9375);
        assert_eq!(eval_kernel(3, 1, -0.5), 0.0);
        assert_eq!(eval_kernel(3, 1, 2.5), 0.0);
        assert_eq!(eval_kernel(4, 0, 2.0), 2.5);
    }

    #[test]
    fn bank_sum_at_one_for_order_four() {
        let vals: Vec<f64> = (0..=4).map(|p| eval_kernel(p, 4 - p, 1.0)).collect();
        assert_eq!(vals, vec![0.15625, 0.625, 0.9375, 0.625, 0.15625]);
        assert_eq!(vals.iter().sum::<f64>(), 2.5);
    }

    #[test]
    fn bank_shape() {
        let bank = KernelBank::new(4).unwrap();
        assert_eq!(bank.kernels().len(), 5);
        assert_eq!((bank.low_pass().p, bank.low_pass().q), (0, 4));
        assert_eq!((bank.high_pass().p, bank.high_pass().q), (4, 0));
        assert!(KernelBank::new(MAX_FILTER_ORDER + 1).is_err());
    }

    #[test]
    fn constant_signal_on_single_edge() {
        let g = single_edge();
        let x = Matrix::column(&[1.0, 1.0]);
        let y = filter_apply(&g, &x, 1, 3).unwrap();
        assert!(y.as_slice().iter().all(|&v| v == 0.0));
        let y = filter_apply(&g, &x, 0, 4).unwrap();
        assert_eq!(y.as_slice(), &[2.5, 2.5]);
    }

    #[test]
    fn order_zero_is_half_identity() {
        let g = Graph::from_edges(4, [(0, 1), (1, 2), (2, 3), (0, 3), (0, 2)]).unwrap();
        let x = Matrix::from_rows(&[[1.0, -2.0], [0.5, 3.0], [7.0, 0.0], [-1.0, 1.0]]).unwrap();
        let bank = KernelBank::new(0).unwrap();
        let z = adaptive_filter_bank(&g, &x, &bank).unwrap();
        let mut half = x.clone();
        half.scale(0.5);
        assert_eq!(z, half);
        assert_eq!(filter_apply(&g, &x, 0, 0).unwrap(), half);
    }

    #[test]
    fn bank_width() {
        let g = Graph::from_edges(3, [(0, 1)]).unwrap();
        let x = Matrix::zeros(3, 7);
        let z = adaptive_filter_bank(&g, &x, &KernelBank::new(2).unwrap()).unwrap();
        assert_eq!(z.cols(), 21);
    }

    #[test]
    fn bank_blocks_on_single_edge() {
        let g = single_edge();
        let x = Matrix::column(&[1.0, 1.0]);
        let z = adaptive_filter_bank(&g, &x, &KernelBank::new(4).unwrap()).unwrap();
        assert_eq!(z.row(0), &[2.5, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(z.row(1), &[2.5, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn bank_blocks_match_individual_filters_bitwise() {
        let g = Graph::from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (1, 3)]).unwrap();
        let x = Matrix::from_rows(&[[0.3], [-1.2], [2.0], [0.7], [0.1]]).unwrap();
        let bank = KernelBank::new(3).unwrap();
        let z = adaptive_filter_bank(&g, &x, &bank).unwrap();
        for (b, k) in bank.kernels().iter().enumerate() {
            let single = filter_apply(&g, &x, k.p, k.q).unwrap();
            for r in 0..5 {
                assert_eq!(z.get(r, b), single.get(r, 0));
            }
        }
    }

    #[test]
    fn oracle_high_pass_on_single_edge() {
        let oracle = SpectralOracle::from_graph(&single_edge()).unwrap();
        let x = Matrix::column(&[1.0, -1.0]);
        let y = oracle.apply(&x, 4, 0).unwrap();
        assert!((y.get(0, 0) - 2.5).abs() < 1e-12);
        assert!((y.get(1, 0) + 2.5).abs() < 1e-12);
        let zero = oracle.apply(&Matrix::zeros(2, 3), 2, 2).unwrap();
        assert!(zero.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn triangle_polynomial_matches_oracle() {
        let g = Graph::from_edges(3, [(0, 1), (1, 2), (0, 2)]).unwrap();
        let oracle = SpectralOracle::from_graph(&g).unwrap();
        let x = Matrix::from_rows(&[[0.2, 1.0], [-0.7, 0.0], [1.9, -3.0]]).unwrap();
        for c in 0..=5 {
            for p in 0..=c {
                let poly = filter_apply(&g, &x, p, c - p).unwrap();
                let exact = oracle.apply(&x, p, c - p).unwrap();
                assert!(poly.relative_error(&exact) < 1e-8 || exact.frobenius_norm() < 1e-12);
            }
        }
    }

    #[test]
    fn dimension_mismatch() {
        assert!(filter_apply(&single_edge(), &Matrix::zeros(3, 1), 1, 1).is_err());
    }
}
