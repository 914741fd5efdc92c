//! Dual-path spectral graph filtering for fraud detection on heterophilous
//! transaction graphs.
//!
//! The pipeline has four stages:
//!
//! 1. a bank of Beta-wavelet filters applied to the original graph
//!    ([`filter::adaptive_filter_bank`]),
//! 2. a low-pass Beta filter applied to a feature-space kNN graph
//!    ([`knn::similarity_path_embed`]),
//! 3. concatenation of both paths followed by a supervised MLP that produces
//!    node embeddings ([`mlp`]),
//! 4. a second-order gradient-boosted tree classifier over those embeddings
//!    ([`gbdt`]).
//!
//! Everything here is pure computation over `alloc` collections; file formats,
//! reports and the command line live in the companion `dualpath` crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod eigen;
pub mod error;
pub mod filter;
pub mod gbdt;
pub mod graph;
pub mod knn;
pub mod labels;
pub mod math;
pub mod matrix;
pub mod metrics;
pub mod mlp;
pub mod pipeline;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};
pub use filter::{adaptive_filter_bank, eval_kernel, filter_apply, KernelBank, SpectralOracle};
pub use gbdt::{fit_gbdt, GbdtParams, TreeEnsemble};
pub use graph::Graph;
pub use knn::{build_knn_graph, similarity_path_embed, KnnConfig, Metric, Weighting};
pub use labels::{Label, LabelSet, Split};
pub use matrix::{EmbeddingMatrix, FeatureMatrix, Matrix};
pub use metrics::{MetricsReport, ScoredLabels};
pub use mlp::{MlpModel, TrainConfig};
pub use pipeline::{PipelineParams, Variant};
pub use synth::SyntheticConfig;
