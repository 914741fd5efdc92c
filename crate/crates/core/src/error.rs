use alloc::boxed::Box;
use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Pipeline stage, used to tag errors surfaced by [`crate::pipeline`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Stage {
    Standardize,
    AdaptiveFilter,
    KnnGraph,
    SimilarityFilter,
    Fuse,
    TrainMlp,
    ExportEmbeddings,
    FitGbdt,
    Predict,
    Evaluate,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Standardize => "standardize",
            Stage::AdaptiveFilter => "adaptive_filter",
            Stage::KnnGraph => "knn_graph",
            Stage::SimilarityFilter => "similarity_filter",
            Stage::Fuse => "fuse",
            Stage::TrainMlp => "train_mlp",
            Stage::ExportEmbeddings => "export_embeddings",
            Stage::FitGbdt => "fit_gbdt",
            Stage::Predict => "predict",
            Stage::Evaluate => "evaluate",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("node index {index} out of range for graph with {num_nodes} nodes")]
    NodeOutOfRange { index: usize, num_nodes: usize },
    #[error("invalid edge weight {weight} on ({src}, {dst}); weights must be finite and positive")]
    InvalidWeight { src: usize, dst: usize, weight: f64 },
    #[error("self-loop weight must be non-negative, got {0}")]
    NegativeLoopWeight(f64),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("graph with {num_nodes} nodes exceeds the dense oracle cap of {cap}")]
    OracleCapExceeded { num_nodes: usize, cap: usize },
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("filter order {order} exceeds the supported maximum {max}")]
    FilterOrder { order: usize, max: usize },
    #[error("kernel ({p}, {q}) does not belong to a bank of order {order}")]
    KernelOrder { p: usize, q: usize, order: usize },
    #[error("k = {k} must satisfy 1 <= k < {num_nodes}")]
    InvalidK { k: usize, num_nodes: usize },
    #[error("invalid labels: {0}")]
    InvalidLabels(String),
    #[error("training set must contain both classes (fraud: {fraud}, benign: {benign})")]
    SingleClass { fraud: usize, benign: usize },
    #[error("metric undefined: {0}")]
    UndefinedMetric(&'static str),
    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Diverged { epoch: usize, loss: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("infeasible synthetic graph: {0}")]
    Infeasible(String),
    #[error("stage {stage}: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn at(self, stage: Stage) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
