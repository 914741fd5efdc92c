//! End-to-end scoring for one seed: standardize, filter both paths, fuse,
//! train the MLP, fit the boosted trees and evaluate on the test split.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result, Stage};
use crate::filter::{adaptive_filter_bank, filter_apply, KernelBank, DEFAULT_FILTER_ORDER};
use crate::gbdt::{fit_gbdt, GbdtParams, TreeEnsemble};
use crate::graph::Graph;
use crate::knn::{build_knn_graph, KnnConfig};
use crate::labels::{Label, LabelSet, Split};
use crate::matrix::{ColumnScaler, EmbeddingMatrix, FeatureMatrix, Matrix};
use crate::metrics::{self, MetricsReport, ScoredLabels};
use crate::mlp::{self, MlpModel, TrainConfig};

/// Which modules the pipeline runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Variant {
    #[default]
    Full,
    /// No Beta-wavelet bank on the original graph.
    NoOriginal,
    /// No kNN similarity path.
    NoKnn,
    /// No tree ensemble; the MLP head scores nodes directly.
    NoTree,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Full, Variant::NoOriginal, Variant::NoKnn, Variant::NoTree];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoOriginal => "no_original",
            Variant::NoKnn => "no_knn",
            Variant::NoTree => "no_tree",
        }
    }

    pub fn parse(s: &str) -> Option<Variant> {
        match s {
            "full" => Some(Variant::Full),
            "no_original" | "O" | "\\O" => Some(Variant::NoOriginal),
            "no_knn" | "K" | "\\K" => Some(Variant::NoKnn),
            "no_tree" | "T" | "\\T" => Some(Variant::NoTree),
            _ => None,
        }
    }
}

/// Input features of the tree ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum GbdtInput {
    /// MLP embeddings only.
    #[default]
    Embeddings,
    /// MLP embeddings followed by the standardized raw features.
    EmbeddingsAndRaw,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct PipelineParams {
    pub filter_order: usize,
    pub knn: KnnConfig,
    pub train: TrainConfig,
    pub gbdt: GbdtParams,
    pub variant: Variant,
    pub gbdt_input: GbdtInput,
    /// Rec@K cutoff; `None` uses the number of test positives.
    pub rec_k: Option<usize>,
    pub f1_threshold: f64,
}

impl Default for PipelineParams {
    fn default() -> Self {
        PipelineParams {
            filter_order: DEFAULT_FILTER_ORDER,
            knn: KnnConfig::default(),
            train: TrainConfig::default(),
            gbdt: GbdtParams::default(),
            variant: Variant::Full,
            gbdt_input: GbdtInput::Embeddings,
            rec_k: None,
            f1_threshold: 0.5,
        }
    }
}

/// Everything one seed produces.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub metrics: MetricsReport,
    /// Stages actually executed, in order.
    pub stages: Vec<Stage>,
    pub scaler: ColumnScaler,
    pub mlp: MlpModel,
    pub mlp_best_epoch: usize,
    pub ensemble: Option<TreeEnsemble>,
    /// Embeddings `H` for every node.
    pub embeddings: EmbeddingMatrix,
    /// Fraud score for every node.
    pub scores: Vec<f64>,
}

/// Fused representation `[Z1 || Z2]` of standardized features, honoring the variant.
pub fn fused_representation(
    g: &Graph,
    x: &FeatureMatrix,
    params: &PipelineParams,
    stages: &mut Vec<Stage>,
) -> Result<EmbeddingMatrix> {
    let n = x.rows();
    let z1 = if params.variant == Variant::NoOriginal {
        Matrix::zeros(n, 0)
    } else {
        stages.push(Stage::AdaptiveFilter);
        let bank = KernelBank::new(params.filter_order).map_err(|e| e.at(Stage::AdaptiveFilter))?;
        adaptive_filter_bank(g, x, &bank).map_err(|e| e.at(Stage::AdaptiveFilter))?
    };
    let z2 = if params.variant == Variant::NoKnn {
        Matrix::zeros(n, 0)
    } else {
        stages.push(Stage::KnnGraph);
        let knn = build_knn_graph(x, &params.knn).map_err(|e| e.at(Stage::KnnGraph))?;
        stages.push(Stage::SimilarityFilter);
        filter_apply(&knn, x, 0, params.filter_order).map_err(|e| e.at(Stage::SimilarityFilter))?
    };
    stages.push(Stage::Fuse);
    mlp::fuse(&z1, &z2).map_err(|e| e.at(Stage::Fuse))
}

/// Input matrix for the tree ensemble.
pub fn gbdt_features(h: &EmbeddingMatrix, x_std: &FeatureMatrix, input: GbdtInput) -> Result<Matrix> {
    match input {
        GbdtInput::Embeddings => Ok(h.clone()),
        GbdtInput::EmbeddingsAndRaw => h.hconcat(x_std),
    }
}

/// Metrics over the test split.
pub fn evaluate_split(scores: &[f64], labels: &LabelSet, split: Split, params: &PipelineParams, seed: u64) -> Result<MetricsReport> {
    let nodes = labels.indices(split);
    let s: Vec<f64> = nodes.iter().map(|&i| scores[i]).collect();
    let y: Vec<bool> = nodes.iter().map(|&i| labels.label(i) == Label::Fraud).collect();
    let scored = ScoredLabels::new(s, y)?;
    metrics::evaluate(&scored, params.rec_k, params.f1_threshold, seed)
}

/// Runs the pipeline for one seed on a dataset whose label set already
/// carries its split. The seed drives MLP initialization.
pub fn run_seed(g: &Graph, features: &FeatureMatrix, labels: &LabelSet, params: &PipelineParams, seed: u64) -> Result<SeedRun> {
    let n = g.num_nodes();
    if features.rows() != n || labels.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: if features.rows() != n { features.rows() } else { labels.len() },
        });
    }
    if labels.indices(Split::Test).is_empty() {
        return Err(Error::InvalidLabels(format!("empty test split (seed {seed})")));
    }
    let mut stages = Vec::new();

    stages.push(Stage::Standardize);
    let scaler = ColumnScaler::fit(features, &labels.indices(Split::Train)).map_err(|e| e.at(Stage::Standardize))?;
    let x = scaler.transform(features).map_err(|e| e.at(Stage::Standardize))?;

    let z = fused_representation(g, &x, params, &mut stages)?;

    stages.push(Stage::TrainMlp);
    let train_cfg = TrainConfig {
        seed,
        ..params.train.clone()
    };
    let outcome = mlp::train_mlp(&z, labels, &train_cfg).map_err(|e| e.at(Stage::TrainMlp))?;

    stages.push(Stage::ExportEmbeddings);
    let fwd = outcome.model.forward(&z).map_err(|e| e.at(Stage::ExportEmbeddings))?;

    let (ensemble, scores) = if params.variant == Variant::NoTree {
        (None, fwd.fraud_probs())
    } else {
        stages.push(Stage::FitGbdt);
        let input = gbdt_features(&fwd.embeddings, &x, params.gbdt_input).map_err(|e| e.at(Stage::FitGbdt))?;
        let ens = fit_gbdt(&input, labels, &params.gbdt).map_err(|e| e.at(Stage::FitGbdt))?;
        stages.push(Stage::Predict);
        let scores = ens.predict_proba(&input).map_err(|e| e.at(Stage::Predict))?;
        (Some(ens), scores)
    };

    stages.push(Stage::Evaluate);
    let metrics = evaluate_split(&scores, labels, Split::Test, params, seed).map_err(|e| e.at(Stage::Evaluate))?;

    Ok(SeedRun {
        seed,
        metrics,
        stages,
        scaler,
        mlp: outcome.model,
        mlp_best_epoch: outcome.best_epoch,
        ensemble,
        embeddings: fwd.embeddings,
        scores,
    })
}

/// Re-scores a dataset from saved models: the scaler is refit on the train
/// split (deterministic), filters are recomputed, then the MLP and, unless
/// absent, the ensemble are applied.
pub fn score_with_models(
    g: &Graph,
    features: &FeatureMatrix,
    labels: &LabelSet,
    params: &PipelineParams,
    mlp: &MlpModel,
    ensemble: Option<&TreeEnsemble>,
) -> Result<Vec<f64>> {
    let scaler = ColumnScaler::fit(features, &labels.indices(Split::Train)).map_err(|e| e.at(Stage::Standardize))?;
    let x = scaler.transform(features).map_err(|e| e.at(Stage::Standardize))?;
    let mut stages = Vec::new();
    let z = fused_representation(g, &x, params, &mut stages)?;
    let fwd = mlp.forward(&z).map_err(|e| e.at(Stage::ExportEmbeddings))?;
    match ensemble {
        None => Ok(fwd.fraud_probs()),
        Some(e) => {
            let input = gbdt_features(&fwd.embeddings, &x, params.gbdt_input).map_err(|e| e.at(Stage::Predict))?;
            e.predict_proba(&input).map_err(|e| e.at(Stage::Predict))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_synthetic, SyntheticConfig};

    fn small() -> (Graph, Matrix, LabelSet) {
        let d = generate_synthetic(&SyntheticConfig {
            n_nodes: 300,
            fraud_fraction: 0.1,
            feature_dim: 4,
            avg_degree: 6.0,
            ..SyntheticConfig::default()
        })
        .unwrap();
        (d.graph, d.features, d.labels)
    }

    fn quick() -> PipelineParams {
        PipelineParams {
            knn: KnnConfig { k: 5, ..KnnConfig::default() },
            train: TrainConfig {
                epochs: 20,
                hidden_dim: 8,
                embedding_dim: 8,
                ..TrainConfig::default()
            },
            gbdt: GbdtParams {
                num_rounds: 10,
                ..GbdtParams::default()
            },
            ..PipelineParams::default()
        }
    }

    #[test]
    fn variants_run_only_their_stages() {
        let (g, x, l) = small();
        for v in Variant::ALL {
            let params = PipelineParams { variant: v, ..quick() };
            let run = run_seed(&g, &x, &l, &params, 1).unwrap();
            let has = |s: Stage| run.stages.contains(&s);
            assert_eq!(has(Stage::AdaptiveFilter), v != Variant::NoOriginal);
            assert_eq!(has(Stage::KnnGraph), v != Variant::NoKnn);
            assert_eq!(has(Stage::FitGbdt), v != Variant::NoTree);
            assert_eq!(run.ensemble.is_some(), v != Variant::NoTree);
            assert_eq!(run.embeddings.rows(), 300);
            assert_eq!(run.embeddings.cols(), 8);
            let width = run.mlp.input_dim();
            let expected = match v {
                Variant::NoOriginal => 4,
                Variant::NoKnn => 12,
                _ => 16,
            };
            assert_eq!(width, expected);
        }
    }

    #[test]
    fn rescoring_from_models_matches() {
        let (g, x, l) = small();
        let params = quick();
        let run = run_seed(&g, &x, &l, &params, 2).unwrap();
        let scores = score_with_models(&g, &x, &l, &params, &run.mlp, run.ensemble.as_ref()).unwrap();
        assert_eq!(scores, run.scores);
    }

    #[test]
    fn stage_tagged_errors() {
        let (g, x, l) = small();
        let params = PipelineParams {
            knn: KnnConfig { k: 1000, ..KnnConfig::default() },
            ..quick()
        };
        match run_seed(&g, &x, &l, &params, 0) {
            Err(Error::Stage { stage, .. }) => assert_eq!(stage, Stage::KnnGraph),
            other => panic!("unexpected {other:?}"),
        }
    }
}
