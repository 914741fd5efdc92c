//! JSON reports and the run manifest.

use std::path::Path;

use dualpath_core::error::Stage;
use dualpath_core::pipeline::Variant;
use dualpath_core::MetricsReport;
use serde::{Deserialize, Serialize};

use crate::checkpoint::{read_json, write_json};
use crate::config::RunConfig;
use crate::error::Result;

/// Mean and population standard deviation over seeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Summary {
        let n = values.len() as f64;
        if values.is_empty() {
            return Summary { mean: f64::NAN, std: f64::NAN };
        }
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Summary { mean, std: var.sqrt() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub rec_at_k: Summary,
    pub f1: Summary,
    pub auc: Summary,
    pub ap: Summary,
}

impl Aggregate {
    pub fn of(reports: &[MetricsReport]) -> Aggregate {
        let col = |f: fn(&MetricsReport) -> f64| Summary::of(&reports.iter().map(f).collect::<Vec<_>>());
        Aggregate {
            rec_at_k: col(|r| r.rec_at_k),
            f1: col(|r| r.f1),
            auc: col(|r| r.auc),
            ap: col(|r| r.ap),
        }
    }
}

/// Metrics of one variant over all seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub variant: Variant,
    pub per_seed: Vec<MetricsReport>,
    pub aggregate: Aggregate,
}

impl RunReport {
    pub fn new(variant: Variant, per_seed: Vec<MetricsReport>) -> Self {
        let aggregate = Aggregate::of(&per_seed);
        RunReport {
            variant,
            per_seed,
            aggregate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub variants: Vec<RunReport>,
}

impl AblationReport {
    pub fn get(&self, v: Variant) -> Option<&RunReport> {
        self.variants.iter().find(|r| r.variant == v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    /// Filter order.
    C,
    /// Neighbors per node in the similarity graph.
    K,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::C => "c",
            SweepParam::K => "k",
        }
    }

    pub fn default_grid(self) -> Vec<usize> {
        match self {
            SweepParam::C => vec![1, 2, 3, 4, 5],
            SweepParam::K => vec![10, 20, 30, 40, 50],
        }
    }

    pub fn apply(self, cfg: &mut RunConfig, value: usize) {
        match self {
            SweepParam::C => cfg.pipeline.filter_order = value,
            SweepParam::K => cfg.pipeline.knn.k = value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: usize,
    pub report: RunReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub param: SweepParam,
    pub points: Vec<SweepPoint>,
}

impl SweepReport {
    /// Peak-to-trough spread of the mean AUC across grid points.
    pub fn auc_spread(&self) -> f64 {
        let means = self.points.iter().map(|p| p.report.aggregate.auc.mean);
        let (lo, hi) = means.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        hi - lo
    }
}

/// Stages executed for one (variant, seed) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTrace {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub label: Option<String>,
    pub variant: Variant,
    pub seed: u64,
    pub stages: Vec<Stage>,
}

/// Everything needed to rerun a command: the resolved config plus what ran.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub config: RunConfig,
    pub traces: Vec<StageTrace>,
}

impl Manifest {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        Manifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.clone(),
            traces: Vec::new(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Manifest> {
        read_json(path)
    }
}

pub fn save_report<T: Serialize>(path: &Path, report: &T) -> Result<()> {
    write_json(path, report)
}

pub fn load_report<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    read_json(path)
}
