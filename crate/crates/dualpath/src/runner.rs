//! Orchestration over seeds, variants and sweep grids, plus the files each
//! command leaves in its output directory.

use std::fs;
use std::path::{Path, PathBuf};
use std::thread;

use dualpath_core::labels::Split;
use dualpath_core::pipeline::{self, PipelineParams, SeedRun, Variant};
use dualpath_core::synth::generate_synthetic;
use dualpath_core::{MetricsReport, SyntheticConfig};

use crate::checkpoint;
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::io::{self, DataPaths, Dataset, TRAIN_FRACTION, VAL_FRACTION};
use crate::report::{AblationReport, Manifest, RunReport, StageTrace, SweepParam, SweepPoint, SweepReport};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const REPORT_FILE: &str = "report.json";
pub const MLP_FILE: &str = "mlp.json";
pub const ENSEMBLE_FILE: &str = "ensemble.json";

/// Data for one seed: files are loaded (and split by `seed` when no mask
/// file is given); synthetic data is generated once from its own seed and
/// re-split by the run seed.
pub fn dataset_for_seed(cfg: &RunConfig, seed: u64) -> Result<Dataset> {
    match &cfg.data {
        Some(paths) => io::load_dataset(paths, seed),
        None => {
            let d = generate_synthetic(&cfg.synthetic)?;
            let labels = d.labels.stratified_split(TRAIN_FRACTION, VAL_FRACTION, seed)?;
            Ok(Dataset {
                graph: d.graph,
                features: d.features,
                labels,
            })
        }
    }
}

fn run_one(cfg: &RunConfig, params: &PipelineParams, seed: u64) -> Result<SeedRun> {
    let d = dataset_for_seed(cfg, seed)?;
    Ok(pipeline::run_seed(&d.graph, &d.features, &d.labels, params, seed)?)
}

/// Runs `params` for every seed of `cfg`, in seed order.
pub fn run_seeds(cfg: &RunConfig, params: &PipelineParams) -> Result<Vec<SeedRun>> {
    if !cfg.parallel || cfg.seeds.len() < 2 {
        return cfg.seeds.iter().map(|&s| run_one(cfg, params, s)).collect();
    }
    thread::scope(|scope| {
        let handles: Vec<_> = cfg
            .seeds
            .iter()
            .map(|&s| scope.spawn(move || run_one(cfg, params, s)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("seed worker panicked"))
            .collect()
    })
}

fn traces(runs: &[SeedRun], variant: Variant, label: Option<String>) -> Vec<StageTrace> {
    runs.iter()
        .map(|r| StageTrace {
            label: label.clone(),
            variant,
            seed: r.seed,
            stages: r.stages.clone(),
        })
        .collect()
}

fn metrics(runs: &[SeedRun]) -> Vec<MetricsReport> {
    runs.iter().map(|r| r.metrics.clone()).collect()
}

fn seed_dir(out: &Path, seed: u64) -> PathBuf {
    out.join(format!("seed_{seed}"))
}

/// Runs the configured variant, writing `report.json`, `manifest.json` and
/// per-seed checkpoints under `out`.
pub fn train(cfg: &RunConfig, out: &Path) -> Result<RunReport> {
    cfg.validate()?;
    let variant = cfg.variant();
    let runs = run_seeds(cfg, &cfg.pipeline)?;
    for r in &runs {
        let dir = seed_dir(out, r.seed);
        checkpoint::save_mlp(&dir.join(MLP_FILE), &r.mlp)?;
        if let Some(e) = &r.ensemble {
            checkpoint::save_ensemble(&dir.join(ENSEMBLE_FILE), e)?;
        }
    }
    let report = RunReport::new(variant, metrics(&runs));
    let mut manifest = Manifest::new("train", cfg);
    manifest.traces = traces(&runs, variant, None);
    manifest.save(&out.join(MANIFEST_FILE))?;
    crate::report::save_report(&out.join(REPORT_FILE), &report)?;
    Ok(report)
}

/// Runs all four variants with identical seeds and data.
pub fn ablate(cfg: &RunConfig, out: &Path) -> Result<AblationReport> {
    cfg.validate()?;
    let mut manifest = Manifest::new("ablate", cfg);
    let mut variants = Vec::new();
    for v in Variant::ALL {
        let params = PipelineParams {
            variant: v,
            ..cfg.pipeline.clone()
        };
        let runs = run_seeds(cfg, &params)?;
        manifest.traces.extend(traces(&runs, v, None));
        variants.push(RunReport::new(v, metrics(&runs)));
    }
    let report = AblationReport { variants };
    manifest.save(&out.join(MANIFEST_FILE))?;
    crate::report::save_report(&out.join("ablation.json"), &report)?;
    Ok(report)
}

/// One aggregate report per grid value, all else fixed.
pub fn sweep(cfg: &RunConfig, param: SweepParam, values: &[usize], out: &Path) -> Result<SweepReport> {
    cfg.validate()?;
    if values.is_empty() {
        return Err(Error::Config("sweep grid is empty".into()));
    }
    let mut manifest = Manifest::new("sweep", cfg);
    let mut points = Vec::new();
    for &value in values {
        let mut point_cfg = cfg.clone();
        param.apply(&mut point_cfg, value);
        point_cfg.validate()?;
        let runs = run_seeds(&point_cfg, &point_cfg.pipeline)?;
        let label = format!("{}={value}", param.name());
        manifest.traces.extend(traces(&runs, cfg.variant(), Some(label)));
        points.push(SweepPoint {
            value,
            report: RunReport::new(cfg.variant(), metrics(&runs)),
        });
    }
    let report = SweepReport { param, points };
    manifest.save(&out.join(MANIFEST_FILE))?;
    crate::report::save_report(&out.join(format!("sweep_{}.json", param.name())), &report)?;
    Ok(report)
}

/// Scores the test split of the seed stored in `models` (a directory written
/// by [`train`]) without retraining.
pub fn evaluate_checkpoint(cfg: &RunConfig, models: &Path) -> Result<MetricsReport> {
    let mlp = checkpoint::load_mlp(&models.join(MLP_FILE))?;
    let ensemble_path = models.join(ENSEMBLE_FILE);
    let ensemble = if ensemble_path.exists() {
        Some(checkpoint::load_ensemble(&ensemble_path)?)
    } else {
        None
    };
    let params = PipelineParams {
        variant: if ensemble.is_none() && cfg.pipeline.variant != Variant::NoTree {
            Variant::NoTree
        } else {
            cfg.pipeline.variant
        },
        ..cfg.pipeline.clone()
    };
    let seed = mlp.seed();
    let d = dataset_for_seed(cfg, seed)?;
    let scores = pipeline::score_with_models(&d.graph, &d.features, &d.labels, &params, &mlp, ensemble.as_ref())?;
    Ok(pipeline::evaluate_split(&scores, &d.labels, Split::Test, &params, seed)?)
}

/// Writes `H` for every node of the first seed's data. Uses the checkpoint
/// in `models` when given, otherwise trains.
pub fn export_embeddings(cfg: &RunConfig, models: Option<&Path>, path: &Path) -> Result<usize> {
    cfg.validate()?;
    let (seed, h, d) = match models {
        Some(dir) => {
            let mlp = checkpoint::load_mlp(&dir.join(MLP_FILE))?;
            let d = dataset_for_seed(cfg, mlp.seed())?;
            let scaler = dualpath_core::matrix::ColumnScaler::fit(&d.features, &d.labels.indices(Split::Train))?;
            let x = scaler.transform(&d.features)?;
            let mut stages = Vec::new();
            let z = pipeline::fused_representation(&d.graph, &x, &cfg.pipeline, &mut stages)?;
            let h = mlp.forward(&z)?.embeddings;
            (mlp.seed(), h, d)
        }
        None => {
            let seed = cfg.seeds[0];
            let d = dataset_for_seed(cfg, seed)?;
            let run = pipeline::run_seed(&d.graph, &d.features, &d.labels, &cfg.pipeline, seed)?;
            (seed, run.embeddings, d)
        }
    };
    io::write_embeddings(path, &h, d.labels.labels())?;
    let mut manifest = Manifest::new("export-emb", cfg);
    manifest.traces.push(StageTrace {
        label: Some(format!("embeddings={}", path.display())),
        variant: cfg.variant(),
        seed,
        stages: Vec::new(),
    });
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        manifest.save(&parent.join(MANIFEST_FILE))?;
    }
    Ok(h.rows())
}

/// Writes a generated dataset (with its split) and the generator settings.
pub fn synth(cfg: &SyntheticConfig, out: &Path) -> Result<DataPaths> {
    let d = generate_synthetic(cfg)?;
    let data = Dataset {
        graph: d.graph,
        features: d.features,
        labels: d.labels,
    };
    let paths = io::write_dataset(out, &data)?;
    let text = toml::to_string(cfg).map_err(|e| Error::Config(e.to_string()))?;
    let p = out.join("synth.toml");
    fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
    Ok(paths)
}
