//! Command-line interface.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dualpath_core::knn::{Metric, Weighting};
use dualpath_core::pipeline::{GbdtInput, Variant};

use crate::config::{parse_seeds, read_synthetic_toml, RunConfig};
use crate::error::{Error, Result};
use crate::io::DataPaths;
use crate::report::{Manifest, SweepParam};
use crate::runner;

#[derive(Debug, Parser)]
#[command(name = "dualpath", version, about = "Dual-path spectral filtering and boosted trees for graph fraud detection")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train and evaluate one variant over all seeds; writes report, manifest and checkpoints.
    Train(RunArgs),
    /// Score the test split with saved checkpoints.
    Eval {
        #[command(flatten)]
        run: RunArgs,
        /// Directory holding mlp.json (and ensemble.json), e.g. out/seed_0.
        #[arg(long)]
        models: PathBuf,
    },
    /// Run the full pipeline and the three ablations with identical seeds.
    Ablate(RunArgs),
    /// Aggregate metrics over a grid of filter orders or neighbor counts.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum)]
        param: SweepArg,
        /// Comma-separated grid; defaults to 1..5 for c and 10,20,..,50 for k.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<usize>>,
    },
    /// Write a synthetic dataset in the text formats.
    Synth(SynthArgs),
    /// Write node embeddings as CSV `node_id,label,h_0..`.
    ExportEmb {
        #[command(flatten)]
        run: RunArgs,
        /// Use these checkpoints instead of training.
        #[arg(long)]
        models: Option<PathBuf>,
        /// Output CSV (default: <out>/embeddings.csv).
        #[arg(long)]
        file: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SweepArg {
    C,
    K,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MetricArg {
    Euclidean,
    Cosine,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum WeightingArg {
    Binary,
    #[value(alias = "inverse_distance", alias = "inverse-distance")]
    Inv,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum GbdtInputArg {
    #[value(name = "H")]
    H,
    #[value(name = "H+raw")]
    HRaw,
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Rerun from a manifest written by a previous command.
    #[arg(long, conflicts_with = "config")]
    pub manifest: Option<PathBuf>,
    #[arg(long, requires_all = ["features", "labels"])]
    pub edges: Option<PathBuf>,
    #[arg(long, requires = "edges")]
    pub features: Option<PathBuf>,
    #[arg(long, requires = "edges")]
    pub labels: Option<PathBuf>,
    #[arg(long, requires = "edges")]
    pub masks: Option<PathBuf>,
    #[arg(long)]
    pub filter_order: Option<usize>,
    #[arg(long)]
    pub knn_k: Option<usize>,
    #[arg(long, value_enum)]
    pub knn_metric: Option<MetricArg>,
    #[arg(long, value_enum)]
    pub knn_weighting: Option<WeightingArg>,
    /// full, no_original (\O), no_knn (\K) or no_tree (\T).
    #[arg(long, value_parser = parse_variant)]
    pub variant: Option<Variant>,
    /// `0,1,2`, `0..5` or `0..=4`.
    #[arg(long, value_parser = parse_seed_list)]
    pub seeds: Option<SeedList>,
    /// Rec@K cutoff (default: number of test positives).
    #[arg(long)]
    pub rec_k: Option<usize>,
    #[arg(long)]
    pub f1_threshold: Option<f64>,
    #[arg(long, value_enum)]
    pub gbdt_input: Option<GbdtInputArg>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Run seeds on separate threads.
    #[arg(long)]
    pub parallel: bool,
}

/// A whole seed list given as one flag value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedList(pub Vec<u64>);

fn parse_seed_list(s: &str) -> std::result::Result<SeedList, String> {
    parse_seeds(s).map(SeedList)
}

fn parse_variant(s: &str) -> std::result::Result<Variant, String> {
    Variant::parse(s).ok_or_else(|| format!("unknown variant `{s}` (expected full, no_original, no_knn or no_tree)"))
}

impl RunArgs {
    /// Flag > config file or manifest > default.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match (&self.manifest, &self.config) {
            (Some(m), _) => Manifest::load(m)?.config,
            (None, Some(c)) => RunConfig::from_toml_file(c)?,
            (None, None) => RunConfig::default(),
        };
        if let (Some(edges), Some(features), Some(labels)) = (&self.edges, &self.features, &self.labels) {
            cfg.data = Some(DataPaths {
                edges: edges.clone(),
                features: features.clone(),
                labels: labels.clone(),
                masks: self.masks.clone(),
            });
        }
        let p = &mut cfg.pipeline;
        if let Some(c) = self.filter_order {
            p.filter_order = c;
        }
        if let Some(k) = self.knn_k {
            p.knn.k = k;
        }
        if let Some(m) = self.knn_metric {
            p.knn.metric = match m {
                MetricArg::Euclidean => Metric::Euclidean,
                MetricArg::Cosine => Metric::Cosine,
            };
        }
        if let Some(w) = self.knn_weighting {
            p.knn.weighting = match w {
                WeightingArg::Binary => Weighting::Binary,
                WeightingArg::Inv => Weighting::InverseDistance,
            };
        }
        if let Some(v) = self.variant {
            p.variant = v;
        }
        if let Some(k) = self.rec_k {
            p.rec_k = Some(k);
        }
        if let Some(t) = self.f1_threshold {
            p.f1_threshold = t;
        }
        if let Some(g) = self.gbdt_input {
            p.gbdt_input = match g {
                GbdtInputArg::H => GbdtInput::Embeddings,
                GbdtInputArg::HRaw => GbdtInput::EmbeddingsAndRaw,
            };
        }
        if let Some(e) = self.epochs {
            p.train.epochs = e;
        }
        if let Some(s) = &self.seeds {
            cfg.seeds = s.0.clone();
        }
        if let Some(o) = &self.out {
            cfg.output_dir = o.clone();
        }
        if self.parallel {
            cfg.parallel = true;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// Flat `key = value` generator settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n_nodes: Option<usize>,
    #[arg(long)]
    pub fraud_fraction: Option<f64>,
    #[arg(long)]
    pub feature_dim: Option<usize>,
    #[arg(long)]
    pub homophily: Option<f64>,
    #[arg(long)]
    pub camouflage_rate: Option<f64>,
    #[arg(long)]
    pub feature_shift: Option<f64>,
    #[arg(long)]
    pub noise_sigma: Option<f64>,
    #[arg(long)]
    pub avg_degree: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

impl SynthArgs {
    pub fn resolve(&self) -> Result<dualpath_core::SyntheticConfig> {
        let mut c = match &self.config {
            Some(p) => read_synthetic_toml(p)?,
            None => Default::default(),
        };
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { c.$f = v; } )* };
        }
        set!(n_nodes, fraud_fraction, feature_dim, homophily, camouflage_rate, feature_shift, noise_sigma, avg_degree, seed);
        c.validate()?;
        Ok(c)
    }
}

/// `println!` that tolerates a closed stdout (e.g. piped into `head`).
macro_rules! out {
    ($($arg:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

fn print_json<T: serde::Serialize>(value: &T) {
    out!("{}", serde_json::to_string_pretty(value).expect("serializable report"));
}

/// Runs a parsed command.
pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(args) => {
            let cfg = args.resolve()?;
            let r = runner::train(&cfg, &cfg.output_dir)?;
            print_json(&r.aggregate);
        }
        Command::Eval { run, models } => {
            let cfg = run.resolve()?;
            let m = runner::evaluate_checkpoint(&cfg, &models)?;
            if run.out.is_some() {
                crate::report::save_report(&cfg.output_dir.join("eval.json"), &m)?;
            }
            print_json(&m);
        }
        Command::Ablate(args) => {
            let cfg = args.resolve()?;
            let r = runner::ablate(&cfg, &cfg.output_dir)?;
            for v in &r.variants {
                out!("{:<12} auc {:.4} ± {:.4}  ap {:.4}", v.variant.name(), v.aggregate.auc.mean, v.aggregate.auc.std, v.aggregate.ap.mean);
            }
        }
        Command::Sweep { run, param, values } => {
            let cfg = run.resolve()?;
            let param = match param {
                SweepArg::C => SweepParam::C,
                SweepArg::K => SweepParam::K,
            };
            let values = values.unwrap_or_else(|| param.default_grid());
            let r = runner::sweep(&cfg, param, &values, &cfg.output_dir)?;
            for p in &r.points {
                out!("{}={:<3} auc {:.4} ± {:.4}", param.name(), p.value, p.report.aggregate.auc.mean, p.report.aggregate.auc.std);
            }
            out!("auc spread {:.4}", r.auc_spread());
        }
        Command::Synth(args) => {
            let c = args.resolve()?;
            let paths = runner::synth(&c, &args.out)?;
            out!("wrote {}", paths.edges.parent().unwrap_or(Path::new(".")).display());
        }
        Command::ExportEmb { run, models, file } => {
            let cfg = run.resolve()?;
            let path = file.unwrap_or_else(|| cfg.output_dir.join("embeddings.csv"));
            let rows = runner::export_embeddings(&cfg, models.as_deref(), &path)?;
            out!("wrote {rows} rows to {}", path.display());
        }
    }
    Ok(())
}

/// Formats an error with its stage tag and cause chain.
pub fn describe(e: &Error) -> String {
    // the stage goes in the prefix, so start from the error it wraps
    let (mut msg, first): (String, &dyn std::error::Error) = match e {
        Error::Core(dualpath_core::Error::Stage { stage, source }) => (format!("error [{}]: ", stage.name()), source.as_ref()),
        _ => ("error: ".to_string(), e),
    };
    msg.push_str(&first.to_string());
    let mut source = first.source();
    while let Some(s) = source {
        let text = s.to_string();
        if !msg.contains(&text) {
            msg.push_str(&format!("\n  caused by: {text}"));
        }
        source = s.source();
    }
    msg
}

pub fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", describe(&e));
            ExitCode::FAILURE
        }
    }
}
