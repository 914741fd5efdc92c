//! Text file formats.
//!
//! * edge list: one `i j [w]` per line, 0-based, `#` starts a comment
//! * features: CSV, one row per node, optional header
//! * labels: CSV `node_id,label` with label 0 or 1; absent nodes are unknown
//! * masks: CSV `node_id,split` with split in `train`, `val`, `test`
//!
//! CSV headers are detected by a first row that does not parse as data.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use dualpath_core::{FeatureMatrix, Graph, Label, LabelSet, Matrix, Split};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Train and validation fractions of the default stratified split.
pub const TRAIN_FRACTION: f64 = 0.7;
pub const VAL_FRACTION: f64 = 0.15;

#[derive(Debug, Clone)]
pub struct Dataset {
    pub graph: Graph,
    pub features: FeatureMatrix,
    pub labels: LabelSet,
}

/// Locations of a dataset on disk.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataPaths {
    pub edges: PathBuf,
    pub features: PathBuf,
    pub labels: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub masks: Option<PathBuf>,
}

impl DataPaths {
    /// The file names used by [`write_dataset`] inside `dir`.
    pub fn in_dir(dir: &Path) -> Self {
        DataPaths {
            edges: dir.join("edges.txt"),
            features: dir.join("features.csv"),
            labels: dir.join("labels.csv"),
            masks: Some(dir.join("masks.csv")),
        }
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

/// Reads `(i, j, w)` triples; `w` defaults to 1. Indices are checked against
/// `num_nodes` when given.
pub fn read_edge_list(path: &Path, num_nodes: Option<usize>) -> Result<Vec<(usize, usize, f64)>> {
    let reader = BufReader::new(open(path)?);
    let mut edges = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        if !(2..=3).contains(&fields.len()) {
            return Err(Error::parse(path, lineno, format!("expected `i j [w]`, got {} fields", fields.len())));
        }
        let node = |s: &str| -> Result<usize> {
            let v: usize = s
                .parse()
                .map_err(|_| Error::parse(path, lineno, format!("invalid node index `{s}`")))?;
            if let Some(n) = num_nodes {
                if v >= n {
                    return Err(Error::parse(path, lineno, format!("node {v} out of range for {n} nodes")));
                }
            }
            Ok(v)
        };
        let (i, j) = (node(fields[0])?, node(fields[1])?);
        let w = match fields.get(2) {
            Some(s) => {
                let w: f64 = s
                    .parse()
                    .map_err(|_| Error::parse(path, lineno, format!("invalid weight `{s}`")))?;
                if !(w.is_finite() && w > 0.0) {
                    return Err(Error::parse(path, lineno, format!("weight {w} must be positive and finite")));
                }
                w
            }
            None => 1.0,
        };
        edges.push((i, j, w));
    }
    Ok(edges)
}

/// Writes each undirected edge once as `i j w`.
pub fn write_edge_list(path: &Path, g: &Graph) -> Result<()> {
    let mut out = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(out, "# {} nodes", g.num_nodes()).map_err(io)?;
    for (i, j, w) in g.edges() {
        writeln!(out, "{i} {j} {w}").map_err(io)?;
    }
    out.flush().map_err(io)
}

fn csv_reader(path: &Path) -> Result<csv::Reader<File>> {
    Ok(csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(open(path)?))
}

fn csv_line(rec: &csv::StringRecord) -> usize {
    rec.position().map_or(0, |p| p.line() as usize)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::parse(path, line, e.to_string())
}

/// Reads a dense feature table. A first row with any non-numeric cell is a header.
pub fn read_features(path: &Path) -> Result<FeatureMatrix> {
    let mut reader = csv_reader(path)?;
    let mut data = Vec::new();
    let mut cols: Option<usize> = None;
    let mut rows = 0;
    for (idx, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = csv_line(&rec);
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        let values = match parsed {
            Ok(v) => v,
            Err(_) if idx == 0 => continue,
            Err(_) => {
                let bad = rec.iter().find(|s| s.parse::<f64>().is_err()).unwrap_or("");
                return Err(Error::parse(path, line, format!("invalid number `{bad}`")));
            }
        };
        if let Some(c) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::parse(path, line, format!("non-finite value in column {c}")));
        }
        match cols {
            None => cols = Some(values.len()),
            Some(c) if c != values.len() => {
                return Err(Error::parse(path, line, format!("expected {c} columns, got {}", values.len())));
            }
            Some(_) => {}
        }
        data.extend(values);
        rows += 1;
    }
    let cols = cols.ok_or_else(|| Error::format(path, "no feature rows"))?;
    Ok(Matrix::from_vec(rows, cols, data)?)
}

/// Writes features with a `f0,f1,...` header.
pub fn write_features(path: &Path, x: &FeatureMatrix) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let header: Vec<String> = (0..x.cols()).map(|c| format!("f{c}")).collect();
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for row in x.iter_rows() {
        w.write_record(row.iter().map(|v| v.to_string())).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads `node_id,<value>` pairs, skipping a header row. `parse` maps the
/// value cell or explains why it is invalid.
fn read_node_table<T>(path: &Path, num_nodes: usize, parse: impl Fn(&str) -> Option<T>, expected: &str) -> Result<Vec<(usize, usize, T)>> {
    let mut reader = csv_reader(path)?;
    let mut out = Vec::new();
    let mut seen = vec![false; num_nodes];
    for (idx, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = csv_line(&rec);
        if rec.len() != 2 {
            return Err(Error::parse(path, line, format!("expected 2 columns, got {}", rec.len())));
        }
        let node: usize = match rec[0].parse() {
            Ok(v) => v,
            Err(_) if idx == 0 => continue,
            Err(_) => return Err(Error::parse(path, line, format!("invalid node id `{}`", &rec[0]))),
        };
        if node >= num_nodes {
            return Err(Error::parse(path, line, format!("node {node} out of range for {num_nodes} nodes")));
        }
        if std::mem::replace(&mut seen[node], true) {
            return Err(Error::parse(path, line, format!("node {node} listed twice")));
        }
        let value = parse(&rec[1])
            .ok_or_else(|| Error::parse(path, line, format!("invalid value `{}` (expected {expected})", &rec[1])))?;
        out.push((line, node, value));
    }
    Ok(out)
}

/// Per-node labels; nodes absent from the file are unknown.
pub fn read_labels(path: &Path, num_nodes: usize) -> Result<Vec<Label>> {
    let parse = |s: &str| match s {
        "1" => Some(Label::Fraud),
        "0" => Some(Label::Benign),
        _ => None,
    };
    let mut labels = vec![Label::Unknown; num_nodes];
    for (_, node, label) in read_node_table(path, num_nodes, parse, "0 or 1")? {
        labels[node] = label;
    }
    Ok(labels)
}

/// Writes known labels only.
pub fn write_labels(path: &Path, labels: &[Label]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["node_id", "label"]).map_err(|e| csv_error(path, e))?;
    for (i, l) in labels.iter().enumerate() {
        if let Some(b) = l.as_binary() {
            w.write_record([i.to_string(), b.to_string()]).map_err(|e| csv_error(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a split assignment. Assigning an unlabeled node is an error.
pub fn read_masks(path: &Path, labels: &[Label]) -> Result<Vec<Option<Split>>> {
    let mut splits = vec![None; labels.len()];
    for (line, node, split) in read_node_table(path, labels.len(), Split::parse, "train, val or test")? {
        if labels[node] == Label::Unknown {
            return Err(Error::parse(path, line, format!("node {node} has no label but is assigned to {}", split.name())));
        }
        splits[node] = Some(split);
    }
    Ok(splits)
}

pub fn write_masks(path: &Path, labels: &LabelSet) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["node_id", "split"]).map_err(|e| csv_error(path, e))?;
    for i in 0..labels.len() {
        if let Some(s) = labels.split_of(i) {
            w.write_record([i.to_string(), s.name().to_string()]).map_err(|e| csv_error(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Loads a dataset. The node count comes from the feature file. Without a
/// mask file the labeled nodes get a stratified 70/15/15 split from `seed`.
pub fn load_dataset(paths: &DataPaths, seed: u64) -> Result<Dataset> {
    let features = read_features(&paths.features)?;
    let n = features.rows();
    let edges = read_edge_list(&paths.edges, Some(n))?;
    let graph = Graph::from_weighted_edges(n, edges)?;
    let labels = read_labels(&paths.labels, n)?;
    let labels = match &paths.masks {
        Some(m) => {
            let splits = read_masks(m, &labels)?;
            LabelSet::with_splits(labels, &splits)?
        }
        None => LabelSet::unsplit(labels).stratified_split(TRAIN_FRACTION, VAL_FRACTION, seed)?,
    };
    Ok(Dataset {
        graph,
        features,
        labels,
    })
}

/// Writes all four files under the names of [`DataPaths::in_dir`].
pub fn write_dataset(dir: &Path, data: &Dataset) -> Result<DataPaths> {
    let paths = DataPaths::in_dir(dir);
    write_edge_list(&paths.edges, &data.graph)?;
    write_features(&paths.features, &data.features)?;
    write_labels(&paths.labels, data.labels.labels())?;
    if let Some(m) = &paths.masks {
        write_masks(m, &data.labels)?;
    }
    Ok(paths)
}

/// Embedding table `node_id,label,h_0..h_{d-1}`; unknown labels are written as -1.
pub fn write_embeddings(path: &Path, h: &Matrix, labels: &[Label]) -> Result<()> {
    if labels.len() != h.rows() {
        return Err(dualpath_core::Error::DimensionMismatch {
            expected: h.rows(),
            actual: labels.len(),
        }
        .into());
    }
    let mut w = csv::Writer::from_writer(create(path)?);
    let mut header = vec!["node_id".to_string(), "label".to_string()];
    header.extend((0..h.cols()).map(|c| format!("h_{c}")));
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for (i, row) in h.iter_rows().enumerate() {
        let label = labels[i].as_binary().map_or(-1, i32::from);
        let mut rec = vec![i.to_string(), label.to_string()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
