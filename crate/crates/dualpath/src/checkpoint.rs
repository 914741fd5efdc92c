//! JSON checkpoints for the MLP and the tree ensemble.

use std::fs;
use std::path::Path;

use dualpath_core::mlp::Activation;
use dualpath_core::{MlpModel, TreeEnsemble};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpCheckpoint {
    pub version: u32,
    /// `[in, hidden, embedding, 2]`.
    pub layer_sizes: [usize; 4],
    pub activation: Activation,
    pub seed: u64,
    /// Per layer: row-major `fan_in x fan_out` weights, then the bias.
    pub params: Vec<f64>,
}

impl MlpCheckpoint {
    pub fn from_model(m: &MlpModel) -> Self {
        MlpCheckpoint {
            version: FORMAT_VERSION,
            layer_sizes: m.layer_sizes(),
            activation: m.activation(),
            seed: m.seed(),
            params: m.params().to_vec(),
        }
    }

    pub fn into_model(self) -> Result<MlpModel> {
        Ok(MlpModel::from_flat(self.layer_sizes, self.params, self.activation, self.seed)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleCheckpoint {
    pub version: u32,
    #[serde(flatten)]
    pub ensemble: TreeEnsemble,
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::format(path, e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line(), e.to_string()))
}

fn check_version(path: &Path, version: u32) -> Result<()> {
    if version != FORMAT_VERSION {
        return Err(Error::format(path, format!("checkpoint version {version}, expected {FORMAT_VERSION}")));
    }
    Ok(())
}

pub fn save_mlp(path: &Path, m: &MlpModel) -> Result<()> {
    write_json(path, &MlpCheckpoint::from_model(m))
}

pub fn load_mlp(path: &Path) -> Result<MlpModel> {
    let ckpt: MlpCheckpoint = read_json(path)?;
    check_version(path, ckpt.version)?;
    ckpt.into_model()
}

pub fn save_ensemble(path: &Path, e: &TreeEnsemble) -> Result<()> {
    write_json(
        path,
        &EnsembleCheckpoint {
            version: FORMAT_VERSION,
            ensemble: e.clone(),
        },
    )
}

pub fn load_ensemble(path: &Path) -> Result<TreeEnsemble> {
    let ckpt: EnsembleCheckpoint = read_json(path)?;
    check_version(path, ckpt.version)?;
    ckpt.ensemble.validate()?;
    Ok(ckpt.ensemble)
}
