use std::fs;
use std::path::{Path, PathBuf};

use actgen_core::Scalar;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ModelConfig;
use crate::model::Network;
use crate::tensor::Tensor;
use crate::NeuralError;

pub const FORMAT: &str = "actgen-checkpoint-1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub shape: [usize; 2],
}

/// JSON side of a checkpoint. Values live in a sibling `.bin` file as
/// little-endian `f32`, in `params` order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub config: ModelConfig,
    pub seed: u64,
    pub step: u64,
    pub params: Vec<ParamEntry>,
    pub data_file: String,
    /// Hex SHA-256 of the data file.
    pub checksum: String,
}

fn data_path(manifest: &Path) -> PathBuf {
    manifest.with_extension("bin")
}

pub fn encode_values<T: Scalar>(network: &Network<T>) -> Vec<u8> {
    let mut bytes = Vec::with_capacity(network.params().scalar_count() * 4);
    for (_, t) in network.params().iter() {
        for &v in t.data() {
            bytes.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
        }
    }
    bytes
}

/// SHA-256 over the serialized parameter values.
pub fn checksum<T: Scalar>(network: &Network<T>) -> String {
    hex::encode(Sha256::digest(encode_values(network)))
}

/// Writes `<path>` (manifest) and `<path>.bin` (values). Returns the manifest.
pub fn save_checkpoint<T: Scalar>(
    network: &Network<T>,
    step: u64,
    path: &Path,
) -> Result<Manifest, NeuralError> {
    let bytes = encode_values(network);
    let bin = data_path(path);
    let manifest = Manifest {
        format: FORMAT.into(),
        config: network.config().clone(),
        seed: network.config().seed,
        step,
        params: network
            .params()
            .iter()
            .map(|(name, t)| ParamEntry {
                name: name.to_string(),
                shape: [t.rows(), t.cols()],
            })
            .collect(),
        data_file: bin
            .file_name()
            .and_then(|n| n.to_str())
            .ok_or_else(|| NeuralError::Checkpoint("bad checkpoint path".into()))?
            .to_string(),
        checksum: hex::encode(Sha256::digest(&bytes)),
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(&bin, &bytes)?;
    fs::write(path, serde_json::to_vec_pretty(&manifest)?)?;
    Ok(manifest)
}

pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<(Network<T>, Manifest), NeuralError> {
    let manifest: Manifest = serde_json::from_slice(&fs::read(path)?)?;
    if manifest.format != FORMAT {
        return Err(NeuralError::Checkpoint(format!(
            "unsupported format '{}'",
            manifest.format
        )));
    }
    let bin = path
        .parent()
        .unwrap_or(Path::new("."))
        .join(&manifest.data_file);
    let bytes = fs::read(&bin)?;
    if hex::encode(Sha256::digest(&bytes)) != manifest.checksum {
        return Err(NeuralError::Checkpoint(
            "data file checksum mismatch".into(),
        ));
    }
    let expected: usize = manifest
        .params
        .iter()
        .map(|p| p.shape[0] * p.shape[1])
        .sum();
    if bytes.len() != expected * 4 {
        return Err(NeuralError::Checkpoint(format!(
            "data file holds {} values, manifest lists {expected}",
            bytes.len() / 4
        )));
    }
    let mut network = Network::new(manifest.config.clone())?;
    let mut floats = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]));
    let values: Vec<(String, Tensor<T>)> = manifest
        .params
        .iter()
        .map(|p| {
            let n = p.shape[0] * p.shape[1];
            let data = floats.by_ref().take(n).map(|v| T::lit(v as f64)).collect();
            (
                p.name.clone(),
                Tensor::from_vec(p.shape[0], p.shape[1], data),
            )
        })
        .collect();
    network.load_values(values)?;
    Ok((network, manifest))
}
