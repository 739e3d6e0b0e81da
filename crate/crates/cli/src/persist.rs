//! Model persistence.
//!
//! The network is stored as a directory holding `manifest.json` (format
//! version, tensor directory, config snapshot, input statistics, train-log
//! digest) plus `weights.bin`, the concatenated parameter tensors as
//! little-endian 32-bit floats. The ensemble is one JSON file; its f64
//! coefficients survive the decimal round trip bit-exactly.

use std::path::Path;

use dbel::brstm::{BrstmConfig, BrstmModel};
use dbel::ensemble::EnsembleModel;
use dbel::tensor::{ParamStore, Shape, Tensor};
use serde::{Deserialize, Serialize};

use crate::{CliError, CliResult};

pub const NETWORK_FORMAT_VERSION: u32 = 1;
pub const ENSEMBLE_FORMAT_VERSION: u32 = 1;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const WEIGHTS_FILE: &str = "weights.bin";

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    /// (batch, channels, height, width) extents.
    shape: [usize; 4],
    /// Byte offset into the weights blob.
    offset: u64,
    /// Byte length (4 × element count).
    length: u64,
    frozen: bool,
}

#[derive(Serialize, Deserialize)]
struct ModelManifest {
    format_version: u32,
    scalar: String,
    input_mean: f64,
    input_std: f64,
    config: BrstmConfig,
    tensors: Vec<TensorEntry>,
    train_log_digest: Option<String>,
}

/// 64-bit FNV-1a content fingerprint; integrity hint, not cryptography.
pub fn digest(bytes: &[u8]) -> String {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100_0000_01b3);
    }
    format!("fnv1a64:{hash:016x}")
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub(crate) fn read_file(path: &Path) -> CliResult<Vec<u8>> {
    std::fs::read(path).map_err(|e| CliError::io(path, e))
}

/// Serializes with a trailing newline; serde_json's output is fully
/// deterministic for struct types, which the reproducibility contract
/// relies on.
pub fn to_json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("serializable value");
    bytes.push(b'\n');
    bytes
}

pub fn save_network(
    model: &BrstmModel<f32>,
    dir: &Path,
    train_log_digest: Option<String>,
) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut tensors = Vec::new();
    let mut blob = Vec::new();
    for param in model.params().iter() {
        let value = param.value();
        let offset = blob.len() as u64;
        for &v in value.data() {
            blob.extend_from_slice(&v.to_le_bytes());
        }
        let s = value.shape();
        tensors.push(TensorEntry {
            name: param.name().to_string(),
            shape: [s.n, s.c, s.h, s.w],
            offset,
            length: blob.len() as u64 - offset,
            frozen: param.frozen(),
        });
    }
    let (mean, std) = model.input_stats();
    let manifest = ModelManifest {
        format_version: NETWORK_FORMAT_VERSION,
        scalar: "f32".into(),
        input_mean: mean as f64,
        input_std: std as f64,
        config: model.config().clone(),
        tensors,
        train_log_digest,
    };
    write_file(&dir.join(WEIGHTS_FILE), &blob)?;
    write_file(&dir.join(MANIFEST_FILE), &to_json_bytes(&manifest))
}

pub fn load_network(dir: &Path) -> CliResult<BrstmModel<f32>> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let manifest: ModelManifest = serde_json::from_slice(&read_file(&manifest_path)?)
        .map_err(|e| {
            CliError::Pipeline(dbel::Error::Format(format!(
                "malformed manifest {}: {e}",
                manifest_path.display()
            )))
        })?;
    if manifest.format_version != NETWORK_FORMAT_VERSION {
        return Err(CliError::Pipeline(dbel::Error::Format(format!(
            "model format version {} unsupported (expected {NETWORK_FORMAT_VERSION})",
            manifest.format_version
        ))));
    }
    if manifest.scalar != "f32" {
        return Err(CliError::Pipeline(dbel::Error::Format(format!(
            "unsupported scalar type `{}`",
            manifest.scalar
        ))));
    }
    let blob = read_file(&dir.join(WEIGHTS_FILE))?;
    let mut store: ParamStore<f32> = ParamStore::new();
    let mut frozen = Vec::new();
    let mut expected_len = 0u64;
    for entry in &manifest.tensors {
        let [n, c, h, w] = entry.shape;
        let shape = Shape::new(n, c, h, w);
        if entry.length != 4 * shape.len() as u64 {
            return Err(corrupt(&entry.name, "shape disagrees with blob length"));
        }
        let end = entry.offset.checked_add(entry.length);
        let Some(end) = end.filter(|&e| e <= blob.len() as u64) else {
            return Err(corrupt(&entry.name, "weights blob truncated"));
        };
        expected_len = expected_len.max(end);
        let bytes = &blob[entry.offset as usize..end as usize];
        let data: Vec<f32> = bytes
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        let id = store.add(&entry.name, Tensor::from_vec(shape, data)?);
        if entry.frozen {
            frozen.push(id);
        }
    }
    if expected_len != blob.len() as u64 {
        return Err(CliError::Pipeline(dbel::Error::Format(format!(
            "weights blob is {} bytes, manifest accounts for {expected_len}",
            blob.len()
        ))));
    }
    let mut model = BrstmModel::from_parts(
        manifest.config,
        store,
        manifest.input_mean as f32,
        manifest.input_std as f32,
    )?;
    for id in frozen {
        model.params_mut().set_frozen(id, true);
    }
    Ok(model)
}

fn corrupt(name: &str, what: &str) -> CliError {
    CliError::Pipeline(dbel::Error::Format(format!("{what} in entry `{name}`")))
}

#[derive(Serialize, Deserialize)]
struct EnsembleFile {
    format_version: u32,
    model: EnsembleModel,
}

pub fn save_ensemble(model: &EnsembleModel, path: &Path) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    let file = EnsembleFile {
        format_version: ENSEMBLE_FORMAT_VERSION,
        model: model.clone(),
    };
    write_file(path, &to_json_bytes(&file))
}

pub fn load_ensemble(path: &Path) -> CliResult<EnsembleModel> {
    let file: EnsembleFile = serde_json::from_slice(&read_file(path)?).map_err(|e| {
        CliError::Pipeline(dbel::Error::Format(format!(
            "malformed ensemble file {}: {e}",
            path.display()
        )))
    })?;
    if file.format_version != ENSEMBLE_FORMAT_VERSION {
        return Err(CliError::Pipeline(dbel::Error::Format(format!(
            "ensemble format version {} unsupported (expected {ENSEMBLE_FORMAT_VERSION})",
            file.format_version
        ))));
    }
    Ok(file.model)
}
