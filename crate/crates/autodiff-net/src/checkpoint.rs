//! Network checkpoints: a JSON manifest of the layer descriptors plus one
//! TNSR file per parameter, named `<layer>.<param>.tnsr`.

use crate::error::{NetError, Result};
use crate::network::Network;
use crate::spec::NetworkSpec;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamEntry {
    pub name: String,
    pub file: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub spec: NetworkSpec,
    pub input_shape: Vec<usize>,
    pub actions: usize,
    pub params: Vec<ParamEntry>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Writes the manifest and every parameter tensor into `dir`.
pub fn save_checkpoint(dir: impl AsRef<Path>, net: &Network) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let mut params = Vec::new();
    for p in net.params() {
        let file = format!("{}.tnsr", p.name);
        tensor_core::save_tensor(dir.join(&file), &p.value)?;
        params.push(ParamEntry {
            name: p.name.clone(),
            file,
            shape: p.value.shape().to_vec(),
        });
    }
    let manifest = Manifest {
        spec: net.spec.clone(),
        input_shape: net.input_shape().to_vec(),
        actions: net.actions(),
        params,
    };
    let json = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(dir.join(MANIFEST_FILE), json)?;
    Ok(())
}

/// Rebuilds the network described by the manifest in `dir` and loads every
/// parameter tensor, validating names and shapes.
pub fn load_checkpoint(dir: impl AsRef<Path>) -> Result<Network> {
    let dir = dir.as_ref();
    let raw = std::fs::read_to_string(dir.join(MANIFEST_FILE))?;
    let manifest: Manifest = serde_json::from_str(&raw)?;
    let mut net = Network::build(&manifest.spec, &manifest.input_shape, manifest.actions, 0)?;
    let entries: std::collections::BTreeMap<&str, &ParamEntry> = manifest
        .params
        .iter()
        .map(|e| (e.name.as_str(), e))
        .collect();
    for p in net.params_mut() {
        let entry = entries.get(p.name.as_str()).ok_or_else(|| {
            NetError::Checkpoint(format!("manifest missing parameter {}", p.name))
        })?;
        let value = tensor_core::load_tensor(dir.join(&entry.file))?;
        if value.shape() != p.value.shape() {
            return Err(NetError::Checkpoint(format!(
                "parameter {} has shape {:?}, checkpoint holds {:?}",
                p.name,
                p.value.shape(),
                value.shape()
            )));
        }
        p.value = value;
    }
    Ok(net)
}
