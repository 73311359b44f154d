//! Model snapshots: a JSON manifest of named tensor shapes next to a flat
//! little-endian f64 payload. Language-neutral and diffable.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sfw_core::numerics::Tensor;
use sfw_core::zoo::{Layer, Model};

use crate::{HarnessError, Result};

#[derive(Debug, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Offset into the payload, in f64 elements.
    pub offset: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub tensors: Vec<TensorEntry>,
    /// Layer kinds in order, for reconstruction.
    pub layers: Vec<String>,
}

fn layer_tag(layer: &Layer) -> &'static str {
    match layer {
        Layer::Dense { .. } => "dense",
        Layer::Conv2d { .. } => "conv2d",
        Layer::BatchNormLite { .. } => "batchnorm",
        Layer::Relu => "relu",
        Layer::GlobalAvgPool => "global_avg_pool",
        Layer::Flatten => "flatten",
    }
}

fn param_names(layer: &Layer) -> Vec<&'static str> {
    match layer {
        Layer::Dense { .. } | Layer::Conv2d { .. } => vec!["w", "b"],
        Layer::BatchNormLite { .. } => vec!["gamma", "beta"],
        _ => vec![],
    }
}

/// Writes `<stem>.json` (manifest) and `<stem>.bin` (payload).
pub fn save_model(model: &Model, stem: &Path) -> Result<()> {
    let mut tensors = Vec::new();
    let mut payload: Vec<u8> = Vec::new();
    let mut offset = 0usize;
    for (li, layer) in model.layers.iter().enumerate() {
        for (name, (t, _)) in param_names(layer).iter().zip(layer.params()) {
            tensors.push(TensorEntry {
                name: format!("layer{li}.{name}"),
                shape: t.shape().to_vec(),
                offset,
            });
            for v in t.data() {
                payload.extend_from_slice(&v.to_le_bytes());
            }
            offset += t.len();
        }
    }
    let manifest = Manifest {
        tensors,
        layers: model.layers.iter().map(|l| layer_tag(l).to_string()).collect(),
    };
    fs::write(
        stem.with_extension("json"),
        serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
    )?;
    fs::write(stem.with_extension("bin"), payload)?;
    Ok(())
}

/// Reads a snapshot written by [`save_model`].
pub fn load_model(stem: &Path) -> Result<Model> {
    let manifest: Manifest =
        serde_json::from_str(&fs::read_to_string(stem.with_extension("json"))?)
            .map_err(|e| HarnessError::Config(format!("bad manifest: {e}")))?;
    let payload = fs::read(stem.with_extension("bin"))?;
    let read = |entry: &TensorEntry| -> Result<Tensor> {
        let len: usize = entry.shape.iter().product();
        let start = entry.offset * 8;
        let end = start + len * 8;
        if end > payload.len() {
            return Err(HarnessError::Config("snapshot payload truncated".into()));
        }
        let data: Vec<f64> = payload[start..end]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Tensor::new(entry.shape.clone(), data)
            .map_err(|e| HarnessError::Config(format!("snapshot tensor: {e}")))
    };
    let mut entries = manifest.tensors.iter();
    let mut next = |expect: &str| -> Result<Tensor> {
        let entry = entries
            .next()
            .ok_or_else(|| HarnessError::Config("manifest short on tensors".into()))?;
        if !entry.name.ends_with(expect) {
            return Err(HarnessError::Config(format!(
                "expected a .{expect} tensor, found {}",
                entry.name
            )));
        }
        read(entry)
    };
    let mut layers = Vec::new();
    for tag in &manifest.layers {
        let layer = match tag.as_str() {
            "dense" => Layer::Dense {
                w: next("w")?,
                b: next("b")?,
            },
            "conv2d" => Layer::Conv2d {
                w: next("w")?,
                b: next("b")?,
            },
            "batchnorm" => Layer::BatchNormLite {
                gamma: next("gamma")?,
                beta: next("beta")?,
            },
            "relu" => Layer::Relu,
            "global_avg_pool" => Layer::GlobalAvgPool,
            "flatten" => Layer::Flatten,
            other => {
                return Err(HarnessError::Config(format!("unknown layer tag {other}")));
            }
        };
        layers.push(layer);
    }
    Ok(Model { layers })
}

#[cfg(test)]
mod tests {
    use super::*;
    use sfw_core::numerics::{RngStream, StreamPurpose};

    #[test]
    fn snapshot_round_trips() {
        let mut rng = RngStream::new(1, StreamPurpose::Init);
        let model = Model::cnn(1, &[3], 3, 2, true, &mut rng);
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("model");
        save_model(&model, &stem).unwrap();
        let loaded = load_model(&stem).unwrap();
        assert_eq!(loaded.layers.len(), model.layers.len());
        for (a, b) in model.layers.iter().zip(&loaded.layers) {
            for ((ta, _), (tb, _)) in a.params().iter().zip(b.params()) {
                assert_eq!(ta.shape(), tb.shape());
                assert_eq!(ta.data(), tb.data());
            }
        }
    }
}
