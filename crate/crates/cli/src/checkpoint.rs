//! Model checkpoints.
//!
//! Layout: the magic bytes `OFFCKPT\0`, a u32 format version, a u64 header
//! length, the JSON header, then every parameter as f32 little-endian in
//! header order. All integers are little-endian.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, ensure, Context, Result};
use outfitfuse_core::dataset::TypePair;
use outfitfuse_core::model::{Model, ModelConfig};
use serde::{Deserialize, Serialize};

use crate::manifest::DimsEntry;

pub const MAGIC: &[u8; 8] = b"OFFCKPT\0";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Header {
    pub fusion: String,
    pub common_dim: usize,
    pub compat_dim: usize,
    pub hidden_dim: usize,
    pub hops: usize,
    pub factor: usize,
    pub dims: DimsEntry,
    pub type_pairs: Vec<[usize; 2]>,
    pub params: Vec<ParamEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

pub fn encode(model: &Model) -> Result<Vec<u8>> {
    let c = model.config();
    let header = Header {
        fusion: c.fusion.as_str().into(),
        common_dim: c.common_dim,
        compat_dim: c.compat_dim,
        hidden_dim: c.hidden_dim,
        hops: c.hops,
        factor: c.factor,
        dims: model.layout.dims.into(),
        type_pairs: model
            .layout
            .spaces
            .pairs()
            .map(|p| [p.low(), p.high()])
            .collect(),
        params: model
            .store
            .iter()
            .map(|(_, p)| ParamEntry {
                name: p.name.clone(),
                shape: p.value.shape().to_vec(),
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header)?;
    let mut out = Vec::with_capacity(20 + json.len() + 4 * model.store.num_values());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for (_, p) in model.store.iter() {
        for &v in p.value.data() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<Model> {
    ensure!(
        bytes.len() >= 20 && &bytes[..8] == MAGIC,
        "not a checkpoint file"
    );
    let version = u32::from_le_bytes(bytes[8..12].try_into()?);
    ensure!(
        version == VERSION,
        "unsupported checkpoint version {version}"
    );
    let len = usize::try_from(u64::from_le_bytes(bytes[12..20].try_into()?))?;
    let payload_start = 20usize
        .checked_add(len)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| anyhow!("truncated header"))?;
    let header: Header =
        serde_json::from_slice(&bytes[20..payload_start]).context("parsing checkpoint header")?;

    let fusion = outfitfuse_core::model::FusionKind::parse(&header.fusion)
        .ok_or_else(|| anyhow!("unknown fusion '{}' in checkpoint", header.fusion))?;
    let config = ModelConfig {
        fusion,
        common_dim: header.common_dim,
        compat_dim: header.compat_dim,
        hidden_dim: header.hidden_dim,
        hops: header.hops,
        factor: header.factor,
    };
    let pairs: BTreeSet<TypePair> = header
        .type_pairs
        .iter()
        .map(|p| TypePair::new(p[0], p[1]))
        .collect();
    let mut model = Model::init(config, header.dims.into(), &pairs, 0)?;
    ensure!(
        header.params.len() == model.store.len(),
        "checkpoint has {} parameter tensors, the model expects {}",
        header.params.len(),
        model.store.len()
    );

    let mut values = bytes[payload_start..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64);
    let expected: usize = header
        .params
        .iter()
        .map(|p| p.shape.iter().product::<usize>())
        .sum();
    if (bytes.len() - payload_start) != 4 * expected {
        bail!(
            "payload has {} bytes, expected {}",
            bytes.len() - payload_start,
            4 * expected
        );
    }
    for entry in &header.params {
        let id = model
            .store
            .find(&entry.name)
            .ok_or_else(|| anyhow!("checkpoint parameter '{}' not in model", entry.name))?;
        let shape = model.store.get(id).shape();
        ensure!(
            shape == entry.shape.as_slice(),
            "parameter '{}' has shape {:?}, the model expects {:?}",
            entry.name,
            entry.shape,
            shape
        );
        let n: usize = entry.shape.iter().product();
        let chunk: Vec<f64> = values.by_ref().take(n).collect();
        model.store.set_values(id, &chunk)?;
    }
    Ok(model)
}

pub fn save(path: &Path, model: &Model) -> Result<()> {
    fs::write(path, encode(model)?)
        .with_context(|| format!("writing checkpoint {}", path.display()))
}

pub fn load(path: &Path) -> Result<Model> {
    let bytes = fs::read(path).with_context(|| format!("reading checkpoint {}", path.display()))?;
    decode(&bytes).with_context(|| format!("loading checkpoint {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use outfitfuse_core::dataset::Dims;
    use outfitfuse_core::model::FusionKind;

    fn model(kind: FusionKind) -> Model {
        let config = ModelConfig {
            fusion: kind,
            common_dim: 4,
            compat_dim: 3,
            hidden_dim: 5,
            hops: 2,
            factor: 2,
        };
        let dims = Dims {
            regions: 3,
            words: 2,
            region_dim: 6,
            word_dim: 5,
        };
        let pairs = [TypePair::new(0, 1), TypePair::new(1, 1)]
            .into_iter()
            .collect();
        Model::init(config, dims, &pairs, 3).unwrap()
    }

    #[test]
    fn round_trip_is_exact_after_f32_rounding() {
        for kind in FusionKind::ALL {
            let m = model(kind);
            let back = decode(&encode(&m).unwrap()).unwrap();
            assert_eq!(back.layout, m.layout);
            for ((_, a), (_, b)) in m.store.iter().zip(back.store.iter()) {
                assert_eq!(a.name, b.name);
                for (x, y) in a.value.data().iter().zip(b.value.data()) {
                    assert_eq!((*x as f32) as f64, *y);
                }
            }
            assert_eq!(encode(&back).unwrap(), encode(&m).unwrap());
        }
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let bytes = encode(&model(FusionKind::Stacked)).unwrap();
        assert!(decode(&bytes[..bytes.len() - 4]).is_err());
        assert!(decode(&bytes[..10]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode(&bad).is_err());
    }
}
