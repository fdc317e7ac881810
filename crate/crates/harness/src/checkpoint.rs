//! Parameter checkpoints (`MDCK`) and the TOML sidecar with model metadata.
//!
//! Layout, all integers little-endian u32:
//! magic `MDCK`, version, tensor count, then per tensor: name length, name
//! bytes (UTF-8), rank, extents, f64 payload.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use mia_core::defense::DefenseConfig;
use mia_core::model::{ModelSpec, TrainedModel};
use mia_core::optim::{ParamSet, TrainRecipe};
use mia_core::Tensor;
use serde::{Deserialize, Serialize};

use crate::{HarnessError, Result};

const MAGIC: &[u8; 4] = b"MDCK";
const VERSION: u32 = 1;

fn format_err(msg: impl Into<String>) -> HarnessError {
    HarnessError::Format(msg.into())
}

/// Serialize a parameter set into the checkpoint byte format.
pub fn checkpoint_bytes(params: &ParamSet) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for p in params.iter() {
        out.extend_from_slice(&(p.name.len() as u32).to_le_bytes());
        out.extend_from_slice(p.name.as_bytes());
        out.extend_from_slice(&(p.value.rank() as u32).to_le_bytes());
        for &e in p.value.shape() {
            out.extend_from_slice(&(e as u32).to_le_bytes());
        }
        for v in p.value.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(format_err(format!(
                "checkpoint truncated: need {} bytes at offset {}, have {}",
                n,
                self.pos,
                self.bytes.len() - self.pos
            )));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

/// Parse checkpoint bytes back into a parameter set (zeroed gradients).
pub fn parse_checkpoint(bytes: &[u8]) -> Result<ParamSet> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4)? != MAGIC {
        return Err(format_err("bad magic: not an MDCK checkpoint"));
    }
    let version = cur.u32()?;
    if version != VERSION {
        return Err(format_err(format!("unsupported checkpoint version {version}")));
    }
    let count = cur.u32()? as usize;
    let mut params = ParamSet::new();
    for _ in 0..count {
        let name_len = cur.u32()? as usize;
        let name = std::str::from_utf8(cur.take(name_len)?)
            .map_err(|_| format_err("tensor name is not UTF-8"))?
            .to_string();
        let rank = cur.u32()? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(cur.u32()? as usize);
        }
        let numel: usize = shape.iter().product();
        let mut data = Vec::with_capacity(numel);
        for chunk in cur.take(numel * 8)?.chunks_exact(8) {
            data.push(f64::from_le_bytes(chunk.try_into().expect("8 bytes")));
        }
        params.add(name, Tensor::new(shape, data)?);
    }
    if cur.pos != bytes.len() {
        return Err(format_err(format!(
            "trailing bytes after last tensor: expected {} total, file has {}",
            cur.pos,
            bytes.len()
        )));
    }
    Ok(params)
}

pub fn write_checkpoint(path: &Path, params: &ParamSet) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&checkpoint_bytes(params))?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<ParamSet> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    parse_checkpoint(&bytes)
}

/// Sidecar metadata stored next to each checkpoint.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelMeta {
    pub spec: ModelSpec,
    pub defense: DefenseConfig,
    pub recipe: TrainRecipe,
    pub seed: u64,
}

/// Write `<base>.mdck` and `<base>.toml` for a trained model.
pub fn save_model(base: &Path, model: &TrainedModel) -> Result<()> {
    write_checkpoint(&base.with_extension("mdck"), &model.params)?;
    let meta = ModelMeta {
        spec: model.spec.clone(),
        defense: model.defense.clone(),
        recipe: model.recipe.clone(),
        seed: model.seed,
    };
    let text = toml::to_string_pretty(&meta)
        .map_err(|e| format_err(format!("sidecar serialization failed: {e}")))?;
    fs::write(base.with_extension("toml"), text)?;
    Ok(())
}

/// Load a model saved by [`save_model`]. Training history is not persisted.
pub fn load_model(base: &Path) -> Result<TrainedModel> {
    let params = read_checkpoint(&base.with_extension("mdck"))?;
    let text = fs::read_to_string(base.with_extension("toml"))?;
    let meta: ModelMeta =
        toml::from_str(&text).map_err(|e| format_err(format!("bad sidecar: {e}")))?;
    Ok(TrainedModel {
        spec: meta.spec,
        params,
        history: Vec::new(),
        defense: meta.defense,
        recipe: meta.recipe,
        seed: meta.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkpoint_round_trips() {
        let mut params = ParamSet::new();
        params.add("fc0.w", Tensor::new(vec![2, 3], vec![1.0, -2.0, 3.5, 0.0, 1e-9, 7.0]).unwrap());
        params.add("fc0.b", Tensor::from_vec(vec![0.25, -0.5, 4.0]));
        let bytes = checkpoint_bytes(&params);
        assert_eq!(&bytes[0..4], b"MDCK");
        let back = parse_checkpoint(&bytes).unwrap();
        assert_eq!(back, params);
        // serialization is canonical
        assert_eq!(checkpoint_bytes(&back), bytes);
    }

    #[test]
    fn truncated_checkpoint_reports_counts() {
        let mut params = ParamSet::new();
        params.add("w", Tensor::from_vec(vec![1.0, 2.0]));
        let bytes = checkpoint_bytes(&params);
        let err = parse_checkpoint(&bytes[..bytes.len() - 3]).unwrap_err();
        assert!(err.to_string().contains("truncated"), "{err}");
    }

    #[test]
    fn bad_magic_rejected() {
        assert!(parse_checkpoint(b"NOPE\x01\x00\x00\x00\x00\x00\x00\x00").is_err());
    }
}
