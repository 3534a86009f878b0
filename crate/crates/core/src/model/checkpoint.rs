//! Single-file parameter checkpoints.
//!
//! Layout: 8-byte magic `LCKPT001`, little-endian `u64` manifest length, the
//! JSON manifest (parameter layout plus free-form metadata), then the
//! parameter values as little-endian `f64`.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::params::{Layout, ParamVector};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"LCKPT001";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub layout: Layout,
    pub count: usize,
    #[serde(default)]
    pub meta: serde_json::Value,
}

pub fn write_checkpoint<W: Write>(mut w: W, params: &ParamVector, meta: serde_json::Value) -> Result<()> {
    let manifest = CheckpointManifest {
        layout: (*params.layout).clone(),
        count: params.len(),
        meta,
    };
    let json = serde_json::to_vec(&manifest)?;
    w.write_all(MAGIC)?;
    w.write_all(&(json.len() as u64).to_le_bytes())?;
    w.write_all(&json)?;
    for v in &params.values {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<(ParamVector, serde_json::Value)> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Shape("not a labelcraft checkpoint".into()));
    }
    let mut len = [0u8; 8];
    r.read_exact(&mut len)?;
    let mut json = vec![0u8; u64::from_le_bytes(len) as usize];
    r.read_exact(&mut json)?;
    let manifest: CheckpointManifest = serde_json::from_slice(&json)?;
    manifest.layout.validate()?;
    if manifest.count != manifest.layout.len() {
        return Err(Error::Shape(format!(
            "manifest count {} disagrees with layout length {}",
            manifest.count,
            manifest.layout.len()
        )));
    }
    let mut bytes = vec![0u8; manifest.count * 8];
    r.read_exact(&mut bytes)?;
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    let params = ParamVector::from_values(Arc::new(manifest.layout), values)?;
    Ok((params, manifest.meta))
}

pub fn save_checkpoint(path: impl AsRef<Path>, params: &ParamVector, meta: serde_json::Value) -> Result<()> {
    let f = std::io::BufWriter::new(std::fs::File::create(path.as_ref())?);
    write_checkpoint(f, params, meta)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(ParamVector, serde_json::Value)> {
    let f = std::io::BufReader::new(std::fs::File::open(path.as_ref())?);
    read_checkpoint(f)
}
