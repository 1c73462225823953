//! Binary checkpoints: `XSAP`, u32 version, u32 vocab size, u32 dim, then the
//! table rows and the projection rows as little-endian `f32`. The config the
//! model was trained with sits next to it in `<checkpoint>.cfg`.

use std::path::{Path, PathBuf};

use super::EncoderParams;
use crate::config::TrainConfig;
use crate::error::{Error, Result};
use crate::io::write_atomic;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"XSAP";
pub const CHECKPOINT_VERSION: u32 = 1;
const HEADER_LEN: usize = 16;

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_os_string();
    name.push(".cfg");
    PathBuf::from(name)
}

/// Writes the checkpoint and its config sidecar. Weights are stored as `f32`.
pub fn write_checkpoint(path: &Path, params: &EncoderParams, config: &TrainConfig) -> Result<()> {
    let mut bytes = Vec::with_capacity(HEADER_LEN + 4 * (params.table.len() + params.projection.len()));
    bytes.extend_from_slice(CHECKPOINT_MAGIC);
    bytes.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    bytes.extend_from_slice(&(params.vocab_size as u32).to_le_bytes());
    bytes.extend_from_slice(&(params.dim as u32).to_le_bytes());
    for &x in params.table.iter().chain(&params.projection) {
        bytes.extend_from_slice(&(x as f32).to_le_bytes());
    }
    let mut sidecar = config.clone();
    sidecar.vocab_size = params.vocab_size;
    sidecar.embed_dim = params.dim;
    sidecar.ngram_order = params.ngram_order;
    sidecar.max_name_chars = params.max_name_chars;
    write_atomic(&sidecar_path(path), sidecar.to_config_string().as_bytes())?;
    write_atomic(path, &bytes)
}

pub fn read_checkpoint(path: &Path) -> Result<(EncoderParams, TrainConfig)> {
    let bad = |message: String| Error::Checkpoint {
        path: path.to_path_buf(),
        message,
    };
    let bytes = std::fs::read(path).map_err(|e| Error::file(path, e))?;
    if bytes.len() < HEADER_LEN || &bytes[..4] != CHECKPOINT_MAGIC {
        return Err(bad("not an XSAP checkpoint".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let version = word(4);
    if version != CHECKPOINT_VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let (v, d) = (word(8) as usize, word(12) as usize);
    let expected = HEADER_LEN + 4 * (v * d + d * d);
    if bytes.len() != expected {
        return Err(bad(format!("expected {expected} bytes, found {}", bytes.len())));
    }
    let mut floats = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64);
    let table: Vec<f64> = floats.by_ref().take(v * d).collect();
    let projection: Vec<f64> = floats.collect();

    let config = crate::config::load_config(sidecar_path(path))?;
    if config.vocab_size != v || config.embed_dim != d {
        return Err(bad(format!(
            "sidecar says {}x{}, weights are {v}x{d}",
            config.vocab_size, config.embed_dim
        )));
    }
    let params = EncoderParams {
        vocab_size: v,
        dim: d,
        ngram_order: config.ngram_order,
        max_name_chars: config.max_name_chars,
        table,
        projection,
    };
    if !params.is_finite() {
        return Err(bad("non-finite weights".into()));
    }
    Ok((params, config))
}
