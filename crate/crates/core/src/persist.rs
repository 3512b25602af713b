//! Model files: `SDTD` magic, little-endian `u32` version, little-endian
//! `u32` header length, a UTF-8 JSON header holding the configuration and the
//! ordered tensor manifest, then little-endian `f32` blobs in manifest order.

use std::fs::{self, File};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::model::{layer_specs, ConvLayer, ModelConfig, ModelWeights};
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"SDTD";
pub const FORMAT_VERSION: u32 = 1;
/// Bytes before the JSON header.
pub const PREAMBLE_LEN: usize = 12;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

impl TensorEntry {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileHeader {
    pub config: ModelConfig,
    pub tensors: Vec<TensorEntry>,
}

/// Tensor manifest for a configuration; PReLU slopes are listed only when the
/// activator has them.
pub fn manifest(cfg: &ModelConfig) -> Result<Vec<TensorEntry>> {
    let mut out = Vec::new();
    for spec in layer_specs(cfg)? {
        let entry = |p: &str, shape: Vec<usize>| TensorEntry {
            name: format!("{}.{p}", spec.name),
            shape,
        };
        out.push(entry("kernel", vec![spec.c_out, spec.c_in, spec.ksize, spec.ksize]));
        out.push(entry("bias", vec![spec.c_out]));
        if spec.has_slope {
            out.push(entry("slope", vec![spec.c_out]));
        }
    }
    Ok(out)
}

/// Serialises a model to bytes. Identical models give identical bytes.
pub fn encode_model(w: &ModelWeights, cfg: &ModelConfig) -> Result<Vec<u8>> {
    w.check_shapes(cfg)?;
    let header = FileHeader {
        config: cfg.clone(),
        tensors: manifest(cfg)?,
    };
    let json = serde_json::to_vec(&header).map_err(|e| Error::Format(e.to_string()))?;
    let mut out = Vec::with_capacity(PREAMBLE_LEN + json.len() + 4 * w.param_count());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for t in w.tensors().into_iter().filter(|t| !t.is_empty()) {
        for v in t {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_model(bytes: &[u8]) -> Result<(ModelWeights, ModelConfig)> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(Error::Format("missing `SDTD` magic".into()));
    }
    if bytes.len() < PREAMBLE_LEN {
        return Err(Error::Corruption("file ends inside the preamble".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let version = word(4);
    if version != FORMAT_VERSION {
        return Err(Error::Version {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let header_len = word(8) as usize;
    let body = PREAMBLE_LEN
        .checked_add(header_len)
        .filter(|&end| end <= bytes.len())
        .ok_or_else(|| Error::Corruption("file ends inside the header".into()))?;
    let header: FileHeader = serde_json::from_slice(&bytes[PREAMBLE_LEN..body])
        .map_err(|e| Error::Corruption(format!("unreadable header: {e}")))?;
    let cfg = header.config;
    cfg.validate().map_err(|e| Error::Corruption(format!("header config: {e}")))?;
    let expected = manifest(&cfg)?;
    if header.tensors != expected {
        return Err(Error::Corruption("tensor manifest does not match the configuration".into()));
    }
    let total: usize = expected.iter().map(TensorEntry::len).sum();
    let blob = &bytes[body..];
    if blob.len() != 4 * total {
        return Err(Error::Corruption(format!(
            "expected {} bytes of weights, found {}",
            4 * total,
            blob.len()
        )));
    }
    let mut floats = blob.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()));
    let mut take = |n: usize| -> Vec<f32> { floats.by_ref().take(n).collect() };
    let mut layers = Vec::new();
    for spec in layer_specs(&cfg)? {
        let mut layer = ConvLayer::<f32>::zeros(&spec);
        layer.kernel = take(layer.kernel.len());
        layer.bias = take(layer.bias.len());
        layer.slope = take(layer.slope.len());
        layers.push(layer);
    }
    let w = ModelWeights::from_layers(layers)?;
    w.check_shapes(&cfg)?;
    Ok((w, cfg))
}

/// Writes `bytes` to a sibling temp file, syncs it and renames it over `path`.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::invalid(format!("not a file path: {}", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    let result = (|| {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}

pub fn save_model(w: &ModelWeights, cfg: &ModelConfig, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &encode_model(w, cfg)?)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<(ModelWeights, ModelConfig)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes)
}
