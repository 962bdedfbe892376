//! Model bundle container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic            8 bytes  "LPFACEB\0"
//! format_version   u32
//! manifest_len     u64
//! manifest         TOML text: geometry, configuration, training metadata
//! payload_len      u64      byte count, a multiple of 8
//! payload          f64 array (IEEE-754 LE), in order:
//!                    mean (H), basis (U × H, vector by vector),
//!                    eigenvalues (U), scaling min (F), scaling max (F),
//!                    per layer: weights (out × in, row-major), biases (out)
//! checksum         SHA-256 of every preceding byte
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{FeatureScaling, Mode, ModelBundle, SplitSpec, TrainingMeta};
use crate::eigenspace::Eigenspace;
use crate::error::{Error, Result};
use crate::logpolar::LogPolarConfig;
use crate::mlp::{Hyperparams, LayerParams, Network, ParamSet};

const MAGIC: &[u8; 8] = b"LPFACEB\0";
pub const FORMAT_VERSION: u32 = 1;
const CHECKSUM_LEN: usize = 32;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    format_version: u32,
    mode: Mode,
    input_width: usize,
    input_height: usize,
    dim: usize,
    rank: usize,
    feature_width: usize,
    layer_sizes: Vec<usize>,
    class_names: Vec<String>,
    logpolar: LogPolarConfig,
    hyper: Hyperparams,
    split: SplitSpec,
    meta: TrainingMeta,
}

/// Serializes `bundle` into the container format.
pub fn write_bundle(bundle: &ModelBundle) -> Vec<u8> {
    let space = &bundle.eigenspace;
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        mode: bundle.mode,
        input_width: bundle.input_dims.0,
        input_height: bundle.input_dims.1,
        dim: space.dim(),
        rank: space.rank(),
        feature_width: space.feature_width(),
        layer_sizes: bundle.network.sizes().to_vec(),
        class_names: bundle.class_names.clone(),
        logpolar: bundle.logpolar,
        hyper: bundle.hyper,
        split: bundle.split,
        meta: bundle.meta.clone(),
    };
    let text = toml::to_string(&manifest).expect("manifest serializes");

    let mut payload: Vec<f64> = Vec::new();
    payload.extend_from_slice(space.mean());
    for v in space.basis() {
        payload.extend_from_slice(v);
    }
    payload.extend_from_slice(space.eigenvalues());
    payload.extend_from_slice(&bundle.scaling.min);
    payload.extend_from_slice(&bundle.scaling.max);
    for layer in &bundle.network.params().layers {
        payload.extend_from_slice(&layer.weights);
        payload.extend_from_slice(&layer.biases);
    }

    let mut out = Vec::with_capacity(8 + 4 + 8 + text.len() + 8 + payload.len() * 8 + CHECKSUM_LEN);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(text.len() as u64).to_le_bytes());
    out.extend_from_slice(text.as_bytes());
    out.extend_from_slice(&((payload.len() * 8) as u64).to_le_bytes());
    for v in payload {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
}

fn malformed(msg: impl Into<String>) -> Error {
    Error::MalformedBundle(msg.into())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| malformed(format!("unexpected end of data at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }
}

struct Floats<'a> {
    data: &'a [u8],
    pos: usize,
}

impl Floats<'_> {
    fn take(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = n
            .checked_mul(8)
            .and_then(|b| self.pos.checked_add(b))
            .filter(|&end| end <= self.data.len())
            .ok_or_else(|| malformed("payload is shorter than the manifest implies"))?;
        let out = self.data[self.pos..bytes]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        self.pos = bytes;
        Ok(out)
    }
}

/// Parses a container produced by [`write_bundle`].
pub fn read_bundle(bytes: &[u8]) -> Result<ModelBundle> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(MAGIC.len()).ok() != Some(MAGIC.as_slice()) {
        return Err(malformed("not a model bundle (bad magic)"));
    }
    let version = u32::from_le_bytes(cur.take(4)?.try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let manifest_len =
        usize::try_from(cur.u64()?).map_err(|_| malformed("manifest length overflows"))?;
    let manifest_bytes = cur.take(manifest_len)?;
    let payload_len =
        usize::try_from(cur.u64()?).map_err(|_| malformed("payload length overflows"))?;
    if payload_len % 8 != 0 {
        return Err(malformed("payload length is not a multiple of 8"));
    }
    let payload = cur.take(payload_len)?;
    let body_end = cur.pos;
    let checksum = cur.take(CHECKSUM_LEN)?;
    if cur.pos != bytes.len() {
        return Err(malformed(format!(
            "{} trailing bytes",
            bytes.len() - cur.pos
        )));
    }
    if Sha256::digest(&bytes[..body_end]).as_slice() != checksum {
        return Err(Error::ChecksumMismatch);
    }

    let text =
        std::str::from_utf8(manifest_bytes).map_err(|_| malformed("manifest is not UTF-8"))?;
    let m: Manifest = toml::from_str(text).map_err(|e| malformed(format!("manifest: {e}")))?;
    if m.format_version != version {
        return Err(malformed("manifest version disagrees with the header"));
    }
    if m.layer_sizes.len() < 2 {
        return Err(malformed("network needs at least two layers"));
    }

    let mut f = Floats {
        data: payload,
        pos: 0,
    };
    let mean = f.take(m.dim)?;
    let basis = (0..m.rank)
        .map(|_| f.take(m.dim))
        .collect::<Result<Vec<_>>>()?;
    let eigenvalues = f.take(m.rank)?;
    let scaling = FeatureScaling {
        min: f.take(m.feature_width)?,
        max: f.take(m.feature_width)?,
    };
    let layers = m
        .layer_sizes
        .windows(2)
        .map(|w| {
            Ok(LayerParams {
                weights: f.take(w[0] * w[1])?,
                biases: f.take(w[1])?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if f.pos != payload.len() {
        return Err(malformed("payload is longer than the manifest implies"));
    }

    let eigenspace = Eigenspace::from_parts(mean, basis, eigenvalues, m.feature_width)
        .map_err(|e| malformed(e.to_string()))?;
    let network = Network::from_params(&m.layer_sizes, ParamSet { layers })
        .map_err(|e| malformed(e.to_string()))?;
    let bundle = ModelBundle {
        mode: m.mode,
        logpolar: m.logpolar,
        input_dims: (m.input_width, m.input_height),
        eigenspace,
        scaling,
        network,
        hyper: m.hyper,
        split: m.split,
        class_names: m.class_names,
        meta: m.meta,
    };
    bundle.validate().map_err(|e| malformed(e.to_string()))?;
    Ok(bundle)
}

pub fn save_bundle(bundle: &ModelBundle, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, write_bundle(bundle))?;
    Ok(())
}

pub fn load_bundle(path: impl AsRef<Path>) -> Result<ModelBundle> {
    read_bundle(&std::fs::read(path)?)
}
