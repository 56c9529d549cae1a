//! Network checkpoints: the `MRLW` binary format.
//!
//! Layout (little-endian):
//!
//! ```text
//! magic "MRLW" | version u32 | n_dims u32 | dims u32[n_dims]
//! | params f32[product-per-layer]
//! | has_adam u8
//! | if 1: step u64 | lr f64 | beta1 f64 | beta2 f64 | eps f64
//!         | m f32[n_params] | v f32[n_params]
//! ```
//!
//! Parameters are stored in binary32; training keeps f64 internally and
//! narrows at this I/O boundary.

use super::adam::AdamState;
use super::mlp::Mlp;
use std::fs;
use std::io;
use std::path::Path;
use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"MRLW";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("bad magic bytes (not a checkpoint file)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),
    #[error("file truncated while reading {0}")]
    Truncated(&'static str),
    #[error("trailing bytes after checkpoint")]
    TrailingBytes,
    #[error("checkpoint has {got} layer dims, need at least 2")]
    BadDims { got: usize },
    #[error("checkpoint network shape {got:?} does not match the expected {expected:?}")]
    WrongShape {
        got: Vec<usize>,
        expected: Vec<usize>,
    },
}

/// Encodes a network (and optionally its optimizer state) to bytes.
pub fn to_bytes(net: &Mlp, adam: Option<&AdamState>) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(&MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(net.dims.len() as u32).to_le_bytes());
    for &d in &net.dims {
        buf.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for &p in &net.params {
        buf.extend_from_slice(&(p as f32).to_le_bytes());
    }
    match adam {
        None => buf.push(0),
        Some(a) => {
            buf.push(1);
            buf.extend_from_slice(&a.step.to_le_bytes());
            buf.extend_from_slice(&a.lr.to_le_bytes());
            buf.extend_from_slice(&a.beta1.to_le_bytes());
            buf.extend_from_slice(&a.beta2.to_le_bytes());
            buf.extend_from_slice(&a.eps.to_le_bytes());
            for &m in &a.m {
                buf.extend_from_slice(&(m as f32).to_le_bytes());
            }
            for &v in &a.v {
                buf.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
    }
    buf
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], CheckpointError> {
        if self.pos + n > self.bytes.len() {
            return Err(CheckpointError::Truncated(what));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &'static str) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &'static str) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f64(&mut self, what: &'static str) -> Result<f64, CheckpointError> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f32s_as_f64(&mut self, n: usize, what: &'static str) -> Result<Vec<f64>, CheckpointError> {
        let raw = self.take(n * 4, what)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect())
    }
}

/// Decodes a network (and optimizer state, if present) from bytes.
pub fn from_bytes(bytes: &[u8]) -> Result<(Mlp, Option<AdamState>), CheckpointError> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4, "magic")? != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = cur.u32("version")?;
    if version != FORMAT_VERSION {
        return Err(CheckpointError::UnsupportedVersion(version));
    }
    let n_dims = cur.u32("dim count")? as usize;
    if n_dims < 2 {
        return Err(CheckpointError::BadDims { got: n_dims });
    }
    let mut dims = Vec::with_capacity(n_dims);
    for _ in 0..n_dims {
        dims.push(cur.u32("dims")? as usize);
    }
    let n_params = Mlp::param_count_for(&dims);
    let params = cur.f32s_as_f64(n_params, "params")?;
    let adam = match cur.take(1, "adam flag")?[0] {
        0 => None,
        _ => {
            let step = cur.u64("adam step")?;
            let lr = cur.f64("adam lr")?;
            let beta1 = cur.f64("adam beta1")?;
            let beta2 = cur.f64("adam beta2")?;
            let eps = cur.f64("adam eps")?;
            let m = cur.f32s_as_f64(n_params, "adam m")?;
            let v = cur.f32s_as_f64(n_params, "adam v")?;
            Some(AdamState {
                m,
                v,
                step,
                lr,
                beta1,
                beta2,
                eps,
            })
        }
    };
    if cur.pos != bytes.len() {
        return Err(CheckpointError::TrailingBytes);
    }
    Ok((Mlp { dims, params }, adam))
}

pub fn save(net: &Mlp, adam: Option<&AdamState>, path: &Path) -> Result<(), CheckpointError> {
    fs::write(path, to_bytes(net, adam))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<(Mlp, Option<AdamState>), CheckpointError> {
    let bytes = fs::read(path)?;
    from_bytes(&bytes)
}
