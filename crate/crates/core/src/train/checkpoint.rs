//! Binary checkpoint: header, dims, then named row-major f32 tensor blocks.
//!
//! ```text
//! "GIMI-CKPT1" | u32 version | u64 × 7 dims | u32 block count
//! per block: u32 name length | name | u64 rows | u64 cols | f32 × rows·cols
//! ```
//! All integers and floats little-endian.

use std::fs;
use std::path::Path;

use crate::error::{Error, IoContext, Result};
use crate::scalar::Scalar;

use super::params::{ModelDims, ModelParams};

pub const CHECKPOINT_MAGIC: &[u8; 10] = b"GIMI-CKPT1";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn encode_checkpoint<T: Scalar>(dims: &ModelDims, params: &ModelParams<T>) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    for v in [dims.num_items, dims.d, dims.k, dims.l_rec, dims.l_time, dims.heads, dims.l_layer] {
        buf.extend_from_slice(&(v as u64).to_le_bytes());
    }
    let tensors = params.tensors();
    buf.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, m) in tensors {
        buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.extend_from_slice(&(m.rows() as u64).to_le_bytes());
        buf.extend_from_slice(&(m.cols() as u64).to_le_bytes());
        for &x in m.as_slice() {
            buf.extend_from_slice(&(x.to_f64_lossy() as f32).to_le_bytes());
        }
    }
    buf
}

pub fn write_checkpoint<T: Scalar>(path: &Path, dims: &ModelDims, params: &ModelParams<T>) -> Result<()> {
    fs::write(path, encode_checkpoint(dims, params)).with_path(path)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or(Error::Format {
            what: "checkpoint",
            reason: "unexpected end of file".into(),
        })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<usize> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().unwrap());
        usize::try_from(v).map_err(|_| bad(format!("size {v} out of range")))
    }
}

fn bad(reason: String) -> Error {
    Error::Format {
        what: "checkpoint",
        reason,
    }
}

pub fn decode_checkpoint<T: Scalar>(bytes: &[u8]) -> Result<(ModelDims, ModelParams<T>)> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(CHECKPOINT_MAGIC.len())? != CHECKPOINT_MAGIC {
        return Err(bad("bad magic".into()));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let dims = ModelDims {
        num_items: r.u64()?,
        d: r.u64()?,
        k: r.u64()?,
        l_rec: r.u64()?,
        l_time: r.u64()?,
        heads: r.u64()?,
        l_layer: r.u64()?,
    };
    if dims.d == 0 || dims.num_items == 0 || dims.l_layer > 1024 || dims.k > 1 << 16 {
        return Err(bad("implausible dimensions".into()));
    }
    let mut params = ModelParams::<T>::zeros(&dims);
    let count = r.u32()? as usize;
    let mut slots = params.tensors_mut();
    if count != slots.len() {
        return Err(bad(format!("expected {} tensors, found {count}", slots.len())));
    }
    for (expected, m) in slots.iter_mut() {
        let len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(len)?).map_err(|_| bad("tensor name is not UTF-8".into()))?;
        if name != expected {
            return Err(bad(format!("expected tensor {expected}, found {name}")));
        }
        let (rows, cols) = (r.u64()?, r.u64()?);
        if (rows, cols) != m.shape() {
            return Err(bad(format!("tensor {name} has shape {rows}x{cols}, expected {:?}", m.shape())));
        }
        let data = r.take(rows * cols * 4)?;
        for (dst, chunk) in m.as_mut_slice().iter_mut().zip(data.chunks_exact(4)) {
            *dst = T::of(f32::from_le_bytes(chunk.try_into().unwrap()) as f64);
        }
    }
    drop(slots);
    if r.pos != bytes.len() {
        return Err(bad("trailing bytes".into()));
    }
    Ok((dims, params))
}

pub fn read_checkpoint<T: Scalar>(path: &Path) -> Result<(ModelDims, ModelParams<T>)> {
    if !path.exists() {
        return Err(Error::MissingArtifact {
            path: path.to_path_buf(),
            hint: "run `gimirec train` first".into(),
        });
    }
    let bytes = fs::read(path).with_path(path)?;
    decode_checkpoint(&bytes)
}
