//! Binary checkpoint layout, all integers and floats little-endian:
//!
//! ```text
//! magic        8 bytes  "HOWCKPT\0"
//! version      u32      1
//! input_size   u32
//! channels     u32      input channels
//! conv         3 × u32
//! coords       u32      1 if coordinate planes are appended, else 0
//! hidden       2 × u32
//! tensors      u32      count
//! per tensor:  u32 rank, rank × u32 dims
//! data         f64 values of every tensor in table order
//! ```

use std::io::{Read, Write};
use std::path::Path;

use super::model::{ModelConfig, ModelParams};
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: [u8; 8] = *b"HOWCKPT\0";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn encode_checkpoint(params: &ModelParams) -> Vec<u8> {
    let c = &params.config;
    let mut out = CHECKPOINT_MAGIC.to_vec();
    let u = |v: usize, out: &mut Vec<u8>| out.extend_from_slice(&(v as u32).to_le_bytes());
    u(CHECKPOINT_VERSION as usize, &mut out);
    for v in [c.input_size, c.input_channels] {
        u(v, &mut out);
    }
    for v in c.conv_channels.iter() {
        u(*v, &mut out);
    }
    u(c.coord_channels as usize, &mut out);
    for v in c.head_hidden.iter() {
        u(*v, &mut out);
    }
    u(params.tensors.len(), &mut out);
    for t in &params.tensors {
        u(t.shape.len(), &mut out);
        for &d in &t.shape {
            u(d, &mut out);
        }
    }
    for t in &params.tensors {
        for v in &t.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::InvalidConfig("checkpoint is truncated".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<ModelParams> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != CHECKPOINT_MAGIC {
        return Err(Error::InvalidConfig("not a checkpoint file".into()));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION as usize {
        return Err(Error::InvalidConfig(format!("unsupported checkpoint version {version}")));
    }
    let config = ModelConfig {
        input_size: r.u32()?,
        input_channels: r.u32()?,
        conv_channels: [r.u32()?, r.u32()?, r.u32()?],
        coord_channels: match r.u32()? {
            0 => false,
            1 => true,
            v => return Err(Error::InvalidConfig(format!("bad coordinate flag {v}"))),
        },
        head_hidden: [r.u32()?, r.u32()?],
    };
    config.validate()?;
    let expected = config.shapes();
    let count = r.u32()?;
    if count != expected.len() {
        return Err(Error::ShapeMismatch(format!("{count} tensors, expected {}", expected.len())));
    }
    for want in &expected {
        let rank = r.u32()?;
        let dims = (0..rank).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
        if &dims != want {
            return Err(Error::ShapeMismatch(format!("tensor {dims:?}, expected {want:?}")));
        }
    }
    let tensors = expected
        .iter()
        .map(|shape| {
            let n: usize = shape.iter().product();
            let raw = r.take(n * 8)?;
            let data = raw
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
                .collect();
            Tensor::from_vec(shape, data)
        })
        .collect::<Result<Vec<_>>>()?;
    if r.pos != bytes.len() {
        return Err(Error::InvalidConfig("trailing bytes after checkpoint data".into()));
    }
    Ok(ModelParams { config, tensors })
}

pub fn save_checkpoint(params: &ModelParams, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&encode_checkpoint(params)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<ModelParams> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}
