//! Flat binary checkpoint.
//!
//! ```text
//! magic      8 bytes  "KANSPOT\0"
//! version    u32 LE   (1)
//! config     u32 LE length + UTF-8 `key=value` lines (VariantConfig)
//! n_params   u32 LE
//! per parameter, in model order:
//!   name     u32 LE length + UTF-8
//!   rank     u32 LE
//!   dims     rank × u64 LE
//!   values   numel × f64 LE
//! ```
//!
//! All integers and reals are little-endian; values are stored as 64-bit
//! reals regardless of the model's scalar type.

use std::io::{Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Model, VariantConfig};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"KANSPOT\0";
const VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len());
    out.extend_from_slice(s.as_bytes());
}

/// Serialises `model` into the checkpoint byte layout.
pub fn write_checkpoint<T: Scalar>(model: &Model<T>, mut sink: impl Write) -> std::io::Result<()> {
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    put_u32(&mut out, VERSION as usize);
    put_str(&mut out, &model.config().to_text());
    let params = model.params();
    put_u32(&mut out, params.len());
    for p in params {
        put_str(&mut out, p.name());
        put_u32(&mut out, p.tensor.shape().len());
        for &d in p.tensor.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in p.tensor.data() {
            out.extend_from_slice(&v.as_f64().to_le_bytes());
        }
    }
    sink.write_all(&out)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::format("checkpoint", format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }

    fn u64(&mut self) -> Result<usize> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")) as usize)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()?;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| Error::format("checkpoint", "non-UTF-8 string"))
    }
}

/// Parses a checkpoint and rebuilds the model it describes.
pub fn read_checkpoint<T: Scalar>(mut source: impl Read) -> Result<Model<T>> {
    let mut buf = Vec::new();
    source
        .read_to_end(&mut buf)
        .map_err(|e| Error::format("checkpoint", e.to_string()))?;
    let mut cur = Cursor { buf: &buf, pos: 0 };
    if cur.take(8)? != CHECKPOINT_MAGIC {
        return Err(Error::format("checkpoint", "bad magic"));
    }
    let version = cur.u32()?;
    if version != VERSION as usize {
        return Err(Error::format("checkpoint", format!("unsupported version {version}")));
    }
    let cfg = VariantConfig::from_text(&cur.string()?)?;
    let mut model = Model::<T>::new(&cfg, &mut ChaCha8Rng::seed_from_u64(0))?;
    let n = cur.u32()?;
    let mut params = model.params_mut();
    if n != params.len() {
        return Err(Error::format(
            "checkpoint",
            format!("{n} parameters stored, model has {}", params.len()),
        ));
    }
    for p in params.iter_mut() {
        let name = cur.string()?;
        if name != p.name() {
            return Err(Error::format(
                "checkpoint",
                format!("expected parameter `{}`, found `{name}`", p.name()),
            ));
        }
        let rank = cur.u32()?;
        let dims = (0..rank).map(|_| cur.u64()).collect::<Result<Vec<_>>>()?;
        if dims != p.tensor.shape() {
            return Err(Error::format(
                "checkpoint",
                format!("`{name}` has shape {dims:?}, expected {:?}", p.tensor.shape()),
            ));
        }
        for v in p.tensor.data_mut() {
            *v = T::of(cur.f64()?);
        }
    }
    if cur.pos != buf.len() {
        return Err(Error::format("checkpoint", "trailing bytes"));
    }
    Ok(model)
}

pub fn save_checkpoint<T: Scalar>(model: &Model<T>, path: &Path) -> Result<()> {
    let mut bytes = Vec::new();
    write_checkpoint(model, &mut bytes).map_err(|e| Error::io(path, e))?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<Model<T>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(std::io::BufReader::new(file))
}
