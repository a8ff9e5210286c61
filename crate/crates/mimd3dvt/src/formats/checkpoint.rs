//! MWT1 weight checkpoints.
//!
//! Layout, little-endian: magic `MWT1`, entry count u32, then per entry the
//! name (u32 length + UTF-8), rank u32, dims (u32 each) and the u64 element
//! offset of its data; after the index, every tensor's f64 values in entry
//! order.

use std::path::Path;

use mimd_core::model::{shape_audit, ModelConfig, ModelParams};
use mimd_core::Tensor;

use super::FormatError;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"MWT1";

pub fn to_bytes(params: &ModelParams) -> Vec<u8> {
    let mut index = Vec::new();
    let mut data = Vec::new();
    let mut count = 0u32;
    let mut offset = 0u64;
    params.visit(|name, t| {
        count += 1;
        index.extend_from_slice(&(name.len() as u32).to_le_bytes());
        index.extend_from_slice(name.as_bytes());
        index.extend_from_slice(&(t.rank() as u32).to_le_bytes());
        for &d in t.shape() {
            index.extend_from_slice(&(d as u32).to_le_bytes());
        }
        index.extend_from_slice(&offset.to_le_bytes());
        offset += t.len() as u64;
        for v in t.data() {
            data.extend_from_slice(&v.to_le_bytes());
        }
    });
    let mut out = Vec::with_capacity(8 + index.len() + data.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&count.to_le_bytes());
    out.extend_from_slice(&index);
    out.extend_from_slice(&data);
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], FormatError> {
        let end = self.pos.checked_add(n).ok_or(FormatError::DimOverflow)?;
        let b = self.bytes.get(self.pos..end).ok_or(FormatError::TruncatedHeader)?;
        self.pos = end;
        Ok(b)
    }

    fn u32(&mut self) -> std::result::Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("four bytes")))
    }

    fn u64(&mut self) -> std::result::Result<u64, FormatError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("eight bytes")))
    }
}

/// Named tensors in file order.
pub fn decode(bytes: &[u8]) -> std::result::Result<Vec<(String, Tensor)>, FormatError> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(FormatError::BadMagic);
    }
    let mut c = Cursor { bytes, pos: 4 };
    let count = c.u32()? as usize;
    let mut entries = Vec::with_capacity(count.min(4096));
    for _ in 0..count {
        let len = c.u32()? as usize;
        let name = std::str::from_utf8(c.take(len)?)
            .map_err(|_| FormatError::Invalid("tensor name is not UTF-8".into()))?
            .to_string();
        let rank = c.u32()? as usize;
        if rank == 0 || rank > 8 {
            return Err(FormatError::Rank(rank));
        }
        let dims = (0..rank)
            .map(|_| c.u32().map(|d| d as usize))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let offset = c.u64()?;
        entries.push((name, dims, offset));
    }
    let data = &bytes[c.pos..];
    let mut expected_offset = 0u64;
    let mut out = Vec::with_capacity(entries.len());
    for (name, dims, offset) in entries {
        if offset != expected_offset {
            return Err(FormatError::Invalid(format!("{name}: offset {offset}, expected {expected_offset}")));
        }
        let n = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or(FormatError::DimOverflow)?;
        let start = (offset as usize).checked_mul(8).ok_or(FormatError::DimOverflow)?;
        let end = start.checked_add(n * 8).ok_or(FormatError::DimOverflow)?;
        let raw = data.get(start..end).ok_or(FormatError::PayloadLength {
            expected: end,
            actual: data.len(),
        })?;
        let values = raw
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("eight bytes")))
            .collect();
        let t = Tensor::new(dims, values).map_err(|e| FormatError::Invalid(e.to_string()))?;
        expected_offset += n as u64;
        out.push((name, t));
    }
    if data.len() as u64 != expected_offset * 8 {
        return Err(FormatError::PayloadLength {
            expected: (expected_offset * 8) as usize,
            actual: data.len(),
        });
    }
    Ok(out)
}

/// Rebuilds parameters for `cfg`, requiring every name and shape to match.
pub fn from_bytes(cfg: &ModelConfig, bytes: &[u8]) -> std::result::Result<ModelParams, FormatError> {
    let entries = decode(bytes)?;
    let mut params = ModelParams::zeros(cfg).map_err(|e| FormatError::Invalid(e.to_string()))?;
    let names = params.names();
    if names.len() != entries.len() {
        return Err(FormatError::Invalid(format!(
            "checkpoint has {} tensors, model expects {}",
            entries.len(),
            names.len()
        )));
    }
    let mut problem = None;
    let mut i = 0;
    params.visit_mut(|name, t| {
        let (file_name, value) = &entries[i];
        i += 1;
        if problem.is_some() {
            return;
        }
        if file_name != name || value.shape() != t.shape() {
            problem = Some(format!("{file_name} {:?} does not match {name} {:?}", value.shape(), t.shape()));
            return;
        }
        *t = value.clone();
    });
    if let Some(p) = problem {
        return Err(FormatError::Invalid(p));
    }
    shape_audit(cfg, &params).map_err(|e| FormatError::Invalid(e.to_string()))?;
    Ok(params)
}

pub fn save(params: &ModelParams, path: impl AsRef<Path>) -> Result<()> {
    super::write_file(path, &to_bytes(params))
}

pub fn load(cfg: &ModelConfig, path: impl AsRef<Path>) -> Result<ModelParams> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(Error::io(path))?;
    from_bytes(cfg, &bytes).map_err(Error::format(path))
}
