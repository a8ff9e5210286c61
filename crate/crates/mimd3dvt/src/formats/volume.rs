//! MIV1 container for volumes and masks.
//!
//! Layout, all little-endian: magic `MIV1`, version u32 (1), ndim u32,
//! `ndim` u32 dims, dtype u32 (1 = f32, 2 = u8), then the row-major payload.

use std::fs;
use std::path::Path;

use mimd_core::data::{RoiMask, Volume};

use super::FormatError;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"MIV1";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F32 = 1,
    U8 = 2,
}

impl Dtype {
    fn size(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::U8 => 1,
        }
    }
}

/// A decoded container before it is interpreted as a volume or mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub dims: Vec<usize>,
    pub dtype: Dtype,
    pub payload: Vec<u8>,
}

pub fn encode(dims: &[usize], dtype: Dtype, payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 4 * dims.len() + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(dims.len() as u32).to_le_bytes());
    for &d in dims {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    out.extend_from_slice(&(dtype as u32).to_le_bytes());
    out.extend_from_slice(payload);
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn u32(&mut self) -> std::result::Result<u32, FormatError> {
        let end = self.pos + 4;
        let b = self.bytes.get(self.pos..end).ok_or(FormatError::TruncatedHeader)?;
        self.pos = end;
        Ok(u32::from_le_bytes(b.try_into().expect("four bytes")))
    }
}

pub fn decode(bytes: &[u8]) -> std::result::Result<Container, FormatError> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(FormatError::BadMagic);
    }
    let mut r = Reader { bytes, pos: 4 };
    let version = r.u32()?;
    if version != VERSION {
        return Err(FormatError::UnsupportedVersion(version));
    }
    let ndim = r.u32()? as usize;
    if ndim == 0 || ndim > 8 {
        return Err(FormatError::Rank(ndim));
    }
    let dims = (0..ndim)
        .map(|_| r.u32().map(|d| d as usize))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let dtype = match r.u32()? {
        1 => Dtype::F32,
        2 => Dtype::U8,
        code => return Err(FormatError::UnknownDtype(code)),
    };
    let expected = dims
        .iter()
        .try_fold(dtype.size(), |acc, &d| acc.checked_mul(d))
        .ok_or(FormatError::DimOverflow)?;
    let payload = &bytes[r.pos..];
    if payload.len() != expected {
        return Err(FormatError::PayloadLength {
            expected,
            actual: payload.len(),
        });
    }
    Ok(Container {
        dims,
        dtype,
        payload: payload.to_vec(),
    })
}

fn dims3(c: &Container) -> std::result::Result<[usize; 3], FormatError> {
    c.dims.as_slice().try_into().map_err(|_| FormatError::Rank(c.dims.len()))
}

pub fn volume_to_bytes(v: &Volume) -> Vec<u8> {
    let payload: Vec<u8> = v.voxels().iter().flat_map(|x| x.to_le_bytes()).collect();
    encode(&v.dims(), Dtype::F32, &payload)
}

pub fn volume_from_bytes(bytes: &[u8]) -> std::result::Result<Volume, FormatError> {
    let c = decode(bytes)?;
    if c.dtype != Dtype::F32 {
        return Err(FormatError::WrongDtype { expected: "f32" });
    }
    let dims = dims3(&c)?;
    let voxels = c
        .payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().expect("four bytes")))
        .collect();
    Volume::new(dims, voxels).map_err(|e| FormatError::Invalid(e.to_string()))
}

pub fn mask_to_bytes(m: &RoiMask) -> Vec<u8> {
    encode(&m.dims(), Dtype::U8, m.voxels())
}

pub fn mask_from_bytes(name: &str, bytes: &[u8]) -> std::result::Result<RoiMask, FormatError> {
    let c = decode(bytes)?;
    if c.dtype != Dtype::U8 {
        return Err(FormatError::WrongDtype { expected: "u8" });
    }
    let dims = dims3(&c)?;
    RoiMask::new(name, dims, c.payload).map_err(|e| FormatError::Invalid(e.to_string()))
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(Error::io(path))
}

pub fn load_volume(path: impl AsRef<Path>) -> Result<Volume> {
    let path = path.as_ref();
    volume_from_bytes(&read(path)?).map_err(Error::format(path))
}

pub fn save_volume(v: &Volume, path: impl AsRef<Path>) -> Result<()> {
    super::write_file(path, &volume_to_bytes(v))
}

pub fn load_mask(name: &str, path: impl AsRef<Path>) -> Result<RoiMask> {
    let path = path.as_ref();
    mask_from_bytes(name, &read(path)?).map_err(Error::format(path))
}

pub fn save_mask(m: &RoiMask, path: impl AsRef<Path>) -> Result<()> {
    super::write_file(path, &mask_to_bytes(m))
}
