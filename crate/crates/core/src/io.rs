//! Cube container format and raw-file import.
//!
//! Layout (all integers little-endian):
//!
//! | bytes  | content                         |
//! |--------|---------------------------------|
//! | 0..4   | magic `NLT3`                    |
//! | 4..6   | version `u16` (1)               |
//! | 6..18  | `I1`, `I2`, `I3` as `u32`       |
//! | 18..20 | dtype `u16` (1 = `f64` LE)      |
//! | 20..   | values, first index fastest     |

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor3;

pub const MAGIC: [u8; 4] = *b"NLT3";
pub const VERSION: u16 = 1;
pub const DTYPE_F64: u16 = 1;
pub const HEADER_LEN: usize = 20;

fn format_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Format(msg.into()))
}

/// Serializes a cube; values are widened to `f64`.
pub fn encode<T: Scalar>(t: &Tensor3<T>) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * t.len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for d in t.dims() {
        let d = u32::try_from(d).map_err(|_| Error::Format(format!("dimension {d} exceeds u32")))?;
        out.extend_from_slice(&d.to_le_bytes());
    }
    out.extend_from_slice(&DTYPE_F64.to_le_bytes());
    for x in t.data() {
        out.extend_from_slice(&x.as_f64().to_le_bytes());
    }
    Ok(out)
}

pub fn decode<T: Scalar>(bytes: &[u8]) -> Result<Tensor3<T>> {
    if bytes.len() < HEADER_LEN {
        return format_err(format!("file too short for a header ({} bytes)", bytes.len()));
    }
    if bytes[0..4] != MAGIC {
        return format_err("bad magic, not an NLT3 cube");
    }
    let u16_at = |o: usize| u16::from_le_bytes([bytes[o], bytes[o + 1]]);
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes")) as usize;
    let version = u16_at(4);
    if version != VERSION {
        return format_err(format!("unsupported version {version}"));
    }
    let dims = [u32_at(6), u32_at(10), u32_at(14)];
    let dtype = u16_at(18);
    if dtype != DTYPE_F64 {
        return format_err(format!("unsupported dtype code {dtype}"));
    }
    let n = dims.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
    let expected = n.and_then(|n| n.checked_mul(8));
    if expected != Some(bytes.len() - HEADER_LEN) {
        return format_err(format!(
            "payload of {} bytes does not match dims {dims:?}",
            bytes.len() - HEADER_LEN
        ));
    }
    let data = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| T::of(f64::from_le_bytes(c.try_into().expect("8 bytes"))))
        .collect();
    Tensor3::from_vec(dims, data)
}

pub fn write_cube<T: Scalar>(path: impl AsRef<Path>, t: &Tensor3<T>) -> Result<()> {
    fs::write(path, encode(t)?)?;
    Ok(())
}

pub fn read_cube<T: Scalar>(path: impl AsRef<Path>) -> Result<Tensor3<T>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::Format(format!("cannot read {}: {e}", path.display())))?;
    decode(&bytes)
}

/// Element type of a headerless raw cube.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RawDtype {
    F64,
    F32,
    U16,
}

impl RawDtype {
    pub fn size(self) -> usize {
        match self {
            RawDtype::F64 => 8,
            RawDtype::F32 => 4,
            RawDtype::U16 => 2,
        }
    }
}

/// Parses little-endian raw values stored first index fastest.
pub fn decode_raw<T: Scalar>(bytes: &[u8], dims: [usize; 3], dtype: RawDtype) -> Result<Tensor3<T>> {
    let n = dims[0] * dims[1] * dims[2];
    if bytes.len() != n * dtype.size() {
        return format_err(format!(
            "raw file has {} bytes, dims {dims:?} of {dtype:?} need {}",
            bytes.len(),
            n * dtype.size()
        ));
    }
    let data = bytes
        .chunks_exact(dtype.size())
        .map(|c| {
            T::of(match dtype {
                RawDtype::F64 => f64::from_le_bytes(c.try_into().expect("8 bytes")),
                RawDtype::F32 => f64::from(f32::from_le_bytes(c.try_into().expect("4 bytes"))),
                RawDtype::U16 => f64::from(u16::from_le_bytes(c.try_into().expect("2 bytes"))),
            })
        })
        .collect();
    Tensor3::from_vec(dims, data)
}

pub fn import_raw<T: Scalar>(path: impl AsRef<Path>, dims: [usize; 3], dtype: RawDtype) -> Result<Tensor3<T>> {
    decode_raw(&fs::read(path)?, dims, dtype)
}

/// Per-cube min-max scaling onto `[0, 1]`. A constant cube maps to zeros.
pub fn normalize<T: Scalar>(t: &Tensor3<T>) -> Result<Tensor3<T>> {
    if !t.is_finite() {
        return Err(Error::Numerical("cannot normalize a cube with non-finite values".into()));
    }
    let lo = t.data().iter().copied().fold(T::infinity(), T::min);
    let hi = t.data().iter().copied().fold(T::neg_infinity(), T::max);
    let span = hi - lo;
    if span <= T::zero() {
        return Ok(Tensor3::zeros(t.dims()));
    }
    Ok(t.map(|x| (x - lo) / span))
}
