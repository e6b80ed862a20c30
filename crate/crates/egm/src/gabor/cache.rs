//! Binary jet cache.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! 0   4  magic "EGJC"
//! 4   2  format version (u16)
//! 6   8  f0 (f64)
//! 14  8  mu (f64)
//! 22  8  sigma (f64)
//! 30  4  orientations N_d (u32)
//! 34  4  frequency levels (u32)
//! 38  1  slant flag (u8, 1 = jets extracted with per-image deslant)
//! 39  8  image count (u64)
//! 47  8  image-set fingerprint (u64)
//! 55  .. per image: 28 x 28 x (levels * N_d) f64, row-major, level-major
//! ```

use std::path::Path;

use sha2::{Digest, Sha256};

use super::{GaborParams, JetField};
use crate::error::{Error, Result};
use crate::mnist::{Image, CANVAS};

pub const MAGIC: &[u8; 4] = b"EGJC";
pub const VERSION: u16 = 2;
pub const HEADER_LEN: usize = 55;

/// Everything a cache file must agree on before its jets are trusted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CacheKey {
    pub params: GaborParams,
    pub deslant: bool,
    pub fingerprint: u64,
}

/// Digest of the pixel bytes of an ordered image set.
pub fn fingerprint(images: &[Image]) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update((images.len() as u64).to_le_bytes());
    for im in images {
        hasher.update(im.to_bytes());
    }
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

fn header(key: &CacheKey, count: usize) -> Vec<u8> {
    let p = &key.params;
    let mut out = Vec::with_capacity(HEADER_LEN);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&p.f0.to_le_bytes());
    out.extend_from_slice(&p.mu.to_le_bytes());
    out.extend_from_slice(&p.sigma.to_le_bytes());
    out.extend_from_slice(&(p.orientations as u32).to_le_bytes());
    out.extend_from_slice(&(p.num_levels as u32).to_le_bytes());
    out.push(u8::from(key.deslant));
    out.extend_from_slice(&(count as u64).to_le_bytes());
    out.extend_from_slice(&key.fingerprint.to_le_bytes());
    debug_assert_eq!(out.len(), HEADER_LEN);
    out
}

pub fn encode(key: &CacheKey, fields: &[JetField]) -> Result<Vec<u8>> {
    let dim = key.params.jet_len();
    let per_image = CANVAS * CANVAS * dim;
    let mut out = header(key, fields.len());
    out.reserve(fields.len() * per_image * 8);
    for f in fields {
        if f.width() != CANVAS || f.height() != CANVAS || f.dim() != dim {
            return Err(Error::Argument(format!(
                "cannot cache a {}x{}x{} field under {dim}-component params",
                f.width(),
                f.height(),
                f.dim()
            )));
        }
        for v in f.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

/// Decodes a cache, rejecting it unless the header matches `key` exactly.
pub fn decode(bytes: &[u8], key: &CacheKey) -> Result<Vec<JetField>> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::CacheInvalid(format!(
            "{} bytes is shorter than the header",
            bytes.len()
        )));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::CacheInvalid("bad magic".into()));
    }
    let count = u64::from_le_bytes(bytes[39..47].try_into().expect("8 bytes")) as usize;
    let expected_header = header(key, count);
    if bytes[..HEADER_LEN] != expected_header[..] {
        return Err(Error::CacheInvalid(
            "header does not match requested parameters".into(),
        ));
    }
    let dim = key.params.jet_len();
    let per_image = CANVAS * CANVAS * dim;
    let expected = count
        .checked_mul(per_image * 8)
        .and_then(|n| n.checked_add(HEADER_LEN));
    if expected != Some(bytes.len()) {
        return Err(Error::CacheInvalid(format!(
            "{count} images do not fit in {} bytes",
            bytes.len()
        )));
    }
    bytes[HEADER_LEN..]
        .chunks_exact(per_image * 8)
        .map(|chunk| {
            let data = chunk
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
                .collect();
            JetField::from_raw(CANVAS, CANVAS, dim, data)
        })
        .collect()
}

pub fn write(path: &Path, key: &CacheKey, fields: &[JetField]) -> Result<()> {
    let bytes = encode(key, fields)?;
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let tmp = path.with_extension("egjc.tmp");
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn read(path: &Path, key: &CacheKey) -> Result<Vec<JetField>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, key)
}
