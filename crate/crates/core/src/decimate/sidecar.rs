//! Binary sidecar holding the `replace` / `mapping` tensors.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic      4 bytes  "MFCL"
//! version    u32      1
//! n_in       u64      input vertex count
//! n_out      u64      output vertex count
//! replace    n_in x i64
//! mapping    n_in x i64   (-1 = degenerated)
//! ```

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::decimate::DecimationResult;
use crate::{Error, Result};

pub const SIDECAR_MAGIC: &[u8; 4] = b"MFCL";
pub const SIDECAR_VERSION: u32 = 1;

pub fn write_sidecar(path: impl AsRef<Path>, result: &DecimationResult) -> Result<()> {
    let path = path.as_ref();
    let ctx = || format!("writing {}", path.display());
    let n_in = result.replace.len();
    let mut buf = Vec::with_capacity(24 + 16 * n_in);
    buf.extend_from_slice(SIDECAR_MAGIC);
    buf.extend_from_slice(&SIDECAR_VERSION.to_le_bytes());
    buf.extend_from_slice(&(n_in as u64).to_le_bytes());
    buf.extend_from_slice(&(result.output_vertex_count() as u64).to_le_bytes());
    for &r in &result.replace {
        buf.extend_from_slice(&(r as i64).to_le_bytes());
    }
    for &m in &result.mapping {
        buf.extend_from_slice(&m.to_le_bytes());
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(ctx(), e))?;
    f.write_all(&buf).map_err(|e| Error::io(ctx(), e))
}

/// Returns `(replace, mapping, output_vertex_count)`.
pub fn read_sidecar(path: impl AsRef<Path>) -> Result<(Vec<usize>, Vec<i64>, usize)> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let bad = |location: usize, message: &str| Error::Parse {
        path: path.to_path_buf(),
        location: format!("byte {location}"),
        message: message.into(),
    };
    if bytes.len() < 24 || &bytes[..4] != SIDECAR_MAGIC {
        return Err(bad(0, "not a cluster sidecar"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let version = u32_at(4);
    if version != SIDECAR_VERSION {
        return Err(bad(4, &format!("unsupported version {version}")));
    }
    let n_in = u64_at(8) as usize;
    let n_out = u64_at(16) as usize;
    if bytes.len() != 24 + 16 * n_in {
        return Err(bad(bytes.len(), "truncated or oversized tensor payload"));
    }
    let i64_at = |o: usize| i64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let mut replace = Vec::with_capacity(n_in);
    for k in 0..n_in {
        let r = i64_at(24 + 8 * k);
        if r < 0 || r as usize >= n_out {
            return Err(bad(24 + 8 * k, "replace entry out of range"));
        }
        replace.push(r as usize);
    }
    let mapping = (0..n_in).map(|k| i64_at(24 + 8 * (n_in + k))).collect();
    Ok((replace, mapping, n_out))
}
