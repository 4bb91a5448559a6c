//! Flat binary checkpoint for convolution weights and mixture parameters.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic        4 bytes  "MFCK"
//! version      u32      1
//! components   u32      mixture components T
//! in_channels  u32      C_in
//! multiplier   u32      λ of the first convolution
//! flags        u32      bit 0: means trainable, bit 1: sigmas trainable
//! array_count  u32
//! per array:   u32 name length, name (UTF-8), u32 rank, rank x u64 dims,
//!              prod(dims) x f64 values
//! ```

use std::fs;
use std::path::Path;

use crate::conv::{DepthwiseKernel, SphereGmm, VertexToVertex};
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"MFCK";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct NamedArray {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub components: u32,
    pub in_channels: u32,
    pub multiplier: u32,
    pub train_means: bool,
    pub train_sigmas: bool,
    pub arrays: Vec<NamedArray>,
}

impl Checkpoint {
    pub fn from_vertex2vertex(layer: &VertexToVertex<f64>) -> Self {
        let fk = &layer.facet_kernel;
        let vk = &layer.vertex_kernel;
        let t = layer.gmm.components();
        let arrays = vec![
            NamedArray {
                name: "facet_kernel".into(),
                shape: vec![3, fk.channels(), fk.multiplier()],
                data: fk.as_slice().to_vec(),
            },
            NamedArray {
                name: "vertex_kernel".into(),
                shape: vec![t, vk.channels(), vk.multiplier()],
                data: vk.as_slice().to_vec(),
            },
            NamedArray {
                name: "gmm_means".into(),
                shape: vec![t, 3],
                data: layer.gmm.means().iter().flatten().copied().collect(),
            },
            NamedArray {
                name: "gmm_sigmas".into(),
                shape: vec![t],
                data: layer.gmm.sigmas().to_vec(),
            },
        ];
        Self {
            components: t as u32,
            in_channels: fk.channels() as u32,
            multiplier: fk.multiplier() as u32,
            train_means: layer.gmm.train_means,
            train_sigmas: layer.gmm.train_sigmas,
            arrays,
        }
    }

    pub fn get(&self, name: &str) -> Option<&NamedArray> {
        self.arrays.iter().find(|a| a.name == name)
    }

    pub fn to_vertex2vertex(&self) -> Result<VertexToVertex<f64>> {
        let need = |name: &str, rank: usize| -> Result<&NamedArray> {
            let a = self
                .get(name)
                .ok_or_else(|| Error::shape(format!("checkpoint has no array {name:?}")))?;
            if a.shape.len() != rank {
                return Err(Error::shape(format!("array {name:?} has rank {}, expected {rank}", a.shape.len())));
            }
            Ok(a)
        };
        let fk = need("facet_kernel", 3)?;
        let vk = need("vertex_kernel", 3)?;
        let means = need("gmm_means", 2)?;
        let sigmas = need("gmm_sigmas", 1)?;
        let facet_kernel = DepthwiseKernel::new(fk.shape[0], fk.shape[1], fk.shape[2], fk.data.clone())?;
        let vertex_kernel = DepthwiseKernel::new(vk.shape[0], vk.shape[1], vk.shape[2], vk.data.clone())?;
        let mut gmm = SphereGmm::new(
            means.data.chunks_exact(3).map(|m| [m[0], m[1], m[2]]).collect(),
            sigmas.data.clone(),
        )?;
        gmm.train_means = self.train_means;
        gmm.train_sigmas = self.train_sigmas;
        if facet_kernel.channels() != self.in_channels as usize
            || facet_kernel.multiplier() != self.multiplier as usize
            || gmm.components() != self.components as usize
        {
            return Err(Error::shape("checkpoint header disagrees with its arrays"));
        }
        VertexToVertex::new(facet_kernel, vertex_kernel, gmm)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        buf.extend_from_slice(CHECKPOINT_MAGIC);
        let flags = u32::from(self.train_means) | (u32::from(self.train_sigmas) << 1);
        for v in [
            CHECKPOINT_VERSION,
            self.components,
            self.in_channels,
            self.multiplier,
            flags,
            self.arrays.len() as u32,
        ] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        for a in &self.arrays {
            buf.extend_from_slice(&(a.name.len() as u32).to_le_bytes());
            buf.extend_from_slice(a.name.as_bytes());
            buf.extend_from_slice(&(a.shape.len() as u32).to_le_bytes());
            for &d in &a.shape {
                buf.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for &x in &a.data {
                buf.extend_from_slice(&x.to_le_bytes());
            }
        }
        buf
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let mut r = ByteReader { bytes, pos: 0, path };
        if r.take(4)? != CHECKPOINT_MAGIC {
            return Err(r.error(0, "not a checkpoint"));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(r.error(4, &format!("unsupported version {version}")));
        }
        let components = r.u32()?;
        let in_channels = r.u32()?;
        let multiplier = r.u32()?;
        let flags = r.u32()?;
        let count = r.u32()?;
        let mut arrays = Vec::new();
        for _ in 0..count {
            let len = r.u32()? as usize;
            let at = r.pos;
            let name = String::from_utf8(r.take(len)?.to_vec()).map_err(|_| r.error(at, "array name is not UTF-8"))?;
            let rank = r.u32()? as usize;
            let shape = (0..rank).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let n = shape
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .filter(|&n| n <= bytes.len() / 8)
                .ok_or_else(|| r.error(r.pos, "array shape exceeds the file size"))?;
            let data = (0..n).map(|_| r.u64().map(f64::from_bits)).collect::<Result<Vec<_>>>()?;
            arrays.push(NamedArray { name, shape, data });
        }
        if r.pos != bytes.len() {
            return Err(r.error(r.pos, "trailing bytes after the last array"));
        }
        Ok(Self {
            components,
            in_channels,
            multiplier,
            train_means: flags & 1 != 0,
            train_sigmas: flags & 2 != 0,
            arrays,
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::from_bytes(&bytes, path)
    }
}

struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl ByteReader<'_> {
    fn error(&self, at: usize, message: &str) -> Error {
        Error::Parse {
            path: self.path.to_path_buf(),
            location: format!("byte {at}"),
            message: message.into(),
        }
    }

    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(self.error(self.pos, "unexpected end of file"));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut gmm = SphereGmm::with_components(18).unwrap();
        gmm.train_means = true;
        let layer = VertexToVertex::new(
            DepthwiseKernel::random(3, 4, 2, &mut rng).unwrap(),
            DepthwiseKernel::random(18, 8, 1, &mut rng).unwrap(),
            gmm,
        )
        .unwrap();
        let ck = Checkpoint::from_vertex2vertex(&layer);
        let bytes = ck.to_bytes();
        let back = Checkpoint::from_bytes(&bytes, Path::new("mem")).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.to_vertex2vertex().unwrap(), layer);
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 1], Path::new("mem")).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(Checkpoint::from_bytes(&bad, Path::new("mem")).is_err());
    }
}
