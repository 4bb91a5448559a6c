//! Mesh file reading and writing (OBJ, PLY) and mini-batch concatenation.

mod obj;
mod ply;

use std::fs;
use std::io::BufWriter;
use std::path::Path;

use crate::features::FeatureMatrix;
use crate::mesh::{BatchedMesh, TriMesh, Vec3};
use crate::{Error, Result};

pub use ply::PlyEncoding;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Obj,
    Ply,
    /// Pick from the file extension.
    Auto,
}

impl MeshFormat {
    fn resolve(self, path: &Path) -> Result<MeshFormat> {
        match self {
            MeshFormat::Auto => {
                let ext = path
                    .extension()
                    .and_then(|e| e.to_str())
                    .map(|e| e.to_ascii_lowercase());
                match ext.as_deref() {
                    Some("obj") => Ok(MeshFormat::Obj),
                    Some("ply") => Ok(MeshFormat::Ply),
                    _ => Err(Error::Format {
                        path: path.to_path_buf(),
                        message: "cannot infer format from extension (expected .obj or .ply)".into(),
                    }),
                }
            }
            f => Ok(f),
        }
    }
}

impl std::str::FromStr for MeshFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "obj" => Ok(MeshFormat::Obj),
            "ply" => Ok(MeshFormat::Ply),
            "auto" => Ok(MeshFormat::Auto),
            other => Err(format!("unknown mesh format `{other}`")),
        }
    }
}

/// Summary of a parsed mesh file.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshFileStats {
    pub vertex_count: usize,
    pub facet_count: usize,
    pub has_color: bool,
    pub bbox: (Vec3, Vec3),
    /// Triangles dropped at load time because they repeat a vertex index.
    pub dropped_facets: usize,
}

/// Raw parse result shared by both readers.
#[derive(Debug)]
pub(crate) struct RawMesh {
    pub positions: Vec<Vec3>,
    /// Colors already mapped to `[-1, 1]`.
    pub colors: Option<Vec<Vec3>>,
    /// Polygons as parsed (already zero-based, range-checked).
    pub polygons: Vec<Vec<usize>>,
}

impl RawMesh {
    fn into_mesh(self) -> Result<(TriMesh, usize)> {
        let mut facets = Vec::with_capacity(self.polygons.len());
        let mut dropped = 0;
        for poly in &self.polygons {
            for k in 1..poly.len().saturating_sub(1) {
                let tri = [poly[0], poly[k], poly[k + 1]];
                if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                    dropped += 1;
                } else {
                    facets.push(tri);
                }
            }
        }
        let mut mesh = TriMesh::new(self.positions, facets)?;
        if let Some(c) = self.colors {
            mesh = mesh.with_colors(c)?;
        }
        Ok((mesh, dropped))
    }
}

/// Maps an 8-bit channel onto `[-1, 1]`.
#[inline]
pub fn color_from_u8(c: u8) -> f64 {
    f64::from(c) / 255.0 * 2.0 - 1.0
}

#[inline]
pub fn color_to_u8(c: f64) -> u8 {
    (((c.clamp(-1.0, 1.0) + 1.0) * 0.5) * 255.0).round() as u8
}

/// Loads a triangle mesh; polygons are fan-triangulated.
pub fn load_mesh(path: impl AsRef<Path>, format: MeshFormat) -> Result<TriMesh> {
    load_mesh_with_stats(path, format).map(|(m, _)| m)
}

pub fn load_mesh_with_stats(
    path: impl AsRef<Path>,
    format: MeshFormat,
) -> Result<(TriMesh, MeshFileStats)> {
    let path = path.as_ref();
    let format = format.resolve(path)?;
    let bytes = fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let raw = match format {
        MeshFormat::Obj => obj::parse(path, &bytes)?,
        MeshFormat::Ply => ply::parse(path, &bytes)?,
        MeshFormat::Auto => unreachable!("resolved above"),
    };
    let (mesh, dropped_facets) = raw.into_mesh()?;
    let stats = MeshFileStats {
        vertex_count: mesh.vertex_count(),
        facet_count: mesh.facet_count(),
        has_color: mesh.colors.is_some(),
        bbox: mesh.bbox().unwrap_or(([0.0; 3], [0.0; 3])),
        dropped_facets,
    };
    Ok((mesh, stats))
}

/// Writes `mesh`. PLY output is binary little-endian.
pub fn save_mesh(mesh: &TriMesh, path: impl AsRef<Path>, format: MeshFormat) -> Result<()> {
    let path = path.as_ref();
    let format = format.resolve(path)?;
    match format {
        MeshFormat::Obj => write_file(path, |w| obj::write(mesh, w)),
        MeshFormat::Ply => write_file(path, |w| ply::write(mesh, w, PlyEncoding::BinaryLittleEndian)),
        MeshFormat::Auto => unreachable!("resolved above"),
    }
}

/// Writes a PLY file with an explicit encoding.
pub fn save_ply(mesh: &TriMesh, path: impl AsRef<Path>, encoding: PlyEncoding) -> Result<()> {
    write_file(path.as_ref(), |w| ply::write(mesh, w, encoding))
}

fn write_file(
    path: &Path,
    body: impl FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>,
) -> Result<()> {
    let ctx = || format!("writing {}", path.display());
    let file = fs::File::create(path).map_err(|e| Error::io(ctx(), e))?;
    let mut w = BufWriter::new(file);
    body(&mut w).map_err(|e| Error::io(ctx(), e))?;
    std::io::Write::flush(&mut w).map_err(|e| Error::io(ctx(), e))
}

/// Concatenates meshes, shifting facet indices by per-mesh vertex offsets.
pub fn concat_batch(meshes: &[TriMesh]) -> Result<BatchedMesh> {
    let first = meshes
        .first()
        .ok_or_else(|| Error::shape("cannot batch an empty list of meshes"))?;
    let cols = first.features.cols();
    if let Some((i, m)) = meshes
        .iter()
        .enumerate()
        .find(|(_, m)| m.features.cols() != cols)
    {
        return Err(Error::shape(format!(
            "mesh {i} has {} feature channels, mesh 0 has {cols}",
            m.features.cols()
        )));
    }
    let all_colored = meshes.iter().all(|m| m.colors.is_some());
    let mut vertex_offsets = vec![0];
    let mut facet_offsets = vec![0];
    let mut positions = Vec::new();
    let mut facets = Vec::new();
    let mut colors = Vec::new();
    let mut features = Vec::new();
    for m in meshes {
        let base = positions.len();
        positions.extend_from_slice(&m.positions);
        facets.extend(m.facets.iter().map(|t| [t[0] + base, t[1] + base, t[2] + base]));
        if all_colored {
            colors.extend_from_slice(m.colors.as_ref().expect("checked"));
        }
        features.extend_from_slice(m.features.as_slice());
        vertex_offsets.push(positions.len());
        facet_offsets.push(facets.len());
    }
    let n = positions.len();
    let mesh = TriMesh {
        positions,
        facets,
        colors: all_colored.then_some(colors),
        features: FeatureMatrix::from_vec(n, cols, features)?,
    };
    let batch = BatchedMesh {
        mesh,
        vertex_offsets,
        facet_offsets,
    };
    batch.validate()?;
    Ok(batch)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tri(z: f64) -> TriMesh {
        TriMesh::new(
            vec![[0.0, 0.0, z], [1.0, 0.0, z], [0.0, 1.0, z]],
            vec![[0, 1, 2]],
        )
        .unwrap()
    }

    #[test]
    fn concat_offsets() {
        let b = concat_batch(&[tri(0.0)]).unwrap();
        assert_eq!(b.vertex_offsets, vec![0, 3]);
        let b = concat_batch(&[tri(0.0), tri(1.0)]).unwrap();
        assert_eq!(b.mesh.facets[1], [3, 4, 5]);
        assert_eq!(b.facet_offsets, vec![0, 1, 2]);
        assert_eq!(b.slice(1), tri(1.0));
    }

    #[test]
    fn concat_rejects_channel_mismatch() {
        let colored = tri(0.0).with_colors(vec![[0.0; 3]; 3]).unwrap();
        assert!(matches!(
            concat_batch(&[tri(0.0), colored]),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn color_map_endpoints() {
        assert_eq!(color_from_u8(255), 1.0);
        assert_eq!(color_from_u8(0), -1.0);
        assert_eq!(color_to_u8(1.0), 255);
        assert_eq!(color_to_u8(-1.0), 0);
        for c in 0..=255u8 {
            assert_eq!(color_to_u8(color_from_u8(c)), c);
        }
    }
}
