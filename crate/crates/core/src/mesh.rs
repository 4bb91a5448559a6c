//! Triangle mesh carrier, facet geometry and adjacency queries.

use std::collections::HashMap;

use crate::features::FeatureMatrix;
use crate::{par, Error, Result};

pub type Vec3 = [f64; 3];

#[inline]
pub(crate) fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub(crate) fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub(crate) fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub(crate) fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

/// Triangle mesh with per-vertex positions and feature channels.
///
/// `features` defaults to the `(x, y, z)` positions, followed by `(r, g, b)`
/// in `[-1, 1]` when the mesh carries colors.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    pub positions: Vec<Vec3>,
    pub facets: Vec<[usize; 3]>,
    pub colors: Option<Vec<Vec3>>,
    pub features: FeatureMatrix<f64>,
}

impl TriMesh {
    /// Builds a validated mesh whose features are the vertex positions.
    pub fn new(positions: Vec<Vec3>, facets: Vec<[usize; 3]>) -> Result<Self> {
        let features = position_features(&positions, None);
        let mesh = Self {
            positions,
            facets,
            colors: None,
            features,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    /// Attaches colors in `[-1, 1]` and rebuilds the default `xyzrgb` features.
    pub fn with_colors(mut self, colors: Vec<Vec3>) -> Result<Self> {
        if colors.len() != self.positions.len() {
            return Err(Error::shape(format!(
                "{} colors for {} vertices",
                colors.len(),
                self.positions.len()
            )));
        }
        self.features = position_features(&self.positions, Some(&colors));
        self.colors = Some(colors);
        Ok(self)
    }

    /// Replaces the feature matrix; it must have one row per vertex.
    pub fn with_features(mut self, features: FeatureMatrix<f64>) -> Result<Self> {
        if features.rows() != self.positions.len() {
            return Err(Error::shape(format!(
                "{} feature rows for {} vertices",
                features.rows(),
                self.positions.len()
            )));
        }
        self.features = features;
        Ok(self)
    }

    #[inline]
    pub fn vertex_count(&self) -> usize {
        self.positions.len()
    }

    #[inline]
    pub fn facet_count(&self) -> usize {
        self.facets.len()
    }

    /// Checks index ranges and combinatorial non-degeneracy of every facet.
    pub fn validate(&self) -> Result<()> {
        let n = self.positions.len();
        for (f, tri) in self.facets.iter().enumerate() {
            for &v in tri {
                if v >= n {
                    return Err(Error::IndexOutOfRange {
                        facet: f,
                        index: v,
                        vertex_count: n,
                    });
                }
            }
            if tri[0] == tri[1] || tri[0] == tri[2] {
                return Err(Error::RepeatedIndex {
                    facet: f,
                    index: tri[0],
                });
            }
            if tri[1] == tri[2] {
                return Err(Error::RepeatedIndex {
                    facet: f,
                    index: tri[1],
                });
            }
        }
        if self.features.rows() != n {
            return Err(Error::shape(format!(
                "{} feature rows for {n} vertices",
                self.features.rows()
            )));
        }
        if let Some(c) = &self.colors {
            if c.len() != n {
                return Err(Error::shape(format!("{} colors for {n} vertices", c.len())));
            }
        }
        Ok(())
    }

    /// Downstream operations need at least one real triangle.
    pub fn require_nonempty(&self) -> Result<()> {
        if self.positions.len() < 3 || self.facets.is_empty() {
            return Err(Error::TooSmall {
                vertices: self.positions.len(),
                facets: self.facets.len(),
                min_vertices: 3,
                min_facets: 1,
            });
        }
        Ok(())
    }

    pub fn facet_geometry(&self) -> Vec<FacetGeometry> {
        compute_facet_geometry(self)
    }

    pub fn bbox(&self) -> Option<(Vec3, Vec3)> {
        let first = *self.positions.first()?;
        Some(self.positions.iter().fold((first, first), |(lo, hi), p| {
            (
                [lo[0].min(p[0]), lo[1].min(p[1]), lo[2].min(p[2])],
                [hi[0].max(p[0]), hi[1].max(p[1]), hi[2].max(p[2])],
            )
        }))
    }

    /// Applies `f` to every position and refreshes position feature channels
    /// when the features are still the default layout.
    pub fn transformed(&self, f: impl Fn(Vec3) -> Vec3) -> TriMesh {
        let positions: Vec<Vec3> = self.positions.iter().map(|&p| f(p)).collect();
        let default_layout = self.features == position_features(&self.positions, self.colors.as_deref());
        let features = if default_layout {
            position_features(&positions, self.colors.as_deref())
        } else {
            self.features.clone()
        };
        TriMesh {
            positions,
            facets: self.facets.clone(),
            colors: self.colors.clone(),
            features,
        }
    }

    /// Number of facets whose vertex set repeats an earlier facet.
    pub fn duplicate_facet_count(&self) -> usize {
        let mut seen = HashMap::with_capacity(self.facets.len());
        let mut dups = 0;
        for tri in &self.facets {
            if seen.insert(sorted_triple(*tri), ()).is_some() {
                dups += 1;
            }
        }
        dups
    }

    /// Connected components over the facet connectivity. Vertices that no
    /// facet references count as their own component.
    pub fn connected_components(&self) -> usize {
        let n = self.positions.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for tri in &self.facets {
            for k in 1..3 {
                let a = find(&mut parent, tri[0]);
                let b = find(&mut parent, tri[k]);
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
        (0..n).filter(|&v| find(&mut parent, v) == v).count()
    }
}

pub(crate) fn sorted_triple(mut t: [usize; 3]) -> [usize; 3] {
    t.sort_unstable();
    t
}

/// `xyz` (and optional `rgb`) feature rows.
pub fn position_features(positions: &[Vec3], colors: Option<&[Vec3]>) -> FeatureMatrix<f64> {
    let cols = if colors.is_some() { 6 } else { 3 };
    let mut data = Vec::with_capacity(positions.len() * cols);
    for (i, p) in positions.iter().enumerate() {
        data.extend_from_slice(p);
        if let Some(c) = colors {
            data.extend_from_slice(&c[i]);
        }
    }
    FeatureMatrix::from_vec(positions.len(), cols, data).expect("consistent by construction")
}

/// Unit normal, area and plane intercept of one facet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FacetGeometry {
    pub normal: Vec3,
    pub area: f64,
    /// `d` in `n·x + d = 0`.
    pub intercept: f64,
    /// Zero-area facet; `normal` is the zero vector.
    pub degenerate: bool,
}

impl FacetGeometry {
    pub fn of_triangle(p0: Vec3, p1: Vec3, p2: Vec3) -> Self {
        let c = cross(sub(p1, p0), sub(p2, p0));
        let len = norm(c);
        let area = 0.5 * len;
        // Relative threshold: a sliver whose cross product vanishes against
        // its edge lengths has no reliable normal.
        let scale = dot(sub(p1, p0), sub(p1, p0)).max(dot(sub(p2, p0), sub(p2, p0)));
        if len == 0.0 || !len.is_finite() || len <= 1e-14 * scale {
            return Self {
                normal: [0.0; 3],
                area,
                intercept: 0.0,
                degenerate: true,
            };
        }
        // Dividing by the largest component first makes the normal depend only
        // on the direction of an exactly computed cross product, not its length.
        let m = c[0].abs().max(c[1].abs()).max(c[2].abs());
        let u = [c[0] / m, c[1] / m, c[2] / m];
        let ulen = norm(u);
        let n = [u[0] / ulen, u[1] / ulen, u[2] / ulen];
        Self {
            normal: n,
            area,
            intercept: -dot(n, p0),
            degenerate: false,
        }
    }
}

/// Per-facet normals, areas and plane intercepts.
pub fn compute_facet_geometry(mesh: &TriMesh) -> Vec<FacetGeometry> {
    let p = &mesh.positions;
    par::map_range(mesh.facets.len(), |f| {
        let [a, b, c] = mesh.facets[f];
        FacetGeometry::of_triangle(p[a], p[b], p[c])
    })
}

/// Compressed vertex -> incident-facet lists. Facets appear in ascending
/// order within each list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FacetAdjacency {
    offsets: Vec<usize>,
    facets: Vec<usize>,
}

impl FacetAdjacency {
    /// Builds the adjacency from `(target, facet)` incidences where `target`
    /// is any index below `targets`. Incidences are kept once per
    /// `(target, facet)` pair.
    pub(crate) fn from_incidences(
        targets: usize,
        facet_count: usize,
        incidences: impl Fn(usize) -> [Option<usize>; 3],
    ) -> Self {
        let mut counts = vec![0usize; targets + 1];
        let per_facet = |f: usize| {
            let mut t = incidences(f);
            // drop repeats so a facet counts once per target
            if t[1].is_some() && t[1] == t[0] {
                t[1] = None;
            }
            if t[2].is_some() && (t[2] == t[0] || t[2] == t[1]) {
                t[2] = None;
            }
            t
        };
        for f in 0..facet_count {
            for v in per_facet(f).into_iter().flatten() {
                counts[v + 1] += 1;
            }
        }
        for i in 0..targets {
            counts[i + 1] += counts[i];
        }
        let offsets = counts;
        let mut cursor = offsets.clone();
        let mut facets = vec![0usize; offsets[targets]];
        for f in 0..facet_count {
            for v in per_facet(f).into_iter().flatten() {
                facets[cursor[v]] = f;
                cursor[v] += 1;
            }
        }
        Self { offsets, facets }
    }

    #[inline]
    pub fn of(&self, v: usize) -> &[usize] {
        &self.facets[self.offsets[v]..self.offsets[v + 1]]
    }

    #[inline]
    pub fn len_of(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn vertex_count(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Sum of all list lengths.
    pub fn total(&self) -> usize {
        self.facets.len()
    }
}

/// Facets containing each vertex.
pub fn vertex_facet_adjacency(mesh: &TriMesh) -> FacetAdjacency {
    FacetAdjacency::from_incidences(mesh.vertex_count(), mesh.facet_count(), |f| {
        let t = mesh.facets[f];
        [Some(t[0]), Some(t[1]), Some(t[2])]
    })
}

/// Unique undirected edges `(i, j)` with `i < j`, sorted lexicographically.
pub fn edge_list(mesh: &TriMesh) -> Vec<(usize, usize)> {
    edge_list_with(mesh, &vertex_facet_adjacency(mesh))
}

/// [`edge_list`] reusing a prebuilt incidence structure. Each vertex
/// collects its higher-numbered neighbours, so no global sort is needed.
pub(crate) fn edge_list_with(mesh: &TriMesh, adjacency: &FacetAdjacency) -> Vec<(usize, usize)> {
    let upper: Vec<Vec<usize>> = par::map_range(mesh.vertex_count(), |v| {
        let mut out = Vec::with_capacity(2 * adjacency.len_of(v));
        for &f in adjacency.of(v) {
            out.extend(mesh.facets[f].iter().copied().filter(|&u| u > v));
        }
        out.sort_unstable();
        out.dedup();
        out
    });
    let mut edges = Vec::with_capacity(upper.iter().map(Vec::len).sum());
    for (v, us) in upper.into_iter().enumerate() {
        edges.extend(us.into_iter().map(|u| (v, u)));
    }
    edges
}

/// Vertex -> neighbour lists built from a sorted, deduplicated edge list.
/// Each list holds `(neighbour, edge_index)` sorted by neighbour.
#[derive(Debug, Clone)]
pub(crate) struct VertexNeighbors {
    offsets: Vec<usize>,
    entries: Vec<(usize, usize)>,
}

impl VertexNeighbors {
    pub(crate) fn from_edges(vertex_count: usize, edges: &[(usize, usize)]) -> Self {
        let mut offsets = vec![0usize; vertex_count + 1];
        for &(a, b) in edges {
            offsets[a + 1] += 1;
            offsets[b + 1] += 1;
        }
        for i in 0..vertex_count {
            offsets[i + 1] += offsets[i];
        }
        let mut cursor = offsets.clone();
        let mut entries = vec![(0, 0); offsets[vertex_count]];
        for (e, &(a, b)) in edges.iter().enumerate() {
            entries[cursor[a]] = (b, e);
            cursor[a] += 1;
            entries[cursor[b]] = (a, e);
            cursor[b] += 1;
        }
        Self { offsets, entries }
    }

    #[inline]
    pub(crate) fn of(&self, v: usize) -> &[(usize, usize)] {
        &self.entries[self.offsets[v]..self.offsets[v + 1]]
    }
}

/// Several meshes concatenated into one, with per-mesh offsets.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchedMesh {
    pub mesh: TriMesh,
    pub vertex_offsets: Vec<usize>,
    pub facet_offsets: Vec<usize>,
}

impl BatchedMesh {
    pub fn batch_size(&self) -> usize {
        self.vertex_offsets.len() - 1
    }

    /// Wraps a single mesh as a batch of one.
    pub fn single(mesh: TriMesh) -> Self {
        let vertex_offsets = vec![0, mesh.vertex_count()];
        let facet_offsets = vec![0, mesh.facet_count()];
        Self {
            mesh,
            vertex_offsets,
            facet_offsets,
        }
    }

    /// Extracts mesh `b` with local (zero-based) facet indices.
    pub fn slice(&self, b: usize) -> TriMesh {
        let (v0, v1) = (self.vertex_offsets[b], self.vertex_offsets[b + 1]);
        let (f0, f1) = (self.facet_offsets[b], self.facet_offsets[b + 1]);
        let facets = self.mesh.facets[f0..f1]
            .iter()
            .map(|t| [t[0] - v0, t[1] - v0, t[2] - v0])
            .collect();
        let cols = self.mesh.features.cols();
        let features = FeatureMatrix::from_vec(
            v1 - v0,
            cols,
            self.mesh.features.as_slice()[v0 * cols..v1 * cols].to_vec(),
        )
        .expect("slice of a consistent matrix");
        TriMesh {
            positions: self.mesh.positions[v0..v1].to_vec(),
            facets,
            colors: self.mesh.colors.as_ref().map(|c| c[v0..v1].to_vec()),
            features,
        }
    }

    /// Checks offsets are monotone and facets stay inside their mesh.
    pub fn validate(&self) -> Result<()> {
        self.mesh.validate()?;
        let b = self.batch_size();
        if self.vertex_offsets[0] != 0
            || self.facet_offsets[0] != 0
            || self.vertex_offsets[b] != self.mesh.vertex_count()
            || self.facet_offsets[b] != self.mesh.facet_count()
            || self.facet_offsets.len() != b + 1
        {
            return Err(Error::shape("batch offsets do not cover the mesh"));
        }
        for k in 0..b {
            if self.vertex_offsets[k] > self.vertex_offsets[k + 1]
                || self.facet_offsets[k] > self.facet_offsets[k + 1]
            {
                return Err(Error::shape("batch offsets are not monotone"));
            }
            let (v0, v1) = (self.vertex_offsets[k], self.vertex_offsets[k + 1]);
            for f in self.facet_offsets[k]..self.facet_offsets[k + 1] {
                if self.mesh.facets[f].iter().any(|&v| v < v0 || v >= v1) {
                    return Err(Error::shape(format!(
                        "facet {f} of batch entry {k} leaves its vertex range"
                    )));
                }
            }
        }
        Ok(())
    }
}
