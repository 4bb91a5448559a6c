use std::collections::BTreeMap;

use crate::decimate::{cluster_size_histogram, DecimationResult, Quadric};
use crate::mesh::{compute_facet_geometry, vertex_facet_adjacency, TriMesh};
use crate::{par, Error, Result};

use super::quadric::{facet_quadric, vertex_quadrics};

#[derive(Debug, Clone, PartialEq)]
pub struct QualityReport {
    pub output_vertices: usize,
    pub output_facets: usize,
    /// Mean over output vertices of the cluster quadric error at the output
    /// position, measured against the original facet planes.
    pub mean_error: f64,
    pub max_error: f64,
    /// cluster size -> number of output vertices
    pub cluster_sizes: BTreeMap<usize, usize>,
}

impl std::fmt::Display for QualityReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "output vertices: {}", self.output_vertices)?;
        writeln!(f, "output facets:   {}", self.output_facets)?;
        writeln!(f, "mean quadric error: {:.6e}", self.mean_error)?;
        writeln!(f, "max quadric error:  {:.6e}", self.max_error)?;
        write!(f, "cluster sizes:")?;
        for (size, count) in &self.cluster_sizes {
            write!(f, " {size}:{count}")?;
        }
        Ok(())
    }
}

pub fn quality_report(original: &TriMesh, result: &DecimationResult) -> Result<QualityReport> {
    let n_out = result.output_vertex_count();
    if result.replace.len() != original.vertex_count() {
        return Err(Error::shape(format!(
            "replace has {} entries for {} input vertices",
            result.replace.len(),
            original.vertex_count()
        )));
    }
    let geom = compute_facet_geometry(original);
    let facet_q: Vec<Quadric> =
        par::map_range(geom.len(), |f| facet_quadric(&geom[f]).unwrap_or_default());
    let vertex_q = vertex_quadrics(&vertex_facet_adjacency(original), &facet_q);

    // Every input vertex lies on its own planes, so its in-place error is
    // zero up to rounding; subtracting it makes untouched vertices exact.
    let mut cluster_q = vec![Quadric::zero(); n_out];
    let mut baseline = vec![0.0; n_out];
    for (v, &r) in result.replace.iter().enumerate() {
        cluster_q[r] += vertex_q[v];
        baseline[r] += vertex_q[v].error(original.positions[v]);
    }
    let errors: Vec<f64> = par::map_range(n_out, |r| {
        (cluster_q[r].error(result.mesh.positions[r]) - baseline[r]).max(0.0)
    });
    let mean_error = if n_out == 0 {
        0.0
    } else {
        errors.iter().sum::<f64>() / n_out as f64
    };
    let max_error = errors.iter().copied().fold(0.0, f64::max);
    Ok(QualityReport {
        output_vertices: n_out,
        output_facets: result.mesh.facet_count(),
        mean_error,
        max_error,
        cluster_sizes: cluster_size_histogram(&result.replace, n_out),
    })
}
