use crate::conv::{gmm_backward, DepthwiseKernel, SphereGmm};
use crate::features::{FeatureMatrix, Real};
use crate::mesh::{FacetAdjacency, TriMesh, Vec3};
use crate::{par, Error, Result};

/// Which facets each output vertex averages over.
///
/// At full resolution output vertex `v` gathers the facets incident to `v`.
/// A strided gather targets a coarser vertex set: fine vertex `v` forwards
/// its facets to `mapping[v]` (entries of `-1` are skipped), and each facet
/// counts once per output vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexGather {
    adjacency: FacetAdjacency,
    facet_targets: Vec<[Option<usize>; 3]>,
    isolated: Vec<usize>,
}

impl VertexGather {
    pub fn new(mesh: &TriMesh) -> Self {
        Self::from_targets(mesh.vertex_count(), mesh.facets.iter().map(|t| t.map(Some)).collect())
    }

    pub fn strided(mesh: &TriMesh, mapping: &[i64], output_count: usize) -> Result<Self> {
        if mapping.len() != mesh.vertex_count() {
            return Err(Error::shape(format!(
                "mapping has {} entries for {} vertices",
                mapping.len(),
                mesh.vertex_count()
            )));
        }
        if let Some(&m) = mapping.iter().find(|&&m| m < -1 || m >= output_count as i64) {
            return Err(Error::shape(format!("mapping entry {m} outside -1..{output_count}")));
        }
        let targets = mesh
            .facets
            .iter()
            .map(|t| t.map(|v| usize::try_from(mapping[v]).ok()))
            .collect();
        Ok(Self::from_targets(output_count, targets))
    }

    /// Drops the facets flagged in `skip` from every average (used to leave
    /// degenerate facets out of the neighbourhood count).
    pub fn skipping(&self, skip: &[bool]) -> Result<Self> {
        if skip.len() != self.facet_targets.len() {
            return Err(Error::shape("skip mask does not match the facet count"));
        }
        let targets = self
            .facet_targets
            .iter()
            .zip(skip)
            .map(|(t, &s)| if s { [None; 3] } else { *t })
            .collect();
        Ok(Self::from_targets(self.output_count(), targets))
    }

    fn from_targets(output_count: usize, targets: Vec<[Option<usize>; 3]>) -> Self {
        let deduped: Vec<[Option<usize>; 3]> = targets
            .into_iter()
            .map(|mut t| {
                if t[1].is_some() && t[1] == t[0] {
                    t[1] = None;
                }
                if t[2].is_some() && (t[2] == t[0] || t[2] == t[1]) {
                    t[2] = None;
                }
                t
            })
            .collect();
        let adjacency = FacetAdjacency::from_incidences(output_count, deduped.len(), |f| deduped[f]);
        let isolated = (0..output_count).filter(|&v| adjacency.len_of(v) == 0).collect();
        Self {
            adjacency,
            facet_targets: deduped,
            isolated,
        }
    }

    pub fn output_count(&self) -> usize {
        self.adjacency.vertex_count()
    }

    pub fn facet_count(&self) -> usize {
        self.facet_targets.len()
    }

    pub fn facets_of(&self, v: usize) -> &[usize] {
        self.adjacency.of(v)
    }

    /// Output vertices with no facet to average; their output is zero.
    pub fn isolated(&self) -> &[usize] {
        &self.isolated
    }
}

fn check<T: Real>(
    gather: &VertexGather,
    features: &FeatureMatrix<T>,
    kernel: &DepthwiseKernel<T>,
    pi: &FeatureMatrix<T>,
) -> Result<()> {
    features.ensure_shape(gather.facet_count(), kernel.channels(), "facet features")?;
    pi.ensure_shape(gather.facet_count(), kernel.taps(), "fuzzy coefficients")
}

/// Per-vertex features `I_v = (1/|N(v)|) Σ_{i∈N(v)} (Σ_t π_it w_t) ⊙ J_i`.
pub fn facet2vertex_forward<T: Real>(
    gather: &VertexGather,
    features: &FeatureMatrix<T>,
    kernel: &DepthwiseKernel<T>,
    pi: &FeatureMatrix<T>,
) -> Result<FeatureMatrix<T>> {
    check(gather, features, kernel, pi)?;
    let (channels, lambda) = (kernel.channels(), kernel.multiplier());
    let mut out = FeatureMatrix::zeros(gather.output_count(), kernel.output_channels());
    out.fill_rows(|v, row| {
        let facets = gather.facets_of(v);
        if facets.is_empty() {
            return;
        }
        for &i in facets {
            let (p, x) = (pi.row(i), features.row(i));
            for (t, &pt) in p.iter().enumerate() {
                let w = kernel.tap(t);
                for c in 0..channels {
                    let px = pt * x[c];
                    for k in 0..lambda {
                        row[c * lambda + k] += px * w[c * lambda + k];
                    }
                }
            }
        }
        let inv = T::one() / T::of(facets.len() as f64);
        row.iter_mut().for_each(|o| *o *= inv);
    });
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Facet2VertexGrads<T = f64> {
    pub features: FeatureMatrix<T>,
    pub weights: DepthwiseKernel<T>,
    /// `dL/dπ`, one row per facet.
    pub coefficients: FeatureMatrix<T>,
    /// Present only when the mixture's sigmas are trainable.
    pub sigmas: Option<Vec<f64>>,
    /// Present only when the mixture's means are trainable.
    pub means: Option<Vec<Vec3>>,
}

/// Backward of [`facet2vertex_forward`]. Passing the facet normals and the
/// mixture that produced `pi` adds the sigma / mean gradients its flags ask for.
pub fn facet2vertex_backward<T: Real>(
    gather: &VertexGather,
    features: &FeatureMatrix<T>,
    kernel: &DepthwiseKernel<T>,
    pi: &FeatureMatrix<T>,
    grad_out: &FeatureMatrix<T>,
    mixture: Option<(&[Vec3], &SphereGmm)>,
) -> Result<Facet2VertexGrads<T>> {
    check(gather, features, kernel, pi)?;
    grad_out.ensure_shape(gather.output_count(), kernel.output_channels(), "vertex gradient")?;
    let (channels, lambda, taps) = (kernel.channels(), kernel.multiplier(), kernel.taps());
    let inv_count = |v: usize| T::one() / T::of(gather.facets_of(v).len() as f64);

    // per facet: feature gradient followed by coefficient gradient
    let mut per_facet = FeatureMatrix::zeros(gather.facet_count(), channels + taps);
    per_facet.fill_rows(|i, row| {
        let (p, x) = (pi.row(i), features.row(i));
        let (gx, gp) = row.split_at_mut(channels);
        for v in gather.facet_targets[i].iter().flatten().copied() {
            let inv = inv_count(v);
            let g = grad_out.row(v);
            for t in 0..taps {
                let w = kernel.tap(t);
                let mut dp = T::zero();
                for c in 0..channels {
                    let gw: T = (0..lambda).map(|k| g[c * lambda + k] * w[c * lambda + k]).sum();
                    gx[c] += inv * p[t] * gw;
                    dp += gw * x[c];
                }
                gp[t] += inv * dp;
            }
        }
    });
    let mut grad_x = FeatureMatrix::zeros(gather.facet_count(), channels);
    let mut grad_pi = FeatureMatrix::zeros(gather.facet_count(), taps);
    for i in 0..gather.facet_count() {
        let row = per_facet.row(i);
        grad_x.row_mut(i).copy_from_slice(&row[..channels]);
        grad_pi.row_mut(i).copy_from_slice(&row[channels..]);
    }

    let width = kernel.output_channels();
    let grad_w = par::sum_chunks(gather.output_count(), taps * width, |range, acc: &mut [T]| {
        for v in range {
            let facets = gather.facets_of(v);
            if facets.is_empty() {
                continue;
            }
            let inv = inv_count(v);
            let g = grad_out.row(v);
            for &i in facets {
                let (p, x) = (pi.row(i), features.row(i));
                for t in 0..taps {
                    for c in 0..channels {
                        let px = inv * p[t] * x[c];
                        for k in 0..lambda {
                            acc[t * width + c * lambda + k] += px * g[c * lambda + k];
                        }
                    }
                }
            }
        }
    });

    let (sigmas, means) = match mixture {
        Some((normals, gmm)) => {
            if gmm.components() != taps || normals.len() != gather.facet_count() {
                return Err(Error::shape("mixture does not match the kernel taps or facet count"));
            }
            gmm_backward(normals, gmm, pi, &grad_pi)?
        }
        None => (None, None),
    };
    Ok(Facet2VertexGrads {
        features: grad_x,
        weights: DepthwiseKernel::new(taps, channels, lambda, grad_w)?,
        coefficients: grad_pi,
        sigmas,
        means,
    })
}
