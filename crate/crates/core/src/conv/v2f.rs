use crate::conv::{BarycentricPlan, DepthwiseKernel};
use crate::features::{FeatureMatrix, Real};
use crate::mesh::{vertex_facet_adjacency, TriMesh};
use crate::{par, Error, Result};

fn check<T: Real>(
    mesh: &TriMesh,
    features: &FeatureMatrix<T>,
    kernel: &DepthwiseKernel<T>,
    plan: &BarycentricPlan,
) -> Result<()> {
    if plan.facet_count() != mesh.facet_count() {
        return Err(Error::shape(format!(
            "plan covers {} facets, mesh has {}",
            plan.facet_count(),
            mesh.facet_count()
        )));
    }
    features.ensure_shape(mesh.vertex_count(), kernel.channels(), "vertex features")?;
    kernel.expect_shape(3, features.cols())
}

fn moment<T: Real>(plan: &BarycentricPlan, f: usize) -> [[T; 3]; 3] {
    plan.moment(f).map(|row| row.map(T::of))
}

/// Per-facet features `J = (1/K) Σ_k W_k ⊙ I_k`, where `I_k` and `W_k`
/// interpolate the corner features and the three corner filters at the
/// plan's barycentric points. Output has `C·λ` channels.
pub fn vertex2facet_forward<T: Real>(
    mesh: &TriMesh,
    features: &FeatureMatrix<T>,
    kernel: &DepthwiseKernel<T>,
    plan: &BarycentricPlan,
) -> Result<FeatureMatrix<T>> {
    check(mesh, features, kernel, plan)?;
    let (channels, lambda) = (kernel.channels(), kernel.multiplier());
    let mut out = FeatureMatrix::zeros(mesh.facet_count(), kernel.output_channels());
    out.fill_rows(|f, row| {
        let tri = mesh.facets[f];
        let m = moment::<T>(plan, f);
        for c in 0..channels {
            let x = tri.map(|v| features.get(v, c));
            for (s, ms) in m.iter().enumerate() {
                let a = ms[0] * x[0] + ms[1] * x[1] + ms[2] * x[2];
                for k in 0..lambda {
                    row[c * lambda + k] += a * kernel.get(s, c, k);
                }
            }
        }
    });
    Ok(out)
}

/// Returns `(dL/dI, dL/dw)` for upstream `dL/dJ`.
pub fn vertex2facet_backward<T: Real>(
    mesh: &TriMesh,
    features: &FeatureMatrix<T>,
    kernel: &DepthwiseKernel<T>,
    plan: &BarycentricPlan,
    grad_out: &FeatureMatrix<T>,
) -> Result<(FeatureMatrix<T>, DepthwiseKernel<T>)> {
    check(mesh, features, kernel, plan)?;
    grad_out.ensure_shape(mesh.facet_count(), kernel.output_channels(), "facet gradient")?;
    let (channels, lambda) = (kernel.channels(), kernel.multiplier());

    // per facet and corner slot: Σ_s M[s][r] Σ_m G[c,m] w_s[c,m]
    let mut slots = FeatureMatrix::zeros(mesh.facet_count(), 3 * channels);
    slots.fill_rows(|f, row| {
        let m = moment::<T>(plan, f);
        let g = grad_out.row(f);
        for c in 0..channels {
            let gw: [T; 3] = std::array::from_fn(|s| {
                (0..lambda).map(|k| g[c * lambda + k] * kernel.get(s, c, k)).sum()
            });
            for r in 0..3 {
                row[r * channels + c] = m[0][r] * gw[0] + m[1][r] * gw[1] + m[2][r] * gw[2];
            }
        }
    });
    let adjacency = vertex_facet_adjacency(mesh);
    let mut grad_in = FeatureMatrix::zeros(mesh.vertex_count(), channels);
    grad_in.fill_rows(|v, row| {
        for &f in adjacency.of(v) {
            let r = mesh.facets[f].iter().position(|&u| u == v).expect("incident");
            for (o, &s) in row.iter_mut().zip(&slots.row(f)[r * channels..(r + 1) * channels]) {
                *o += s;
            }
        }
    });

    let width = kernel.output_channels();
    let grad_w = par::sum_chunks(mesh.facet_count(), 3 * width, |range, acc: &mut [T]| {
        for f in range {
            let tri = mesh.facets[f];
            let m = moment::<T>(plan, f);
            let g = grad_out.row(f);
            for c in 0..channels {
                let x = tri.map(|v| features.get(v, c));
                for (s, ms) in m.iter().enumerate() {
                    let a = ms[0] * x[0] + ms[1] * x[1] + ms[2] * x[2];
                    for k in 0..lambda {
                        acc[s * width + c * lambda + k] += a * g[c * lambda + k];
                    }
                }
            }
        }
    });
    let grad_w = DepthwiseKernel::new(3, channels, lambda, grad_w)?;
    Ok((grad_in, grad_w))
}
