use crate::conv::{
    facet2vertex_backward, facet2vertex_forward, gmm_coefficients, vertex2facet_backward, vertex2facet_forward,
    BarycentricPlan, DepthwiseKernel, SphereGmm, VertexGather,
};
use crate::features::{FeatureMatrix, Real};
use crate::mesh::{TriMesh, Vec3};
use crate::{Error, Result};

/// vertex2facet followed by facet2vertex.
///
/// `facet_kernel` has 3 taps over the `C` input channels with multiplier
/// `λ₁`; `vertex_kernel` has one tap per mixture component over the `C·λ₁`
/// facet channels with multiplier `λ₂`.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexToVertex<T = f64> {
    pub facet_kernel: DepthwiseKernel<T>,
    pub vertex_kernel: DepthwiseKernel<T>,
    pub gmm: SphereGmm,
}

/// Intermediates kept by the forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexToVertexCache<T = f64> {
    pub facet_features: FeatureMatrix<T>,
    pub coefficients: FeatureMatrix<T>,
    pub normals: Vec<Vec3>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VertexToVertexGrads<T = f64> {
    pub features: FeatureMatrix<T>,
    pub facet_kernel: DepthwiseKernel<T>,
    pub vertex_kernel: DepthwiseKernel<T>,
    pub sigmas: Option<Vec<f64>>,
    pub means: Option<Vec<Vec3>>,
}

impl<T: Real> VertexToVertex<T> {
    pub fn new(facet_kernel: DepthwiseKernel<T>, vertex_kernel: DepthwiseKernel<T>, gmm: SphereGmm) -> Result<Self> {
        facet_kernel.expect_shape(3, facet_kernel.channels())?;
        if vertex_kernel.taps() != gmm.components() || vertex_kernel.channels() != facet_kernel.output_channels() {
            return Err(Error::shape(format!(
                "vertex kernel is {}x{}, expected {}x{}",
                vertex_kernel.taps(),
                vertex_kernel.channels(),
                gmm.components(),
                facet_kernel.output_channels()
            )));
        }
        Ok(Self {
            facet_kernel,
            vertex_kernel,
            gmm,
        })
    }

    pub fn output_channels(&self) -> usize {
        self.vertex_kernel.output_channels()
    }

    pub fn forward(
        &self,
        mesh: &TriMesh,
        plan: &BarycentricPlan,
        gather: &VertexGather,
        features: &FeatureMatrix<T>,
    ) -> Result<(FeatureMatrix<T>, VertexToVertexCache<T>)> {
        let facet_features = vertex2facet_forward(mesh, features, &self.facet_kernel, plan)?;
        let normals: Vec<Vec3> = mesh.facet_geometry().iter().map(|g| g.normal).collect();
        let coefficients = gmm_coefficients(&normals, &self.gmm);
        let out = facet2vertex_forward(gather, &facet_features, &self.vertex_kernel, &coefficients)?;
        Ok((
            out,
            VertexToVertexCache {
                facet_features,
                coefficients,
                normals,
            },
        ))
    }

    pub fn backward(
        &self,
        mesh: &TriMesh,
        plan: &BarycentricPlan,
        gather: &VertexGather,
        features: &FeatureMatrix<T>,
        cache: &VertexToVertexCache<T>,
        grad_out: &FeatureMatrix<T>,
    ) -> Result<VertexToVertexGrads<T>> {
        let f2v = facet2vertex_backward(
            gather,
            &cache.facet_features,
            &self.vertex_kernel,
            &cache.coefficients,
            grad_out,
            Some((&cache.normals, &self.gmm)),
        )?;
        let (grad_in, grad_fk) = vertex2facet_backward(mesh, features, &self.facet_kernel, plan, &f2v.features)?;
        Ok(VertexToVertexGrads {
            features: grad_in,
            facet_kernel: grad_fk,
            vertex_kernel: f2v.weights,
            sigmas: f2v.sigmas,
            means: f2v.means,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_features_give_constant_output() {
        let mesh = crate::synth::icosphere(1);
        let gmm = SphereGmm::with_components(6).unwrap();
        let layer = VertexToVertex::new(
            DepthwiseKernel::shared(3, &[2.0, -1.0], 2).unwrap(),
            DepthwiseKernel::shared(6, &[0.5, 3.0], 1).unwrap(),
            gmm,
        )
        .unwrap();
        let plan = BarycentricPlan::build(
            &mesh.facet_geometry().iter().map(|g| g.area).collect::<Vec<_>>(),
            Default::default(),
        )
        .unwrap();
        let features = FeatureMatrix::from_vec(mesh.vertex_count(), 1, vec![1.5; mesh.vertex_count()]).unwrap();
        let (out, _): (FeatureMatrix<f64>, _) = layer.forward(&mesh, &plan, &VertexGather::new(&mesh), &features).unwrap();
        for v in 0..mesh.vertex_count() {
            assert!((out.get(v, 0) - 1.5 * 2.0 * 0.5).abs() < 1e-12);
            assert!((out.get(v, 1) - -1.5 * 3.0).abs() < 1e-12);
        }
    }
}
