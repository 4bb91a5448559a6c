use std::ops::Range;

use rand::Rng;

use crate::conv::DepthwiseKernel;
use crate::features::{FeatureMatrix, Real};
use crate::{par, Error, Result};

/// Pre-sampled texture features: facet `f` owns sample rows
/// `offsets[f]..offsets[f + 1]`, each with a barycentric position.
#[derive(Debug, Clone, PartialEq)]
pub struct TexturedFacets<T = f64> {
    offsets: Vec<usize>,
    barycentric: Vec<[f64; 3]>,
    features: FeatureMatrix<T>,
}

impl<T: Real> TexturedFacets<T> {
    pub fn new(offsets: Vec<usize>, barycentric: Vec<[f64; 3]>, features: FeatureMatrix<T>) -> Result<Self> {
        if offsets.first() != Some(&0) || offsets.last() != Some(&barycentric.len()) {
            return Err(Error::shape("sample offsets must run from 0 to the sample count"));
        }
        if let Some(f) = offsets.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::Config(format!("facet {f} has no texture samples")));
        }
        if features.rows() != barycentric.len() {
            return Err(Error::shape(format!(
                "{} sample feature rows for {} samples",
                features.rows(),
                barycentric.len()
            )));
        }
        for (g, xi) in barycentric.iter().enumerate() {
            if xi.iter().any(|&x| x.is_nan() || x < 0.0) || (xi[0] + xi[1] + xi[2] - 1.0).abs() > 1e-12 {
                return Err(Error::Config(format!("sample {g} has invalid barycentric coordinates {xi:?}")));
            }
        }
        Ok(Self {
            offsets,
            barycentric,
            features,
        })
    }

    /// Random sample sets of `1..=max_samples` points per facet with
    /// features in `[-1, 1]`.
    pub fn random(facets: usize, max_samples: usize, channels: usize, rng: &mut impl Rng) -> Result<Self> {
        let mut offsets = vec![0];
        let mut barycentric = Vec::new();
        for _ in 0..facets {
            for _ in 0..rng.random_range(1..=max_samples.max(1)) {
                let (a, b): (f64, f64) = (rng.random(), rng.random());
                let (a, b) = if a + b > 1.0 { (1.0 - a, 1.0 - b) } else { (a, b) };
                barycentric.push([a, b, (1.0 - a - b).max(0.0)]);
            }
            offsets.push(barycentric.len());
        }
        let data = (0..barycentric.len() * channels)
            .map(|_| T::of(rng.random_range(-1.0..=1.0)))
            .collect();
        let features = FeatureMatrix::from_vec(barycentric.len(), channels, data)?;
        Self::new(offsets, barycentric, features)
    }

    pub fn facet_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn channels(&self) -> usize {
        self.features.cols()
    }

    pub fn samples(&self, facet: usize) -> Range<usize> {
        self.offsets[facet]..self.offsets[facet + 1]
    }

    pub fn barycentric(&self) -> &[[f64; 3]] {
        &self.barycentric
    }

    pub fn features(&self) -> &FeatureMatrix<T> {
        &self.features
    }

    pub fn with_features(&self, features: FeatureMatrix<T>) -> Result<Self> {
        features.ensure_shape(self.features.rows(), self.features.cols(), "sample features")?;
        Ok(Self {
            offsets: self.offsets.clone(),
            barycentric: self.barycentric.clone(),
            features,
        })
    }
}

/// Per-facet features `J = (1/Γ) Σ_g W_g ⊙ x_g` with the filters
/// interpolated at each sample's barycentric position.
pub fn facet2facet_forward<T: Real>(
    textures: &TexturedFacets<T>,
    kernel: &DepthwiseKernel<T>,
) -> Result<FeatureMatrix<T>> {
    kernel.expect_shape(3, textures.channels())?;
    let (channels, lambda) = (kernel.channels(), kernel.multiplier());
    let mut out = FeatureMatrix::zeros(textures.facet_count(), kernel.output_channels());
    out.fill_rows(|f, row| {
        let samples = textures.samples(f);
        let inv = T::of(1.0 / samples.len() as f64);
        for g in samples {
            let xi = textures.barycentric[g].map(T::of);
            let x = textures.features.row(g);
            for c in 0..channels {
                for k in 0..lambda {
                    let w = xi[0] * kernel.get(0, c, k) + xi[1] * kernel.get(1, c, k) + xi[2] * kernel.get(2, c, k);
                    row[c * lambda + k] += inv * w * x[c];
                }
            }
        }
    });
    Ok(out)
}

/// Returns `(dL/dx per sample, dL/dw)` for upstream `dL/dJ`.
pub fn facet2facet_backward<T: Real>(
    textures: &TexturedFacets<T>,
    kernel: &DepthwiseKernel<T>,
    grad_out: &FeatureMatrix<T>,
) -> Result<(FeatureMatrix<T>, DepthwiseKernel<T>)> {
    kernel.expect_shape(3, textures.channels())?;
    grad_out.ensure_shape(textures.facet_count(), kernel.output_channels(), "facet gradient")?;
    let (channels, lambda) = (kernel.channels(), kernel.multiplier());
    let sample_facet: Vec<usize> = (0..textures.facet_count())
        .flat_map(|f| textures.samples(f).map(move |_| f))
        .collect();

    let mut grad_x = FeatureMatrix::zeros(textures.features.rows(), channels);
    grad_x.fill_rows(|g, row| {
        let f = sample_facet[g];
        let inv = T::of(1.0 / textures.samples(f).len() as f64);
        let xi = textures.barycentric[g].map(T::of);
        let u = grad_out.row(f);
        for (c, o) in row.iter_mut().enumerate() {
            for k in 0..lambda {
                let w = xi[0] * kernel.get(0, c, k) + xi[1] * kernel.get(1, c, k) + xi[2] * kernel.get(2, c, k);
                *o += inv * w * u[c * lambda + k];
            }
        }
    });

    let width = kernel.output_channels();
    let grad_w = par::sum_chunks(textures.facet_count(), 3 * width, |range, acc: &mut [T]| {
        for f in range {
            let samples = textures.samples(f);
            let inv = T::of(1.0 / samples.len() as f64);
            let u = grad_out.row(f);
            for g in samples {
                let xi = textures.barycentric[g].map(T::of);
                let x = textures.features.row(g);
                for c in 0..channels {
                    for k in 0..lambda {
                        let gx = inv * x[c] * u[c * lambda + k];
                        for s in 0..3 {
                            acc[s * width + c * lambda + k] += xi[s] * gx;
                        }
                    }
                }
            }
        }
    });
    Ok((grad_x, DepthwiseKernel::new(3, channels, lambda, grad_w)?))
}
