//! Fixture loading and naive scalar reference implementations shared by the
//! integration tests.

#![allow(dead_code)]

use std::path::PathBuf;

use meshforge::conv::{BarycentricPlan, DepthwiseKernel, SphereGmm, TexturedFacets};
use meshforge::io::{load_mesh, MeshFormat};
use meshforge::mesh::Vec3;
use meshforge::{FeatureMatrix, TriMesh};

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("fixtures")
}

pub fn fixture(name: &str) -> TriMesh {
    load_mesh(fixture_dir().join(name), MeshFormat::Auto).unwrap()
}

/// Every mesh in the fixture directory, sorted by file name.
pub fn fixture_corpus() -> Vec<(String, TriMesh)> {
    let mut entries: Vec<_> = std::fs::read_dir(fixture_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("obj" | "ply")))
        .collect();
    entries.sort();
    entries
        .into_iter()
        .map(|p| {
            let name = p.file_name().unwrap().to_string_lossy().into_owned();
            let mesh = load_mesh(&p, MeshFormat::Auto).unwrap();
            (name, mesh)
        })
        .collect()
}

/// vertex2facet by explicit summation over the barycentric points.
pub fn naive_vertex2facet(
    mesh: &TriMesh,
    x: &FeatureMatrix<f64>,
    w: &DepthwiseKernel<f64>,
    plan: &BarycentricPlan,
) -> FeatureMatrix<f64> {
    let (c_in, lambda) = (w.channels(), w.multiplier());
    let mut out = FeatureMatrix::zeros(mesh.facet_count(), c_in * lambda);
    for (f, tri) in mesh.facets.iter().enumerate() {
        let points = plan.points(f);
        for c in 0..c_in {
            for m in 0..lambda {
                let mut acc = 0.0;
                for xi in points {
                    let mut filter = 0.0;
                    let mut feature = 0.0;
                    for s in 0..3 {
                        filter += xi[s] * w.get(s, c, m);
                        feature += xi[s] * x.get(tri[s], c);
                    }
                    acc += filter * feature;
                }
                out.set(f, c * lambda + m, acc / points.len() as f64);
            }
        }
    }
    out
}

pub fn naive_facet2facet(textures: &TexturedFacets<f64>, w: &DepthwiseKernel<f64>) -> FeatureMatrix<f64> {
    let (c_in, lambda) = (w.channels(), w.multiplier());
    let mut out = FeatureMatrix::zeros(textures.facet_count(), c_in * lambda);
    for f in 0..textures.facet_count() {
        let samples = textures.samples(f);
        let count = samples.len() as f64;
        for c in 0..c_in {
            for m in 0..lambda {
                let mut acc = 0.0;
                for g in samples.clone() {
                    let xi = textures.barycentric()[g];
                    let filter: f64 = (0..3).map(|s| xi[s] * w.get(s, c, m)).sum();
                    acc += filter * textures.features().get(g, c);
                }
                out.set(f, c * lambda + m, acc / count);
            }
        }
    }
    out
}

/// facet2vertex with neighbourhoods found by scanning every facet.
pub fn naive_facet2vertex(
    mesh: &TriMesh,
    j: &FeatureMatrix<f64>,
    w: &DepthwiseKernel<f64>,
    pi: &FeatureMatrix<f64>,
) -> FeatureMatrix<f64> {
    let (c_in, lambda, taps) = (w.channels(), w.multiplier(), w.taps());
    let mut out = FeatureMatrix::zeros(mesh.vertex_count(), c_in * lambda);
    for v in 0..mesh.vertex_count() {
        let around: Vec<usize> = (0..mesh.facet_count())
            .filter(|&f| mesh.facets[f].contains(&v))
            .collect();
        if around.is_empty() {
            continue;
        }
        for c in 0..c_in {
            for m in 0..lambda {
                let mut acc = 0.0;
                for &f in &around {
                    let filter: f64 = (0..taps).map(|t| pi.get(f, t) * w.get(t, c, m)).sum();
                    acc += filter * j.get(f, c);
                }
                out.set(v, c * lambda + m, acc / around.len() as f64);
            }
        }
    }
    out
}

/// Softmax responsibilities without the max shift.
pub fn naive_coefficients(normals: &[Vec3], gmm: &SphereGmm) -> FeatureMatrix<f64> {
    let t = gmm.components();
    let mut out = FeatureMatrix::zeros(normals.len(), t);
    for (i, n) in normals.iter().enumerate() {
        if n.iter().all(|&x| x == 0.0) {
            (0..t).for_each(|k| out.set(i, k, 1.0 / t as f64));
            continue;
        }
        let e: Vec<f64> = (0..t)
            .map(|k| {
                let mu = gmm.means()[k];
                let d2: f64 = (0..3).map(|a| (n[a] - mu[a]).powi(2)).sum();
                (-d2 / gmm.sigmas()[k].powi(2)).exp()
            })
            .collect();
        let total: f64 = e.iter().sum();
        (0..t).for_each(|k| out.set(i, k, e[k] / total));
    }
    out
}

pub fn max_abs_diff(a: &FeatureMatrix<f64>, b: &FeatureMatrix<f64>) -> f64 {
    assert_eq!((a.rows(), a.cols()), (b.rows(), b.cols()));
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
