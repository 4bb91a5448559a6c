//! Central finite-difference checks for every analytic backward pass.
//!
//! Each check draws a random small mesh and random parameters, evaluates the
//! loss `L = ½‖f(p)‖²`, and compares the analytic `dL/dp` with
//! `(L(p + h) − L(p − h)) / 2h` coordinate by coordinate. The difference of
//! losses is formed as `½⟨f₊ − f₋, f₊ + f₋⟩` to avoid cancellation, and `h`
//! is the step actually realised in the working precision.
//!
//! Error per coordinate is `|a − n| / max(|a|, |n|, floor)`.

use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::conv::{
    facet2facet_backward, facet2facet_forward, facet2vertex_backward, facet2vertex_forward, gmm_coefficients,
    vertex2facet_backward, vertex2facet_forward, BarycentricPlan, DepthwiseKernel, KRule, PlanConfig, Pointwise,
    SphereGmm, TexturedFacets, VertexGather, VertexToVertex,
};
use crate::decimate::{decimate_parallel, DecimationConfig};
use crate::features::{FeatureMatrix, Real};
use crate::mesh::{TriMesh, Vec3};
use crate::pool::{pool_backward, pool_clusters, unpool_backward, unpool_replace, ClusterIndex, PoolMode};
use crate::{par, synth, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    F64,
    F32,
}

impl std::str::FromStr for Precision {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "f64" | "float64" | "double" => Ok(Self::F64),
            "f32" | "float32" | "single" => Ok(Self::F32),
            _ => Err(format!("unknown precision {s:?} (expected f64 or f32)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckConfig {
    pub seed: u64,
    /// Randomized cases per operation.
    pub cases: usize,
    /// Approximate vertex counts of the random meshes; cycled over cases.
    pub sizes: Vec<usize>,
    pub eps: f64,
    pub floor: f64,
    pub threshold: f64,
    pub precision: Precision,
    /// Zero every feature input; all gradients and errors are then exactly 0.
    pub zero_features: bool,
}

impl GradcheckConfig {
    pub fn new(precision: Precision) -> Self {
        // In single precision a central difference at h = 1e-3 carries
        // absolute noise near ε·|f|/h ≈ 2e-4, so the floor sits well above
        // noise / threshold.
        let (eps, floor, threshold) = match precision {
            Precision::F64 => (1e-5, 1e-6, 1e-4),
            Precision::F32 => (1e-3, 1e-1, 1e-2),
        };
        Self {
            seed: 0,
            cases: 100,
            sizes: vec![9, 16, 25, 36],
            eps,
            floor,
            threshold,
            precision,
            zero_features: false,
        }
    }
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        Self::new(Precision::F64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpReport {
    pub name: &'static str,
    pub cases: usize,
    pub coordinates: usize,
    pub max_rel_error: f64,
    pub max_abs_gradient: f64,
    /// Set when the op was not checked, with the reason.
    pub skipped: Option<&'static str>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckReport {
    pub threshold: f64,
    pub ops: Vec<OpReport>,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.ops.iter().all(|o| o.skipped.is_some() || o.max_rel_error < self.threshold)
    }

    pub fn max_rel_error(&self) -> f64 {
        self.ops.iter().map(|o| o.max_rel_error).fold(0.0, f64::max)
    }
}

impl fmt::Display for GradcheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<20} {:>6} {:>8} {:>14} {:>12}  status",
            "operation", "cases", "coords", "max_rel_error", "max_|grad|"
        )?;
        for op in &self.ops {
            let status = match op.skipped {
                Some(why) => format!("skipped ({why})"),
                None if op.max_rel_error < self.threshold => "ok".into(),
                None => "FAIL".into(),
            };
            writeln!(
                f,
                "{:<20} {:>6} {:>8} {:>14.3e} {:>12.3e}  {status}",
                op.name, op.cases, op.coordinates, op.max_rel_error, op.max_abs_gradient
            )?;
        }
        write!(f, "threshold {:.0e}", self.threshold)
    }
}

type Forward<T> = Box<dyn Fn(&[T]) -> Result<Vec<T>> + Send + Sync>;
type Backward<T> = Box<dyn Fn(&[T], &[T]) -> Result<Vec<T>> + Send + Sync>;

/// A differentiable function of a flat parameter vector.
pub struct Case<T> {
    pub params: Vec<T>,
    pub forward: Forward<T>,
    /// `(params, upstream) -> dL/dparams`.
    pub backward: Backward<T>,
}

#[derive(Debug, Clone, Copy, Default)]
struct CaseResult {
    coordinates: usize,
    max_rel_error: f64,
    max_abs_gradient: f64,
}

fn check_case<T: Real>(case: &Case<T>, eps: f64, floor: f64) -> Result<CaseResult> {
    let f0 = (case.forward)(&case.params)?;
    let analytic = (case.backward)(&case.params, &f0)?;
    let mut res = CaseResult {
        coordinates: case.params.len(),
        ..CaseResult::default()
    };
    let mut p = case.params.clone();
    let h = T::of(eps);
    for j in 0..p.len() {
        let orig = p[j];
        let (up, down) = (orig + h, orig - h);
        p[j] = up;
        let fp = (case.forward)(&p)?;
        p[j] = down;
        let fm = (case.forward)(&p)?;
        p[j] = orig;
        let step = (up - down).as_f64();
        let diff: f64 = fp
            .iter()
            .zip(&fm)
            .map(|(&a, &b)| (a - b).as_f64() * (a + b).as_f64())
            .sum::<f64>()
            * 0.5;
        let numeric = diff / step;
        let a = analytic[j].as_f64();
        let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(floor);
        res.max_rel_error = res.max_rel_error.max(err);
        res.max_abs_gradient = res.max_abs_gradient.max(a.abs());
    }
    Ok(res)
}

const OPS: [&str; 11] = [
    "vertex2facet",
    "facet2facet",
    "facet2vertex",
    "facet2vertex_strided",
    "vertex2vertex",
    "pool_max",
    "pool_average",
    "pool_weighted",
    "pool_sum",
    "unpool",
    "pointwise",
];

pub fn run_gradcheck(config: &GradcheckConfig) -> Result<GradcheckReport> {
    match config.precision {
        Precision::F64 => run::<f64>(config),
        Precision::F32 => run::<f32>(config),
    }
}

fn run<T: Real>(config: &GradcheckConfig) -> Result<GradcheckReport> {
    let mut ops = Vec::with_capacity(OPS.len());
    for (op, &name) in OPS.iter().enumerate() {
        if config.zero_features && name == "pool_max" {
            ops.push(OpReport {
                name,
                cases: 0,
                coordinates: 0,
                max_rel_error: 0.0,
                max_abs_gradient: 0.0,
                skipped: Some("max is not differentiable at ties"),
            });
            continue;
        }
        let results = par::map_range(config.cases, |k| -> Result<CaseResult> {
            let mut rng = ChaCha8Rng::seed_from_u64(
                config.seed ^ (op as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (k as u64).wrapping_mul(0xD1B5_4A32_D192_ED03),
            );
            let size = config.sizes.get(k % config.sizes.len().max(1)).copied().unwrap_or(16);
            let case = build_case::<T>(name, size, config.zero_features, &mut rng)?;
            check_case(&case, config.eps, config.floor)
        });
        let mut report = OpReport {
            name,
            cases: config.cases,
            coordinates: 0,
            max_rel_error: 0.0,
            max_abs_gradient: 0.0,
            skipped: None,
        };
        for r in results {
            let r = r?;
            report.coordinates += r.coordinates;
            report.max_rel_error = report.max_rel_error.max(r.max_rel_error);
            report.max_abs_gradient = report.max_abs_gradient.max(r.max_abs_gradient);
        }
        ops.push(report);
    }
    Ok(GradcheckReport {
        threshold: config.threshold,
        ops,
    })
}

/// Random mesh of roughly `size` vertices: a jittered grid or a small torus.
pub fn random_mesh(size: usize, rng: &mut impl Rng) -> TriMesh {
    let base = if rng.random_bool(0.5) {
        let side = ((size as f64).sqrt().round() as usize).max(3);
        synth::noisy_grid(side, side, 0.3, rng.random())
    } else {
        let minor = 3 + size.saturating_sub(9) / 12;
        let major = (size / minor).max(3);
        synth::torus(major, minor, 1.0, 0.4)
    };
    let positions = base
        .positions
        .iter()
        .map(|p| std::array::from_fn(|a| p[a] + rng.random_range(-0.05..0.05)))
        .collect();
    TriMesh::new(positions, base.facets).expect("jitter keeps indices valid")
}

fn random_vec<T: Real>(n: usize, rng: &mut impl Rng) -> Vec<T> {
    (0..n).map(|_| T::of(rng.random_range(-1.0..=1.0))).collect()
}

fn features<T: Real>(n: usize, zero: bool, rng: &mut impl Rng) -> Vec<T> {
    let v = random_vec(n, rng);
    if zero {
        vec![T::zero(); n]
    } else {
        v
    }
}

fn random_plan(mesh: &TriMesh, rng: &mut impl Rng) -> Result<BarycentricPlan> {
    let areas: Vec<f64> = mesh.facet_geometry().iter().map(|g| g.area).collect();
    let config = PlanConfig {
        alpha: rng.random_range(1..=3),
        beta: rng.random_range(1..=3),
        rule: if rng.random_bool(0.5) {
            KRule::Literal
        } else {
            KRule::Scaled
        },
    };
    BarycentricPlan::build(&areas, config)
}

/// Mixture with random unit means and sigmas in `[0.5, 1.5]`, both trainable.
fn random_gmm(components: usize, rng: &mut impl Rng) -> Result<SphereGmm> {
    let means = (0..components)
        .map(|_| loop {
            let v: Vec3 = std::array::from_fn(|_| rng.random_range(-1.0..=1.0));
            let l = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            if l > 0.1 && l <= 1.0 {
                break [v[0] / l, v[1] / l, v[2] / l];
            }
        })
        .collect();
    let sigmas = (0..components).map(|_| rng.random_range(0.5..=1.5)).collect();
    let mut gmm = SphereGmm::new(means, sigmas)?;
    gmm.train_means = true;
    gmm.train_sigmas = true;
    Ok(gmm)
}

/// Mixture with sigma / mean parameters read from the flat vector.
fn gmm_from<T: Real>(base: &SphereGmm, sigmas: &[T], means: &[T]) -> SphereGmm {
    let mut g = base.clone();
    g.set_sigmas_unchecked(sigmas.iter().map(|s| s.as_f64()).collect());
    g.set_means_unchecked(
        means
            .chunks_exact(3)
            .map(|m| [m[0].as_f64(), m[1].as_f64(), m[2].as_f64()])
            .collect(),
    );
    g
}

fn gmm_params<T: Real>(gmm: &SphereGmm) -> Vec<T> {
    let mut p: Vec<T> = gmm.sigmas().iter().map(|&s| T::of(s)).collect();
    p.extend(gmm.means().iter().flatten().map(|&m| T::of(m)));
    p
}

fn clusters(mesh: &TriMesh, rng: &mut impl Rng) -> Result<crate::decimate::DecimationResult> {
    let n = mesh.vertex_count();
    let target = rng.random_range((n / 3).max(1)..n);
    decimate_parallel(mesh, &DecimationConfig::new(target).with_seed(rng.random()))
}

fn matrix<T: Real>(rows: usize, cols: usize, data: &[T]) -> Result<FeatureMatrix<T>> {
    FeatureMatrix::from_vec(rows, cols, data.to_vec())
}

/// Builds the randomized case for operation `name`.
pub fn build_case<T: Real>(name: &str, size: usize, zero: bool, rng: &mut impl Rng) -> Result<Case<T>> {
    let mesh = random_mesh(size, rng);
    let (nv, nf) = (mesh.vertex_count(), mesh.facet_count());
    let channels = rng.random_range(1..=3);
    let lambda = rng.random_range(1..=2);
    match name {
        "vertex2facet" => {
            let plan = random_plan(&mesh, rng)?;
            let nx = nv * channels;
            let mut params = features::<T>(nx, zero, rng);
            params.extend(random_vec::<T>(3 * channels * lambda, rng));
            let (m1, p1) = (mesh.clone(), plan.clone());
            let forward: Forward<T> = Box::new(move |p| {
                let k = DepthwiseKernel::new(3, channels, lambda, p[nx..].to_vec())?;
                Ok(vertex2facet_forward(&m1, &matrix(nv, channels, &p[..nx])?, &k, &p1)?.into_vec())
            });
            let backward: Backward<T> = Box::new(move |p, g| {
                let k = DepthwiseKernel::new(3, channels, lambda, p[nx..].to_vec())?;
                let g = matrix(nf, channels * lambda, g)?;
                let (gi, gw) = vertex2facet_backward(&mesh, &matrix(nv, channels, &p[..nx])?, &k, &plan, &g)?;
                let mut out = gi.into_vec();
                out.extend_from_slice(gw.as_slice());
                Ok(out)
            });
            Ok(Case { params, forward, backward })
        }
        "facet2facet" => {
            let tex = TexturedFacets::<T>::random(nf, 4, channels, rng)?;
            let ns = tex.features().rows() * channels;
            let mut params = features::<T>(ns, zero, rng);
            params.extend(random_vec::<T>(3 * channels * lambda, rng));
            let t1 = tex.clone();
            let forward: Forward<T> = Box::new(move |p| {
                let t = t1.with_features(matrix(ns / channels, channels, &p[..ns])?)?;
                let k = DepthwiseKernel::new(3, channels, lambda, p[ns..].to_vec())?;
                Ok(facet2facet_forward(&t, &k)?.into_vec())
            });
            let backward: Backward<T> = Box::new(move |p, g| {
                let t = tex.with_features(matrix(ns / channels, channels, &p[..ns])?)?;
                let k = DepthwiseKernel::new(3, channels, lambda, p[ns..].to_vec())?;
                let (gx, gw) = facet2facet_backward(&t, &k, &matrix(nf, channels * lambda, g)?)?;
                let mut out = gx.into_vec();
                out.extend_from_slice(gw.as_slice());
                Ok(out)
            });
            Ok(Case { params, forward, backward })
        }
        "facet2vertex" | "facet2vertex_strided" => {
            let gather = if name == "facet2vertex" {
                VertexGather::new(&mesh)
            } else {
                let r = clusters(&mesh, rng)?;
                VertexGather::strided(&mesh, &r.mapping, r.output_vertex_count())?
            };
            let taps = [1, 3, 6][rng.random_range(0..3)];
            let gmm = random_gmm(taps, rng)?;
            let normals: Vec<Vec3> = mesh.facet_geometry().iter().map(|g| g.normal).collect();
            let nj = nf * channels;
            let nw = taps * channels * lambda;
            let mut params = features::<T>(nj, zero, rng);
            params.extend(random_vec::<T>(nw, rng));
            params.extend(gmm_params::<T>(&gmm));
            let split = move |p: &[T]| -> Result<(FeatureMatrix<T>, DepthwiseKernel<T>, SphereGmm)> {
                let j = matrix(nf, channels, &p[..nj])?;
                let k = DepthwiseKernel::new(taps, channels, lambda, p[nj..nj + nw].to_vec())?;
                let g = gmm_from(&gmm, &p[nj + nw..nj + nw + taps], &p[nj + nw + taps..]);
                Ok((j, k, g))
            };
            let (g1, n1, s1) = (gather.clone(), normals.clone(), split.clone());
            let forward: Forward<T> = Box::new(move |p| {
                let (j, k, g) = s1(p)?;
                let pi = gmm_coefficients::<T>(&n1, &g);
                Ok(facet2vertex_forward(&g1, &j, &k, &pi)?.into_vec())
            });
            let backward: Backward<T> = Box::new(move |p, up| {
                let (j, k, g) = split(p)?;
                let pi = gmm_coefficients::<T>(&normals, &g);
                let up = matrix(gather.output_count(), channels * lambda, up)?;
                let gr = facet2vertex_backward(&gather, &j, &k, &pi, &up, Some((&normals, &g)))?;
                let mut out = gr.features.into_vec();
                out.extend_from_slice(gr.weights.as_slice());
                out.extend(gr.sigmas.expect("trainable").into_iter().map(T::of));
                out.extend(gr.means.expect("trainable").into_iter().flatten().map(T::of));
                Ok(out)
            });
            Ok(Case { params, forward, backward })
        }
        "vertex2vertex" => {
            let plan = random_plan(&mesh, rng)?;
            let gather = VertexGather::new(&mesh);
            let taps = [1, 3, 6][rng.random_range(0..3)];
            let gmm = random_gmm(taps, rng)?;
            let lambda2 = rng.random_range(1..=2);
            let mid = channels * lambda;
            let nx = nv * channels;
            let nfk = 3 * mid;
            let nvk = taps * mid * lambda2;
            let mut params = features::<T>(nx, zero, rng);
            params.extend(random_vec::<T>(nfk + nvk, rng));
            params.extend(gmm_params::<T>(&gmm));
            let split = move |p: &[T]| -> Result<(FeatureMatrix<T>, VertexToVertex<T>)> {
                let x = matrix(nv, channels, &p[..nx])?;
                let fk = DepthwiseKernel::new(3, channels, lambda, p[nx..nx + nfk].to_vec())?;
                let vk = DepthwiseKernel::new(taps, mid, lambda2, p[nx + nfk..nx + nfk + nvk].to_vec())?;
                let o = nx + nfk + nvk;
                let g = gmm_from(&gmm, &p[o..o + taps], &p[o + taps..]);
                Ok((x, VertexToVertex::new(fk, vk, g)?))
            };
            let (m1, p1, g1, s1) = (mesh.clone(), plan.clone(), gather.clone(), split.clone());
            let forward: Forward<T> = Box::new(move |p| {
                let (x, layer) = s1(p)?;
                Ok(layer.forward(&m1, &p1, &g1, &x)?.0.into_vec())
            });
            let backward: Backward<T> = Box::new(move |p, up| {
                let (x, layer) = split(p)?;
                let (_, cache) = layer.forward(&mesh, &plan, &gather, &x)?;
                let up = matrix(nv, layer.output_channels(), up)?;
                let gr = layer.backward(&mesh, &plan, &gather, &x, &cache, &up)?;
                let mut out = gr.features.into_vec();
                out.extend_from_slice(gr.facet_kernel.as_slice());
                out.extend_from_slice(gr.vertex_kernel.as_slice());
                out.extend(gr.sigmas.expect("trainable").into_iter().map(T::of));
                out.extend(gr.means.expect("trainable").into_iter().flatten().map(T::of));
                Ok(out)
            });
            Ok(Case { params, forward, backward })
        }
        "pool_max" | "pool_average" | "pool_weighted" | "pool_sum" => {
            let mode = match name {
                "pool_max" => PoolMode::Max,
                "pool_average" => PoolMode::Average,
                "pool_weighted" => PoolMode::Weighted,
                _ => PoolMode::Sum,
            };
            let index = ClusterIndex::from_result(&clusters(&mesh, rng)?)?;
            let weights: Vec<T> = (0..nv).map(|_| T::of(rng.random_range(0.1..=1.0))).collect();
            let mut params = features::<T>(nv * channels, zero, rng);
            if mode == PoolMode::Max && !zero {
                // distinct values spaced far beyond 2h keep every difference
                // inside one linear piece of the max
                let n = params.len();
                let mut ranks: Vec<usize> = (0..n).collect();
                ranks.shuffle(rng);
                for (x, r) in params.iter_mut().zip(ranks) {
                    *x = T::of(2.0 * r as f64 / n as f64 - 1.0);
                }
            }
            let (i1, w1) = (index.clone(), weights.clone());
            let forward: Forward<T> = Box::new(move |p| {
                Ok(pool_clusters(&matrix(nv, channels, p)?, &i1, mode, Some(&w1))?.features.into_vec())
            });
            let backward: Backward<T> = Box::new(move |p, up| {
                let pooled = pool_clusters(&matrix(nv, channels, p)?, &index, mode, Some(&weights))?;
                let up = matrix(index.output_count(), channels, up)?;
                Ok(pool_backward(&up, &index, mode, Some(&weights), pooled.argmax.as_deref())?.into_vec())
            });
            Ok(Case { params, forward, backward })
        }
        "unpool" => {
            let r = clusters(&mesh, rng)?;
            let index = ClusterIndex::from_result(&r)?;
            let n_out = index.output_count();
            let params = features::<T>(n_out * channels, zero, rng);
            let replace = r.replace.clone();
            let forward: Forward<T> =
                Box::new(move |p| Ok(unpool_replace(&matrix(n_out, channels, p)?, &replace)?.into_vec()));
            let backward: Backward<T> =
                Box::new(move |_, up| Ok(unpool_backward(&matrix(nv, channels, up)?, &index)?.into_vec()));
            Ok(Case { params, forward, backward })
        }
        "pointwise" => {
            let (inputs, outputs) = (rng.random_range(1..=4), rng.random_range(1..=4));
            let mut layer = Pointwise::<T>::random(inputs, outputs, rng);
            if zero {
                layer.bias_mut().iter_mut().for_each(|b| *b = T::zero());
            }
            let nx = nv * inputs;
            let nw = inputs * outputs;
            let mut params = features::<T>(nx, zero, rng);
            params.extend_from_slice(layer.weights());
            params.extend_from_slice(layer.bias());
            let split = move |p: &[T]| -> Result<(FeatureMatrix<T>, Pointwise<T>)> {
                let l = Pointwise::new(inputs, outputs, p[nx..nx + nw].to_vec(), p[nx + nw..].to_vec())?;
                Ok((matrix(nv, inputs, &p[..nx])?, l))
            };
            let s1 = split;
            let forward: Forward<T> = Box::new(move |p| {
                let (x, l) = s1(p)?;
                Ok(l.forward(&x)?.into_vec())
            });
            let backward: Backward<T> = Box::new(move |p, up| {
                let (x, l) = split(p)?;
                let g = l.backward(&x, &matrix(nv, outputs, up)?)?;
                let mut out = g.input.into_vec();
                out.extend(g.weights);
                out.extend(g.bias);
                Ok(out)
            });
            Ok(Case { params, forward, backward })
        }
        other => Err(crate::Error::Config(format!("unknown gradcheck operation {other:?}"))),
    }
}

/// Names of the checked operations, in report order.
pub fn operations() -> &'static [&'static str] {
    &OPS
}
