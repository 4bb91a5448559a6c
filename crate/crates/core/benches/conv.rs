use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use meshforge::conv::{BarycentricPlan, DepthwiseKernel, PlanConfig, SphereGmm, VertexGather, VertexToVertex};
use meshforge::decimate::{decimate_parallel, DecimationConfig};
use meshforge::pool::{pool, PoolMode};
use meshforge::{synth, FeatureMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[cfg(feature = "parallel")]
fn on_threads<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> R {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

#[cfg(not(feature = "parallel"))]
fn on_threads<R: Send>(_threads: usize, f: impl FnOnce() -> R + Send) -> R {
    f()
}

fn variants() -> Vec<(&'static str, usize)> {
    if cfg!(feature = "parallel") {
        vec![("parallel", 0), ("one_thread", 1)]
    } else {
        vec![("sequential", 1)]
    }
}

fn features(rows: usize, cols: usize, rng: &mut impl Rng) -> FeatureMatrix<f64> {
    FeatureMatrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn vertex2vertex(c: &mut Criterion) {
    let mut group = c.benchmark_group("vertex2vertex");
    group.sample_size(10);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mesh = synth::bumpy_torus(20_000, 1);
    let areas: Vec<f64> = mesh.facet_geometry().iter().map(|g| g.area).collect();
    let plan = BarycentricPlan::build(&areas, PlanConfig { alpha: 2, beta: 1, ..PlanConfig::default() }).unwrap();
    let gather = VertexGather::new(&mesh);
    let channels = 16;
    let layer = VertexToVertex::new(
        DepthwiseKernel::random(3, channels, 2, &mut rng).unwrap(),
        DepthwiseKernel::random(18, 2 * channels, 1, &mut rng).unwrap(),
        SphereGmm::with_components(18).unwrap(),
    )
    .unwrap();
    let x = features(mesh.vertex_count(), channels, &mut rng);
    let (out, cache) = layer.forward(&mesh, &plan, &gather, &x).unwrap();
    let grad = features(out.rows(), out.cols(), &mut rng);
    for (name, threads) in variants() {
        group.bench_function(BenchmarkId::new("forward", name), |b| {
            b.iter(|| on_threads(threads, || layer.forward(&mesh, &plan, &gather, black_box(&x)).unwrap()))
        });
        group.bench_function(BenchmarkId::new("backward", name), |b| {
            b.iter(|| {
                on_threads(threads, || {
                    layer.backward(&mesh, &plan, &gather, black_box(&x), &cache, black_box(&grad)).unwrap()
                })
            })
        });
    }
    group.finish();
}

fn pooling(c: &mut Criterion) {
    let mut group = c.benchmark_group("pooling");
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mesh = synth::bumpy_torus(50_000, 2);
    let result = decimate_parallel(&mesh, &DecimationConfig::new(mesh.vertex_count() / 2).with_seed(2)).unwrap();
    let x = features(mesh.vertex_count(), 32, &mut rng);
    for (name, threads) in variants() {
        for mode in [PoolMode::Max, PoolMode::Average] {
            group.bench_function(BenchmarkId::new(format!("{mode:?}").to_lowercase(), name), |b| {
                b.iter(|| on_threads(threads, || pool(black_box(&x), &result, mode, None).unwrap()))
            });
        }
    }
    group.finish();
}

criterion_group!(benches, vertex2vertex, pooling);
criterion_main!(benches);
