//! End-to-end acceptance checks. Each criterion prints one `PASS` / `FAIL`
//! line; the test fails if any criterion fails.

mod common;

use std::time::Instant;

use common::{max_abs_diff, naive_facet2facet, naive_facet2vertex, naive_vertex2facet};
use meshforge::bench::{linear_fit, median};
use meshforge::conv::{
    facet2facet_forward, facet2vertex_forward, gmm_coefficients, vertex2facet_forward, BarycentricPlan,
    DepthwiseKernel, KRule, PlanConfig, SphereGmm, TexturedFacets, VertexGather,
};
use meshforge::decimate::{
    decimate_parallel, decimate_parallel_batch, decimate_qem, quality_report, DecimationConfig, OracleConfig,
    Rounds,
};
use meshforge::gradcheck::{run_gradcheck, GradcheckConfig, Precision};
use meshforge::io::concat_batch;
use meshforge::mesh::Vec3;
use meshforge::{synth, FeatureMatrix, TriMesh};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    name: &'static str,
    passed: bool,
    detail: String,
}

fn outcome(name: &'static str, passed: bool, detail: String) -> Outcome {
    println!("{} {name}: {detail}", if passed { "PASS" } else { "FAIL" });
    Outcome { name, passed, detail }
}

fn time_ms<R>(f: impl FnOnce() -> R) -> (R, f64) {
    let start = Instant::now();
    let r = f();
    (r, start.elapsed().as_secs_f64() * 1e3)
}

fn median_ms<R>(repeats: usize, mut f: impl FnMut() -> R) -> (R, f64) {
    let mut times = Vec::with_capacity(repeats);
    let mut last = None;
    for _ in 0..repeats {
        let (r, ms) = time_ms(&mut f);
        times.push(ms);
        last = Some(r);
    }
    (last.unwrap(), median(&times).unwrap())
}

fn toy_clustering() -> Outcome {
    const LIMIT_MS: f64 = 1.0;
    let mesh = synth::toy_fan_mesh();
    let (c, e, a, f) = (2, 4, 0, 5);
    let mut config = DecimationConfig::new(2).with_rounds(Rounds::Explicit(1));
    config.priority_pairs = vec![(c, e), (a, f)];
    decimate_parallel(&mesh, &config).unwrap();
    let (result, ms) = median_ms(11, || decimate_parallel(&mesh, &config).unwrap());
    let mut clusters = result.clusters();
    clusters.sort();
    let expected = vec![vec![0, 1, 5], vec![2, 3, 4]];
    outcome(
        "toy_clustering",
        clusters == expected && ms < LIMIT_MS,
        format!("clusters {clusters:?} (expected {expected:?}) in {ms:.3} ms (limit {LIMIT_MS} ms)"),
    )
}

fn halving_fidelity() -> Outcome {
    const FACET_RATIO: f64 = 0.36;
    const RATIO_TOL: f64 = 0.05;
    const LIMIT_MS: f64 = 5000.0;
    let mesh = synth::bumpy_torus(100_000, 1);
    let (n_in, m_in) = (mesh.vertex_count(), mesh.facet_count());
    let n = n_in.div_ceil(2);
    let config = DecimationConfig::new(n).with_rounds(Rounds::Explicit(1)).with_seed(1);
    let (result, ms) = time_ms(|| decimate_parallel(&mesh, &config).unwrap());
    let n_out = result.output_vertex_count();
    let m_out = result.mesh.facet_count();
    let expected = FACET_RATIO * m_in as f64;
    let rel = (m_out as f64 - expected).abs() / expected;
    outcome(
        "halving_fidelity",
        n_out == n && rel <= RATIO_TOL && ms < LIMIT_MS,
        format!(
            "{n_in} -> {n_out} vertices (target {n}), {m_in} -> {m_out} facets, ratio {:.3} vs {FACET_RATIO} \
             (off by {:.1}%, tolerance {:.0}%), {ms:.0} ms (limit {LIMIT_MS} ms)",
            m_out as f64 / m_in as f64,
            100.0 * rel,
            100.0 * RATIO_TOL
        ),
    )
}

fn quality_vs_oracle() -> Outcome {
    const MAX_RATIO: f64 = 2.0;
    let meshes = [
        synth::bumpy_torus(5_000, 11),
        synth::noisy_grid(80, 80, 0.3, 12),
        synth::bumpy_torus(10_000, 13),
        synth::wavy_grid(110, 110),
        synth::bumpy_torus(20_000, 14),
    ];
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for mesh in &meshes {
        let n = mesh.vertex_count().div_ceil(2);
        let ours = decimate_parallel(mesh, &DecimationConfig::new(n).with_seed(3)).unwrap();
        let oracle = decimate_qem(mesh, &OracleConfig::vertices(n)).unwrap();
        assert_eq!(ours.output_vertex_count(), oracle.output_vertex_count());
        let e_ours = quality_report(mesh, &ours).unwrap().mean_error;
        let e_oracle = quality_report(mesh, &oracle).unwrap().mean_error;
        let ratio = e_ours / e_oracle;
        worst = worst.max(ratio);
        parts.push(format!("{}:{ratio:.2}", mesh.vertex_count()));
    }
    outcome(
        "quality_vs_oracle",
        worst <= MAX_RATIO,
        format!("mean error ratio per mesh [{}], worst {worst:.2} (limit {MAX_RATIO})", parts.join(" ")),
    )
}

fn speed_vs_oracle() -> Outcome {
    const MIN_SPEEDUP: f64 = 3.0;
    let mesh = synth::bumpy_torus(60_000, 2);
    let n = mesh.vertex_count().div_ceil(2);
    let config = DecimationConfig::new(n).with_seed(5);
    let (_, ours) = median_ms(3, || decimate_parallel(&mesh, &config).unwrap());
    let (_, oracle) = median_ms(3, || decimate_qem(&mesh, &OracleConfig::vertices(n)).unwrap());
    let speedup = oracle / ours;
    outcome(
        "speed_vs_oracle",
        speedup >= MIN_SPEEDUP,
        format!(
            "{} vertices: parallel {ours:.1} ms, oracle {oracle:.1} ms, speedup {speedup:.2}x (minimum {MIN_SPEEDUP}x, {} worker threads)",
            mesh.vertex_count(),
            meshforge::par::current_num_threads()
        ),
    )
}

fn linear_scaling() -> Outcome {
    const MIN_R2: f64 = 0.9;
    const LIMIT_S: f64 = 120.0;
    let start = Instant::now();
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    let mut size = 2_000;
    while size <= 128_000 {
        let mesh = synth::bumpy_torus(size, 7);
        let config = DecimationConfig::new(mesh.vertex_count().div_ceil(2)).with_seed(7);
        let (_, ms) = median_ms(3, || decimate_parallel(&mesh, &config).unwrap());
        xs.push(mesh.vertex_count() as f64);
        ys.push(ms);
        size *= 2;
    }
    let total = start.elapsed().as_secs_f64();
    let fit = linear_fit(&xs, &ys).unwrap();
    let points: Vec<String> = xs.iter().zip(&ys).map(|(x, y)| format!("{x}:{y:.1}")).collect();
    outcome(
        "linear_scaling",
        fit.r_squared >= MIN_R2 && total < LIMIT_S,
        format!(
            "R^2 {:.4} (minimum {MIN_R2}) over [{}] ms, sweep {total:.1} s (limit {LIMIT_S} s)",
            fit.r_squared,
            points.join(" ")
        ),
    )
}

fn gradient_fidelity() -> Outcome {
    const LIMIT_S: f64 = 30.0;
    let config = GradcheckConfig::new(Precision::F64);
    assert_eq!(config.cases, 100);
    let (report, ms) = time_ms(|| run_gradcheck(&config).unwrap());
    let skipped = report.ops.iter().any(|op| op.skipped.is_some());
    let worst = report
        .ops
        .iter()
        .max_by(|a, b| a.max_rel_error.total_cmp(&b.max_rel_error))
        .unwrap();
    outcome(
        "gradient_fidelity",
        report.passed() && !skipped && ms / 1e3 < LIMIT_S,
        format!(
            "{} ops x {} cases, max relative error {:.2e} ({}) (limit {:.0e}), {:.1} s (limit {LIMIT_S} s)",
            report.ops.len(),
            config.cases,
            worst.max_rel_error,
            worst.name,
            report.threshold,
            ms / 1e3
        ),
    )
}

fn random_unit(rng: &mut impl Rng) -> Vec3 {
    loop {
        let v: Vec3 = [0; 3].map(|_| rng.random_range(-1.0..1.0));
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 1e-3 && n <= 1.0 {
            return v.map(|x| x / n);
        }
    }
}

fn normalization() -> Outcome {
    const CASES: usize = 10_000;
    const PI_TOL: f64 = 1e-9;
    const XI_TOL: f64 = 1e-12;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let (mut pi_err, mut xi_err): (f64, f64) = (0.0, 0.0);
    let mut negative = false;
    for case in 0..CASES {
        let t = rng.random_range(1..=24);
        let means = (0..t).map(|_| random_unit(&mut rng)).collect();
        let sigmas = (0..t).map(|_| 10f64.powf(rng.random_range(-2.0..1.0))).collect();
        let gmm = SphereGmm::new(means, sigmas).unwrap();
        let normals: Vec<Vec3> = (0..4)
            .map(|k| if k == 0 && case % 10 == 0 { [0.0; 3] } else { random_unit(&mut rng) })
            .collect();
        let pi = gmm_coefficients::<f64>(&normals, &gmm);
        for i in 0..normals.len() {
            let row = pi.row(i);
            negative |= row.iter().any(|&p| p < 0.0);
            pi_err = pi_err.max((row.iter().sum::<f64>() - 1.0).abs());
        }

        let facets = rng.random_range(1..6);
        let areas: Vec<f64> = (0..facets).map(|_| rng.random_range(0.0..10.0)).collect();
        let config = PlanConfig {
            alpha: rng.random_range(1..6),
            beta: rng.random_range(1..6),
            rule: if rng.random_bool(0.5) { KRule::Literal } else { KRule::Scaled },
        };
        let plan = BarycentricPlan::build(&areas, config).unwrap();
        for f in 0..facets {
            for xi in plan.points(f) {
                negative |= xi.iter().any(|&x| x < 0.0);
                xi_err = xi_err.max((xi.iter().sum::<f64>() - 1.0).abs());
            }
        }
    }
    outcome(
        "normalization",
        pi_err <= PI_TOL && xi_err <= XI_TOL && !negative,
        format!(
            "{CASES} cases: max |sum pi - 1| {pi_err:.1e} (limit {PI_TOL:.0e}), max |sum xi - 1| {xi_err:.1e} \
             (limit {XI_TOL:.0e}), negative entries: {negative}"
        ),
    )
}

fn invariance() -> Outcome {
    let mesh = common::fixture("asymmetric.obj");
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let gmm = SphereGmm::with_components(18).unwrap();
    let channels = 3;
    let j = FeatureMatrix::from_vec(
        mesh.facet_count(),
        channels,
        (0..mesh.facet_count() * channels).map(|_| rng.random_range(-1.0..1.0)).collect(),
    )
    .unwrap();
    let w = DepthwiseKernel::random(18, channels, 2, &mut rng).unwrap();
    let gather = VertexGather::new(&mesh);
    let run = |m: &TriMesh| {
        let normals: Vec<Vec3> = m.facet_geometry().iter().map(|g| g.normal).collect();
        let pi = gmm_coefficients::<f64>(&normals, &gmm);
        facet2vertex_forward(&gather, &j, &w, &pi).unwrap()
    };
    let base = run(&mesh);
    let bits = |f: &FeatureMatrix<f64>| f.as_slice().iter().map(|x| x.to_bits()).collect::<Vec<_>>();

    let translated = mesh.transformed(|p| [p[0] + 17.0, p[1] - 5.0, p[2] + 3.0]);
    let scaled = mesh.transformed(|p| p.map(|x| x * 3.0));
    let shrunk = mesh.transformed(|p| p.map(|x| x * 0.25));
    let (s, c) = (0.7f64.sin(), 0.7f64.cos());
    let axis = {
        let n = 14f64.sqrt();
        [1.0 / n, 2.0 / n, 3.0 / n]
    };
    // Rodrigues rotation about `axis`
    let rotated = mesh.transformed(|p| {
        let k = axis;
        let kxp = [k[1] * p[2] - k[2] * p[1], k[2] * p[0] - k[0] * p[2], k[0] * p[1] - k[1] * p[0]];
        let kdp = k[0] * p[0] + k[1] * p[1] + k[2] * p[2];
        [0, 1, 2].map(|a| p[a] * c + kxp[a] * s + k[a] * kdp * (1.0 - c))
    });
    let same_t = bits(&run(&translated)) == bits(&base);
    let same_s = bits(&run(&scaled)) == bits(&base) && bits(&run(&shrunk)) == bits(&base);
    let rot_diff = max_abs_diff(&run(&rotated), &base);
    outcome(
        "invariance",
        same_t && same_s && rot_diff > 1e-6,
        format!(
            "bitwise equal under translation: {same_t}, under scaling x3 and x0.25: {same_s}; \
             max change under rotation {rot_diff:.3e}"
        ),
    )
}

fn oracle_equivalence() -> Outcome {
    const TOL: f64 = 1e-9;
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut worst: f64 = 0.0;
    let mut meshes = 0;
    for (_, mesh) in common::fixture_corpus().into_iter().filter(|(_, m)| m.facet_count() <= 10) {
        meshes += 1;
        let areas: Vec<f64> = mesh.facet_geometry().iter().map(|g| g.area).collect();
        let plan = BarycentricPlan::build(&areas, PlanConfig { alpha: 2, beta: 2, rule: KRule::Scaled }).unwrap();
        let (c, lambda) = (3, 2);
        let mut features = |rows| {
            FeatureMatrix::from_vec(rows, c, (0..rows * c).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
        };
        let x = features(mesh.vertex_count());
        let j = features(mesh.facet_count());
        let mut rng = ChaCha8Rng::seed_from_u64(mesh.vertex_count() as u64);
        let w3 = DepthwiseKernel::random(3, c, lambda, &mut rng).unwrap();
        let gmm = SphereGmm::with_components(8).unwrap();
        let wt = DepthwiseKernel::random(8, c, lambda, &mut rng).unwrap();
        let normals: Vec<Vec3> = mesh.facet_geometry().iter().map(|g| g.normal).collect();
        let pi = gmm_coefficients::<f64>(&normals, &gmm);
        let textures = TexturedFacets::random(mesh.facet_count(), 5, c, &mut rng).unwrap();

        worst = worst.max(max_abs_diff(
            &vertex2facet_forward(&mesh, &x, &w3, &plan).unwrap(),
            &naive_vertex2facet(&mesh, &x, &w3, &plan),
        ));
        worst = worst.max(max_abs_diff(
            &facet2facet_forward(&textures, &w3).unwrap(),
            &naive_facet2facet(&textures, &w3),
        ));
        worst = worst.max(max_abs_diff(
            &facet2vertex_forward(&VertexGather::new(&mesh), &j, &wt, &pi).unwrap(),
            &naive_facet2vertex(&mesh, &j, &wt, &common::naive_coefficients(&normals, &gmm)),
        ));
    }
    outcome(
        "oracle_equivalence",
        meshes >= 8 && worst <= TOL,
        format!("{meshes} fixture meshes, max deviation from scalar loops {worst:.2e} (limit {TOL:.0e})"),
    )
}

fn batch_soundness() -> Outcome {
    let meshes = vec![
        synth::bumpy_torus(3_000, 1),
        synth::noisy_grid(40, 30, 0.2, 2),
        synth::icosphere(4),
        synth::bumpy_torus(2_000, 3),
    ];
    let target = 700;
    let config = DecimationConfig::new(target).with_seed(8);
    let batch = concat_batch(&meshes).unwrap();
    let batched = decimate_parallel_batch(&batch, &config).unwrap();

    let singles: Vec<_> = meshes.iter().map(|m| decimate_parallel(m, &config).unwrap()).collect();
    let joined = concat_batch(&singles.iter().map(|r| r.mesh.clone()).collect::<Vec<_>>()).unwrap();
    let mut replace = Vec::new();
    let mut mapping = Vec::new();
    let mut offset = 0;
    for r in &singles {
        replace.extend(r.replace.iter().map(|&x| x + offset));
        mapping.extend(r.mapping.iter().map(|&m| if m < 0 { m } else { m + offset as i64 }));
        offset += r.output_vertex_count();
    }
    let equal = batched.result.mesh == joined.mesh
        && batched.result.replace == replace
        && batched.result.mapping == mapping
        && batched.vertex_offsets == joined.vertex_offsets
        && batched.facet_offsets == joined.facet_offsets;
    outcome(
        "batch_soundness",
        equal,
        format!(
            "4 meshes ({} vertices) -> {} each; batched equals per-mesh concatenation: {equal}",
            batch.mesh.vertex_count(),
            target
        ),
    )
}

#[test]
fn acceptance() {
    let outcomes = [
        toy_clustering(),
        halving_fidelity(),
        quality_vs_oracle(),
        speed_vs_oracle(),
        linear_scaling(),
        gradient_fidelity(),
        normalization(),
        invariance(),
        oracle_equivalence(),
        batch_soundness(),
    ];
    let failed: Vec<String> = outcomes
        .iter()
        .filter(|o| !o.passed)
        .map(|o| format!("{}: {}", o.name, o.detail))
        .collect();
    println!("{} of {} criteria passed", outcomes.len() - failed.len(), outcomes.len());
    assert!(failed.is_empty(), "failed criteria:\n{}", failed.join("\n"));
}
