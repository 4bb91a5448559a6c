use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use meshforge::bench::{linear_fit, median, run_once, Algorithm, BenchRecord};
use meshforge::decimate::{
    decimate_parallel, quality_report, write_sidecar, DecimationConfig, DecimationResult, PlacementRule, Rounds,
};
use meshforge::gradcheck::{run_gradcheck, GradcheckConfig, Precision};
use meshforge::io::{load_mesh, load_mesh_with_stats, save_mesh, MeshFormat};
use meshforge::{synth, Error, TriMesh};

const THREADS_ENV: &str = "MESHFORGE_THREADS";
const CSV_SCHEMA_LINE: &str = "# schema: meshforge-bench/1";
const CSV_HEADER: [&str; 7] = [
    "input_vertices",
    "input_facets",
    "target_vertices",
    "algorithm",
    "wall_ms",
    "mean_quadric_error",
    "seed",
];

const EXIT_CHECK: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;

#[derive(Parser)]
#[command(name = "meshforge", version, about = "Parallel mesh decimation, pooling and mesh convolutions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decimate a mesh and write the result plus a cluster sidecar.
    Decimate(DecimateArgs),
    /// Time decimation over a set of meshes and emit CSV records.
    Bench(BenchArgs),
    /// Finite-difference check of every backward pass.
    Gradcheck(GradcheckArgs),
    /// Parse a mesh and print summary statistics.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct DecimateArgs {
    input: PathBuf,
    output: PathBuf,
    #[arg(long, short = 'n')]
    target_vertices: usize,
    /// `auto` or a round count.
    #[arg(long, default_value = "auto")]
    rounds: Rounds,
    #[arg(long, default_value = "average")]
    placement: PlacementRule,
    /// Seed for shuffling near-equal edge costs; omit for a strict cost order.
    #[arg(long)]
    seed: Option<u64>,
    /// Format of both input and output: obj, ply or auto (from extensions).
    #[arg(long, default_value = "auto")]
    format: MeshFormat,
    /// Sidecar path; defaults to `<output>.clusters`.
    #[arg(long)]
    sidecar: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Glob patterns for input meshes.
    inputs: Vec<String>,
    /// Also benchmark generated perturbed grids with roughly these vertex counts.
    #[arg(long, value_delimiter = ',')]
    synthetic: Vec<usize>,
    /// Targets as fractions of the input size (`0.5`) or absolute counts (`1000`).
    #[arg(long, value_delimiter = ',', default_value = "0.5")]
    targets: Vec<Target>,
    #[arg(long, value_delimiter = ',', default_value = "parallel,qem_oracle")]
    algorithms: Vec<Algorithm>,
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV destination; standard output when omitted.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Mesh sizes (grid vertex counts) sampled for the random cases.
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    /// Finite-difference step; defaults by precision.
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long, default_value = "f64")]
    precision: Precision,
    #[arg(long)]
    cases: Option<usize>,
    /// Pass threshold on the relative error; defaults by precision.
    #[arg(long)]
    threshold: Option<f64>,
    /// Run every case with all-zero features.
    #[arg(long)]
    zero_features: bool,
}

#[derive(Args)]
struct ValidateArgs {
    input: PathBuf,
    #[arg(long, default_value = "auto")]
    format: MeshFormat,
}

#[derive(Debug, Clone, Copy)]
enum Target {
    Fraction(f64),
    Count(usize),
}

impl Target {
    fn resolve(self, vertices: usize) -> usize {
        match self {
            Target::Fraction(f) => ((vertices as f64 * f).round() as usize).max(1),
            Target::Count(n) => n,
        }
    }
}

impl std::str::FromStr for Target {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if let Ok(n) = s.parse::<usize>() {
            return Ok(Target::Count(n));
        }
        match s.parse::<f64>() {
            Ok(f) if f > 0.0 && f <= 1.0 => Ok(Target::Fraction(f)),
            _ => Err(format!("target must be a fraction in (0, 1] or a vertex count, got {s:?}")),
        }
    }
}

/// Failure with an exit status attached.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    fn new(code: u8, error: impl Into<anyhow::Error>) -> Self {
        Self { code, error: error.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::new(exit_code_for(&e), e)
    }
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::Infeasible { .. } => EXIT_INFEASIBLE,
        Error::Parse { .. }
        | Error::Format { .. }
        | Error::Io { .. }
        | Error::IndexOutOfRange { .. }
        | Error::RepeatedIndex { .. }
        | Error::TooSmall { .. }
        | Error::Config(_) => EXIT_INPUT,
        _ => EXIT_CHECK,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = configure_threads().and_then(|()| match cli.command {
        Command::Decimate(args) => cmd_decimate(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Gradcheck(args) => cmd_gradcheck(args),
        Command::Validate(args) => cmd_validate(args),
    });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .map_err(|_| Failure::new(EXIT_INPUT, anyhow::anyhow!("{THREADS_ENV} must be a non-negative integer, got {raw:?}")))?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::new(EXIT_INPUT, e))?;
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
    Ok(())
}

fn cmd_decimate(args: DecimateArgs) -> Result<(), Failure> {
    let mesh = load_mesh(&args.input, args.format)?;
    let n_in = mesh.vertex_count();
    let n = args.target_vertices;
    if n == 0 {
        return Err(Failure::new(EXIT_INPUT, anyhow::anyhow!("--target-vertices must be positive")));
    }
    if n > n_in {
        return Err(Failure::new(
            EXIT_INFEASIBLE,
            anyhow::anyhow!("cannot decimate {n_in} vertices up to {n}"),
        ));
    }
    let mut config = DecimationConfig::new(n)
        .with_placement(args.placement)
        .with_rounds(args.rounds);
    config.shuffle_seed = args.seed;
    let result = if n == n_in {
        DecimationResult::identity(&mesh)
    } else {
        decimate_parallel(&mesh, &config)?
    };
    let report = quality_report(&mesh, &result)?;

    save_mesh(&result.mesh, &args.output, args.format)?;
    let sidecar = args.sidecar.unwrap_or_else(|| {
        let mut s = args.output.clone().into_os_string();
        s.push(".clusters");
        PathBuf::from(s)
    });
    write_sidecar(&sidecar, &result)?;

    println!("input vertices:  {n_in}");
    println!("input facets:    {}", mesh.facet_count());
    println!("{report}");
    println!("wrote {} and {}", args.output.display(), sidecar.display());
    Ok(())
}

struct BenchInput {
    label: String,
    mesh: TriMesh,
}

fn bench_inputs(args: &BenchArgs) -> Result<Vec<BenchInput>, Failure> {
    let mut paths = Vec::new();
    for pattern in &args.inputs {
        let matches = glob::glob(pattern)
            .with_context(|| format!("bad glob pattern {pattern:?}"))
            .map_err(|e| Failure::new(EXIT_INPUT, e))?;
        let before = paths.len();
        for entry in matches {
            match entry {
                Ok(p) => paths.push(p),
                Err(e) => eprintln!("warning: {e}"),
            }
        }
        if paths.len() == before {
            eprintln!("warning: {pattern:?} matched no files");
        }
    }
    paths.sort();
    paths.dedup();

    let mut inputs = Vec::new();
    for path in paths {
        match load_mesh(&path, MeshFormat::Auto) {
            Ok(mesh) => inputs.push(BenchInput {
                label: path.display().to_string(),
                mesh,
            }),
            Err(e) => eprintln!("skipping {}: {e}", path.display()),
        }
    }
    for &size in &args.synthetic {
        let side = ((size as f64).sqrt().round() as usize).max(2);
        inputs.push(BenchInput {
            label: format!("synthetic grid {side}x{side}"),
            mesh: synth::noisy_grid(side, side, 0.05, args.seed),
        });
    }
    if inputs.is_empty() {
        return Err(Failure::new(EXIT_INPUT, anyhow::anyhow!("no input meshes")));
    }
    Ok(inputs)
}

fn cmd_bench(args: BenchArgs) -> Result<(), Failure> {
    if args.repeats == 0 {
        return Err(Failure::new(EXIT_INPUT, anyhow::anyhow!("--repeats must be positive")));
    }
    let inputs = bench_inputs(&args)?;
    let sink: Box<dyn std::io::Write> = match &args.csv {
        Some(path) => Box::new(
            fs::File::create(path)
                .with_context(|| format!("creating {}", path.display()))
                .map_err(|e| Failure::new(EXIT_INPUT, e))?,
        ),
        None => Box::new(std::io::stdout()),
    };
    let mut csv = write_csv_header(sink).map_err(|e| Failure::new(EXIT_INPUT, e))?;

    // (algorithm, input vertices, target) -> median wall ms
    let mut medians: BTreeMap<(Algorithm, usize, usize), f64> = BTreeMap::new();
    let mut failures = 0usize;
    for input in &inputs {
        let n_in = input.mesh.vertex_count();
        for &target in &args.targets {
            let n = target.resolve(n_in);
            for &algorithm in &args.algorithms {
                let mut times = Vec::with_capacity(args.repeats);
                for _ in 0..args.repeats {
                    match run_once(&input.mesh, n, algorithm, args.seed) {
                        Ok(record) => {
                            times.push(record.wall_ms);
                            write_record(&mut csv, &record).map_err(|e| Failure::new(EXIT_INPUT, e))?;
                        }
                        Err(e) => {
                            eprintln!("{} -> {n} ({algorithm}): {e}", input.label);
                            failures += 1;
                            break;
                        }
                    }
                }
                if let Some(m) = median(&times) {
                    medians.insert((algorithm, n_in, n), m);
                }
            }
        }
    }
    csv.flush().map_err(|e| Failure::new(EXIT_INPUT, e))?;
    drop(csv);
    print_bench_summary(&medians, failures);
    Ok(())
}

fn write_csv_header<W: std::io::Write>(mut sink: W) -> anyhow::Result<csv::Writer<W>> {
    writeln!(sink, "{CSV_SCHEMA_LINE}")?;
    let mut csv = csv::Writer::from_writer(sink);
    csv.write_record(CSV_HEADER)?;
    Ok(csv)
}

fn write_record<W: std::io::Write>(csv: &mut csv::Writer<W>, r: &BenchRecord) -> anyhow::Result<()> {
    csv.write_record([
        r.input_vertices.to_string(),
        r.input_facets.to_string(),
        r.target_vertices.to_string(),
        r.algorithm.name().to_string(),
        format!("{:.6}", r.wall_ms),
        format!("{:e}", r.mean_quadric_error),
        r.seed.to_string(),
    ])?;
    Ok(())
}

fn print_bench_summary(medians: &BTreeMap<(Algorithm, usize, usize), f64>, failures: usize) {
    let mut out = std::io::stderr().lock();
    use std::io::Write;
    let _ = writeln!(out, "summary (median wall ms):");
    for (&(alg, n_in, n), ms) in medians {
        let _ = writeln!(out, "  {alg:>10} {n_in:>8} -> {n:<8} {ms:>12.3}");
    }
    let mut ratios = Vec::new();
    for (&(alg, n_in, n), &ms) in medians {
        if alg == Algorithm::Parallel {
            if let Some(&oracle) = medians.get(&(Algorithm::QemOracle, n_in, n)) {
                ratios.push((n_in, n, oracle / ms));
            }
        }
    }
    for (n_in, n, speedup) in &ratios {
        let _ = writeln!(out, "  speedup {n_in} -> {n}: {speedup:.2}x");
    }
    for alg in [Algorithm::Parallel, Algorithm::QemOracle] {
        let (xs, ys): (Vec<f64>, Vec<f64>) = medians
            .iter()
            .filter(|((a, _, _), _)| *a == alg)
            .map(|(&(_, n_in, _), &ms)| (n_in as f64, ms))
            .unzip();
        if let Some(fit) = linear_fit(&xs, &ys) {
            let _ = writeln!(
                out,
                "  {alg}: wall_ms ~ {:.3e} * vertices + {:.3}, R^2 = {:.4}",
                fit.slope, fit.intercept, fit.r_squared
            );
        }
    }
    if failures > 0 {
        let _ = writeln!(out, "  {failures} run(s) failed");
    }
}

fn cmd_gradcheck(args: GradcheckArgs) -> Result<(), Failure> {
    let mut config = GradcheckConfig::new(args.precision);
    config.seed = args.seed;
    config.zero_features = args.zero_features;
    if let Some(sizes) = args.sizes {
        config.sizes = sizes;
    }
    if let Some(eps) = args.eps {
        config.eps = eps;
    }
    if let Some(cases) = args.cases {
        config.cases = cases;
    }
    if let Some(t) = args.threshold {
        config.threshold = t;
    }
    let report = run_gradcheck(&config)?;
    println!("{report}");
    if report.passed() {
        println!("PASS: max relative error {:.3e} < {:.1e}", report.max_rel_error(), report.threshold);
        Ok(())
    } else {
        Err(Failure::new(
            EXIT_CHECK,
            anyhow::anyhow!(
                "gradient check failed: max relative error {:.3e} >= {:.1e}",
                report.max_rel_error(),
                report.threshold
            ),
        ))
    }
}

fn cmd_validate(args: ValidateArgs) -> Result<(), Failure> {
    let (mesh, stats) = load_mesh_with_stats(&args.input, args.format)?;
    print_validation(&args.input, &mesh, &stats);
    mesh.require_nonempty()?;
    Ok(())
}

fn print_validation(path: &Path, mesh: &TriMesh, stats: &meshforge::io::MeshFileStats) {
    let degenerate = mesh.facet_geometry().iter().filter(|g| g.degenerate).count();
    let (lo, hi) = stats.bbox;
    println!("file:              {}", path.display());
    println!("vertices:          {}", stats.vertex_count);
    println!("facets:            {}", stats.facet_count);
    println!("colors:            {}", if stats.has_color { "yes" } else { "no" });
    println!("bbox min:          {:?}", lo);
    println!("bbox max:          {:?}", hi);
    println!("dropped facets:    {}", stats.dropped_facets);
    println!("degenerate facets: {degenerate}");
    println!("duplicate facets:  {}", mesh.duplicate_facet_count());
    println!("components:        {}", mesh.connected_components());
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn targets_parse() {
        assert!(matches!("0.5".parse::<Target>(), Ok(Target::Fraction(f)) if f == 0.5));
        assert!(matches!("1000".parse::<Target>(), Ok(Target::Count(1000))));
        assert!("1.5".parse::<Target>().is_err());
        assert!("-0.1".parse::<Target>().is_err());
        assert_eq!(Target::Fraction(0.5).resolve(101), 51);
        assert_eq!(Target::Fraction(0.001).resolve(10), 1);
    }

    #[test]
    fn csv_header_is_exact() {
        let mut buf = Vec::new();
        write_csv_header(&mut buf).unwrap().flush().unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(CSV_SCHEMA_LINE));
        assert_eq!(
            lines.next(),
            Some("input_vertices,input_facets,target_vertices,algorithm,wall_ms,mean_quadric_error,seed")
        );
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code_for(&Error::Infeasible { requested: 1, achievable: 2 }), 3);
        assert_eq!(exit_code_for(&Error::Config("x".into())), 2);
        assert_eq!(exit_code_for(&Error::Internal("x".into())), 1);
    }
}
