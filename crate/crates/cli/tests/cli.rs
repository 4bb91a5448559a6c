use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use meshforge::decimate::read_sidecar;
use meshforge::io::{save_mesh, MeshFormat};
use meshforge::synth;

fn meshforge(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_meshforge"))
        .args(args)
        .current_dir(dir)
        .env_remove("MESHFORGE_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn field(text: &str, key: &str) -> String {
    text.lines()
        .find_map(|l| l.strip_prefix(key))
        .unwrap_or_else(|| panic!("no {key:?} in {text}"))
        .trim()
        .to_string()
}

fn write_grid(dir: &Path, name: &str) {
    save_mesh(&synth::wavy_grid(20, 20), dir.join(name), MeshFormat::Auto).unwrap();
}

#[test]
fn decimate_writes_mesh_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    write_grid(dir.path(), "in.obj");
    let out = meshforge(&["decimate", "in.obj", "out.ply", "--target-vertices", "100", "--seed", "3"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert_eq!(field(&text, "output vertices:"), "100");
    let (replace, mapping, n_out) = read_sidecar(dir.path().join("out.ply.clusters")).unwrap();
    assert_eq!((replace.len(), mapping.len(), n_out), (400, 400, 100));
    let mesh = meshforge::io::load_mesh(dir.path().join("out.ply"), MeshFormat::Auto).unwrap();
    assert_eq!(mesh.vertex_count(), 100);
}

#[test]
fn decimate_is_deterministic_under_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    write_grid(dir.path(), "in.obj");
    for name in ["a.ply", "b.ply"] {
        let out = meshforge(&["decimate", "in.obj", name, "-n", "150", "--seed", "11"], dir.path());
        assert_eq!(out.status.code(), Some(0));
    }
    let read = |n: &str| fs::read(dir.path().join(n)).unwrap();
    assert_eq!(read("a.ply"), read("b.ply"));
    assert_eq!(read("a.ply.clusters"), read("b.ply.clusters"));
}

#[test]
fn decimate_to_input_size_is_identity() {
    let dir = tempfile::tempdir().unwrap();
    write_grid(dir.path(), "in.obj");
    let out = meshforge(&["decimate", "in.obj", "out.obj", "-n", "400"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert_eq!(field(&text, "output vertices:"), "400");
    assert_eq!(field(&text, "mean quadric error:").parse::<f64>().unwrap(), 0.0);
    assert_eq!(field(&text, "max quadric error:").parse::<f64>().unwrap(), 0.0);
    let (replace, _, _) = read_sidecar(dir.path().join("out.obj.clusters")).unwrap();
    assert_eq!(replace, (0..400).collect::<Vec<_>>());
}

#[test]
fn decimate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    write_grid(dir.path(), "in.obj");
    fs::write(dir.path().join("bad.obj"), "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 9\n").unwrap();
    fs::write(dir.path().join("bad.ply"), "ply\nformat ascii 1.0\nelement vertex x\n").unwrap();

    let code = |args: &[&str]| meshforge(args, dir.path()).status.code();
    assert_eq!(code(&["decimate", "bad.obj", "o.obj", "-n", "1"]), Some(2));
    assert_eq!(code(&["decimate", "bad.ply", "o.obj", "-n", "1"]), Some(2));
    assert_eq!(code(&["decimate", "missing.obj", "o.obj", "-n", "1"]), Some(2));
    assert_eq!(code(&["decimate", "in.obj", "o.obj", "-n", "401"]), Some(3));
    assert_eq!(code(&["decimate", "in.obj", "o.obj", "-n", "3", "--rounds", "1"]), Some(3));
    assert_eq!(code(&["decimate", "in.obj", "o.obj", "-n", "0"]), Some(2));
    let err = meshforge(&["decimate", "in.obj", "o.obj", "-n", "401"], dir.path());
    assert!(!err.stderr.is_empty());
}

#[test]
fn bench_writes_one_row_per_run() {
    let dir = tempfile::tempdir().unwrap();
    write_grid(dir.path(), "m.obj");
    let out = meshforge(
        &[
            "bench", "*.obj", "--targets", "0.5,50", "--algorithms", "parallel,qem_oracle", "--repeats", "2",
            "--csv", "out.csv",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("out.csv")).unwrap();
    let lines: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(
        lines[0],
        "input_vertices,input_facets,target_vertices,algorithm,wall_ms,mean_quadric_error,seed"
    );
    assert_eq!(lines.len() - 1, 2 * 2 * 2);
    for row in &lines[1..] {
        let cols: Vec<&str> = row.split(',').collect();
        assert_eq!(cols.len(), 7);
        assert_eq!(cols[0], "400");
        assert!(cols[2] == "200" || cols[2] == "50");
        assert!(cols[3] == "parallel" || cols[3] == "qem_oracle");
        assert!(cols[4].parse::<f64>().unwrap() > 0.0);
        assert!(cols[5].parse::<f64>().unwrap() >= 0.0);
    }
    let summary = String::from_utf8_lossy(&out.stderr);
    assert!(summary.contains("speedup"), "{summary}");
}

#[test]
fn bench_single_mesh_single_repeat_row_count() {
    let dir = tempfile::tempdir().unwrap();
    write_grid(dir.path(), "m.obj");
    let out = meshforge(&["bench", "m.obj", "--targets", "0.25,0.5,0.75", "--repeats", "1"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let rows = text.lines().filter(|l| !l.starts_with('#')).count() - 1;
    assert_eq!(rows, 3 * 2);
}

#[test]
fn bench_continues_past_bad_meshes() {
    let dir = tempfile::tempdir().unwrap();
    write_grid(dir.path(), "good.obj");
    fs::write(dir.path().join("broken.obj"), "v 0 0 0\nf 1 2 3\n").unwrap();
    let out = meshforge(&["bench", "*.obj", "--repeats", "1", "--algorithms", "parallel"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("broken.obj"));
    assert_eq!(stdout(&out).lines().filter(|l| l.starts_with("400,")).count(), 1);

    let none = meshforge(&["bench", "nothing*.obj"], dir.path());
    assert_eq!(none.status.code(), Some(2));
}

#[test]
fn gradcheck_passes_and_fails_on_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let ok = meshforge(&["gradcheck", "--seed", "1", "--cases", "4"], dir.path());
    assert_eq!(ok.status.code(), Some(0), "{}", stdout(&ok));
    let text = stdout(&ok);
    for op in ["vertex2facet", "facet2facet", "facet2vertex", "vertex2vertex", "pool_max", "unpool"] {
        assert!(text.contains(op), "missing {op}");
    }
    let strict = meshforge(&["gradcheck", "--cases", "2", "--threshold", "1e-15"], dir.path());
    assert_eq!(strict.status.code(), Some(1));
}

#[test]
fn gradcheck_single_precision_and_zero_features() {
    let dir = tempfile::tempdir().unwrap();
    let f32run = meshforge(&["gradcheck", "--precision", "f32", "--eps", "1e-3", "--cases", "4"], dir.path());
    assert_eq!(f32run.status.code(), Some(0), "{}", stdout(&f32run));
    let zero = meshforge(&["gradcheck", "--zero-features", "--cases", "3"], dir.path());
    assert_eq!(zero.status.code(), Some(0));
    assert!(stdout(&zero).contains("max relative error 0.000e0"), "{}", stdout(&zero));
}

#[test]
fn validate_reports_components_and_duplicates() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("one.obj"), "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n").unwrap();
    fs::write(
        d.join("two.obj"),
        "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 5 5 5\nv 6 5 5\nv 5 6 5\nf 1 2 3\nf 4 5 6\n",
    )
    .unwrap();
    fs::write(d.join("dup.obj"), "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 1 1 0\nf 1 2 3\nf 2 4 3\nf 3 1 2\n").unwrap();

    let one = stdout(&meshforge(&["validate", "one.obj"], d));
    assert_eq!(field(&one, "components:"), "1");
    assert_eq!(field(&one, "degenerate facets:"), "0");
    let two = stdout(&meshforge(&["validate", "two.obj"], d));
    assert_eq!(field(&two, "components:"), "2");
    let dup = stdout(&meshforge(&["validate", "dup.obj"], d));
    assert_eq!(field(&dup, "duplicate facets:"), "1");
}

#[test]
fn validate_rejects_unparseable_input() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.obj"), "v 0 zero 0\n").unwrap();
    assert_eq!(meshforge(&["validate", "bad.obj"], dir.path()).status.code(), Some(2));
    assert_eq!(meshforge(&["validate", "x.stl"], dir.path()).status.code(), Some(2));
}

#[test]
fn thread_cap_is_respected_and_validated() {
    let dir = tempfile::tempdir().unwrap();
    write_grid(dir.path(), "in.obj");
    let run = |threads: &str, out: &str| {
        Command::new(env!("CARGO_BIN_EXE_meshforge"))
            .args(["decimate", "in.obj", out, "-n", "120", "--seed", "5"])
            .current_dir(dir.path())
            .env("MESHFORGE_THREADS", threads)
            .output()
            .unwrap()
    };
    assert_eq!(run("1", "one.ply").status.code(), Some(0));
    assert_eq!(run("0", "auto.ply").status.code(), Some(0));
    assert_eq!(run("4", "four.ply").status.code(), Some(0));
    let read = |n: &str| fs::read(dir.path().join(n)).unwrap();
    assert_eq!(read("one.ply"), read("auto.ply"));
    assert_eq!(read("one.ply"), read("four.ply"));
    assert_eq!(run("lots", "x.ply").status.code(), Some(2));
}
