mod common;

use meshforge::io::{
    color_from_u8, color_to_u8, concat_batch, load_mesh, load_mesh_with_stats, save_mesh, save_ply, MeshFormat,
    PlyEncoding,
};
use meshforge::{synth, Error, TriMesh};
use proptest::prelude::*;

fn quantized_colors(mesh: &TriMesh, seed: u64) -> TriMesh {
    let colors = (0..mesh.vertex_count())
        .map(|i| {
            let k = (i as u64).wrapping_mul(2654435761).wrapping_add(seed);
            [0, 8, 16].map(|s| color_from_u8((k >> s) as u8))
        })
        .collect();
    mesh.clone().with_colors(colors).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn obj_roundtrip_is_exact(nx in 2usize..9, ny in 2usize..9, seed in any::<u64>(), colored in any::<bool>()) {
        let mut mesh = synth::noisy_grid(nx, ny, 0.4, seed);
        if colored {
            mesh = quantized_colors(&mesh, seed);
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.obj");
        save_mesh(&mesh, &path, MeshFormat::Auto).unwrap();
        let back = load_mesh(&path, MeshFormat::Auto).unwrap();
        prop_assert_eq!(&back.positions, &mesh.positions);
        prop_assert_eq!(&back.facets, &mesh.facets);
        if colored {
            let a: Vec<[u8; 3]> = back.colors.unwrap().iter().map(|c| c.map(color_to_u8)).collect();
            let b: Vec<[u8; 3]> = mesh.colors.unwrap().iter().map(|c| c.map(color_to_u8)).collect();
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn ply_roundtrip_in_every_encoding(nx in 2usize..9, ny in 2usize..9, seed in any::<u64>(), colored in any::<bool>()) {
        let mut mesh = synth::noisy_grid(nx, ny, 0.4, seed);
        if colored {
            mesh = quantized_colors(&mesh, seed);
        }
        let dir = tempfile::tempdir().unwrap();
        for encoding in [PlyEncoding::Ascii, PlyEncoding::BinaryLittleEndian, PlyEncoding::BinaryBigEndian] {
            let path = dir.path().join("m.ply");
            save_ply(&mesh, &path, encoding).unwrap();
            let back = load_mesh(&path, MeshFormat::Ply).unwrap();
            let single: Vec<[f64; 3]> = mesh.positions.iter().map(|p| p.map(|v| v as f32 as f64)).collect();
            prop_assert_eq!(&back.positions, &single);
            prop_assert_eq!(&back.facets, &mesh.facets);
            prop_assert_eq!(&back.colors, &mesh.colors);
        }
    }
}

#[test]
fn corpus_loads_and_reports_stats() {
    for (name, mesh) in common::fixture_corpus() {
        mesh.validate().unwrap();
        let (_, stats) = load_mesh_with_stats(common::fixture_dir().join(&name), MeshFormat::Auto).unwrap();
        assert_eq!(stats.vertex_count, mesh.vertex_count(), "{name}");
        assert_eq!(stats.facet_count, mesh.facet_count(), "{name}");
        assert_eq!(stats.has_color, name == "strip.ply", "{name}");
    }
}

#[test]
fn polygons_are_fan_triangulated() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pent.obj");
    std::fs::write(&path, "v 0 0 0\nv 1 0 0\nv 2 1 0\nv 1 2 0\nv 0 1 0\nf 1 2 3 4 5\nf 1 1 2\n").unwrap();
    let (mesh, stats) = load_mesh_with_stats(&path, MeshFormat::Auto).unwrap();
    assert_eq!(mesh.facets, vec![[0, 1, 2], [0, 2, 3], [0, 3, 4]]);
    assert_eq!(stats.dropped_facets, 1);
}

#[test]
fn malformed_files_name_the_location() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("a.obj", "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 7\n"),
        ("b.obj", "v 0 0 0\nv 1 nope 0\n"),
        ("c.ply", "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nend_header\n"),
        ("d.ply", "plx\n"),
    ];
    for (name, text) in cases {
        let path = dir.path().join(name);
        std::fs::write(&path, text).unwrap();
        let err = load_mesh(&path, MeshFormat::Auto).unwrap_err();
        assert!(
            matches!(err, Error::Parse { .. } | Error::IndexOutOfRange { .. }),
            "{name}: {err}"
        );
    }
    let err = load_mesh(dir.path().join("mesh.stl"), MeshFormat::Auto).unwrap_err();
    assert!(matches!(err, Error::Format { .. }));
    let err = load_mesh(dir.path().join("missing.obj"), MeshFormat::Auto).unwrap_err();
    assert!(matches!(err, Error::Io { .. }));
}

#[test]
fn batch_slices_recover_members() {
    let meshes = vec![synth::icosphere(0), synth::wavy_grid(3, 4), common::fixture("tetrahedron.obj")];
    let batch = concat_batch(&meshes).unwrap();
    assert_eq!(batch.batch_size(), 3);
    assert_eq!(batch.vertex_offsets, vec![0, 12, 24, 28]);
    for (b, m) in meshes.iter().enumerate() {
        let s = batch.slice(b);
        assert_eq!(s.positions, m.positions);
        assert_eq!(s.facets, m.facets);
    }
}
