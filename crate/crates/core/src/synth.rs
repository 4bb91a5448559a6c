//! Deterministic synthetic meshes for tests, benchmarks and fixtures.

use std::collections::HashMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::mesh::{TriMesh, Vec3};

/// Unit icosphere after `subdivisions` rounds of 4:1 splitting
/// (`10·4^s + 2` vertices).
pub fn icosphere(subdivisions: u32) -> TriMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut positions: Vec<Vec3> = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ]
    .iter()
    .map(|&p| normalize(p))
    .collect();
    let mut facets: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, positions: &mut Vec<Vec3>| -> usize {
            *midpoint.entry((a.min(b), a.max(b))).or_insert_with(|| {
                let (p, q) = (positions[a], positions[b]);
                positions.push(normalize([p[0] + q[0], p[1] + q[1], p[2] + q[2]]));
                positions.len() - 1
            })
        };
        let mut next = Vec::with_capacity(facets.len() * 4);
        for &[a, b, c] in &facets {
            let ab = mid(a, b, &mut positions);
            let bc = mid(b, c, &mut positions);
            let ca = mid(c, a, &mut positions);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        facets = next;
    }
    TriMesh::new(positions, facets).expect("icosphere is valid")
}

fn normalize(p: Vec3) -> Vec3 {
    let l = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
    [p[0] / l, p[1] / l, p[2] / l]
}

/// `nx x ny` vertex grid on `[0,1]²` with height `height(x, y)`, split into
/// triangles along alternating diagonals.
pub fn height_grid(nx: usize, ny: usize, height: impl Fn(f64, f64) -> f64) -> TriMesh {
    assert!(nx >= 2 && ny >= 2, "grid needs at least 2x2 vertices");
    let mut positions = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let x = i as f64 / (nx - 1) as f64;
            let y = j as f64 / (ny - 1) as f64;
            positions.push([x, y, height(x, y)]);
        }
    }
    let mut facets = Vec::with_capacity(2 * (nx - 1) * (ny - 1));
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let v = j * nx + i;
            let (a, b, c, d) = (v, v + 1, v + nx, v + nx + 1);
            if (i + j) % 2 == 0 {
                facets.push([a, b, d]);
                facets.push([a, d, c]);
            } else {
                facets.push([a, b, c]);
                facets.push([b, d, c]);
            }
        }
    }
    TriMesh::new(positions, facets).expect("grid is valid")
}

/// Grid with a smooth multi-frequency surface.
pub fn wavy_grid(nx: usize, ny: usize) -> TriMesh {
    height_grid(nx, ny, |x, y| {
        0.15 * (2.0 * PI * x).sin() * (3.0 * PI * y).cos() + 0.05 * (7.0 * PI * (x + 0.5 * y)).sin()
    })
}

/// Flat grid whose heights carry seeded uniform noise of amplitude `jitter`.
pub fn noisy_grid(nx: usize, ny: usize, jitter: f64, seed: u64) -> TriMesh {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise: Vec<f64> = (0..nx * ny).map(|_| rng.random_range(-jitter..=jitter)).collect();
    let mut mesh = height_grid(nx, ny, |_, _| 0.0);
    for (p, z) in mesh.positions.iter_mut().zip(noise) {
        p[2] = z;
    }
    mesh.transformed(|p| p)
}

/// Closed torus with `major x minor` vertices.
pub fn torus(major: usize, minor: usize, major_radius: f64, minor_radius: f64) -> TriMesh {
    assert!(major >= 3 && minor >= 3, "torus needs at least 3x3 vertices");
    let mut positions = Vec::with_capacity(major * minor);
    for i in 0..major {
        let u = 2.0 * PI * i as f64 / major as f64;
        for j in 0..minor {
            let v = 2.0 * PI * j as f64 / minor as f64;
            let r = major_radius + minor_radius * v.cos();
            positions.push([r * u.cos(), r * u.sin(), minor_radius * v.sin()]);
        }
    }
    let id = |i: usize, j: usize| (i % major) * minor + (j % minor);
    let mut facets = Vec::with_capacity(2 * major * minor);
    for i in 0..major {
        for j in 0..minor {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i, j + 1), id(i + 1, j + 1));
            facets.push([a, b, d]);
            facets.push([a, d, c]);
        }
    }
    TriMesh::new(positions, facets).expect("torus is valid")
}

/// Torus with roughly `vertices` vertices and seeded radial bumps, so that
/// quadric costs are not all tied.
pub fn bumpy_torus(vertices: usize, seed: u64) -> TriMesh {
    let minor = ((vertices as f64 / 3.0).sqrt().round() as usize).max(3);
    let major = (vertices / minor).max(3);
    let base = torus(major, minor, 1.0, 0.35);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phases: [f64; 4] = std::array::from_fn(|_| rng.random_range(0.0..2.0 * PI));
    base.transformed(|p| {
        let u = p[1].atan2(p[0]);
        let w = 1.0
            + 0.04 * (5.0 * u + phases[0]).sin()
            + 0.02 * (13.0 * u + phases[1]).cos()
            + 0.03 * (3.0 * p[2] / 0.35 + phases[2]).sin() * (2.0 * u + phases[3]).cos();
        [p[0] * w, p[1] * w, p[2] * w]
    })
}

/// Six-vertex fan used as the clustering fixture.
///
/// Vertex indices follow the labels `a..f` (`a = 0`, ..., `f = 5`); `e` is the
/// hub at the origin and the rim is `a, f, b, c, d` around the unit circle.
/// Greedy pairing takes `(c, e)` then `(a, f)`; with two output vertices the
/// leftovers `b` and `d` join `{a, f}` and `{c, e}` respectively.
pub fn toy_fan_mesh() -> TriMesh {
    let rim = |deg: f64, z: f64| -> Vec3 {
        let r = deg.to_radians();
        [r.cos(), r.sin(), z]
    };
    let positions = vec![
        rim(0.0, 1.0),
        rim(144.0, -0.75),
        rim(216.0, 0.75),
        rim(288.0, -1.0),
        [0.0, 0.0, 1.0],
        rim(72.0, 0.75),
    ];
    let (a, b, c, d, e, f) = (0, 1, 2, 3, 4, 5);
    let facets = vec![[e, a, f], [e, f, b], [e, b, c], [e, c, d], [e, d, a]];
    TriMesh::new(positions, facets).expect("fixture is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn icosphere_counts() {
        for s in 0..3 {
            let m = icosphere(s);
            assert_eq!(m.vertex_count(), 10 * 4usize.pow(s) + 2);
            assert_eq!(m.facet_count(), 20 * 4usize.pow(s));
            assert_eq!(m.connected_components(), 1);
        }
    }

    #[test]
    fn torus_is_closed() {
        let m = torus(8, 5, 1.0, 0.3);
        // Euler characteristic 0: V - E + F = 0 with E = 3F/2
        assert_eq!(m.vertex_count() * 2, m.facet_count());
        assert_eq!(crate::mesh::edge_list(&m).len() * 2, m.facet_count() * 3);
    }

    #[test]
    fn generators_are_deterministic() {
        assert_eq!(bumpy_torus(500, 3), bumpy_torus(500, 3));
        assert_eq!(noisy_grid(5, 4, 0.1, 9), noisy_grid(5, 4, 0.1, 9));
        assert_ne!(noisy_grid(5, 4, 0.1, 9), noisy_grid(5, 4, 0.1, 10));
    }
}
