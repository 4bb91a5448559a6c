//! Cluster-based simplifier.
//!
//! One core round:
//!
//! 1. candidate pairs are the mesh edges;
//! 2. every pair gets a quadric cost (parallel);
//! 3. pairs are sorted by cost, with an optional seeded shuffle among
//!    near-ties;
//! 4. a greedy scan turns disjoint pairs into two-vertex clusters until
//!    `N_in - N` vertices have been removed;
//! 5. if that falls short, leftover vertices join the seeded cluster behind
//!    their cheapest incident edge, again until the quota is met;
//! 6. every cluster is contracted independently (parallel), degenerate
//!    facets are dropped and duplicate facets removed.
//!
//! Steps 3-5 are sequential per mesh; meshes of a batch run them
//! concurrently. Smaller targets run several rounds.

use crate::decimate::{compose, DecimationConfig, DecimationResult, PlacementRule, Rounds};
use crate::features::FeatureMatrix;
use crate::mesh::{
    compute_facet_geometry, edge_list_with, sorted_triple, vertex_facet_adjacency, BatchedMesh, TriMesh,
    Vec3, VertexNeighbors,
};
use crate::{par, Error, Result};

use super::quadric::{facet_quadric, pair_cost, vertex_quadrics, Quadric};

const NONE: usize = usize::MAX;

/// Bucket width for shuffled sorting, relative to the cost range.
const SHUFFLE_BUCKET: f64 = 1e-12;

/// Decimation of a [`BatchedMesh`]: a single result over the concatenated
/// output plus per-mesh offsets.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchedDecimation {
    pub result: DecimationResult,
    pub vertex_offsets: Vec<usize>,
    pub facet_offsets: Vec<usize>,
}

impl BatchedDecimation {
    pub fn batched_mesh(&self) -> BatchedMesh {
        BatchedMesh {
            mesh: self.result.mesh.clone(),
            vertex_offsets: self.vertex_offsets.clone(),
            facet_offsets: self.facet_offsets.clone(),
        }
    }
}

/// Decimates `mesh` to `config.target_vertices` vertices.
pub fn decimate_parallel(mesh: &TriMesh, config: &DecimationConfig) -> Result<DecimationResult> {
    mesh.require_nonempty()?;
    let n = mesh.vertex_count();
    run(mesh, &[0, n], &[0, mesh.facet_count()], config).map(|b| b.result)
}

/// Decimates every mesh of `batch` to `config.target_vertices` vertices.
/// Equivalent to decimating each mesh alone and concatenating the results.
pub fn decimate_parallel_batch(
    batch: &BatchedMesh,
    config: &DecimationConfig,
) -> Result<BatchedDecimation> {
    batch.validate()?;
    for b in 0..batch.batch_size() {
        let nv = batch.vertex_offsets[b + 1] - batch.vertex_offsets[b];
        let nf = batch.facet_offsets[b + 1] - batch.facet_offsets[b];
        if nv < 3 || nf == 0 {
            return Err(Error::TooSmall {
                vertices: nv,
                facets: nf,
                min_vertices: 3,
                min_facets: 1,
            });
        }
    }
    run(&batch.mesh, &batch.vertex_offsets, &batch.facet_offsets, config)
}

/// Per-round vertex targets taking `n` vertices down to `target`.
///
/// `Auto` halves per round until the target is within one round; an
/// explicit count spaces the intermediate targets geometrically.
pub fn round_schedule(n: usize, target: usize, rounds: Rounds) -> Vec<usize> {
    let mut out = Vec::new();
    match rounds {
        Rounds::Auto => {
            let mut cur = n;
            while cur > target {
                cur = target.max(cur.div_ceil(2));
                out.push(cur);
            }
        }
        Rounds::Explicit(k) => {
            if k == 0 {
                return out;
            }
            let ratio = target as f64 / n as f64;
            for j in 1..k {
                let t = (n as f64 * ratio.powf(j as f64 / k as f64)).ceil() as usize;
                out.push(t.clamp(target, n));
            }
            out.push(target);
        }
    }
    out
}

fn run(
    mesh: &TriMesh,
    vertex_offsets: &[usize],
    facet_offsets: &[usize],
    config: &DecimationConfig,
) -> Result<BatchedDecimation> {
    let target = config.target_vertices;
    if target == 0 {
        return Err(Error::Config("target vertex count must be positive".into()));
    }
    let segments = vertex_offsets.len() - 1;
    let sizes: Vec<usize> = (0..segments)
        .map(|b| vertex_offsets[b + 1] - vertex_offsets[b])
        .collect();
    if let Some(&n) = sizes.iter().find(|&&n| n < target) {
        return Err(Error::Config(format!(
            "target of {target} vertices exceeds the input size {n}"
        )));
    }

    let mut state = BatchedDecimation {
        result: DecimationResult::identity(mesh),
        vertex_offsets: vertex_offsets.to_vec(),
        facet_offsets: facet_offsets.to_vec(),
    };
    if sizes.iter().all(|&n| n == target) {
        return Ok(state);
    }
    if config.rounds == Rounds::Explicit(0) {
        return Err(Error::Config(
            "zero rounds requested but the target is below the input size".into(),
        ));
    }

    let schedules: Vec<Vec<usize>> = sizes
        .iter()
        .map(|&n| round_schedule(n, target, config.rounds))
        .collect();

    let mut round = 0usize;
    let mut current = sizes;
    loop {
        let targets: Vec<usize> = match config.rounds {
            Rounds::Auto => {
                if current.iter().all(|&n| n == target) {
                    break;
                }
                current
                    .iter()
                    .map(|&n| if n > target { target.max(n.div_ceil(2)) } else { n })
                    .collect()
            }
            Rounds::Explicit(k) => {
                if round == k {
                    break;
                }
                schedules.iter().map(|s| s[round]).collect()
            }
        };
        let params = RoundParams {
            placement: config.placement,
            seed: config.shuffle_seed.map(|s| s ^ (round as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)),
            priority: if round == 0 { &config.priority_pairs } else { &[] },
        };
        let out = core_round(
            &state.result.mesh,
            &state.vertex_offsets,
            &state.facet_offsets,
            &targets,
            &params,
        )?;
        for b in 0..segments {
            let reached = out.vertex_offsets[b + 1] - out.vertex_offsets[b];
            match config.rounds {
                Rounds::Auto if reached == current[b] && current[b] > target => {
                    return Err(Error::Infeasible {
                        requested: target,
                        achievable: reached,
                    });
                }
                Rounds::Explicit(_) if reached > targets[b] => {
                    return Err(Error::Infeasible {
                        requested: targets[b],
                        achievable: reached,
                    });
                }
                _ => {}
            }
            current[b] = reached;
        }
        let result = compose(&state.result, out.result);
        state = BatchedDecimation {
            result,
            vertex_offsets: out.vertex_offsets,
            facet_offsets: out.facet_offsets,
        };
        round += 1;
    }
    Ok(state)
}

struct RoundParams<'a> {
    placement: PlacementRule,
    seed: Option<u64>,
    priority: &'a [(usize, usize)],
}

/// Order-preserving map of an `f64` onto `u64` (IEEE total order).
#[inline]
fn ordered_bits(x: f64) -> u64 {
    let b = x.to_bits();
    if b >> 63 == 1 {
        !b
    } else {
        b | (1 << 63)
    }
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Shuffle key of an edge; depends only on mesh-local indices so that a
/// mesh sorts the same way alone or inside a batch.
#[inline]
fn shuffle_key(seed: u64, i: usize, j: usize) -> u64 {
    splitmix64(seed ^ splitmix64((i as u64) << 32 ^ j as u64))
}

/// Runs one core round. Each segment removes vertices until it reaches its
/// target or runs out of contractible vertices.
fn core_round(
    mesh: &TriMesh,
    vertex_offsets: &[usize],
    facet_offsets: &[usize],
    targets: &[usize],
    params: &RoundParams<'_>,
) -> Result<BatchedDecimation> {
    let n = mesh.vertex_count();
    let segments = targets.len();

    // quadrics and candidate pairs
    let geom = compute_facet_geometry(mesh);
    let facet_q: Vec<Quadric> =
        par::map_range(geom.len(), |f| facet_quadric(&geom[f]).unwrap_or_default());
    let adjacency = vertex_facet_adjacency(mesh);
    let vertex_q = vertex_quadrics(&adjacency, &facet_q);
    let edges = edge_list_with(mesh, &adjacency);
    let costs: Vec<f64> = par::map_range(edges.len(), |e| {
        pair_cost(edges[e], &vertex_q, &mesh.positions, params.placement).0
    });
    // edges never cross segments, so each segment owns a contiguous run
    let edge_offsets: Vec<usize> = vertex_offsets
        .iter()
        .map(|&v| edges.partition_point(|&(a, _)| a < v))
        .collect();

    let mut priority = vec![u32::MAX; edges.len()];
    for (rank, &(i, j)) in params.priority.iter().enumerate() {
        let e = edges
            .binary_search(&(i.min(j), i.max(j)))
            .map_err(|_| Error::Config(format!("priority pair ({i}, {j}) is not a mesh edge")))?;
        priority[e] = priority[e].min(rank as u32);
    }

    // ordering
    let mut order: Vec<usize> = (0..edges.len()).collect();
    for b in 0..segments {
        let range = edge_offsets[b]..edge_offsets[b + 1];
        if range.is_empty() {
            continue;
        }
        let v0 = vertex_offsets[b];
        let seg_costs = &costs[range.clone()];
        let lo = seg_costs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = seg_costs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let width = SHUFFLE_BUCKET * (hi - lo);
        let key = |e: usize| -> (u32, u64, u64, usize) {
            match params.seed {
                Some(seed) => {
                    let bucket = if width > 0.0 {
                        ((costs[e] - lo) / width).floor() as u64
                    } else {
                        0
                    };
                    let (i, j) = edges[e];
                    (priority[e], bucket, shuffle_key(seed, i - v0, j - v0), e)
                }
                None => (priority[e], ordered_bits(costs[e]), 0, e),
            }
        };
        let mut keys: Vec<(u32, u64, u64, usize)> = par::map_range(range.len(), |k| key(range.start + k));
        par::sort_unstable_by(&mut keys, |x, y| x.cmp(y));
        for (slot, k) in order[range].iter_mut().zip(keys) {
            *slot = k.3;
        }
    }

    // clustering, one mesh per task
    let neighbors = VertexNeighbors::from_edges(n, &edges);
    let clustered: Vec<Vec<usize>> = par::map_range(segments, |b| {
        cluster_segment(
            vertex_offsets[b],
            vertex_offsets[b + 1],
            targets[b],
            &order[edge_offsets[b]..edge_offsets[b + 1]],
            &edges,
            &costs,
            &neighbors,
        )
    });
    let mut root = Vec::with_capacity(n);
    for (b, local) in clustered.into_iter().enumerate() {
        let v0 = vertex_offsets[b];
        root.extend(local.into_iter().map(|r| r + v0));
    }

    // output numbering follows representative order
    let mut out_id = vec![NONE; n];
    let mut out_vertex_offsets = Vec::with_capacity(segments + 1);
    let mut next = 0;
    let mut seg = 0;
    for v in 0..n {
        while seg <= segments && vertex_offsets[seg] == v {
            out_vertex_offsets.push(next);
            seg += 1;
        }
        if root[v] == v {
            out_id[v] = next;
            next += 1;
        }
    }
    while out_vertex_offsets.len() < segments + 1 {
        out_vertex_offsets.push(next);
    }
    let n_out = next;
    let replace: Vec<usize> = root.iter().map(|&r| out_id[r]).collect();

    // members of each output vertex, ascending
    let mut member_offsets = vec![0usize; n_out + 1];
    for &r in &replace {
        member_offsets[r + 1] += 1;
    }
    for r in 0..n_out {
        member_offsets[r + 1] += member_offsets[r];
    }
    let mut cursor = member_offsets.clone();
    let mut members = vec![0usize; n];
    for (v, &r) in replace.iter().enumerate() {
        members[cursor[r]] = v;
        cursor[r] += 1;
    }
    let members_of = |r: usize| &members[member_offsets[r]..member_offsets[r + 1]];

    // contraction
    let positions: Vec<Vec3> = par::map_range(n_out, |r| {
        let m = members_of(r);
        let mean = mean_of(m.iter().map(|&v| mesh.positions[v]), m.len());
        match params.placement {
            PlacementRule::Average => mean,
            PlacementRule::Inverse => {
                let q: Quadric = m.iter().map(|&v| vertex_q[v]).sum();
                params.placement.place(&q, mean)
            }
        }
    });
    let colors = mesh.colors.as_ref().map(|c| {
        par::map_range(n_out, |r| {
            let m = members_of(r);
            mean_of(m.iter().map(|&v| c[v]), m.len())
        })
    });
    let cols = mesh.features.cols();
    let mut features = FeatureMatrix::zeros(n_out, cols);
    features.fill_rows(|r, row| {
        let m = members_of(r);
        for &v in m {
            for (o, x) in row.iter_mut().zip(mesh.features.row(v)) {
                *o += *x;
            }
        }
        let inv = 1.0 / m.len() as f64;
        row.iter_mut().for_each(|o| *o *= inv);
    });

    // facets: drop degenerate, then duplicates (first occurrence wins)
    let remapped: Vec<Option<[usize; 3]>> = par::map_range(mesh.facet_count(), |f| {
        let t = mesh.facets[f].map(|v| replace[v]);
        (t[0] != t[1] && t[1] != t[2] && t[0] != t[2]).then_some(t)
    });
    let mut keyed: Vec<([usize; 3], usize)> = remapped
        .iter()
        .enumerate()
        .filter_map(|(f, t)| t.map(|t| (sorted_triple(t), f)))
        .collect();
    par::sort_unstable_by(&mut keyed, |a, b| a.cmp(b));
    let mut keep = vec![false; mesh.facet_count()];
    for (k, &(tri, f)) in keyed.iter().enumerate() {
        if k == 0 || keyed[k - 1].0 != tri {
            keep[f] = true;
        }
    }
    let mut facets = Vec::with_capacity(keyed.len());
    let mut out_facet_offsets = Vec::with_capacity(segments + 1);
    let mut seg = 0;
    for (f, t) in remapped.iter().enumerate() {
        while seg <= segments && facet_offsets[seg] == f {
            out_facet_offsets.push(facets.len());
            seg += 1;
        }
        if keep[f] {
            facets.push(t.expect("kept facets are non-degenerate"));
        }
    }
    while out_facet_offsets.len() < segments + 1 {
        out_facet_offsets.push(facets.len());
    }

    let mapping: Vec<i64> = par::map_range(n, |v| {
        if adjacency.of(v).iter().any(|&f| remapped[f].is_some()) {
            replace[v] as i64
        } else {
            -1
        }
    });

    let out_mesh = TriMesh {
        positions,
        facets,
        colors,
        features,
    };
    debug_assert!(out_mesh.validate().is_ok());
    Ok(BatchedDecimation {
        result: DecimationResult {
            mesh: out_mesh,
            replace,
            mapping,
            reached_target: true,
        },
        vertex_offsets: out_vertex_offsets,
        facet_offsets: out_facet_offsets,
    })
}

fn mean_of(points: impl Iterator<Item = Vec3>, count: usize) -> Vec3 {
    let mut s = [0.0; 3];
    for p in points {
        s[0] += p[0];
        s[1] += p[1];
        s[2] += p[2];
    }
    let inv = 1.0 / count as f64;
    [s[0] * inv, s[1] * inv, s[2] * inv]
}

/// Greedy clustering of one mesh occupying vertices `v0..v1`. Returns the
/// mesh-local representative of every vertex.
fn cluster_segment(
    v0: usize,
    v1: usize,
    target: usize,
    order: &[usize],
    edges: &[(usize, usize)],
    costs: &[f64],
    neighbors: &VertexNeighbors,
) -> Vec<usize> {
    let nv = v1 - v0;
    let quota = nv.saturating_sub(target);
    let mut root = vec![NONE; nv];
    let mut removed = 0;

    for &e in order {
        if removed >= quota {
            break;
        }
        let (i, j) = edges[e];
        let (li, lj) = (i - v0, j - v0);
        if root[li] == NONE && root[lj] == NONE {
            root[li] = li;
            root[lj] = li;
            removed += 1;
        }
    }

    if removed < quota {
        // leftovers join the seeded cluster behind their cheapest edge;
        // cost ties go to the lowest representative
        let mut candidates: Vec<(u64, usize, usize)> = (0..nv)
            .filter(|&lv| root[lv] == NONE)
            .filter_map(|lv| {
                neighbors
                    .of(lv + v0)
                    .iter()
                    .filter_map(|&(u, e)| {
                        let ru = root[u - v0];
                        (ru != NONE).then_some((ordered_bits(costs[e]), ru))
                    })
                    .min()
                    .map(|(c, r)| (c, lv, r))
            })
            .collect();
        candidates.sort_unstable();
        for (_, lv, r) in candidates {
            if removed >= quota {
                break;
            }
            root[lv] = r;
            removed += 1;
        }
    }

    for (lv, r) in root.iter_mut().enumerate() {
        if *r == NONE {
            *r = lv;
        }
    }
    root
}
