//! Iterative greedy quadric-error simplification.
//!
//! The classic algorithm: every candidate pair (mesh edges plus, for
//! `tau > 0`, vertex pairs closer than `tau`) sits in a priority queue keyed
//! by contraction cost. The cheapest pair is contracted, the survivor
//! accumulates both quadrics, and the costs of its pairs are recomputed.
//! Contractions that would flip the normal of a surviving facet are
//! rejected. Slow and sequential; used as the quality and speed baseline.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap};

use crate::decimate::{DecimationResult, PlacementRule, Quadric};
use crate::features::FeatureMatrix;
use crate::mesh::{
    compute_facet_geometry, cross, dot, edge_list, sorted_triple, sub, vertex_facet_adjacency,
    TriMesh, Vec3,
};
use crate::{par, Error, Result};

use super::quadric::{facet_quadric, vertex_quadrics};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OracleStop {
    /// Stop once fewer than `M` facets remain.
    FacetsBelow(usize),
    /// Stop once at most `N` vertices remain.
    Vertices(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleConfig {
    pub stop: OracleStop,
    /// Non-edge pairs closer than this are also candidates; `0` means edges only.
    pub tau: f64,
    pub placement: PlacementRule,
    /// Reject contractions that flip a surviving facet's normal.
    pub reject_flips: bool,
}

impl OracleConfig {
    pub fn vertices(n: usize) -> Self {
        Self {
            stop: OracleStop::Vertices(n),
            tau: 0.0,
            placement: PlacementRule::Average,
            reject_flips: true,
        }
    }

    pub fn facets_below(m: usize) -> Self {
        Self {
            stop: OracleStop::FacetsBelow(m),
            ..Self::vertices(0)
        }
    }
}

/// Contracts pairs until fewer than `target_facets` facets remain.
pub fn decimate_qem_oracle(mesh: &TriMesh, target_facets: usize, tau: f64) -> Result<DecimationResult> {
    decimate_qem(
        mesh,
        &OracleConfig {
            tau,
            ..OracleConfig::facets_below(target_facets)
        },
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Cost(f64);

impl Eq for Cost {}

impl PartialOrd for Cost {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Cost {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// `(cost, i, j, version_i, version_j)`, smallest first.
type Entry = Reverse<(Cost, usize, usize, u32, u32)>;

struct State<'a> {
    mesh: &'a TriMesh,
    placement: PlacementRule,
    reject_flips: bool,
    pos: Vec<Vec3>,
    quadric: Vec<Quadric>,
    weight: Vec<usize>,
    version: Vec<u32>,
    alive: Vec<bool>,
    parent: Vec<usize>,
    facets: Vec<[usize; 3]>,
    facet_alive: Vec<bool>,
    vertex_facets: Vec<Vec<usize>>,
    partners: Vec<Vec<usize>>,
    live_vertices: usize,
    live_facets: usize,
}

impl State<'_> {
    /// Cost and target of contracting `(i, j)`, or `None` when rejected.
    fn evaluate(&self, i: usize, j: usize) -> Option<(f64, Vec3)> {
        let q = self.quadric[i] + self.quadric[j];
        let (wi, wj) = (self.weight[i] as f64, self.weight[j] as f64);
        let (pi, pj) = (self.pos[i], self.pos[j]);
        let mean: Vec3 = std::array::from_fn(|k| (wi * pi[k] + wj * pj[k]) / (wi + wj));
        let target = self.placement.place(&q, mean);
        if self.reject_flips && self.flips(i, j, target) {
            return None;
        }
        Some((q.error(target), target))
    }

    fn flips(&self, i: usize, j: usize, target: Vec3) -> bool {
        for &v in &[i, j] {
            for &f in &self.vertex_facets[v] {
                if !self.facet_alive[f] {
                    continue;
                }
                let t = self.facets[f];
                if t.contains(&i) && t.contains(&j) {
                    continue;
                }
                let p = t.map(|x| self.pos[x]);
                let before = cross(sub(p[1], p[0]), sub(p[2], p[0]));
                let q: [Vec3; 3] = std::array::from_fn(|k| if t[k] == v { target } else { p[k] });
                let after = cross(sub(q[1], q[0]), sub(q[2], q[0]));
                if dot(before, before) > 0.0 && dot(before, after) < 0.0 {
                    return true;
                }
            }
        }
        false
    }

    fn push(&self, heap: &mut BinaryHeap<Entry>, i: usize, j: usize) {
        let (i, j) = (i.min(j), i.max(j));
        if let Some((cost, _)) = self.evaluate(i, j) {
            heap.push(Reverse((Cost(cost), i, j, self.version[i], self.version[j])));
        }
    }

    fn contract(&mut self, i: usize, j: usize, target: Vec3) {
        self.pos[i] = target;
        let qj = self.quadric[j];
        self.quadric[i] += qj;
        self.weight[i] += self.weight[j];

        let moved = std::mem::take(&mut self.vertex_facets[j]);
        for f in moved {
            if !self.facet_alive[f] {
                continue;
            }
            let t = &mut self.facets[f];
            if t.contains(&i) {
                self.facet_alive[f] = false;
                self.live_facets -= 1;
            } else {
                for x in t.iter_mut() {
                    if *x == j {
                        *x = i;
                    }
                }
                self.vertex_facets[i].push(f);
            }
        }
        let facet_alive = &self.facet_alive;
        self.vertex_facets[i].retain(|&f| facet_alive[f]);

        let moved = std::mem::take(&mut self.partners[j]);
        for k in moved {
            if k == i {
                continue;
            }
            let pk = &mut self.partners[k];
            pk.retain(|&x| x != j);
            if !pk.contains(&i) {
                pk.push(i);
            }
            if !self.partners[i].contains(&k) {
                self.partners[i].push(k);
            }
        }
        self.partners[i].retain(|&x| x != j);

        self.alive[j] = false;
        self.parent[j] = i;
        self.version[i] += 1;
        self.version[j] += 1;
        self.live_vertices -= 1;
    }

    fn done(&self, stop: OracleStop) -> bool {
        match stop {
            OracleStop::FacetsBelow(m) => self.live_facets < m,
            OracleStop::Vertices(n) => self.live_vertices <= n,
        }
    }
}

/// Non-edge pairs closer than `tau`, found with a uniform grid.
fn proximity_pairs(positions: &[Vec3], tau: f64) -> Vec<(usize, usize)> {
    let cell = |p: Vec3| p.map(|x| (x / tau).floor() as i64);
    let mut grid: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
    for (v, &p) in positions.iter().enumerate() {
        grid.entry(cell(p)).or_default().push(v);
    }
    let mut pairs = Vec::new();
    for (i, &p) in positions.iter().enumerate() {
        let c = cell(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(vs) = grid.get(&[c[0] + dx, c[1] + dy, c[2] + dz]) {
                        for &j in vs {
                            let d = sub(positions[j], p);
                            if j > i && dot(d, d) < tau * tau {
                                pairs.push((i, j));
                            }
                        }
                    }
                }
            }
        }
    }
    pairs.sort_unstable();
    pairs
}

/// Runs the iterative simplifier with an explicit configuration.
pub fn decimate_qem(mesh: &TriMesh, config: &OracleConfig) -> Result<DecimationResult> {
    mesh.require_nonempty()?;
    if config.tau.is_nan() || config.tau < 0.0 {
        return Err(Error::Config(format!("tau must be non-negative, got {}", config.tau)));
    }
    let n = mesh.vertex_count();
    let geom = compute_facet_geometry(mesh);
    let facet_q: Vec<Quadric> =
        par::map_range(geom.len(), |f| facet_quadric(&geom[f]).unwrap_or_default());
    let adjacency = vertex_facet_adjacency(mesh);
    let quadric = vertex_quadrics(&adjacency, &facet_q);

    let mut partners: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut pairs = edge_list(mesh);
    if config.tau > 0.0 {
        pairs.extend(proximity_pairs(&mesh.positions, config.tau));
        pairs.sort_unstable();
        pairs.dedup();
    }
    for &(i, j) in &pairs {
        partners[i].push(j);
        partners[j].push(i);
    }

    let mut state = State {
        mesh,
        placement: config.placement,
        reject_flips: config.reject_flips,
        pos: mesh.positions.clone(),
        quadric,
        weight: vec![1; n],
        version: vec![0; n],
        alive: vec![true; n],
        parent: (0..n).collect(),
        facets: mesh.facets.clone(),
        facet_alive: vec![true; mesh.facet_count()],
        vertex_facets: (0..n).map(|v| adjacency.of(v).to_vec()).collect(),
        partners,
        live_vertices: n,
        live_facets: mesh.facet_count(),
    };

    let initial: Vec<Option<Entry>> = par::map_range(pairs.len(), |k| {
        let (i, j) = pairs[k];
        state
            .evaluate(i, j)
            .map(|(c, _)| Reverse((Cost(c), i, j, 0, 0)))
    });
    let mut heap: BinaryHeap<Entry> = initial.into_iter().flatten().collect();

    let mut reached = true;
    while !state.done(config.stop) {
        let Some(Reverse((_, i, j, vi, vj))) = heap.pop() else {
            reached = false;
            break;
        };
        if !state.alive[i] || !state.alive[j] || state.version[i] != vi || state.version[j] != vj {
            continue;
        }
        // the stored cost is current; recompute the target it was based on
        let Some((_, target)) = state.evaluate(i, j) else {
            continue;
        };
        state.contract(i, j, target);
        let partners = state.partners[i].clone();
        for k in partners {
            state.push(&mut heap, i, k);
        }
    }

    Ok(finish(state, &adjacency, reached))
}

fn finish(state: State<'_>, adjacency: &crate::mesh::FacetAdjacency, reached: bool) -> DecimationResult {
    let mesh = state.mesh;
    let n = mesh.vertex_count();
    let mut out_id = vec![usize::MAX; n];
    let mut next = 0;
    for (id, &alive) in out_id.iter_mut().zip(&state.alive) {
        if alive {
            *id = next;
            next += 1;
        }
    }
    let mut parent = state.parent.clone();
    let find = |parent: &mut Vec<usize>, mut x: usize| {
        let mut r = x;
        while parent[r] != r {
            r = parent[r];
        }
        while parent[x] != r {
            let nx = parent[x];
            parent[x] = r;
            x = nx;
        }
        r
    };
    let replace: Vec<usize> = (0..n).map(|v| out_id[find(&mut parent, v)]).collect();

    let positions: Vec<Vec3> = (0..n).filter(|&v| state.alive[v]).map(|v| state.pos[v]).collect();
    let n_out = positions.len();
    let mut counts = vec![0usize; n_out];
    let cols = mesh.features.cols();
    let mut features = FeatureMatrix::zeros(n_out, cols);
    let mut color_sum = vec![[0.0; 3]; n_out];
    for (v, &r) in replace.iter().enumerate() {
        counts[r] += 1;
        for (o, x) in features.row_mut(r).iter_mut().zip(mesh.features.row(v)) {
            *o += *x;
        }
        if let Some(c) = &mesh.colors {
            for k in 0..3 {
                color_sum[r][k] += c[v][k];
            }
        }
    }
    for r in 0..n_out {
        let inv = 1.0 / counts[r] as f64;
        features.row_mut(r).iter_mut().for_each(|x| *x *= inv);
        color_sum[r].iter_mut().for_each(|x| *x *= inv);
    }
    let colors = mesh.colors.as_ref().map(|_| color_sum);

    let mut seen = HashMap::new();
    let mut facets = Vec::new();
    for (f, t) in state.facets.iter().enumerate() {
        if !state.facet_alive[f] {
            continue;
        }
        let t = t.map(|v| out_id[v]);
        if seen.insert(sorted_triple(t), ()).is_none() {
            facets.push(t);
        }
    }
    let mapping = (0..n)
        .map(|v| {
            if adjacency.of(v).iter().any(|&f| state.facet_alive[f]) {
                replace[v] as i64
            } else {
                -1
            }
        })
        .collect();

    DecimationResult {
        mesh: TriMesh {
            positions,
            facets,
            colors,
            features,
        },
        replace,
        mapping,
        reached_target: reached,
    }
}
