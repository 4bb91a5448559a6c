//! Mesh decimation: quadrics, the iterative QEM oracle and the parallel
//! cluster-based simplifier.
//!
//! Both simplifiers report their vertex clustering through two tensors of
//! input-vertex length:
//!
//! * `replace[i]`: output vertex that input vertex `i` contracted into.
//! * `mapping[i]`: the same index while at least one facet incident to `i`
//!   survives in the output, `-1` once all of them degenerated away.
//!
//! Pooling and unpooling are pure gathers / scatters over these tensors.

mod oracle;
mod parallel;
mod quadric;
mod quality;
mod sidecar;

use std::collections::BTreeMap;

pub use oracle::{decimate_qem, decimate_qem_oracle, OracleConfig, OracleStop};
pub use parallel::{decimate_parallel, decimate_parallel_batch, round_schedule, BatchedDecimation};
pub use quadric::{
    facet_quadric, pair_cost, vertex_quadric, vertex_quadrics, PlacementRule, Quadric, MIN_RCOND,
};
pub use quality::{quality_report, QualityReport};
pub use sidecar::{read_sidecar, write_sidecar, SIDECAR_MAGIC, SIDECAR_VERSION};

use crate::mesh::{vertex_facet_adjacency, TriMesh};
use crate::{Error, Result};

/// How many core rounds to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Rounds {
    /// Halve the vertex count per round until the target is one round away.
    #[default]
    Auto,
    /// Exactly `k` rounds with geometrically spaced intermediate targets.
    Explicit(usize),
}

impl std::str::FromStr for Rounds {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        if s == "auto" {
            return Ok(Rounds::Auto);
        }
        s.parse()
            .map(Rounds::Explicit)
            .map_err(|_| format!("rounds must be `auto` or a non-negative integer, got `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DecimationConfig {
    /// Output vertex count (per mesh for batches).
    pub target_vertices: usize,
    pub placement: PlacementRule,
    /// Seeded shuffle among near-equal costs; `None` sorts strictly by cost.
    pub shuffle_seed: Option<u64>,
    pub rounds: Rounds,
    /// Edges scanned ahead of every other pair in the first round, in the
    /// given order. Indices refer to the input mesh.
    pub priority_pairs: Vec<(usize, usize)>,
}

impl DecimationConfig {
    pub fn new(target_vertices: usize) -> Self {
        Self {
            target_vertices,
            ..Self::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.shuffle_seed = Some(seed);
        self
    }

    pub fn with_placement(mut self, placement: PlacementRule) -> Self {
        self.placement = placement;
        self
    }

    pub fn with_rounds(mut self, rounds: Rounds) -> Self {
        self.rounds = rounds;
        self
    }
}

/// A decimated mesh plus its cluster tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct DecimationResult {
    pub mesh: TriMesh,
    pub replace: Vec<usize>,
    pub mapping: Vec<i64>,
    /// `false` when the requested size could not be reached (oracle only).
    pub reached_target: bool,
}

impl DecimationResult {
    /// Result that keeps every vertex and facet.
    pub fn identity(mesh: &TriMesh) -> Self {
        let adj = vertex_facet_adjacency(mesh);
        let n = mesh.vertex_count();
        Self {
            mesh: mesh.clone(),
            replace: (0..n).collect(),
            mapping: (0..n)
                .map(|v| if adj.len_of(v) > 0 { v as i64 } else { -1 })
                .collect(),
            reached_target: true,
        }
    }

    pub fn input_vertex_count(&self) -> usize {
        self.replace.len()
    }

    pub fn output_vertex_count(&self) -> usize {
        self.mesh.vertex_count()
    }

    /// Member input vertices of every output vertex, ascending.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.output_vertex_count()];
        for (i, &r) in self.replace.iter().enumerate() {
            out[r].push(i);
        }
        out
    }

    /// Input-space cluster map: each vertex goes to the smallest member of
    /// its cluster.
    pub fn representatives(&self) -> Vec<usize> {
        let mut rep = vec![usize::MAX; self.output_vertex_count()];
        for (i, &r) in self.replace.iter().enumerate() {
            rep[r] = rep[r].min(i);
        }
        self.replace.iter().map(|&r| rep[r]).collect()
    }

    /// Checks the tensors against each other and the output mesh.
    pub fn validate(&self) -> Result<()> {
        self.mesh.validate()?;
        let n_out = self.output_vertex_count();
        if self.mapping.len() != self.replace.len() {
            return Err(Error::Internal("replace/mapping length mismatch".into()));
        }
        let mut hit = vec![false; n_out];
        for (i, (&r, &m)) in self.replace.iter().zip(&self.mapping).enumerate() {
            if r >= n_out {
                return Err(Error::Internal(format!("replace[{i}] = {r} >= {n_out}")));
            }
            hit[r] = true;
            if m != -1 && m != r as i64 {
                return Err(Error::Internal(format!("mapping[{i}] = {m} but replace[{i}] = {r}")));
            }
        }
        if let Some(r) = hit.iter().position(|h| !h) {
            return Err(Error::Internal(format!("output vertex {r} has no members")));
        }
        Ok(())
    }
}

/// Number of output vertices per cluster size.
pub(crate) fn cluster_size_histogram(replace: &[usize], n_out: usize) -> BTreeMap<usize, usize> {
    let mut sizes = vec![0usize; n_out];
    for &r in replace {
        sizes[r] += 1;
    }
    let mut hist = BTreeMap::new();
    for s in sizes {
        *hist.entry(s).or_insert(0) += 1;
    }
    hist
}

/// Composes two rounds: `first` maps the original mesh onto an intermediate
/// one, `second` maps the intermediate onto the output.
pub(crate) fn compose(first: &DecimationResult, second: DecimationResult) -> DecimationResult {
    let replace = first.replace.iter().map(|&r| second.replace[r]).collect();
    let mapping = first
        .mapping
        .iter()
        .zip(&first.replace)
        .map(|(&m, &r)| if m < 0 { -1 } else { second.mapping[r] })
        .collect();
    DecimationResult {
        mesh: second.mesh,
        replace,
        mapping,
        reached_target: first.reached_target && second.reached_target,
    }
}
