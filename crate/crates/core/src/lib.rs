//! Cluster-based mesh decimation, cluster pooling and fuzzy mesh convolutions.
//!
//! The crate is organised around a handful of modules:
//!
//! * [`mesh`]: the triangle mesh carrier, facet geometry and adjacency queries.
//! * [`io`]: OBJ / PLY reading and writing, plus mini-batch concatenation.
//! * [`decimate`]: quadrics, the iterative QEM oracle and the parallel
//!   cluster-based simplifier that emits `replace` / `mapping` tensors.
//! * [`pool`]: max / average / weighted / sum pooling and unpooling over the
//!   vertex clusters gathered during decimation.
//! * [`conv`]: vertex2facet, facet2facet, facet2vertex and vertex2vertex
//!   convolutions with analytic backward passes.
//! * [`gradcheck`]: central finite-difference checks for every backward.
//! * [`bench`]: timing records, medians and linear fits for benchmarks.
//! * [`synth`]: deterministic synthetic meshes.
//!
//! Data-parallel loops run on rayon when the `parallel` feature is enabled
//! (the default) and fall back to plain iterators otherwise. Every parallel
//! loop writes disjoint output slots, so results do not depend on the number
//! of worker threads.

pub mod bench;
pub mod conv;
pub mod decimate;
mod error;
pub mod features;
pub mod gradcheck;
pub mod io;
pub mod mesh;
pub mod par;
pub mod pool;
pub mod synth;

pub use error::{Error, Result};
pub use features::{FeatureMatrix, Real};
pub use mesh::{BatchedMesh, FacetAdjacency, FacetGeometry, TriMesh};
