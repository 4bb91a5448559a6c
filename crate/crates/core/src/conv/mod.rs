//! Fuzzy mesh convolutions and their analytic backward passes.
//!
//! All three convolutions are depthwise: input channel `c` produces the
//! output channels `c·λ .. c·λ + λ` where `λ` is the depth multiplier. An
//! optional [`Pointwise`] layer mixes channels afterwards.
//!
//! * [`vertex2facet_forward`]: per-vertex features to per-facet features via
//!   barycentric interpolation of both features and the three corner filters.
//! * [`facet2facet_forward`]: pre-sampled texture features to per-facet
//!   features, interpolating only the filters.
//! * [`facet2vertex_forward`]: per-facet features to per-vertex features,
//!   blending `T` filters with fuzzy coefficients from a Gaussian mixture on
//!   facet normals.
//! * [`VertexToVertex`]: vertex2facet followed by facet2vertex.

mod checkpoint;
mod f2f;
mod f2v;
mod gmm;
mod kernel;
mod plan;
mod pointwise;
mod v2f;
mod v2v;

pub use checkpoint::{Checkpoint, NamedArray, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use f2f::{facet2facet_backward, facet2facet_forward, TexturedFacets};
pub use f2v::{facet2vertex_backward, facet2vertex_forward, Facet2VertexGrads, VertexGather};
pub use gmm::{default_sphere_means, gmm_backward, gmm_coefficients, MixtureGrads, SphereGmm, DEFAULT_SIGMA};
pub use kernel::DepthwiseKernel;
pub use plan::{BarycentricPlan, KRule, PlanConfig};
pub use pointwise::{Pointwise, PointwiseGrads};
pub use v2f::{vertex2facet_backward, vertex2facet_forward};
pub use v2v::{VertexToVertex, VertexToVertexCache, VertexToVertexGrads};
