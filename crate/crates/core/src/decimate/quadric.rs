//! Plane quadrics `(A, b, c)` with error `xᵀAx + 2bᵀx + c`.

use std::iter::Sum;
use std::ops::{Add, AddAssign};

use nalgebra::{Matrix3, Vector3};

use crate::mesh::{FacetAdjacency, FacetGeometry, Vec3};
use crate::par;

/// Reciprocal condition number below which the inverse placement is
/// considered unreliable.
pub const MIN_RCOND: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Quadric {
    pub a: Matrix3<f64>,
    pub b: Vector3<f64>,
    pub c: f64,
}

impl Quadric {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Quadric of the plane `n·x + d = 0`: `(nnᵀ, d n, d²)`.
    pub fn from_plane(n: Vec3, d: f64) -> Self {
        let n = Vector3::from(n);
        Self {
            a: n * n.transpose(),
            b: n * d,
            c: d * d,
        }
    }

    #[inline]
    pub fn error(&self, x: Vec3) -> f64 {
        let x = Vector3::from(x);
        x.dot(&(self.a * x)) + 2.0 * self.b.dot(&x) + self.c
    }

    /// `-A⁻¹b` when `A` is well conditioned (1-norm reciprocal condition
    /// number at least [`MIN_RCOND`]).
    pub fn minimizer(&self) -> Option<Vec3> {
        let inv = self.a.try_inverse()?;
        let norm1 = |m: &Matrix3<f64>| {
            (0..3)
                .map(|j| m.column(j).iter().map(|v| v.abs()).sum::<f64>())
                .fold(0.0, f64::max)
        };
        let denom = norm1(&self.a) * norm1(&inv);
        if !(denom.is_finite() && denom > 0.0) || 1.0 / denom < MIN_RCOND {
            return None;
        }
        let x = -(inv * self.b);
        Some([x.x, x.y, x.z])
    }
}

impl Add for Quadric {
    type Output = Quadric;

    fn add(self, o: Quadric) -> Quadric {
        Quadric {
            a: self.a + o.a,
            b: self.b + o.b,
            c: self.c + o.c,
        }
    }
}

impl AddAssign for Quadric {
    fn add_assign(&mut self, o: Quadric) {
        self.a += o.a;
        self.b += o.b;
        self.c += o.c;
    }
}

impl Sum for Quadric {
    fn sum<I: Iterator<Item = Quadric>>(iter: I) -> Quadric {
        iter.fold(Quadric::zero(), Add::add)
    }
}

/// Where a contracted cluster lands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PlacementRule {
    /// Mean of the member positions.
    #[default]
    Average,
    /// Quadric minimiser `-A⁻¹b`, falling back to the mean when `A` is
    /// ill-conditioned.
    Inverse,
}

impl std::str::FromStr for PlacementRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "average" => Ok(PlacementRule::Average),
            "inverse" => Ok(PlacementRule::Inverse),
            other => Err(format!("unknown placement rule `{other}`")),
        }
    }
}

impl PlacementRule {
    /// Target for a cluster with accumulated quadric `q` and member mean `mean`.
    #[inline]
    pub fn place(self, q: &Quadric, mean: Vec3) -> Vec3 {
        match self {
            PlacementRule::Average => mean,
            PlacementRule::Inverse => q.minimizer().unwrap_or(mean),
        }
    }
}

/// Plane quadric of a facet; `None` for zero-area facets.
pub fn facet_quadric(geom: &FacetGeometry) -> Option<Quadric> {
    (!geom.degenerate).then(|| Quadric::from_plane(geom.normal, geom.intercept))
}

/// Sum of the quadrics of the facets adjacent to `v`.
pub fn vertex_quadric(v: usize, adjacency: &FacetAdjacency, facet_quadrics: &[Quadric]) -> Quadric {
    adjacency.of(v).iter().map(|&f| facet_quadrics[f]).sum()
}

pub fn vertex_quadrics(adjacency: &FacetAdjacency, facet_quadrics: &[Quadric]) -> Vec<Quadric> {
    par::map_range(adjacency.vertex_count(), |v| {
        vertex_quadric(v, adjacency, facet_quadrics)
    })
}

/// Contraction cost and target of the pair `(i, j)`.
pub fn pair_cost(
    pair: (usize, usize),
    vertex_quadrics: &[Quadric],
    positions: &[Vec3],
    rule: PlacementRule,
) -> (f64, Vec3) {
    let (i, j) = pair;
    let q = vertex_quadrics[i] + vertex_quadrics[j];
    let (pi, pj) = (positions[i], positions[j]);
    let mean = [
        0.5 * (pi[0] + pj[0]),
        0.5 * (pi[1] + pj[1]),
        0.5 * (pi[2] + pj[2]),
    ];
    let target = rule.place(&q, mean);
    (q.error(target), target)
}
