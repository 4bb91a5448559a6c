use std::collections::BTreeMap;

use crate::{Error, Result};

/// How facet area selects the lattice resolution `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KRule {
    /// `k = ⌊(A − A_min)/(A_max − A_min)⌋·α + β`, so `k ∈ {β, α + β}`.
    #[default]
    Literal,
    /// `k = ⌊α·(A − A_min)/(A_max − A_min)⌋ + β`, spreading `k` over `β..=α+β`.
    Scaled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlanConfig {
    pub alpha: u32,
    pub beta: u32,
    pub rule: KRule,
}

impl Default for PlanConfig {
    fn default() -> Self {
        Self {
            alpha: 1,
            beta: 1,
            rule: KRule::Literal,
        }
    }
}

/// Per-facet barycentric sample points.
///
/// A facet at resolution `k` holds the `K = k(k+1)/2` points of the uniform
/// triangular lattice with `k` rows (corners included); `k = 1` is the
/// centroid alone.
#[derive(Debug, Clone, PartialEq)]
pub struct BarycentricPlan {
    ks: Vec<u32>,
    offsets: Vec<usize>,
    points: Vec<[f64; 3]>,
    /// `(1/K) Σ ξξᵀ` for each distinct `k`.
    moments: BTreeMap<u32, [[f64; 3]; 3]>,
}

impl BarycentricPlan {
    pub fn build(areas: &[f64], config: PlanConfig) -> Result<Self> {
        if config.alpha == 0 || config.beta == 0 {
            return Err(Error::Config(format!(
                "alpha and beta must be positive (got {}, {})",
                config.alpha, config.beta
            )));
        }
        if let Some(i) = areas.iter().position(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(Error::Config(format!("facet {i} has invalid area {}", areas[i])));
        }
        let lo = areas.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = areas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let ks = areas
            .iter()
            .map(|&a| {
                if hi <= lo {
                    return config.beta;
                }
                let t = (a - lo) / (hi - lo);
                match config.rule {
                    KRule::Literal => t.floor() as u32 * config.alpha + config.beta,
                    KRule::Scaled => (config.alpha as f64 * t).floor() as u32 + config.beta,
                }
            })
            .collect();
        Ok(Self::from_ks(ks))
    }

    /// Same resolution `k` on every facet.
    pub fn uniform(facet_count: usize, k: u32) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config("k must be positive".into()));
        }
        Ok(Self::from_ks(vec![k; facet_count]))
    }

    fn from_ks(ks: Vec<u32>) -> Self {
        let mut lattices: BTreeMap<u32, Vec<[f64; 3]>> = BTreeMap::new();
        for &k in &ks {
            lattices.entry(k).or_insert_with(|| lattice(k));
        }
        let mut offsets = Vec::with_capacity(ks.len() + 1);
        offsets.push(0);
        let mut points = Vec::new();
        for &k in &ks {
            points.extend_from_slice(&lattices[&k]);
            offsets.push(points.len());
        }
        let moments = lattices
            .iter()
            .map(|(&k, pts)| {
                let mut m = [[0.0; 3]; 3];
                for xi in pts {
                    for s in 0..3 {
                        for r in 0..3 {
                            m[s][r] += xi[s] * xi[r];
                        }
                    }
                }
                let inv = 1.0 / pts.len() as f64;
                m.iter_mut().flatten().for_each(|v| *v *= inv);
                (k, m)
            })
            .collect();
        Self {
            ks,
            offsets,
            points,
            moments,
        }
    }

    pub fn facet_count(&self) -> usize {
        self.ks.len()
    }

    pub fn k(&self, facet: usize) -> u32 {
        self.ks[facet]
    }

    pub fn points(&self, facet: usize) -> &[[f64; 3]] {
        &self.points[self.offsets[facet]..self.offsets[facet + 1]]
    }

    /// `(1/K) Σ_k ξ_k ξ_kᵀ` for the facet; the vertex2facet output is
    /// `Σ_{s,r} M[s][r] · w_s ⊙ I_r`.
    pub fn moment(&self, facet: usize) -> &[[f64; 3]; 3] {
        &self.moments[&self.ks[facet]]
    }
}

/// Lattice points `(i/k', j/k', (k'−i−j)/k')` with `k' = k − 1`.
pub(crate) fn lattice(k: u32) -> Vec<[f64; 3]> {
    if k == 1 {
        return vec![[1.0 / 3.0; 3]];
    }
    let kk = k - 1;
    let d = kk as f64;
    let mut pts = Vec::with_capacity((k * (k + 1) / 2) as usize);
    for i in 0..=kk {
        for j in 0..=kk - i {
            pts.push([i as f64 / d, j as f64 / d, (kk - i - j) as f64 / d]);
        }
    }
    pts
}
