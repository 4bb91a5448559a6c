//! Pooling and unpooling over the vertex clusters of a decimation.
//!
//! Pooling reduces the rows of every cluster into one coarse row; unpooling
//! broadcasts each coarse row back to all members of its cluster. The
//! backward passes are exact: sum pooling and unpooling are adjoint, average
//! pooling scatters `1/|cluster|`, max pooling routes to the recorded argmax.

use crate::decimate::DecimationResult;
use crate::features::{FeatureMatrix, Real};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolMode {
    Max,
    Average,
    /// `Σ wᵢfᵢ / Σ wᵢ` with caller-provided per-vertex weights.
    Weighted,
    Sum,
}

/// Members of every output vertex, in ascending input order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterIndex {
    offsets: Vec<usize>,
    members: Vec<usize>,
    replace: Vec<usize>,
}

impl ClusterIndex {
    pub fn from_replace(replace: &[usize], output_count: usize) -> Result<Self> {
        let mut offsets = vec![0usize; output_count + 1];
        for (i, &r) in replace.iter().enumerate() {
            if r >= output_count {
                return Err(Error::shape(format!(
                    "replace[{i}] = {r} exceeds {output_count} output vertices"
                )));
            }
            offsets[r + 1] += 1;
        }
        for r in 0..output_count {
            if offsets[r + 1] == 0 {
                return Err(Error::Internal(format!("output vertex {r} has an empty cluster")));
            }
            offsets[r + 1] += offsets[r];
        }
        let mut cursor = offsets.clone();
        let mut members = vec![0usize; replace.len()];
        for (i, &r) in replace.iter().enumerate() {
            members[cursor[r]] = i;
            cursor[r] += 1;
        }
        Ok(Self {
            offsets,
            members,
            replace: replace.to_vec(),
        })
    }

    pub fn from_result(result: &DecimationResult) -> Result<Self> {
        Self::from_replace(&result.replace, result.output_vertex_count())
    }

    #[inline]
    pub fn members(&self, r: usize) -> &[usize] {
        &self.members[self.offsets[r]..self.offsets[r + 1]]
    }

    pub fn output_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn input_count(&self) -> usize {
        self.replace.len()
    }

    pub fn replace(&self) -> &[usize] {
        &self.replace
    }
}

/// Pooled features; `argmax[r * C + c]` is the input row chosen by max pooling.
#[derive(Debug, Clone, PartialEq)]
pub struct Pooled<T> {
    pub features: FeatureMatrix<T>,
    pub argmax: Option<Vec<usize>>,
}

pub fn pool<T: Real>(
    features: &FeatureMatrix<T>,
    result: &DecimationResult,
    mode: PoolMode,
    weights: Option<&[T]>,
) -> Result<Pooled<T>> {
    pool_clusters(features, &ClusterIndex::from_result(result)?, mode, weights)
}

pub fn pool_clusters<T: Real>(
    features: &FeatureMatrix<T>,
    index: &ClusterIndex,
    mode: PoolMode,
    weights: Option<&[T]>,
) -> Result<Pooled<T>> {
    if features.rows() != index.input_count() {
        return Err(Error::shape(format!(
            "{} feature rows for {} clustered vertices",
            features.rows(),
            index.input_count()
        )));
    }
    let weights = check_weights(index, mode, weights)?;
    let cols = features.cols();
    let mut out = FeatureMatrix::zeros(index.output_count(), cols);
    match mode {
        PoolMode::Max => {
            let mut argmax = vec![0usize; index.output_count() * cols];
            let rows: Vec<(Vec<T>, Vec<usize>)> = crate::par::map_range(index.output_count(), |r| {
                let m = index.members(r);
                let mut best = features.row(m[0]).to_vec();
                let mut arg = vec![m[0]; cols];
                for &i in &m[1..] {
                    for (c, &x) in features.row(i).iter().enumerate() {
                        // strict: ties stay with the lowest index
                        if x > best[c] {
                            best[c] = x;
                            arg[c] = i;
                        }
                    }
                }
                (best, arg)
            });
            for (r, (vals, arg)) in rows.into_iter().enumerate() {
                out.row_mut(r).copy_from_slice(&vals);
                argmax[r * cols..(r + 1) * cols].copy_from_slice(&arg);
            }
            Ok(Pooled {
                features: out,
                argmax: Some(argmax),
            })
        }
        _ => {
            out.fill_rows(|r, row| {
                let m = index.members(r);
                let mut norm = T::zero();
                for &i in m {
                    let w = match (mode, weights) {
                        (PoolMode::Weighted, Some(w)) => w[i],
                        _ => T::one(),
                    };
                    norm += w;
                    for (o, &x) in row.iter_mut().zip(features.row(i)) {
                        *o += w * x;
                    }
                }
                if mode != PoolMode::Sum {
                    let inv = T::one() / norm;
                    row.iter_mut().for_each(|o| *o *= inv);
                }
            });
            Ok(Pooled {
                features: out,
                argmax: None,
            })
        }
    }
}

fn check_weights<'a, T: Real>(
    index: &ClusterIndex,
    mode: PoolMode,
    weights: Option<&'a [T]>,
) -> Result<Option<&'a [T]>> {
    if mode != PoolMode::Weighted {
        return Ok(None);
    }
    let w = weights.ok_or_else(|| Error::Config("weighted pooling needs per-vertex weights".into()))?;
    if w.len() != index.input_count() {
        return Err(Error::shape(format!(
            "{} weights for {} vertices",
            w.len(),
            index.input_count()
        )));
    }
    for r in 0..index.output_count() {
        let s: T = index.members(r).iter().map(|&i| w[i]).sum();
        if s == T::zero() {
            return Err(Error::Config(format!("weights of cluster {r} sum to zero")));
        }
    }
    Ok(Some(w))
}

/// Broadcasts each coarse row to every member of its cluster.
pub fn unpool<T: Real>(coarse: &FeatureMatrix<T>, result: &DecimationResult) -> Result<FeatureMatrix<T>> {
    unpool_replace(coarse, &result.replace)
}

pub fn unpool_replace<T: Real>(coarse: &FeatureMatrix<T>, replace: &[usize]) -> Result<FeatureMatrix<T>> {
    if let Some(&r) = replace.iter().find(|&&r| r >= coarse.rows()) {
        return Err(Error::shape(format!(
            "replace refers to coarse row {r} but only {} rows exist",
            coarse.rows()
        )));
    }
    let mut out = FeatureMatrix::zeros(replace.len(), coarse.cols());
    out.fill_rows(|i, row| row.copy_from_slice(coarse.row(replace[i])));
    Ok(out)
}

/// Gradient of the pooled output with respect to the fine input.
///
/// `argmax` comes from the forward max pooling; `weights` from the forward
/// weighted pooling.
pub fn pool_backward<T: Real>(
    grad_out: &FeatureMatrix<T>,
    index: &ClusterIndex,
    mode: PoolMode,
    weights: Option<&[T]>,
    argmax: Option<&[usize]>,
) -> Result<FeatureMatrix<T>> {
    if grad_out.rows() != index.output_count() {
        return Err(Error::shape(format!(
            "{} gradient rows for {} clusters",
            grad_out.rows(),
            index.output_count()
        )));
    }
    let weights = check_weights(index, mode, weights)?;
    let cols = grad_out.cols();
    let mut grad = FeatureMatrix::zeros(index.input_count(), cols);
    match mode {
        PoolMode::Max => {
            let argmax = argmax.ok_or_else(|| Error::Config("max pooling backward needs argmax".into()))?;
            if argmax.len() != index.output_count() * cols {
                return Err(Error::shape("argmax does not match the gradient shape"));
            }
            grad.fill_rows(|i, row| {
                let r = index.replace()[i];
                for (c, g) in row.iter_mut().enumerate() {
                    if argmax[r * cols + c] == i {
                        *g = grad_out.get(r, c);
                    }
                }
            });
        }
        _ => {
            grad.fill_rows(|i, row| {
                let r = index.replace()[i];
                let scale = match mode {
                    PoolMode::Sum => T::one(),
                    PoolMode::Average => T::one() / T::of(index.members(r).len() as f64),
                    PoolMode::Weighted => {
                        let w = weights.expect("checked");
                        let s: T = index.members(r).iter().map(|&k| w[k]).sum();
                        w[i] / s
                    }
                    PoolMode::Max => unreachable!(),
                };
                for (g, &u) in row.iter_mut().zip(grad_out.row(r)) {
                    *g = scale * u;
                }
            });
        }
    }
    Ok(grad)
}

/// Adjoint of [`unpool`]: sum pooling of the fine gradient.
pub fn unpool_backward<T: Real>(grad_fine: &FeatureMatrix<T>, index: &ClusterIndex) -> Result<FeatureMatrix<T>> {
    pool_clusters(grad_fine, index, PoolMode::Sum, None).map(|p| p.features)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn index() -> ClusterIndex {
        // clusters {0, 2, 3} -> 0 and {1, 4} -> 1
        ClusterIndex::from_replace(&[0, 1, 0, 0, 1], 2).unwrap()
    }

    fn column(v: &[f64]) -> FeatureMatrix<f64> {
        FeatureMatrix::from_vec(v.len(), 1, v.to_vec()).unwrap()
    }

    #[test]
    fn max_picks_largest_and_lowest_on_ties() {
        let f = column(&[1.0, 2.0, 5.0, 3.0, 2.0]);
        let p = pool_clusters(&f, &index(), PoolMode::Max, None).unwrap();
        assert_eq!(p.features.as_slice(), &[5.0, 2.0]);
        assert_eq!(p.argmax.unwrap(), vec![2, 1]);
    }

    #[test]
    fn identity_clusters_are_a_noop() {
        let idx = ClusterIndex::from_replace(&[0, 1, 2], 3).unwrap();
        let f = FeatureMatrix::from_rows(&[[1.0, -1.0], [2.0, 0.5], [3.0, 9.0]]).unwrap();
        for mode in [PoolMode::Max, PoolMode::Average, PoolMode::Sum] {
            assert_eq!(pool_clusters(&f, &idx, mode, None).unwrap().features, f);
        }
        assert_eq!(unpool_replace(&f, &[0, 1, 2]).unwrap(), f);
    }

    #[test]
    fn weighted_and_average() {
        let f = column(&[1.0, 2.0, 4.0, 7.0, 4.0]);
        let avg = pool_clusters(&f, &index(), PoolMode::Average, None).unwrap();
        assert_eq!(avg.features.as_slice(), &[4.0, 3.0]);
        let w = [1.0, 1.0, 0.0, 1.0, 3.0];
        let wp = pool_clusters(&f, &index(), PoolMode::Weighted, Some(&w)).unwrap();
        assert_eq!(wp.features.as_slice(), &[4.0, 3.5]);
        assert!(matches!(
            pool_clusters(&f, &index(), PoolMode::Weighted, None),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn unpool_broadcasts_representative() {
        let coarse = column(&[10.0, 20.0]);
        let fine = unpool_replace(&coarse, index().replace()).unwrap();
        assert_eq!(fine.as_slice(), &[10.0, 20.0, 10.0, 10.0, 20.0]);
        assert!(unpool_replace(&coarse, &[0, 2]).is_err());
    }

    #[test]
    fn max_backward_routes_to_argmax() {
        let f = column(&[1.0, 2.0, 5.0, 3.0, 2.0]);
        let p = pool_clusters(&f, &index(), PoolMode::Max, None).unwrap();
        let g = column(&[1.5, -2.0]);
        let back = pool_backward(&g, &index(), PoolMode::Max, None, p.argmax.as_deref()).unwrap();
        assert_eq!(back.as_slice(), &[0.0, -2.0, 1.5, 0.0, 0.0]);
    }
}
