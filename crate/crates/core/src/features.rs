//! Dense row-major feature storage shared by pooling and convolutions.

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

use crate::{Error, Result};

/// Floating-point scalar accepted by the feature kernels.
///
/// Implemented for `f64` (reference path used by oracles and gradient
/// checks) and `f32` (production path).
pub trait Real:
    Float + FromPrimitive + ToPrimitive + AddAssign + MulAssign + Sum + Debug + Default + Send + Sync + 'static
{
    fn of(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("finite f64 converts")
    }

    fn as_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).expect("float converts to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// `rows x cols` matrix of per-vertex (or per-facet) channel values.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix<T = f64> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> FeatureMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(format!(
                "feature buffer has {} values, expected {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::shape(format!(
                    "row {i} has {} channels, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, c: usize) -> T {
        self.data[i * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, i: usize, c: usize, v: T) {
        self.data[i * self.cols + c] = v;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    /// Fills rows in parallel; `f(row_index, row)` owns its row exclusively.
    pub fn fill_rows<F>(&mut self, f: F)
    where
        F: Fn(usize, &mut [T]) + Sync + Send,
    {
        if self.cols == 0 {
            return;
        }
        crate::par::for_each_chunk_mut(&mut self.data, self.cols, f);
    }

    pub fn map<U: Real>(&self, f: impl Fn(T) -> U) -> FeatureMatrix<U> {
        FeatureMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn cast<U: Real>(&self) -> FeatureMatrix<U> {
        self.map(|v| U::of(v.as_f64()))
    }

    /// Frobenius inner product.
    pub fn dot(&self, other: &Self) -> T {
        assert_eq!(self.data.len(), other.data.len());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a * b)
            .sum()
    }

    /// Largest absolute elementwise difference.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        assert_eq!(self.data.len(), other.data.len());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), T::max)
    }

    pub(crate) fn ensure_shape(&self, rows: usize, cols: usize, what: &str) -> Result<()> {
        if self.rows != rows || self.cols != cols {
            return Err(Error::shape(format!(
                "{what}: expected {rows}x{cols}, got {}x{}",
                self.rows, self.cols
            )));
        }
        Ok(())
    }
}
