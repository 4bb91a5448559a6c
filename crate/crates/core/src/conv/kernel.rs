use rand::Rng;

use crate::features::Real;
use crate::{Error, Result};

/// Depthwise filter bank: `taps` filters, each holding `channels x λ` weights.
///
/// Weight `(tap, c, m)` lives at `(tap·C + c)·λ + m`.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthwiseKernel<T = f64> {
    taps: usize,
    channels: usize,
    multiplier: usize,
    weights: Vec<T>,
}

impl<T: Real> DepthwiseKernel<T> {
    pub fn new(taps: usize, channels: usize, multiplier: usize, weights: Vec<T>) -> Result<Self> {
        if taps == 0 || multiplier == 0 {
            return Err(Error::Config(format!(
                "kernel needs at least one tap and a positive multiplier (got {taps} taps, λ = {multiplier})"
            )));
        }
        if weights.len() != taps * channels * multiplier {
            return Err(Error::shape(format!(
                "{} kernel weights, expected {taps}x{channels}x{multiplier}",
                weights.len()
            )));
        }
        Ok(Self {
            taps,
            channels,
            multiplier,
            weights,
        })
    }

    pub fn zeros(taps: usize, channels: usize, multiplier: usize) -> Result<Self> {
        Self::new(taps, channels, multiplier, vec![T::zero(); taps * channels * multiplier])
    }

    /// Weights drawn uniformly from `[-1, 1]`.
    pub fn random(taps: usize, channels: usize, multiplier: usize, rng: &mut impl Rng) -> Result<Self> {
        let w = (0..taps * channels * multiplier)
            .map(|_| T::of(rng.random_range(-1.0..=1.0)))
            .collect();
        Self::new(taps, channels, multiplier, w)
    }

    /// Every tap holds the same filter.
    pub fn shared(taps: usize, filter: &[T], multiplier: usize) -> Result<Self> {
        if !filter.len().is_multiple_of(multiplier) {
            return Err(Error::shape("filter length is not a multiple of λ"));
        }
        let channels = filter.len() / multiplier;
        Self::new(taps, channels, multiplier, filter.repeat(taps))
    }

    #[inline]
    pub fn taps(&self) -> usize {
        self.taps
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn multiplier(&self) -> usize {
        self.multiplier
    }

    #[inline]
    pub fn output_channels(&self) -> usize {
        self.channels * self.multiplier
    }

    #[inline]
    pub fn get(&self, tap: usize, c: usize, m: usize) -> T {
        self.weights[(tap * self.channels + c) * self.multiplier + m]
    }

    /// The `C·λ` weights of one tap, laid out like an output row.
    #[inline]
    pub fn tap(&self, tap: usize) -> &[T] {
        let w = self.output_channels();
        &self.weights[tap * w..(tap + 1) * w]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.weights
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.weights
    }

    pub fn cast<U: Real>(&self) -> DepthwiseKernel<U> {
        DepthwiseKernel {
            taps: self.taps,
            channels: self.channels,
            multiplier: self.multiplier,
            weights: self.weights.iter().map(|&w| U::of(w.as_f64())).collect(),
        }
    }

    pub(crate) fn expect_shape(&self, taps: usize, channels: usize) -> Result<()> {
        if self.taps != taps || self.channels != channels {
            return Err(Error::shape(format!(
                "kernel is {}x{} (taps x channels), expected {taps}x{channels}",
                self.taps, self.channels
            )));
        }
        Ok(())
    }
}
