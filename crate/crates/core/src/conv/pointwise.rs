use rand::Rng;

use crate::features::{FeatureMatrix, Real};
use crate::{par, Error, Result};

/// Dense `1x1` channel-mixing layer `y = W x + b` applied to every row.
#[derive(Debug, Clone, PartialEq)]
pub struct Pointwise<T = f64> {
    inputs: usize,
    outputs: usize,
    /// Row-major `outputs x inputs`.
    weights: Vec<T>,
    bias: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointwiseGrads<T = f64> {
    pub input: FeatureMatrix<T>,
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Real> Pointwise<T> {
    pub fn new(inputs: usize, outputs: usize, weights: Vec<T>, bias: Vec<T>) -> Result<Self> {
        if weights.len() != inputs * outputs || bias.len() != outputs {
            return Err(Error::shape(format!(
                "pointwise layer {outputs}x{inputs} got {} weights and {} biases",
                weights.len(),
                bias.len()
            )));
        }
        Ok(Self {
            inputs,
            outputs,
            weights,
            bias,
        })
    }

    pub fn random(inputs: usize, outputs: usize, rng: &mut impl Rng) -> Self {
        let mut draw = |n: usize| (0..n).map(|_| T::of(rng.random_range(-1.0..=1.0))).collect::<Vec<_>>();
        let weights = draw(inputs * outputs);
        let bias = draw(outputs);
        Self {
            inputs,
            outputs,
            weights,
            bias,
        }
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [T] {
        &mut self.weights
    }

    pub fn bias(&self) -> &[T] {
        &self.bias
    }

    pub fn bias_mut(&mut self) -> &mut [T] {
        &mut self.bias
    }

    pub fn forward(&self, x: &FeatureMatrix<T>) -> Result<FeatureMatrix<T>> {
        x.ensure_shape(x.rows(), self.inputs, "pointwise input")?;
        let mut y = FeatureMatrix::zeros(x.rows(), self.outputs);
        y.fill_rows(|r, row| {
            let xr = x.row(r);
            for (o, out) in row.iter_mut().enumerate() {
                let w = &self.weights[o * self.inputs..(o + 1) * self.inputs];
                *out = self.bias[o] + w.iter().zip(xr).map(|(&a, &b)| a * b).sum::<T>();
            }
        });
        Ok(y)
    }

    pub fn backward(&self, x: &FeatureMatrix<T>, grad_out: &FeatureMatrix<T>) -> Result<PointwiseGrads<T>> {
        x.ensure_shape(x.rows(), self.inputs, "pointwise input")?;
        grad_out.ensure_shape(x.rows(), self.outputs, "pointwise gradient")?;
        let mut input = FeatureMatrix::zeros(x.rows(), self.inputs);
        input.fill_rows(|r, row| {
            for (o, &g) in grad_out.row(r).iter().enumerate() {
                let w = &self.weights[o * self.inputs..(o + 1) * self.inputs];
                for (d, &wi) in row.iter_mut().zip(w) {
                    *d += g * wi;
                }
            }
        });
        let n_w = self.inputs * self.outputs;
        let acc = par::sum_chunks(x.rows(), n_w + self.outputs, |range, acc: &mut [T]| {
            for r in range {
                let xr = x.row(r);
                for (o, &g) in grad_out.row(r).iter().enumerate() {
                    for (i, &xi) in xr.iter().enumerate() {
                        acc[o * self.inputs + i] += g * xi;
                    }
                    acc[n_w + o] += g;
                }
            }
        });
        Ok(PointwiseGrads {
            input,
            weights: acc[..n_w].to_vec(),
            bias: acc[n_w..].to_vec(),
        })
    }
}
