use nalgebra::{Matrix4, Vector4};

use super::{LossKind, Propagator, Trainable};
use crate::dataset::Sample;
use crate::error::{Error, Result};

/// Time-independent propagator `o = M v`; the 16 entries of `M` are the
/// parameters, flattened row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearPropagator {
    pub m: Matrix4<f64>,
}

impl Default for LinearPropagator {
    /// Starts at the identity, the `dt → 0` propagator.
    fn default() -> Self {
        Self {
            m: Matrix4::identity(),
        }
    }
}

impl LinearPropagator {
    pub fn new(m: Matrix4<f64>) -> Self {
        Self { m }
    }

    pub fn forward(&self, v: &Vector4<f64>) -> Vector4<f64> {
        self.m * v
    }
}

impl Propagator for LinearPropagator {
    fn propagator(&self, _t: f64) -> Matrix4<f64> {
        self.m
    }
}

impl Trainable for LinearPropagator {
    fn num_params(&self) -> usize {
        16
    }

    fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(16);
        for i in 0..4 {
            for j in 0..4 {
                out.push(self.m[(i, j)]);
            }
        }
        out
    }

    fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != 16 {
            return Err(Error::ShapeMismatch {
                expected: 16,
                found: params.len(),
            });
        }
        self.m = Matrix4::from_row_slice(params);
        Ok(())
    }

    fn loss(&self, batch: &[Sample], kind: LossKind) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::Empty("batch"));
        }
        let total: f64 = batch
            .iter()
            .map(|s| kind.eval(&(self.m * s.input() - s.target())).0)
            .sum();
        Ok(total / batch.len() as f64)
    }

    fn loss_and_grad(&self, batch: &[Sample], kind: LossKind) -> Result<(f64, Vec<f64>)> {
        if batch.is_empty() {
            return Err(Error::Empty("batch"));
        }
        let mut total = 0.0;
        let mut grad = Matrix4::zeros();
        for s in batch {
            let r = self.m * s.input() - s.target();
            let (l, g) = kind.eval(&r);
            total += l;
            grad += g * s.input().transpose();
        }
        let scale = 1.0 / batch.len() as f64;
        let mut flat = Vec::with_capacity(16);
        for i in 0..4 {
            for j in 0..4 {
                flat.push(grad[(i, j)] * scale);
            }
        }
        Ok((total * scale, flat))
    }
}
