use nalgebra::Vector4;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;

/// Four-component vectors on a uniform time grid. Unlike a trajectory,
/// the components are unconstrained: model predictions may leave the
/// Bloch ball or drift in `v₀`.
#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    grid: TimeGrid,
    values: Vec<Vector4<f64>>,
}

impl Series {
    pub fn new(grid: TimeGrid, values: Vec<Vector4<f64>>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values on a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Vector4<f64>] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Prefix covering `[0, n·dt]`.
    pub fn truncated(&self, steps: usize) -> Result<Series> {
        if steps > self.grid.steps() {
            return Err(Error::GridMismatch(format!(
                "cannot truncate {} steps to {steps}",
                self.grid.steps()
            )));
        }
        Series::new(TimeGrid::new(self.grid.dt(), steps)?, self.values[..=steps].to_vec())
    }

    /// Largest spatial norm `sqrt(v₁² + v₂² + v₃²)` over the series.
    pub fn max_spatial_norm(&self) -> f64 {
        self.values
            .iter()
            .map(|v| (v[1] * v[1] + v[2] * v[2] + v[3] * v[3]).sqrt())
            .fold(0.0, f64::max)
    }
}
