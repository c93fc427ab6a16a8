//! Learnable one-step propagators of the Bloch vector and their training.
//!
//! Both models map a Bloch vector `v(t)` to a prediction of `v(t + dt)`
//! through a 4×4 matrix: a constant matrix for [`LinearPropagator`] and a
//! time-dependent one produced by the [`HyperMlp`]. The generator is read
//! off as `L = (M − 1)/dt`.

mod adam;
mod hyper;
mod io;
mod linear;
mod train;

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix4, Vector4};

pub use adam::{AdamConfig, AdamState};
pub use hyper::{HyperInit, HyperMlp};
pub use io::{load_model, save_history, save_model, ModelFile};
pub use linear::LinearPropagator;
pub use train::{train, EpochLoss, ModelKind, TrainConfig, TrainedModel};

use crate::dataset::Sample;
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::series::Series;

/// Per-sample residual penalty.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum LossKind {
    /// `‖Mv − v′‖`, with gradient 0 at zero residual.
    #[default]
    Norm,
    /// `‖Mv − v′‖²`.
    SquaredNorm,
}

impl LossKind {
    /// Loss of one residual and its gradient with respect to the residual.
    fn eval(&self, r: &Vector4<f64>) -> (f64, Vector4<f64>) {
        match self {
            LossKind::Norm => {
                let n = r.norm();
                if n == 0.0 {
                    (0.0, Vector4::zeros())
                } else {
                    (n, r / n)
                }
            }
            LossKind::SquaredNorm => (r.norm_squared(), 2.0 * r),
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossKind::Norm => "norm",
            LossKind::SquaredNorm => "squared",
        })
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "norm" => Ok(LossKind::Norm),
            "squared" => Ok(LossKind::SquaredNorm),
            other => Err(Error::InvalidArgument(format!("unknown loss `{other}`"))),
        }
    }
}

/// A one-step propagator `M(t)` on Bloch vectors.
pub trait Propagator {
    fn propagator(&self, t: f64) -> Matrix4<f64>;

    /// `M(t)` at several times.
    fn propagators(&self, times: &[f64]) -> Vec<Matrix4<f64>> {
        times.iter().map(|&t| self.propagator(t)).collect()
    }
}

/// A propagator with a flat parameter vector and exact gradients.
pub trait Trainable: Propagator {
    fn num_params(&self) -> usize;
    fn params(&self) -> Vec<f64>;
    fn set_params(&mut self, params: &[f64]) -> Result<()>;

    /// Mean batch loss.
    fn loss(&self, batch: &[Sample], kind: LossKind) -> Result<f64>;

    /// Mean batch loss and its gradient with respect to [`Trainable::params`].
    fn loss_and_grad(&self, batch: &[Sample], kind: LossKind) -> Result<(f64, Vec<f64>)>;
}

/// Either trained model.
#[derive(Clone, Debug, PartialEq)]
pub enum GeneratorModel {
    Linear(LinearPropagator),
    Hyper(HyperMlp),
}

impl GeneratorModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            GeneratorModel::Linear(_) => ModelKind::Linear,
            GeneratorModel::Hyper(_) => ModelKind::Hyper,
        }
    }
}

impl Propagator for GeneratorModel {
    fn propagator(&self, t: f64) -> Matrix4<f64> {
        match self {
            GeneratorModel::Linear(m) => m.propagator(t),
            GeneratorModel::Hyper(m) => m.propagator(t),
        }
    }

    fn propagators(&self, times: &[f64]) -> Vec<Matrix4<f64>> {
        match self {
            GeneratorModel::Linear(m) => m.propagators(times),
            GeneratorModel::Hyper(m) => m.propagators(times),
        }
    }
}

impl Trainable for GeneratorModel {
    fn num_params(&self) -> usize {
        match self {
            GeneratorModel::Linear(m) => m.num_params(),
            GeneratorModel::Hyper(m) => m.num_params(),
        }
    }

    fn params(&self) -> Vec<f64> {
        match self {
            GeneratorModel::Linear(m) => m.params(),
            GeneratorModel::Hyper(m) => m.params(),
        }
    }

    fn set_params(&mut self, params: &[f64]) -> Result<()> {
        match self {
            GeneratorModel::Linear(m) => m.set_params(params),
            GeneratorModel::Hyper(m) => m.set_params(params),
        }
    }

    fn loss(&self, batch: &[Sample], kind: LossKind) -> Result<f64> {
        match self {
            GeneratorModel::Linear(m) => m.loss(batch, kind),
            GeneratorModel::Hyper(m) => m.loss(batch, kind),
        }
    }

    fn loss_and_grad(&self, batch: &[Sample], kind: LossKind) -> Result<(f64, Vec<f64>)> {
        match self {
            GeneratorModel::Linear(m) => m.loss_and_grad(batch, kind),
            GeneratorModel::Hyper(m) => m.loss_and_grad(batch, kind),
        }
    }
}

/// Generator matrix `L` acting on Bloch vectors, optionally tagged with the
/// time it was sampled at.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeneratorMatrix {
    pub l: Matrix4<f64>,
    pub t: Option<f64>,
}

/// `L = (M − 1)/dt`.
pub fn extract_generator(m: &Matrix4<f64>, dt: f64) -> Result<GeneratorMatrix> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("dt = {dt} must be positive")));
    }
    let l = (m - Matrix4::identity()) / dt;
    if !l.iter().all(|x| x.is_finite()) {
        return Err(Error::InvalidArgument("propagator has non-finite entries".into()));
    }
    Ok(GeneratorMatrix { l, t: None })
}

/// Iterates `v_{n+1} = M(t_n) v_n` from `v0` at `t_0 = 0` for `steps` steps.
/// Predictions are not renormalized.
pub fn rollout(model: &impl Propagator, v0: &Vector4<f64>, steps: usize, dt: f64) -> Result<Series> {
    if steps == 0 {
        return Err(Error::InvalidArgument("rollout needs at least one step".into()));
    }
    let grid = TimeGrid::new(dt, steps)?;
    let times: Vec<f64> = (0..steps).map(|n| grid.time(n)).collect();
    let mats = model.propagators(&times);
    let mut values = Vec::with_capacity(steps + 1);
    let mut v = *v0;
    values.push(v);
    for (n, m) in mats.iter().enumerate() {
        v = m * v;
        if !v.iter().all(|x| x.is_finite()) {
            return Err(Error::Divergence { step: n + 1 });
        }
        values.push(v);
    }
    Series::new(grid, values)
}

/// Deviation of the propagator's first row from `(1, 0, 0, 0)` (max-norm),
/// i.e. how far the map is from preserving `v₀ = 1`.
pub fn first_row_deviation(m: &Matrix4<f64>) -> f64 {
    let target = [1.0, 0.0, 0.0, 0.0];
    (0..4).map(|j| (m[(0, j)] - target[j]).abs()).fold(0.0, f64::max)
}
