//! Error and non-Markovianity diagnostics, experiment pipelines and
//! parameter sweeps.

mod experiment;
mod report;
mod sweep;

pub use experiment::{
    build_dataset, dataset_from, epsilon_bar, extrapolation_check, run_cell, CellOutcome, EpsilonBar, ExperimentConfig, Extrapolation, LinearSplit,
};
pub use report::{save_comparison, save_sweep, save_xi};
pub use sweep::{preset, preset_names, sweep, Axis, Metric, SweepCell, SweepGrid, SweepPreset};

use nalgebra::Matrix4;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::learner::{extract_generator, Propagator};
use crate::series::Series;

/// Trapezoidal mean of samples on a uniform grid.
fn trapezoid_mean(values: &[f64], dt: f64) -> f64 {
    let n = values.len();
    if n == 1 {
        return values[0];
    }
    let inner: f64 = values[1..n - 1].iter().sum();
    let integral = dt * (inner + 0.5 * (values[0] + values[n - 1]));
    integral / (dt * (n - 1) as f64)
}

fn same_grid(a: &TimeGrid, b: &TimeGrid) -> Result<()> {
    if a.steps() != b.steps() || (a.dt() - b.dt()).abs() > 1e-12 * a.dt() {
        return Err(Error::GridMismatch(format!(
            "grids differ: {} steps of {} vs {} steps of {}",
            a.steps(),
            a.dt(),
            b.steps(),
            b.dt()
        )));
    }
    Ok(())
}

/// Euclidean norm of the four-component residual at every grid point.
pub fn residual_norms(predicted: &Series, exact: &Series) -> Result<Vec<f64>> {
    same_grid(predicted.grid(), exact.grid())?;
    Ok(predicted
        .values()
        .iter()
        .zip(exact.values())
        .map(|(p, e)| (p - e).norm())
        .collect())
}

/// Time-averaged residual norm `(1/T)∫‖v_mod − v_ex‖ dt` by the trapezoidal
/// rule.
pub fn epsilon(predicted: &Series, exact: &Series) -> Result<f64> {
    let r = residual_norms(predicted, exact)?;
    Ok(trapezoid_mean(&r, predicted.grid().dt()))
}

/// Comparison of one predicted trajectory against the exact one.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorReport {
    pub epsilon: f64,
    pub residuals: Vec<f64>,
    pub t_total: f64,
    pub model: String,
    pub initial: [f64; 3],
}

impl ErrorReport {
    pub fn new(predicted: &Series, exact: &Series, model: impl Into<String>, initial: [f64; 3]) -> Result<Self> {
        let residuals = residual_norms(predicted, exact)?;
        Ok(Self {
            epsilon: trapezoid_mean(&residuals, exact.grid().dt()),
            residuals,
            t_total: exact.grid().duration(),
            model: model.into(),
            initial,
        })
    }
}

/// Generators `L_k = (M(t_k) − 1)/dt` of a learned propagator on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorTimeSeries {
    pub grid: TimeGrid,
    pub generators: Vec<Matrix4<f64>>,
}

impl GeneratorTimeSeries {
    pub fn new(grid: TimeGrid, generators: Vec<Matrix4<f64>>) -> Result<Self> {
        if generators.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} generators on a grid of {} points",
                generators.len(),
                grid.len()
            )));
        }
        if generators.iter().any(|l| !l.iter().all(|x| x.is_finite())) {
            return Err(Error::InvalidArgument("generator series has non-finite entries".into()));
        }
        Ok(Self { grid, generators })
    }

    /// Samples `model` at `t_k = k·dt` over `[0, T]`.
    pub fn from_model(model: &impl Propagator, dt: f64, t_total: f64) -> Result<Self> {
        let grid = TimeGrid::from_duration(t_total, dt)?;
        let times: Vec<f64> = grid.times().collect();
        let generators = model
            .propagators(&times)
            .iter()
            .map(|m| extract_generator(m, dt).map(|g| g.l))
            .collect::<Result<Vec<_>>>()?;
        Self::new(grid, generators)
    }
}

/// `ξ(t_k) = ‖dL/dt‖_F`, with central differences inside the grid and
/// second-order one-sided differences at both ends.
pub fn xi_series(gens: &GeneratorTimeSeries) -> Result<ScalarSeries> {
    let l = &gens.generators;
    let n = l.len();
    if n < 3 {
        return Err(Error::InvalidArgument(format!(
            "need at least 3 generator samples, found {n}"
        )));
    }
    let h = gens.grid.dt();
    let mut xi = Vec::with_capacity(n);
    xi.push(((-3.0 * l[0] + 4.0 * l[1] - l[2]) / (2.0 * h)).norm());
    for k in 1..n - 1 {
        xi.push(((l[k + 1] - l[k - 1]) / (2.0 * h)).norm());
    }
    xi.push(((3.0 * l[n - 1] - 4.0 * l[n - 2] + l[n - 3]) / (2.0 * h)).norm());
    Ok(ScalarSeries { grid: gens.grid, values: xi })
}

/// `Ξ = (1/T)∫₀ᵀ ξ dt` by the trapezoidal rule over the first `T/dt` steps.
pub fn xi_average(xi: &ScalarSeries, t_total: f64) -> Result<f64> {
    let steps = TimeGrid::from_duration(t_total, xi.grid.dt())?.steps();
    if steps > xi.grid.steps() {
        return Err(Error::GridMismatch(format!(
            "ξ series covers [0, {}] but Ξ needs [0, {t_total}]",
            xi.grid.duration()
        )));
    }
    Ok(trapezoid_mean(&xi.values[..=steps], xi.grid.dt()))
}

/// Scalar samples on a uniform grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarSeries {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
}
