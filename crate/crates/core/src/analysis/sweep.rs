use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use super::experiment::{run_cell, ExperimentConfig};
use crate::error::{Error, Result};
use crate::learner::TrainConfig;
use crate::quantum::SpinModel;

/// Quantity evaluated in each sweep cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    /// Mean rollout error over diagonal initial states.
    EpsilonBar,
    /// Time-averaged norm of the generator's time derivative.
    Xi,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::EpsilonBar => "epsilon_bar",
            Metric::Xi => "xi",
        })
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "epsilon_bar" | "epsilon" => Ok(Metric::EpsilonBar),
            "xi" => Ok(Metric::Xi),
            other => Err(Error::InvalidArgument(format!("unknown metric `{other}`"))),
        }
    }
}

/// A swept model parameter, named as in [`SpinModel::with_param`].
#[derive(Clone, Debug, PartialEq)]
pub struct Axis {
    pub name: String,
    pub values: Vec<f64>,
}

impl Axis {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            values,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepCell {
    pub axis1: f64,
    pub axis2: f64,
    /// `None` when the cell failed.
    pub value: Option<f64>,
    /// `ok` or the failure message.
    pub status: String,
    pub c_values: Vec<f64>,
}

/// Complete grid of cells, `axis1`-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepGrid {
    pub base: SpinModel,
    pub axis1: Axis,
    pub axis2: Axis,
    pub metric: Metric,
    pub n_init: usize,
    pub seed: u64,
    pub cells: Vec<SweepCell>,
}

impl SweepGrid {
    pub fn cell(&self, axis1: f64, axis2: f64) -> Option<&SweepCell> {
        self.cells.iter().find(|c| c.axis1 == axis1 && c.axis2 == axis2)
    }
}

/// Runs the pipeline for every `(axis1, axis2)` pair. Cells run in parallel
/// on the current rayon pool and are returned in grid order; a failing cell
/// is recorded without stopping the others.
pub fn sweep(base: &SpinModel, axis1: &Axis, axis2: &Axis, metric: Metric, config: &ExperimentConfig) -> Result<SweepGrid> {
    if axis1.values.is_empty() || axis2.values.is_empty() {
        return Err(Error::Empty("sweep axis"));
    }
    config.validate()?;
    base.with_param(&axis1.name, axis1.values[0])?
        .with_param(&axis2.name, axis2.values[0])?;
    let pairs: Vec<(f64, f64)> = axis1
        .values
        .iter()
        .flat_map(|&a| axis2.values.iter().map(move |&b| (a, b)))
        .collect();
    let cells = pairs
        .par_iter()
        .map(|&(a, b)| {
            let outcome = base
                .with_param(&axis1.name, a)
                .and_then(|m| m.with_param(&axis2.name, b))
                .and_then(|m| run_cell(&m, metric, config));
            match outcome {
                Ok(o) => SweepCell {
                    axis1: a,
                    axis2: b,
                    value: Some(o.value),
                    status: "ok".to_string(),
                    c_values: o.c_values,
                },
                Err(e) => SweepCell {
                    axis1: a,
                    axis2: b,
                    value: None,
                    status: format!("failed: {e}"),
                    c_values: Vec::new(),
                },
            }
        })
        .collect();
    Ok(SweepGrid {
        base: *base,
        axis1: axis1.clone(),
        axis2: axis2.clone(),
        metric,
        n_init: config.n_init,
        seed: config.seed,
        cells,
    })
}

/// A named sweep layout.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepPreset {
    pub name: &'static str,
    pub base: SpinModel,
    pub axis1: Axis,
    pub axis2: Axis,
    pub metric: Metric,
    pub train: TrainConfig,
}

const PRESETS: [&str; 6] = ["fig3a", "fig3b", "fig4b", "ci-fig3a", "ci-fig3b", "ci-fig4b"];

pub fn preset_names() -> &'static [&'static str] {
    &PRESETS
}

fn grid(from: f64, to: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| {
            let x = from + (to - from) * k as f64 / (n - 1) as f64;
            (x * 1e10).round() / 1e10
        })
        .collect()
}

/// Full-resolution layouts at `N = 9` and reduced CI layouts at `N = 7`.
pub fn preset(name: &str) -> Option<SweepPreset> {
    let model_i = |n| SpinModel::model_i(n, 1.0, 1.0, 1.0);
    let model_ii = |n| SpinModel::model_ii(n, 1.0, 1.0, 1.0, 1.0, 0.4);
    let hyper = |epochs| TrainConfig {
        epochs,
        ..TrainConfig::hyper()
    };
    let p = match name {
        "fig3a" => SweepPreset {
            name: "fig3a",
            base: model_i(9),
            axis1: Axis::new("v", grid(0.1, 2.0, 5)),
            axis2: Axis::new("alpha", grid(1.0, 3.0, 5)),
            metric: Metric::EpsilonBar,
            train: TrainConfig::linear(),
        },
        "fig3b" => SweepPreset {
            name: "fig3b",
            base: model_ii(9),
            axis1: Axis::new("v_prime", grid(0.2, 2.0, 5)),
            axis2: Axis::new("beta", grid(0.0, 1.0, 6)),
            metric: Metric::EpsilonBar,
            train: TrainConfig::linear(),
        },
        "fig4b" => SweepPreset {
            name: "fig4b",
            base: model_ii(9),
            axis1: Axis::new("v_prime", grid(0.2, 2.0, 5)),
            axis2: Axis::new("beta", grid(0.0, 1.0, 6)),
            metric: Metric::Xi,
            train: hyper(500),
        },
        "ci-fig3a" => SweepPreset {
            name: "ci-fig3a",
            base: model_i(7),
            axis1: Axis::new("v", vec![0.1, 2.0]),
            axis2: Axis::new("alpha", vec![1.0, 3.0]),
            metric: Metric::EpsilonBar,
            train: TrainConfig::linear(),
        },
        "ci-fig3b" => SweepPreset {
            name: "ci-fig3b",
            base: model_ii(7),
            axis1: Axis::new("v_prime", vec![0.2, 2.0]),
            axis2: Axis::new("beta", vec![0.0, 1.0]),
            metric: Metric::EpsilonBar,
            train: TrainConfig::linear(),
        },
        "ci-fig4b" => SweepPreset {
            name: "ci-fig4b",
            base: model_ii(7),
            axis1: Axis::new("v_prime", vec![0.2, 1.0, 2.0]),
            axis2: Axis::new("beta", vec![0.4]),
            metric: Metric::Xi,
            train: hyper(100),
        },
        _ => return None,
    };
    Some(p)
}
