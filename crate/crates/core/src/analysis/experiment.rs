use std::fmt;
use std::str::FromStr;

use super::sweep::Metric;
use super::{epsilon, xi_average, xi_series, GeneratorTimeSeries};
use crate::dataset::{
    build_samples, diagonal_bloch, sample_initial_diagonal, split_by_trajectory, split_hypermodel,
    split_time_independent, stream_rng, trajectories_from, Dataset, DatasetMeta, ExactDynamics, Sampler, SplitKind,
    Stream, Trajectory, TrajectoryRequest,
};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::learner::{rollout, train, ModelKind, Propagator, TrainConfig, TrainedModel};
use crate::quantum::SpinModel;

/// How the time-independent model's data is divided.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum LinearSplit {
    /// Early part of every trajectory trains, the rest validates.
    #[default]
    Time,
    /// Separate training and validation trajectories.
    Trajectories,
}

impl fmt::Display for LinearSplit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LinearSplit::Time => "time",
            LinearSplit::Trajectories => "trajectories",
        })
    }
}

impl FromStr for LinearSplit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "time" => Ok(LinearSplit::Time),
            "trajectories" | "trajectory" => Ok(LinearSplit::Trajectories),
            other => Err(Error::InvalidArgument(format!("unknown split `{other}`"))),
        }
    }
}

/// Everything needed to go from a spin model to a trained, evaluated model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub train_count: usize,
    pub val_count: usize,
    pub t_train: f64,
    pub t_total: f64,
    pub dt: f64,
    pub seed: u64,
    pub sampler: Sampler,
    pub linear_split: LinearSplit,
    pub split_fraction: f64,
    /// Number of diagonal initial states averaged in `ε̄`.
    pub n_init: usize,
    /// Validation samples drawn from the diagonal-state trajectories when
    /// training the hypermodel.
    pub hyper_val_samples: usize,
    pub train: TrainConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            train_count: 100,
            val_count: 20,
            t_train: 10.0,
            t_total: 20.0,
            dt: 0.01,
            seed: 0,
            sampler: Sampler::Ball,
            linear_split: LinearSplit::Time,
            split_fraction: 0.8,
            n_init: 5,
            hyper_val_samples: 4096,
            train: TrainConfig::linear(),
        }
    }
}

impl ExperimentConfig {
    /// Every violated constraint, or nothing.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.train_count == 0 {
            out.push("train_count must be positive".to_string());
        }
        if self.val_count == 0 {
            out.push("val_count must be positive".to_string());
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            out.push(format!("dt = {} must be positive", self.dt));
        } else {
            for (name, t) in [("t_train", self.t_train), ("t_total", self.t_total)] {
                if let Err(e) = TimeGrid::from_duration(t, self.dt) {
                    out.push(format!("{name}: {e}"));
                }
            }
        }
        if self.t_total < self.t_train {
            out.push(format!(
                "t_total = {} must be at least t_train = {}",
                self.t_total, self.t_train
            ));
        }
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            out.push(format!("split_fraction = {} must lie in (0, 1)", self.split_fraction));
        }
        if self.n_init == 0 {
            out.push("n_init must be positive".to_string());
        }
        if self.hyper_val_samples == 0 {
            out.push("hyper_val_samples must be positive".to_string());
        }
        out.extend(self.train.problems());
        out
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(p.join("; ")))
        }
    }

    fn train_steps(&self) -> Result<usize> {
        Ok(TimeGrid::from_duration(self.t_train, self.dt)?.steps())
    }

    fn horizon(&self) -> Result<TimeGrid> {
        TimeGrid::from_duration(self.t_total.max(self.t_train), self.dt)
    }
}

fn truncated(trajs: Vec<Trajectory>, steps: usize) -> Result<Vec<Trajectory>> {
    trajs.iter().map(|t| t.truncated(steps)).collect()
}

/// Training data on `[0, t_train]` for the model kind in `config.train`.
/// The time-independent model uses `train_count` trajectories split in time
/// (or `val_count` extra trajectories); the hypermodel validates on
/// samples of `val_count` diagonal-state trajectories.
pub fn dataset_from(exact: &ExactDynamics, config: &ExperimentConfig) -> Result<Dataset> {
    config.validate()?;
    let steps = config.train_steps()?;
    let seed = config.seed;
    let meta = DatasetMeta {
        model: *exact.model(),
        seed,
        dt: config.dt,
        t_total: config.t_train,
        split: SplitKind::Trajectory,
    };
    let request = |count, sampler, first_id| {
        TrajectoryRequest::new(count, config.t_train, config.dt, sampler, seed).starting_at(first_id)
    };
    let train_trajs = truncated(
        trajectories_from(exact, &request(config.train_count, config.sampler, 0))?,
        steps,
    )?;
    match (config.train.kind, config.linear_split) {
        (ModelKind::Linear, LinearSplit::Time) => {
            split_time_independent(&build_samples(&train_trajs)?, config.split_fraction, meta)
        }
        (ModelKind::Linear, LinearSplit::Trajectories) => {
            let val = trajectories_from(exact, &request(config.val_count, config.sampler, config.train_count))?;
            split_by_trajectory(&train_trajs, &truncated(val, steps)?, meta)
        }
        (ModelKind::Hyper, _) => {
            let val = trajectories_from(exact, &request(config.val_count, Sampler::Diagonal, config.train_count))?;
            split_hypermodel(&train_trajs, &truncated(val, steps)?, config.hyper_val_samples, meta)
        }
    }
}

/// Exact dynamics of `model` followed by [`dataset_from`].
pub fn build_dataset(model: &SpinModel, config: &ExperimentConfig) -> Result<Dataset> {
    config.validate()?;
    let grid = TimeGrid::from_duration(config.t_train, config.dt)?;
    dataset_from(&ExactDynamics::new(model, grid)?, config)
}

/// `ε̄` and the individual errors behind it.
#[derive(Clone, Debug, PartialEq)]
pub struct EpsilonBar {
    pub value: f64,
    pub c_values: Vec<f64>,
    pub epsilons: Vec<f64>,
}

/// Mean `ε` over `n_init` diagonal initial states with `c` drawn from the
/// evaluation stream of `seed`, on the full grid of `exact`. Each rollout
/// starts from the exact initial Bloch vector.
pub fn epsilon_bar(exact: &ExactDynamics, learned: &impl Propagator, n_init: usize, seed: u64) -> Result<EpsilonBar> {
    if n_init == 0 {
        return Err(Error::InvalidArgument("n_init must be positive".into()));
    }
    let grid = exact.grid();
    let mut c_values = Vec::with_capacity(n_init);
    let mut epsilons = Vec::with_capacity(n_init);
    for k in 0..n_init {
        let c = sample_initial_diagonal(&mut stream_rng(seed, Stream::Evaluation, k as u64));
        let truth = exact.trajectory(k, diagonal_bloch(c))?.series();
        let predicted = rollout(learned, &truth.values()[0], grid.steps(), grid.dt())?;
        c_values.push(c);
        epsilons.push(epsilon(&predicted, &truth)?);
    }
    let value = epsilons.iter().sum::<f64>() / n_init as f64;
    Ok(EpsilonBar {
        value,
        c_values,
        epsilons,
    })
}

/// Errors inside and beyond the training window for one initial state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Extrapolation {
    /// `ε` over `[0, t_train]`.
    pub in_window: f64,
    /// `ε` over `[t_train, t_end]`.
    pub beyond: f64,
    /// Largest spatial norm of the prediction beyond `t_train`.
    pub max_norm_beyond: f64,
}

/// Rolls `learned` out over the whole grid of `exact` and compares the
/// windows before and after `t_train`.
pub fn extrapolation_check(
    exact: &ExactDynamics,
    learned: &impl Propagator,
    initial: [f64; 3],
    t_train: f64,
) -> Result<Extrapolation> {
    let grid = exact.grid();
    let split = TimeGrid::from_duration(t_train, grid.dt())?.steps();
    if split >= grid.steps() {
        return Err(Error::InvalidArgument(format!(
            "t_train = {t_train} leaves nothing beyond the training window"
        )));
    }
    let truth = exact.trajectory(0, initial)?.series();
    let predicted = rollout(learned, &truth.values()[0], grid.steps(), grid.dt())?;
    let tail = |s: &crate::series::Series| {
        crate::series::Series::new(
            TimeGrid::new(grid.dt(), grid.steps() - split).expect("positive"),
            s.values()[split..].to_vec(),
        )
    };
    let (pt, tt) = (tail(&predicted)?, tail(&truth)?);
    Ok(Extrapolation {
        in_window: epsilon(&predicted.truncated(split)?, &truth.truncated(split)?)?,
        beyond: epsilon(&pt, &tt)?,
        max_norm_beyond: pt.max_spatial_norm(),
    })
}

/// Result of the full pipeline for one spin model.
#[derive(Clone, Debug, PartialEq)]
pub struct CellOutcome {
    pub value: f64,
    pub c_values: Vec<f64>,
    pub trained: TrainedModel,
}

/// Generates data, trains and evaluates `metric` for one spin model. `ε̄`
/// uses the model kind of `config.train` on `[0, t_total]`; `Ξ` requires
/// the hypermodel and averages over `[0, t_train]`.
pub fn run_cell(model: &SpinModel, metric: Metric, config: &ExperimentConfig) -> Result<CellOutcome> {
    config.validate()?;
    if metric == Metric::Xi && config.train.kind != ModelKind::Hyper {
        return Err(Error::InvalidArgument("the Ξ metric needs the hypermodel".into()));
    }
    let exact = ExactDynamics::new(model, config.horizon()?)?;
    let dataset = dataset_from(&exact, config)?;
    let trained = train(&config.train, &dataset)?;
    match metric {
        Metric::EpsilonBar => {
            let steps = TimeGrid::from_duration(config.t_total, config.dt)?.steps();
            let eval = if steps == exact.grid().steps() {
                exact
            } else {
                ExactDynamics::new(model, TimeGrid::new(config.dt, steps)?)?
            };
            let eb = epsilon_bar(&eval, &trained.model, config.n_init, config.seed)?;
            Ok(CellOutcome {
                value: eb.value,
                c_values: eb.c_values,
                trained,
            })
        }
        Metric::Xi => {
            let gens = GeneratorTimeSeries::from_model(&trained.model, config.dt, config.t_train)?;
            let value = xi_average(&xi_series(&gens)?, config.t_train)?;
            Ok(CellOutcome {
                value,
                c_values: Vec::new(),
                trained,
            })
        }
    }
}
