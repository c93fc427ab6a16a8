//! Bloch-vector trajectories, one-step samples and train/validation splits.

mod io;
mod sampling;

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use nalgebra::Vector4;
use rand::seq::index;
use rayon::prelude::*;

pub use io::{load_dataset, load_trajectories, save_dataset, save_trajectories};
pub use sampling::{
    diagonal_bloch, sample_initial_bloch, sample_initial_diagonal, stream_rng, Stream, DIAGONAL_C_MAX,
    DIAGONAL_C_MIN,
};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::quantum::{build_bath_state, build_hamiltonian, BlochVector, Evolver, ReducedMap, SpinModel};
use crate::series::Series;

/// How initial system states are drawn.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sampler {
    /// Uniform in the open Bloch ball.
    Ball,
    /// Diagonal states `diag(1 − c, c)` with `c ∈ (0.01, 0.7)`.
    Diagonal,
}

impl fmt::Display for Sampler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sampler::Ball => "ball",
            Sampler::Diagonal => "diagonal",
        })
    }
}

impl FromStr for Sampler {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "ball" => Ok(Sampler::Ball),
            "diagonal" => Ok(Sampler::Diagonal),
            other => Err(Error::InvalidArgument(format!("unknown sampler `{other}`"))),
        }
    }
}

impl Sampler {
    /// Initial spatial Bloch components for trajectory `id`.
    pub fn draw(&self, seed: u64, id: usize) -> [f64; 3] {
        let mut rng = stream_rng(seed, Stream::Trajectory, id as u64);
        match self {
            Sampler::Ball => sample_initial_bloch(&mut rng),
            Sampler::Diagonal => diagonal_bloch(sample_initial_diagonal(&mut rng)),
        }
    }
}

/// Exact reduced trajectory on a uniform grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub id: usize,
    pub model: SpinModel,
    pub initial: [f64; 3],
    pub grid: TimeGrid,
    pub vectors: Vec<BlochVector>,
}

impl Trajectory {
    pub fn new(
        id: usize,
        model: SpinModel,
        initial: [f64; 3],
        grid: TimeGrid,
        vectors: Vec<BlochVector>,
    ) -> Result<Self> {
        if vectors.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "trajectory {id} has {} vectors on a grid of {} points",
                vectors.len(),
                grid.len()
            )));
        }
        for v in &vectors {
            v.validate()?;
        }
        Ok(Self {
            id,
            model,
            initial,
            grid,
            vectors,
        })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Prefix covering `[0, steps·dt]`.
    pub fn truncated(&self, steps: usize) -> Result<Trajectory> {
        if steps > self.grid.steps() {
            return Err(Error::GridMismatch(format!(
                "cannot truncate trajectory {} of {} steps to {steps}",
                self.id,
                self.grid.steps()
            )));
        }
        Ok(Self {
            grid: TimeGrid::new(self.grid.dt(), steps)?,
            vectors: self.vectors[..=steps].to_vec(),
            ..self.clone()
        })
    }

    pub fn series(&self) -> Series {
        Series::new(self.grid, self.vectors.iter().map(|v| *v.vector()).collect())
            .expect("length checked on construction")
    }
}

/// Parameters of a batch of trajectories.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectoryRequest {
    pub count: usize,
    pub t_total: f64,
    pub dt: f64,
    pub sampler: Sampler,
    pub seed: u64,
    /// Identifier of the first trajectory; ids also select the random
    /// sub-stream, so disjoint id ranges give independent initial states.
    pub first_id: usize,
}

impl TrajectoryRequest {
    pub fn new(count: usize, t_total: f64, dt: f64, sampler: Sampler, seed: u64) -> Self {
        Self {
            count,
            t_total,
            dt,
            sampler,
            seed,
            first_id: 0,
        }
    }

    pub fn starting_at(mut self, first_id: usize) -> Self {
        self.first_id = first_id;
        self
    }
}

/// Exact reduced dynamics of a model on a grid, reusable across initial
/// states.
#[derive(Clone, Debug)]
pub struct ExactDynamics {
    model: SpinModel,
    map: ReducedMap,
}

impl ExactDynamics {
    pub fn new(model: &SpinModel, grid: TimeGrid) -> Result<Self> {
        let h = build_hamiltonian(model)?;
        let bath = build_bath_state(model)?;
        let evolver = Evolver::new(&h, model.n, model.system_site())?;
        let map = evolver.reduced_map(&bath, &grid)?;
        Ok(Self { model: *model, map })
    }

    pub fn model(&self) -> &SpinModel {
        &self.model
    }

    pub fn grid(&self) -> &TimeGrid {
        self.map.grid()
    }

    pub fn trajectory(&self, id: usize, initial: [f64; 3]) -> Result<Trajectory> {
        let vectors = self.map.apply(initial)?;
        Trajectory::new(id, self.model, initial, *self.map.grid(), vectors)
    }
}

/// `count` trajectories from independent initial states, deterministic in
/// the seed and independent of the thread count.
pub fn generate_trajectories(model: &SpinModel, request: &TrajectoryRequest) -> Result<Vec<Trajectory>> {
    if request.count == 0 {
        return Err(Error::InvalidArgument("trajectory count must be at least 1".into()));
    }
    let grid = TimeGrid::from_duration(request.t_total, request.dt)?;
    let exact = ExactDynamics::new(model, grid)?;
    trajectories_from(&exact, request)
}

/// As [`generate_trajectories`], reusing precomputed dynamics.
pub fn trajectories_from(exact: &ExactDynamics, request: &TrajectoryRequest) -> Result<Vec<Trajectory>> {
    (request.first_id..request.first_id + request.count)
        .into_par_iter()
        .map(|id| exact.trajectory(id, request.sampler.draw(request.seed, id)))
        .collect()
}

/// One-step training triple `(v(t), v(t + dt), t)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sample {
    pub traj_id: usize,
    /// Grid index of `t`.
    pub index: usize,
    pub t: f64,
    pub v: BlochVector,
    pub v_next: BlochVector,
}

impl Sample {
    pub fn input(&self) -> &Vector4<f64> {
        self.v.vector()
    }

    pub fn target(&self) -> &Vector4<f64> {
        self.v_next.vector()
    }
}

/// Consecutive-pair samples of every trajectory.
pub fn build_samples(trajectories: &[Trajectory]) -> Result<Vec<Sample>> {
    if trajectories.is_empty() {
        return Err(Error::Empty("trajectories"));
    }
    let mut out = Vec::with_capacity(trajectories.iter().map(|t| t.len().saturating_sub(1)).sum());
    for traj in trajectories {
        if traj.len() < 2 {
            return Err(Error::TrajectoryTooShort {
                id: traj.id,
                len: traj.len(),
            });
        }
        for (k, pair) in traj.vectors.windows(2).enumerate() {
            out.push(Sample {
                traj_id: traj.id,
                index: k,
                t: traj.grid.time(k),
                v: pair[0],
                v_next: pair[1],
            });
        }
    }
    Ok(out)
}

/// How a dataset was divided into training and validation samples.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SplitKind {
    /// Per trajectory, early times train and late times validate.
    Time { fraction: f64 },
    /// Whole trajectories are assigned to one side.
    Trajectory,
    /// Ball-sampled trajectories train; random points of diagonal-state
    /// trajectories validate.
    Hilbert,
}

impl fmt::Display for SplitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SplitKind::Time { fraction } => write!(f, "time:{fraction}"),
            SplitKind::Trajectory => f.write_str("trajectory"),
            SplitKind::Hilbert => f.write_str("hilbert"),
        }
    }
}

impl FromStr for SplitKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(f) = s.strip_prefix("time:") {
            let fraction = f
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad split fraction `{f}`")))?;
            return Ok(SplitKind::Time { fraction });
        }
        match s {
            "trajectory" => Ok(SplitKind::Trajectory),
            "hilbert" => Ok(SplitKind::Hilbert),
            other => Err(Error::InvalidArgument(format!("unknown split `{other}`"))),
        }
    }
}

/// Provenance carried with a dataset.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DatasetMeta {
    pub model: SpinModel,
    pub seed: u64,
    pub dt: f64,
    /// Length of the generated trajectories.
    pub t_total: f64,
    pub split: SplitKind,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub train: Vec<Sample>,
    pub val: Vec<Sample>,
    pub meta: DatasetMeta,
}

impl Dataset {
    /// Checks that no (trajectory, time index) pair is on both sides.
    pub fn validate(&self) -> Result<()> {
        if self.train.is_empty() {
            return Err(Error::Empty("training split"));
        }
        let train: HashSet<(usize, usize)> = self.train.iter().map(|s| (s.traj_id, s.index)).collect();
        if let Some(s) = self.val.iter().find(|s| train.contains(&(s.traj_id, s.index))) {
            return Err(Error::InvalidArgument(format!(
                "sample (trajectory {}, index {}) is in both splits",
                s.traj_id, s.index
            )));
        }
        Ok(())
    }
}

/// Per trajectory, samples with `t < fraction·T` train and the rest
/// validate. Every trajectory must contribute to both sides.
pub fn split_time_independent(samples: &[Sample], fraction: f64, meta: DatasetMeta) -> Result<Dataset> {
    if samples.is_empty() {
        return Err(Error::Empty("samples"));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidArgument(format!("split fraction {fraction} must lie in (0, 1)")));
    }
    let cut = fraction * meta.t_total;
    // grid times are n·dt; a tolerance keeps t = cut on the validation side
    let tol = 1e-9 * meta.dt;
    let (train, val): (Vec<Sample>, Vec<Sample>) = samples.iter().partition(|s| s.t < cut - tol);
    let ids: HashSet<usize> = samples.iter().map(|s| s.traj_id).collect();
    for side in [&train, &val] {
        let covered: HashSet<usize> = side.iter().map(|s| s.traj_id).collect();
        if let Some(id) = ids.iter().find(|id| !covered.contains(id)) {
            return Err(Error::InvalidArgument(format!(
                "split fraction {fraction} leaves trajectory {id} without samples on one side"
            )));
        }
    }
    let ds = Dataset {
        train,
        val,
        meta: DatasetMeta {
            split: SplitKind::Time { fraction },
            ..meta
        },
    };
    ds.validate()?;
    Ok(ds)
}

/// Whole trajectories on each side.
pub fn split_by_trajectory(train: &[Trajectory], val: &[Trajectory], meta: DatasetMeta) -> Result<Dataset> {
    if train.is_empty() || val.is_empty() {
        return Err(Error::Empty("trajectories"));
    }
    let ds = Dataset {
        train: build_samples(train)?,
        val: build_samples(val)?,
        meta: DatasetMeta {
            split: SplitKind::Trajectory,
            ..meta
        },
    };
    ds.validate()?;
    Ok(ds)
}

/// Training samples from `train`; `val_count` samples drawn without
/// replacement from `eval` (all of them if fewer exist).
pub fn split_hypermodel(
    train: &[Trajectory],
    eval: &[Trajectory],
    val_count: usize,
    meta: DatasetMeta,
) -> Result<Dataset> {
    if train.is_empty() || eval.is_empty() {
        return Err(Error::Empty("trajectories"));
    }
    let pool = build_samples(eval)?;
    let mut val: Vec<Sample> = if val_count >= pool.len() {
        pool
    } else {
        let mut rng = stream_rng(meta.seed, Stream::Split, 0);
        index::sample(&mut rng, pool.len(), val_count)
            .into_iter()
            .map(|i| pool[i])
            .collect()
    };
    val.sort_by_key(|s| (s.traj_id, s.index));
    let ds = Dataset {
        train: build_samples(train)?,
        val,
        meta: DatasetMeta {
            split: SplitKind::Hilbert,
            ..meta
        },
    };
    ds.validate()?;
    Ok(ds)
}
