use crate::error::{Error, Result};

/// Uniform time grid `t_n = n·dt`, `n = 0..=steps`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    dt: f64,
    steps: usize,
}

impl TimeGrid {
    /// Upper bound on the number of steps accepted from a duration.
    pub const MAX_STEPS: usize = 10_000_000;

    pub fn new(dt: f64, steps: usize) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("time step dt = {dt} must be positive")));
        }
        if steps > Self::MAX_STEPS {
            return Err(Error::InvalidArgument(format!("{steps} time steps exceed the budget")));
        }
        Ok(Self { dt, steps })
    }

    /// Grid covering `[0, duration]`; `duration` must be an integer multiple
    /// of `dt` up to round-off.
    pub fn from_duration(duration: f64, dt: f64) -> Result<Self> {
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(Error::InvalidArgument(format!("duration T = {duration} must be positive")));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("time step dt = {dt} must be positive")));
        }
        let ratio = duration / dt;
        let steps = ratio.round();
        if (ratio - steps).abs() > 1e-6 * ratio.max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "duration {duration} is not a multiple of dt = {dt}"
            )));
        }
        if steps < 1.0 {
            return Err(Error::InvalidArgument(format!("duration {duration} is shorter than dt = {dt}")));
        }
        Self::new(dt, steps as usize)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }

    pub fn duration(&self) -> f64 {
        self.time(self.steps)
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.steps).map(move |n| self.time(n))
    }
}
