//! Exact spin-chain dynamics and learned time-local generators of the
//! reduced single-spin dynamics.

pub mod analysis;
pub mod dataset;
pub mod error;
pub mod grid;
pub mod learner;
pub mod quantum;
pub mod series;
pub mod textio;

pub use error::{Error, Result};
pub use grid::TimeGrid;
pub use series::Series;
