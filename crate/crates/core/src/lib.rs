//! Constant rate scheduling for diffusion models.
//!
//! A noise schedule `alpha(t)` is chosen so that the distribution of diffused
//! data changes at a constant rate in `t`. The crate covers the pieces needed
//! to do that at desk scale:
//!
//! * [`rate`] and [`schedule`]: rate tables, the constant-rate solver, rate
//!   combination and schedule discretization.
//! * [`zoo`]: linear, shifted cosine and EDM baselines.
//! * [`toy`]: empirical datasets, exact diffused densities and the
//!   Bayes-optimal denoiser.
//! * [`metrics`]: rate functions from Fréchet distances and from changes in
//!   data or noise predictions.
//! * [`adaptive`]: online binned estimation of the data-prediction rate
//!   during a training loop.
//! * [`samplers`]: DDIM and DPM-Solver++(2M).
//! * [`eval`]: sample-quality evaluation, hyperparameter sweeps and toy figures.

// `!(x > 0.0)` is used deliberately so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adaptive;
pub mod cli;
pub mod error;
pub mod eval;
pub mod io;
pub mod metrics;
pub mod rate;
pub mod rng;
pub mod samplers;
pub mod schedule;
pub mod toy;
pub mod zoo;

pub use error::{Error, Result};
pub use rate::RateTable;
pub use schedule::{
    combine_rates, discretize, schedule_to_rate, solve_schedule, MetricWeight, NoiseSchedule,
};
pub use toy::{PointDataset, PosteriorMean, Predictor};
