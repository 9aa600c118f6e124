//! Trajectory decomposition along a time sequence, sampling schedules of
//! recurrence times, deviation series of ergodic averages and homology
//! classes, and power-law fits of those series.

mod decompose;
mod fit;
mod sampling;
mod series;

pub use decompose::{decompose, decompose_exact, Decomposition};
pub use fit::{fit_exponent, ExponentFit, WindowPolicy};
pub use sampling::{
    sampling_times, verify_sampling_conditions, GapCondition, SamplingParams, SamplingReport, SamplingSchedule,
    SumBound,
};
pub use series::{deviation_series, homology_deviation_series, DeviationSeries, Grid, PointFlag, SeriesKind};

use thiserror::Error;

use crate::flow::FlowError;
use crate::surface::SurfaceError;

#[derive(Debug, Error)]
pub enum DeviationError {
    #[error("time sequence is empty")]
    EmptySequence,
    #[error("total time must be positive, got {0}")]
    NonPositiveT(f64),
    #[error("fit window has {got} usable points, need at least {min}")]
    DegenerateWindow { got: usize, min: usize },
    #[error("decomposition does not reconstruct the total time (error {error:e})")]
    Inexact { error: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Surface(#[from] SurfaceError),
}
