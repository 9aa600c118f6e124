//! Directional flows on translation surfaces: tracing, Birkhoff and area
//! integrals of observables, Sobolev norms, homology classes of long
//! trajectories and first-return interval exchanges.
//!
//! The flow in direction `θ` moves at unit speed along
//! `u(θ) = (-sin θ, cos θ)`, the direction that `r_θ` makes vertical; `θ = 0`
//! is the upward vertical flow.

mod homology;
mod integrals;
mod observable;
mod quad;
mod return_map;
mod tracer;

pub(crate) use homology::add_crossings;
pub use homology::{homology_class, HomologyBasis, HomologyVector};
pub use integrals::{area_integral, area_integral_with, birkhoff_integral, sobolev_norm, AreaRule, PIECE_ORDER};
pub use observable::{Observable, ObservableSpec, Term};
pub use quad::{gauss_legendre, GaussLegendre};
pub use return_map::{first_return_iet, separatrix_transversal, standard_transversal, ReturnMap, Transversal};
pub use tracer::{direction, trace, Crossing, FlowPoint, Piece, PieceExit, Tracer, TrajectorySegment};

use thiserror::Error;

use crate::renorm::RenormError;
use crate::surface::SurfaceError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("trajectory passes within tolerance of a cone point at time {time}")]
    SingularHit { time: f64, cell: usize },
    #[error("numerical drift: {0}")]
    NumericalDrift(String),
    #[error("orbit did not return within {budget} crossings")]
    NonReturning { budget: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Surface(#[from] SurfaceError),
    #[error(transparent)]
    Renorm(#[from] RenormError),
}
