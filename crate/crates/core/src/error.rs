use thiserror::Error;

use crate::deviation::DeviationError;
use crate::flow::FlowError;
use crate::geometry::GeometryError;
use crate::renorm::RenormError;
use crate::surface::SurfaceError;

/// Umbrella error for callers that chain operations across modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Surface(#[from] SurfaceError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Renorm(#[from] RenormError),
    #[error(transparent)]
    Deviation(#[from] DeviationError),
}
