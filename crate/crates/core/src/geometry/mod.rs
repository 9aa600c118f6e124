//! Rational polygons, their reflection groups, the unfolding of a rational
//! billiard table into a translation surface, and stratum identification.

mod group;
mod polygon;
mod unfold;

pub use group::{reflection_group, GroupElement, ReflectionGroup};
pub use polygon::{
    make_polygon_from_angles, make_rational_polygon, parse_rational, PolygonSpec, QPoint, RationalPolygon,
    GROUP_ORDER_CAP,
};
pub use unfold::{stratum, unfold, unfold_with, Stratum};

use thiserror::Error;

use crate::surface::SurfaceError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("polygon is not simple: {0}")]
    NonSimplePolygon(String),
    #[error("degenerate polygon at vertex {vertex}: {reason}")]
    Degenerate { vertex: usize, reason: String },
    #[error("angles are not rational multiples of π (reflection group exceeds {cap} elements)")]
    NonRationalAngle { cap: usize },
    #[error("interior angles sum to {got}π, expected {expected}π")]
    AngleSumMismatch { expected: String, got: String },
    #[error("edge chain does not close (gap {gap:e})")]
    NonClosingEdgeChain { gap: f64 },
    #[error("vertex class {class} has total angle {angle} which is not a multiple of 2π")]
    InconsistentAngles { class: usize, angle: f64 },
    #[error("invalid polygon input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Surface(#[from] SurfaceError),
}
