//! Rational polygonal billiards as translation surfaces.
//!
//! The crate is organized bottom-up:
//!
//! - [`geometry`]: rational polygons, their reflection groups and the
//!   unfolding into a translation surface.
//! - [`surface`]: the translation-surface model, the `SO(2)` and Teichmüller
//!   actions, saddle connections, systole and recurrence measurements.
//! - [`flow`]: directional-flow tracing, Birkhoff integrals, Sobolev norms,
//!   homology classes of long trajectories and first-return maps.
//! - [`renorm`]: interval exchanges, Rauzy–Veech and Zorich induction and
//!   Lyapunov exponents of the Zorich cocycle.
//! - [`deviation`]: trajectory decomposition, sampling schedules, deviation
//!   series and power-law fits.

pub mod deviation;
pub mod flow;
pub mod geometry;
pub mod linalg;
pub mod renorm;
pub mod surface;
pub mod tol;

mod error;

pub use error::Error;
pub use linalg::{Mat2, Vec2};
pub use tol::Tolerances;
