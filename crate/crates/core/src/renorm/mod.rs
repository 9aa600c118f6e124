//! Interval exchange transformations, Rauzy–Veech and Zorich induction, the
//! Zorich cocycle and its Lyapunov exponents.

mod dd;
mod iet;
mod induction;
mod lyapunov;

pub use dd::DoubleDouble;
pub use iet::{Iet, Permutation};
pub use induction::{rauzy_veech_step, zorich_step, Branch, CocycleMatrix, ZorichStep, ZORICH_CAP};
pub use lyapunov::{direction_exponent, lyapunov_spectrum, LyapunovEstimate, LyapunovOptions, DEFAULT_ZORICH_CAP, MIN_STEPS};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RenormError {
    #[error("last intervals have equal length; Rauzy–Veech step undefined")]
    TieBreakUndefined,
    #[error("permutation is reducible")]
    Reducible,
    #[error("Zorich step did not terminate within {cap} elementary steps")]
    NonTerminating { cap: usize },
    #[error("{got} steps requested, at least {min} needed")]
    InsufficientSteps { got: usize, min: usize },
    #[error("interval lengths lost precision (drift {drift:e})")]
    LengthDrift { drift: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}
