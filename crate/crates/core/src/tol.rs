//! Tolerance profiles.
//!
//! Every floating-point decision in the crate reads its threshold from a
//! [`Tolerances`] value so a run can be repeated under a stricter or looser
//! profile without touching code.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Gluing, cone-angle and closure audits on constructed surfaces.
    pub audit: f64,
    /// Arithmetic tolerance for reported lengths.
    pub length: f64,
    /// Distance to a cone point, relative to the cell diameter, below which a
    /// trajectory is declared singular.
    pub singular: f64,
    /// Relative rounding used to deduplicate saddle connections.
    pub dedup: f64,
    /// Equal-length tie threshold in Rauzy–Veech induction.
    pub tie: f64,
    /// Drift of the renormalized IET total length that aborts induction.
    pub length_drift: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            audit: 1e-9,
            length: 1e-12,
            singular: 1e-10,
            dedup: 1e-9,
            tie: 1e-15,
            length_drift: 1e-9,
        }
    }
}

impl Tolerances {
    pub fn strict() -> Self {
        Self {
            audit: 1e-11,
            length: 1e-13,
            singular: 1e-12,
            dedup: 1e-11,
            tie: 1e-16,
            length_drift: 1e-11,
        }
    }

    pub fn loose() -> Self {
        Self {
            audit: 1e-7,
            length: 1e-10,
            singular: 1e-8,
            dedup: 1e-7,
            tie: 1e-14,
            length_drift: 1e-7,
        }
    }

    /// Looks up a named profile (`default`, `strict`, `loose`).
    pub fn profile(name: &str) -> Option<Self> {
        match name {
            "default" => Some(Self::default()),
            "strict" => Some(Self::strict()),
            "loose" => Some(Self::loose()),
            _ => None,
        }
    }
}
