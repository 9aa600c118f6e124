//! Surface spec files: cells, gluings and optional marked points.

use serde::{Deserialize, Serialize};

use super::{EdgeRef, SurfaceError, TranslationSurface};
use crate::linalg::Vec2;
use crate::tol::Tolerances;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSpec {
    pub vertices: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceSpec {
    pub cells: Vec<CellSpec>,
    /// `[[cell, edge], [cell, edge]]` per glued pair.
    pub gluings: Vec<[[usize; 2]; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub marked_points: Option<Vec<[usize; 2]>>,
}

impl SurfaceSpec {
    pub fn from_surface(ts: &TranslationSurface) -> Self {
        let cells = ts
            .cells()
            .iter()
            .map(|c| CellSpec { vertices: c.iter().map(|p| [p.x, p.y]).collect() })
            .collect();
        let gluings = ts
            .gluings()
            .into_iter()
            .map(|(a, b)| [[a.cell, a.edge], [b.cell, b.edge]])
            .collect();
        let marks = ts.designated_marks();
        let marked_points = (!marks.is_empty()).then(|| marks.iter().map(|&(c, v)| [c, v]).collect());
        Self { cells, gluings, marked_points }
    }

    pub fn to_surface(&self, tol: Tolerances) -> Result<TranslationSurface, SurfaceError> {
        let cells = self
            .cells
            .iter()
            .map(|c| c.vertices.iter().map(|&[x, y]| Vec2::new(x, y)).collect())
            .collect();
        let gluings: Vec<(EdgeRef, EdgeRef)> = self
            .gluings
            .iter()
            .map(|&[[c0, e0], [c1, e1]]| (EdgeRef::new(c0, e0), EdgeRef::new(c1, e1)))
            .collect();
        let marked: Vec<(usize, usize)> =
            self.marked_points.iter().flatten().map(|&[c, v]| (c, v)).collect();
        TranslationSurface::new(cells, &gluings, &marked, tol)
    }
}
