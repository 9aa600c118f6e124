use serde::Serialize;
use std::collections::VecDeque;
use std::f64::consts::PI;

use super::RationalPolygon;
use crate::linalg::Mat2;

/// An element of the dihedral group of order `2n` acting on directions: with
/// `u` the angle measured from edge 0, it sends `u` to `±u + 2·rot·π/n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct GroupElement {
    pub rot: u64,
    pub reflect: bool,
}

impl GroupElement {
    pub const IDENTITY: GroupElement = GroupElement { rot: 0, reflect: false };

    /// `self ∘ other`.
    pub fn compose(self, other: GroupElement, n: u64) -> GroupElement {
        let k = if self.reflect { (self.rot + n - other.rot % n) % n } else { (self.rot + other.rot) % n };
        GroupElement { rot: k, reflect: self.reflect ^ other.reflect }
    }

    /// Linear map in a frame where edge 0 points along angle `alpha0`.
    pub fn matrix(self, n: u64, alpha0: f64) -> Mat2 {
        let step = PI / n as f64;
        if self.reflect {
            Mat2::reflection(alpha0 + self.rot as f64 * step)
        } else {
            Mat2::ccw(2.0 * self.rot as f64 * step)
        }
    }

    pub fn index(self, n: u64) -> usize {
        (self.rot + if self.reflect { n } else { 0 }) as usize
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReflectionGroup {
    pub n: u64,
    /// Reflection across each edge of the polygon.
    pub generators: Vec<GroupElement>,
    /// Elements in breadth-first order from the identity.
    pub elements: Vec<GroupElement>,
}

impl ReflectionGroup {
    pub fn order(&self) -> usize {
        self.elements.len()
    }
}

/// The group generated by reflections in the edge directions of `p`.
pub fn reflection_group(p: &RationalPolygon) -> ReflectionGroup {
    let n = p.group_n();
    let generators: Vec<GroupElement> =
        p.dir_index().iter().map(|&j| GroupElement { rot: j % n, reflect: true }).collect();
    let mut seen = vec![false; 2 * n as usize];
    let mut elements = Vec::with_capacity(2 * n as usize);
    let mut queue = VecDeque::from([GroupElement::IDENTITY]);
    seen[0] = true;
    while let Some(g) = queue.pop_front() {
        elements.push(g);
        for &r in &generators {
            let h = g.compose(r, n);
            if !seen[h.index(n)] {
                seen[h.index(n)] = true;
                queue.push_back(h);
            }
        }
    }
    ReflectionGroup { n, generators, elements }
}
