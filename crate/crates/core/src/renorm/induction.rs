use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::Serialize;

use super::iet::Iet;
use super::RenormError;

/// Elementary steps allowed in one Zorich step.
pub const ZORICH_CAP: u64 = 1_000_000;

/// Which row's last interval won a Rauzy–Veech step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Top,
    Bottom,
}

/// Square matrix with nonnegative integer entries relating lengths before
/// and after induction: `λ = B·λ'`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CocycleMatrix {
    d: usize,
    entries: Vec<u64>,
}

impl CocycleMatrix {
    pub fn identity(d: usize) -> Self {
        let mut entries = vec![0; d * d];
        for i in 0..d {
            entries[i * d + i] = 1;
        }
        Self { d, entries }
    }

    /// `I + E_{row,col}`.
    pub fn elementary(d: usize, row: usize, col: usize) -> Self {
        let mut m = Self::identity(d);
        m.entries[row * d + col] += 1;
        m
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.entries[i * self.d + j]
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.entries.chunks(self.d).map(|r| r.to_vec()).collect()
    }

    /// Matrix product; `None` on overflow.
    pub fn checked_mul(&self, o: &Self) -> Option<Self> {
        let d = self.d;
        let mut entries = vec![0u64; d * d];
        for i in 0..d {
            for k in 0..d {
                let a = self.entries[i * d + k];
                if a == 0 {
                    continue;
                }
                for j in 0..d {
                    let p = a.checked_mul(o.entries[k * d + j])?;
                    entries[i * d + j] = entries[i * d + j].checked_add(p)?;
                }
            }
        }
        Some(Self { d, entries })
    }

    /// Right-multiplies in place by `(I + E_{row,col})^times`: adds `times`
    /// copies of column `row` to column `col`.
    fn push_elementary(&mut self, row: usize, col: usize, times: u64) {
        let d = self.d;
        for i in 0..d {
            self.entries[i * d + col] += times * self.entries[i * d + row];
        }
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        (0..self.d).map(|i| (0..self.d).map(|j| self.get(i, j) as f64 * v[j]).sum()).collect()
    }

    /// Exact determinant by fraction-free elimination.
    pub fn det(&self) -> BigInt {
        let d = self.d;
        let mut m: Vec<Vec<BigInt>> =
            (0..d).map(|i| (0..d).map(|j| BigInt::from(self.get(i, j))).collect()).collect();
        let mut sign = BigInt::one();
        let mut prev = BigInt::one();
        for k in 0..d {
            if m[k][k].is_zero() {
                let Some(p) = (k + 1..d).find(|&r| !m[r][k].is_zero()) else {
                    return BigInt::zero();
                };
                m.swap(k, p);
                sign = -sign;
            }
            for i in k + 1..d {
                for j in k + 1..d {
                    m[i][j] = (&m[i][j] * &m[k][k] - &m[i][k] * &m[k][j]) / &prev;
                }
            }
            prev = m[k][k].clone();
        }
        sign * prev
    }
}

impl Iet {
    /// Winner side of the next Rauzy–Veech step, without performing it.
    pub fn next_branch(&self) -> Result<Branch, RenormError> {
        let d = self.len();
        let a = self.lengths[self.perm.top[d - 1]];
        let b = self.lengths[self.perm.bottom[d - 1]];
        let diff = (a - b).to_f64();
        if diff.abs() <= self.tol.tie * self.total() {
            return Err(RenormError::TieBreakUndefined);
        }
        Ok(if diff > 0.0 { Branch::Top } else { Branch::Bottom })
    }

    /// One Rauzy–Veech step in place; returns the branch and the
    /// `(winner, loser)` labels.
    pub(crate) fn rauzy_in_place(&mut self) -> Result<(Branch, usize, usize), RenormError> {
        let branch = self.next_branch()?;
        let d = self.len();
        let alpha = self.perm.top[d - 1];
        let beta = self.perm.bottom[d - 1];
        let (winner, loser, row) = match branch {
            Branch::Top => (alpha, beta, &mut self.perm.bottom),
            Branch::Bottom => (beta, alpha, &mut self.perm.top),
        };
        self.lengths[winner] = self.lengths[winner] - self.lengths[loser];
        row.pop();
        let at = row.iter().position(|&l| l == winner).expect("winner present in both rows");
        row.insert(at + 1, loser);
        Ok((branch, winner, loser))
    }

    /// One Zorich step in place. `on_step(winner, loser, times)` is called
    /// for every elementary step, batched when the same step repeats.
    /// Returns the branch and the number of elementary steps.
    pub(crate) fn zorich_in_place(
        &mut self,
        cap: u64,
        mut on_step: impl FnMut(usize, usize, u64),
    ) -> Result<(Branch, u64), RenormError> {
        let branch = self.next_branch()?;
        let mut count = 0u64;
        loop {
            count += self.skip_cycles(branch, &mut on_step);
            let (_, w, l) = self.rauzy_in_place()?;
            on_step(w, l, 1);
            count += 1;
            if count > cap {
                return Err(RenormError::NonTerminating { cap: cap as usize });
            }
            if self.next_branch()? != branch {
                return Ok((branch, count));
            }
        }
    }

    /// While one label keeps winning, the labels after it in the other row
    /// lose in cyclic order and a full cycle leaves that row unchanged. Whole
    /// cycles that certainly keep the same winner are applied at once.
    fn skip_cycles(&mut self, branch: Branch, on_step: &mut impl FnMut(usize, usize, u64)) -> u64 {
        let d = self.len();
        let (winner, row) = match branch {
            Branch::Top => (self.perm.top[d - 1], &self.perm.bottom),
            Branch::Bottom => (self.perm.bottom[d - 1], &self.perm.top),
        };
        let at = row.iter().position(|&l| l == winner).expect("winner present in both rows");
        let tail = &row[at + 1..];
        let cycle = tail.iter().fold(super::DoubleDouble::ZERO, |s, &l| s + self.lengths[l]);
        let ratio = self.lengths[winner].div(cycle).to_f64();
        if !(ratio >= 3.0) {
            return 0;
        }
        // one cycle of slack keeps the winner strictly ahead through the skip
        let c = (ratio.floor() - 1.0).min(9.0e15);
        self.lengths[winner] = self.lengths[winner] - cycle.mul_f64(c);
        let c = c as u64;
        for &l in tail {
            on_step(winner, l, c);
        }
        c * tail.len() as u64
    }
}

/// One Rauzy–Veech step: the longer of the two last intervals loses the
/// shorter one's length and the shorter label moves behind it in the other row.
pub fn rauzy_veech_step(iet: &Iet) -> Result<(Iet, CocycleMatrix, Branch), RenormError> {
    let mut next = iet.clone();
    let (branch, w, l) = next.rauzy_in_place()?;
    if !next.perm.is_irreducible() {
        return Err(RenormError::Reducible);
    }
    Ok((next, CocycleMatrix::elementary(iet.len(), w, l), branch))
}

/// Result of an accelerated step.
#[derive(Clone, Debug)]
pub struct ZorichStep {
    pub iet: Iet,
    pub matrix: CocycleMatrix,
    pub branch: Branch,
    pub count: u64,
}

/// Composes Rauzy–Veech steps while the winning row stays the same.
pub fn zorich_step(iet: &Iet) -> Result<ZorichStep, RenormError> {
    let mut next = iet.clone();
    let mut matrix = CocycleMatrix::identity(iet.len());
    let (branch, count) = next.zorich_in_place(ZORICH_CAP, |w, l, c| matrix.push_elementary(w, l, c))?;
    if !next.perm.is_irreducible() {
        return Err(RenormError::Reducible);
    }
    Ok(ZorichStep { iet: next, matrix, branch, count })
}
