//! Bit-indexed combinatorics over the Boolean cube `{0,1}^N`.
//!
//! A state is a little-endian bit-indexed integer: unit `i` is bit `i` of the
//! index. All enumerations return states in ascending index order.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest cube width any operation will enumerate.
pub const MAX_WIDTH: usize = 26;

pub(crate) fn check_width(width: usize) -> Result<()> {
    if width > MAX_WIDTH {
        return Err(Error::CapExceeded {
            width,
            cap: MAX_WIDTH,
        });
    }
    Ok(())
}

#[inline]
pub(crate) fn full_mask(width: usize) -> usize {
    if width == 0 {
        0
    } else {
        (1usize << width) - 1
    }
}

/// A point of `{0,1}^width`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct State {
    index: usize,
    width: usize,
}

impl State {
    pub fn new(index: usize, width: usize) -> Result<Self> {
        if width == 0 {
            return Err(Error::InvalidWidth(width));
        }
        check_width(width)?;
        if index >> width != 0 {
            return Err(Error::StateOutOfRange { index, width });
        }
        Ok(Self { index, width })
    }

    pub(crate) fn new_unchecked(index: usize, width: usize) -> Self {
        debug_assert!(index >> width == 0);
        Self { index, width }
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bit(&self, i: usize) -> bool {
        (self.index >> i) & 1 == 1
    }

    pub fn flip(&self, i: usize) -> Self {
        Self::new_unchecked(self.index ^ (1 << i), self.width)
    }

    /// The state as a real 0/1 vector, unit 0 first.
    pub fn to_vec(&self) -> Vec<f64> {
        (0..self.width)
            .map(|i| if self.bit(i) { 1.0 } else { 0.0 })
            .collect()
    }
}

pub fn hamming_distance(a: State, b: State) -> Result<usize> {
    if a.width != b.width {
        return Err(Error::WidthMismatch {
            left: a.width,
            right: b.width,
        });
    }
    Ok((a.index ^ b.index).count_ones() as usize)
}

/// All states of `{0,1}^width` in ascending order.
pub fn all_states(width: usize) -> Result<Vec<State>> {
    check_width(width)?;
    Ok((0..1usize << width)
        .map(|i| State::new_unchecked(i, width))
        .collect())
}

/// States with some coordinates fixed: `{x : x_i = z_i for i in mask}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CylinderSet {
    width: usize,
    fixed_mask: usize,
    fixed_values: usize,
}

impl CylinderSet {
    pub fn new(width: usize, fixed_mask: usize, fixed_values: usize) -> Result<Self> {
        if width == 0 {
            return Err(Error::InvalidWidth(width));
        }
        check_width(width)?;
        if fixed_mask >> width != 0 || fixed_values & !fixed_mask != 0 {
            return Err(Error::InvalidCylinder);
        }
        Ok(Self {
            width,
            fixed_mask,
            fixed_values,
        })
    }

    pub fn full(width: usize) -> Result<Self> {
        Self::new(width, 0, 0)
    }

    /// The single-point cylinder `{x}`.
    pub fn point(x: State) -> Self {
        Self {
            width: x.width,
            fixed_mask: full_mask(x.width),
            fixed_values: x.index,
        }
    }

    /// Smallest cylinder containing every given state.
    pub fn spanned_by(states: &[State]) -> Result<Self> {
        let first = *states
            .first()
            .ok_or_else(|| Error::ShapeMismatch("empty state list".into()))?;
        let mut varying = 0usize;
        for s in states {
            if s.width != first.width {
                return Err(Error::WidthMismatch {
                    left: first.width,
                    right: s.width,
                });
            }
            varying |= s.index ^ first.index;
        }
        let mask = full_mask(first.width) & !varying;
        Self::new(first.width, mask, first.index & mask)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn fixed_mask(&self) -> usize {
        self.fixed_mask
    }

    pub fn fixed_values(&self) -> usize {
        self.fixed_values
    }

    pub fn free_mask(&self) -> usize {
        full_mask(self.width) & !self.fixed_mask
    }

    pub fn free_coords(&self) -> Vec<usize> {
        (0..self.width)
            .filter(|i| (self.fixed_mask >> i) & 1 == 0)
            .collect()
    }

    pub fn dimension(&self) -> usize {
        self.width - self.fixed_mask.count_ones() as usize
    }

    pub fn contains_index(&self, index: usize) -> bool {
        index & self.fixed_mask == self.fixed_values
    }

    pub fn contains(&self, x: State) -> bool {
        x.width == self.width && self.contains_index(x.index)
    }

    /// Number of fixed coordinates on which `index` disagrees with the cylinder.
    pub fn mismatches(&self, index: usize) -> usize {
        ((index ^ self.fixed_values) & self.fixed_mask).count_ones() as usize
    }

    pub fn smallest_member(&self) -> State {
        State::new_unchecked(self.fixed_values, self.width)
    }

    pub fn members(&self) -> Vec<State> {
        let free = self.free_mask();
        // enumerate submasks of `free` in ascending order
        let mut out = Vec::with_capacity(1 << self.dimension());
        let mut sub = 0usize;
        loop {
            out.push(State::new_unchecked(self.fixed_values | sub, self.width));
            if sub == free {
                break;
            }
            sub = (sub.wrapping_sub(free)) & free;
        }
        out
    }

    pub fn intersects(&self, other: &CylinderSet) -> bool {
        let common = self.fixed_mask & other.fixed_mask;
        (self.fixed_values ^ other.fixed_values) & common == 0
    }
}

/// Radius-1 Hamming ball: a center and all its neighbours.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HammingBall {
    center: State,
}

impl HammingBall {
    pub fn new(center: State) -> Self {
        Self { center }
    }

    pub fn center(&self) -> State {
        self.center
    }

    pub fn width(&self) -> usize {
        self.center.width
    }

    pub fn contains(&self, x: State) -> bool {
        x.width == self.center.width && (x.index ^ self.center.index).count_ones() <= 1
    }

    pub fn members(&self) -> Vec<State> {
        let mut out: Vec<State> = std::iter::once(self.center)
            .chain((0..self.width()).map(|i| self.center.flip(i)))
            .collect();
        out.sort();
        out
    }
}

/// Intersection of a radius-1 Hamming ball with a cylinder containing its center.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Star {
    ball: HammingBall,
    cylinder: CylinderSet,
}

impl Star {
    pub fn new(ball: HammingBall, cylinder: CylinderSet) -> Result<Self> {
        if ball.width() != cylinder.width() {
            return Err(Error::WidthMismatch {
                left: ball.width(),
                right: cylinder.width(),
            });
        }
        if !cylinder.contains(ball.center()) {
            return Err(Error::CenterNotInCylinder);
        }
        Ok(Self { ball, cylinder })
    }

    /// Star of the ball centered at the smallest element of `cylinder`.
    pub fn at_smallest(cylinder: CylinderSet) -> Self {
        Self {
            ball: HammingBall::new(cylinder.smallest_member()),
            cylinder,
        }
    }

    pub fn ball(&self) -> HammingBall {
        self.ball
    }

    pub fn cylinder(&self) -> CylinderSet {
        self.cylinder
    }

    pub fn center(&self) -> State {
        self.ball.center
    }

    pub fn len(&self) -> usize {
        self.cylinder.dimension() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, x: State) -> bool {
        self.ball.contains(x) && self.cylinder.contains(x)
    }

    /// Members in ascending index order.
    pub fn members(&self) -> Vec<State> {
        let c = self.center();
        let mut out: Vec<State> = std::iter::once(c)
            .chain(self.cylinder.free_coords().into_iter().map(|i| c.flip(i)))
            .collect();
        out.sort();
        out
    }
}

/// Rank of a real matrix given as rows, by Gaussian elimination with partial
/// pivoting. Only used on small 0/1 matrices.
pub(crate) fn small_rank(mut rows: Vec<Vec<f64>>) -> usize {
    let ncols = rows.first().map_or(0, |r| r.len());
    let mut rank = 0;
    for col in 0..ncols {
        let pivot =
            (rank..rows.len()).max_by(|&a, &b| rows[a][col].abs().total_cmp(&rows[b][col].abs()));
        let Some(p) = pivot else { break };
        if rows[p][col].abs() < 1e-9 {
            continue;
        }
        rows.swap(rank, p);
        let (top, rest) = rows.split_at_mut(rank + 1);
        let pivot_row = &top[rank];
        for row in rest.iter_mut() {
            let f = row[col] / pivot_row[col];
            if f != 0.0 {
                for (a, b) in row[col..ncols].iter_mut().zip(&pivot_row[col..ncols]) {
                    *a -= f * b;
                }
            }
        }
        rank += 1;
    }
    rank
}

/// True when the states, as real vectors, are affinely independent.
pub fn affinely_independent(states: &[State]) -> bool {
    let rows: Vec<Vec<f64>> = states
        .iter()
        .map(|s| {
            let mut v = s.to_vec();
            v.push(1.0);
            v
        })
        .collect();
    small_rank(rows) == states.len()
}
