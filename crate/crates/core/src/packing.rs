//! Star packing sequences for the input cube and the associated counting sequences.
//!
//! Coordinate layout for depth `r`: the first `S(r) = 1 + ... + r` bits are split
//! into consecutive blocks of sizes `r, r-1, ..., 1`; the remaining `k - S(r)`
//! bits are extra coordinates that simply multiply the construction. Round `i`
//! frees block `i`, fixes all later blocks and extra bits to every possible
//! value, and fixes earlier blocks to the branch's residue values.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::bitspace::{check_width, full_mask, CylinderSet, Star};
use crate::error::{Error, Result};

pub fn s_value(r: u64) -> u64 {
    r * (r + 1) / 2
}

/// Exact and floating values of the sequences at depth `r`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeqValues {
    pub r: u64,
    pub s: u64,
    #[serde(with = "crate::numeric::decimal")]
    pub f: BigUint,
    /// Product formula `Π_{i=2}^r (2^i - (i+1))`; equals 1 at `r = 1`.
    #[serde(with = "crate::numeric::decimal")]
    pub resets: BigUint,
    /// Resets the construction needs at all (0 at `r = 1`).
    #[serde(with = "crate::numeric::decimal")]
    pub resets_needed: BigUint,
    pub k: f64,
    pub p: f64,
}

fn residue_count(i: u64) -> BigUint {
    (BigUint::one() << i) - BigUint::from(i + 1)
}

pub fn f_value(r: u64) -> BigUint {
    let mut f = BigUint::one();
    for i in 2..=r {
        f = (BigUint::one() << s_value(i - 1)) + residue_count(i) * f;
    }
    f
}

pub fn r_value(r: u64) -> BigUint {
    (2..=r).map(residue_count).product()
}

pub fn resets_needed(r: u64) -> BigUint {
    if r <= 1 {
        BigUint::zero()
    } else {
        r_value(r)
    }
}

/// Resets issued by [`build_packing`]: one per branch alive before each round.
pub fn construction_resets(r: u64) -> BigUint {
    let mut total = BigUint::zero();
    let mut branches = BigUint::one();
    for i in 1..r {
        branches *= residue_count(r - i + 1);
        total += &branches;
    }
    total
}

/// `K(r) = 2^-S(r) F(r)` via `K(r) = 2^-r + K(r-1)(1 - 2^-r (r+1))`.
pub fn k_value(r: u64) -> f64 {
    let mut k = 0.5;
    for i in 2..=r {
        let h = 0.5f64.powi(i.min(2000) as i32);
        k = h + k * (1.0 - h * (i + 1) as f64);
    }
    k
}

/// `P(r) = ½ Π_{i=2}^r (1 - (i+1)/2^i)`.
pub fn p_value(r: u64) -> f64 {
    let mut p = 0.5;
    for i in 2..=r {
        p *= 1.0 - (i + 1) as f64 * 0.5f64.powi(i.min(2000) as i32);
    }
    p
}

pub fn seq_values(r: u64) -> Result<SeqValues> {
    if r == 0 {
        return Err(Error::InvalidWidth(0));
    }
    Ok(SeqValues {
        r,
        s: s_value(r),
        f: f_value(r),
        resets: r_value(r),
        resets_needed: resets_needed(r),
        k: k_value(r),
        p: p_value(r),
    })
}

/// One row of the sequence table: `r, 2^-S(r), F(r), resets, K(r), P(r)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub r: u64,
    pub two_pow_neg_s: f64,
    #[serde(with = "crate::numeric::decimal")]
    pub f: BigUint,
    #[serde(with = "crate::numeric::decimal")]
    pub resets: BigUint,
    pub k: f64,
    pub p: f64,
}

/// Rows `r = 1..=rmax`; the reset column shows the resets actually needed.
pub fn sequence_table(rmax: u64) -> Result<Vec<TableRow>> {
    (1..=rmax)
        .map(|r| {
            let v = seq_values(r)?;
            Ok(TableRow {
                r,
                two_pow_neg_s: 0.5f64.powi(v.s.min(2000) as i32),
                f: v.f,
                resets: v.resets_needed,
                k: v.k,
                p: v.p,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PackingSequence {
    pub k: usize,
    pub r: usize,
    pub stars: Vec<Star>,
    /// `(position, cylinder)`: reset the cylinder's rows before star `position`.
    pub resets: Vec<(usize, CylinderSet)>,
}

/// Bit mask of block `i` (1-based) for depth `r`.
fn block_mask(r: usize, i: usize) -> usize {
    let offset: usize = (1..i).map(|j| r - j + 1).sum();
    full_mask(r - i + 1) << offset
}

pub fn build_packing(k: usize, r: usize) -> Result<PackingSequence> {
    check_width(k)?;
    let needed = s_value(r as u64) as usize;
    if r == 0 || k < needed {
        return Err(Error::InfeasibleDepth { k, r, needed });
    }
    let mut stars = Vec::new();
    let mut resets = Vec::new();
    let mut branches = vec![0usize];
    let mut earlier = 0usize;
    for i in 1..=r {
        let block = block_mask(r, i);
        let later = full_mask(k) & !earlier & !block;
        if i >= 2 {
            for &b in &branches {
                resets.push((stars.len(), CylinderSet::new(k, earlier, b)?));
            }
        }
        for &b in &branches {
            let mut t = 0usize;
            loop {
                let cyl = CylinderSet::new(k, earlier | later, b | t)?;
                stars.push(Star::at_smallest(cyl));
                t = t.wrapping_sub(later) & later;
                if t == 0 {
                    break;
                }
            }
        }
        let offset = block.trailing_zeros();
        let size = r - i + 1;
        let residues: Vec<usize> = (0..1usize << size)
            .filter(|u| u.count_ones() >= 2)
            .collect();
        branches = branches
            .iter()
            .flat_map(|&b| residues.iter().map(move |&u| b | (u << offset)))
            .collect();
        earlier |= block;
    }
    Ok(PackingSequence {
        k,
        r,
        stars,
        resets,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PackingViolation {
    WidthMismatch { star: usize },
    Overlap { star: usize, state: usize },
    CylinderHitsEarlierStar { star: usize, earlier: usize },
    Uncovered { state: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PackingReport {
    pub valid: bool,
    pub star_count: usize,
    pub reset_count: usize,
    pub violation: Option<PackingViolation>,
}

/// Checks disjointness, exact cover, and that no star's cylinder meets an earlier star.
pub fn validate_packing(seq: &PackingSequence) -> PackingReport {
    let report = |violation: Option<PackingViolation>| PackingReport {
        valid: violation.is_none(),
        star_count: seq.stars.len(),
        reset_count: seq.resets.len(),
        violation,
    };
    if check_width(seq.k).is_err() {
        return report(Some(PackingViolation::WidthMismatch { star: 0 }));
    }
    let mut owner: Vec<Option<usize>> = vec![None; 1 << seq.k];
    let mut covered: Vec<usize> = Vec::new();
    for (t, star) in seq.stars.iter().enumerate() {
        if star.cylinder().width() != seq.k {
            return report(Some(PackingViolation::WidthMismatch { star: t }));
        }
        let cyl = star.cylinder();
        if let Some(&x) = covered.iter().find(|&&x| cyl.contains_index(x)) {
            return report(Some(PackingViolation::CylinderHitsEarlierStar {
                star: t,
                earlier: owner[x].expect("covered states have owners"),
            }));
        }
        for x in star.members() {
            let x = x.index();
            if owner[x].is_some() {
                return report(Some(PackingViolation::Overlap { star: t, state: x }));
            }
            owner[x] = Some(t);
            covered.push(x);
        }
    }
    if let Some(x) = owner.iter().position(Option::is_none) {
        return report(Some(PackingViolation::Uncovered { state: x }));
    }
    report(None)
}

/// The depth minimizing `2^(k-S(r)) F(r) cells + resets_needed(r)` among feasible depths.
pub fn best_depth(k: usize, cells: u128) -> Option<(usize, u128)> {
    let mut best: Option<(usize, u128)> = None;
    let mut r = 1usize;
    while s_value(r as u64) as usize <= k {
        if let Some(b) = packing_budget(k, r, cells) {
            if best.is_none_or(|(_, v)| b < v) {
                best = Some((r, b));
            }
        }
        r += 1;
    }
    best
}

/// `2^(k-S(r)) F(r) cells + resets_needed(r)`, `None` on overflow or infeasible depth.
pub fn packing_budget(k: usize, r: usize, cells: u128) -> Option<u128> {
    let s = s_value(r as u64) as usize;
    if r == 0 || k < s {
        return None;
    }
    let f = f_value(r as u64).to_u128()?;
    let stars = f.checked_mul(1u128.checked_shl((k - s) as u32)?)?;
    stars
        .checked_mul(cells)?
        .checked_add(resets_needed(r as u64).to_u128()?)
}
