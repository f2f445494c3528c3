//! Closed-form bounds on hidden-unit counts, dimension and divergence, plus
//! exact small-length code sizes.
//!
//! `A(n, d)` is the largest size of a binary code of length `n` with minimum
//! distance `d`; `K(n, d)` is the smallest size of a code whose radius-`d`
//! balls cover the cube.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::compiler::feasible_partition_level;
use crate::error::{Error, Result};
use crate::packing::{f_value, resets_needed, s_value};

/// Longest code length handled by the exact searches.
pub const EXACT_CODE_CAP: usize = 6;

fn ball_masks(n: usize, radius: usize) -> Vec<u64> {
    let size = 1usize << n;
    (0..size)
        .map(|c| {
            (0..size)
                .filter(|&v| ((c ^ v).count_ones() as usize) <= radius)
                .fold(0u64, |m, v| m | (1u64 << v))
        })
        .collect()
}

fn all_mask(n: usize) -> u64 {
    if n >= 6 {
        u64::MAX
    } else {
        (1u64 << (1usize << n)) - 1
    }
}

/// Exact `A(n, d)` by branch and bound (the code may be assumed to contain 0).
pub fn code_a_exact(n: usize, d: usize) -> Result<usize> {
    if n > EXACT_CODE_CAP {
        return Err(Error::TooLarge {
            n,
            cap: EXACT_CODE_CAP,
        });
    }
    if n == 0 || d <= 1 {
        return Ok(1 << n);
    }
    // vertices closer than d conflict
    let conflict = ball_masks(n, d - 1);
    fn search(cand: u64, size: usize, best: &mut usize, conflict: &[u64]) {
        if cand == 0 {
            *best = (*best).max(size);
            return;
        }
        if size + cand.count_ones() as usize <= *best {
            return;
        }
        let v = cand.trailing_zeros() as usize;
        let bit = 1u64 << v;
        search(cand & !conflict[v], size + 1, best, conflict);
        search(cand & !bit, size, best, conflict);
    }
    let mut best = 1;
    search(all_mask(n) & !conflict[0], 1, &mut best, &conflict);
    Ok(best)
}

/// Exact `K(n, d)` by iterative deepening (one center may be assumed to be 0).
pub fn code_k_exact(n: usize, d: usize) -> Result<usize> {
    if n > EXACT_CODE_CAP {
        return Err(Error::TooLarge {
            n,
            cap: EXACT_CODE_CAP,
        });
    }
    let balls = ball_masks(n, d);
    let all = all_mask(n);
    fn feasible(covered: u64, left: usize, all: u64, balls: &[u64]) -> bool {
        if covered == all {
            return true;
        }
        if left == 0 {
            return false;
        }
        let uncovered = all & !covered;
        let gain = balls
            .iter()
            .map(|b| (b & uncovered).count_ones())
            .max()
            .unwrap_or(0);
        if (left as u32) * gain < uncovered.count_ones() {
            return false;
        }
        // some center must cover the smallest uncovered state
        let u = uncovered.trailing_zeros() as usize;
        let mut options: Vec<usize> = (0..balls.len())
            .filter(|&c| balls[u] >> c & 1 == 1)
            .collect();
        options.sort_by_key(|&c| std::cmp::Reverse((balls[c] & uncovered).count_ones()));
        options
            .into_iter()
            .any(|c| feasible(covered | balls[c], left - 1, all, balls))
    }
    let mut size = 1;
    while !feasible(balls[0], size - 1, all, &balls) {
        size += 1;
    }
    Ok(size)
}

fn floor_log2(v: u128) -> u32 {
    127 - v.leading_zeros()
}

/// Lower bound `2^(n - ⌊log2(n² - n + 2)⌋)` on `A(n, 4)`.
pub fn code_a_lower(n: usize) -> BigUint {
    let n128 = n as u128;
    let e = n as u32 - floor_log2(n128 * n128 - n128 + 2).min(n as u32);
    BigUint::one() << e
}

/// Upper bound `2^(n - ⌊log2(n + 1)⌋)` on `K(n, 1)`.
pub fn code_k_upper(n: usize) -> BigUint {
    BigUint::one() << (n as u32 - floor_log2(n as u128 + 1))
}

/// Best available lower bound on `A(n, 4)`.
fn a4_lower(n: usize) -> BigUint {
    match code_a_exact(n, 4) {
        Ok(v) => BigUint::from(v),
        Err(_) => code_a_lower(n),
    }
}

/// Best available upper bound on `K(n, 1)`.
fn k1_upper(n: usize) -> BigUint {
    match code_k_exact(n, 1) {
        Ok(v) => BigUint::from(v),
        Err(_) => code_k_upper(n),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DimRegime {
    ParameterCounting,
    Full,
    Unresolved,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpectedDim {
    #[serde(with = "crate::numeric::decimal")]
    pub value: BigUint,
    pub regime: DimRegime,
    #[serde(with = "crate::numeric::decimal")]
    pub parameter_count: BigUint,
    #[serde(with = "crate::numeric::decimal")]
    pub ambient: BigUint,
}

pub fn parameter_count(k: usize, n: usize, m: usize) -> BigUint {
    BigUint::from((k + n + 1) * m + n)
}

pub fn ambient_dim(k: usize, n: usize) -> BigUint {
    (BigUint::one() << k) * ((BigUint::one() << n) - 1u32)
}

/// Dimension of the CRBM model where the code conditions settle it.
///
/// Uses exact code sizes for `k + n ≤ 6` and the formula bounds beyond, so a
/// regime is only claimed when it is certain.
pub fn expected_dim(k: usize, n: usize, m: usize) -> ExpectedDim {
    let params = parameter_count(k, n, m);
    let ambient = ambient_dim(k, n);
    let (value, regime) = if BigUint::from(m + 1) <= a4_lower(k + n) {
        (params.clone(), DimRegime::ParameterCounting)
    } else if BigUint::from(m) >= k1_upper(k + n) {
        (ambient.clone(), DimRegime::Full)
    } else {
        (params.clone().min(ambient.clone()), DimRegime::Unresolved)
    };
    ExpectedDim {
        value,
        regime,
        parameter_count: params,
        ambient,
    }
}

/// Lower bound `(n+k)m + n + m + k - (2^k - 1)` valid when `m + 1 ≤ A(k+n, 3)`.
pub fn small_m_dim_lower(k: usize, n: usize, m: usize) -> i128 {
    ((n + k) * m + n + m + k) as i128 - ((1i128 << k) - 1)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthBudget {
    pub r: usize,
    #[serde(with = "crate::numeric::decimal")]
    pub m: BigUint,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniversalTable {
    pub k: usize,
    pub n: usize,
    /// Sufficient hidden units per feasible packing depth.
    pub per_depth: Vec<DepthBudget>,
    pub best: Option<DepthBudget>,
    /// Sufficient count via universal approximation of joints: `2^(k+n-1) - 1`.
    #[serde(with = "crate::numeric::decimal")]
    pub rbm_route: BigUint,
    /// Necessary count `⌈(2^k(2^n - 1) - n) / (n + k + 1)⌉`.
    #[serde(with = "crate::numeric::decimal")]
    pub necessary: BigUint,
}

/// `2^(k - S(r)) F(r) cells + resets_needed(r)`.
pub fn depth_budget(k: usize, r: usize, cells: &BigUint) -> Option<BigUint> {
    let s = s_value(r as u64) as usize;
    if r == 0 || k < s {
        return None;
    }
    Some((f_value(r as u64) << (k - s)) * cells + resets_needed(r as u64))
}

pub fn universal_m_table(k: usize, n: usize) -> UniversalTable {
    let cells = (BigUint::one() << n) - 1u32;
    let mut per_depth = Vec::new();
    let mut r = 1;
    while let Some(m) = depth_budget(k, r, &cells) {
        per_depth.push(DepthBudget { r, m });
        r += 1;
    }
    let best = per_depth.iter().min_by(|a, b| a.m.cmp(&b.m)).cloned();
    let rbm_route = (BigUint::one() << (k + n - 1)) - 1u32;
    let numer = ambient_dim(k, n) - BigUint::from(n);
    let denom = BigUint::from(n + k + 1);
    let necessary = (numer + &denom - 1u32) / denom;
    UniversalTable {
        k,
        n,
        per_depth,
        best,
        rbm_route,
        necessary,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivergenceBound {
    pub value: f64,
    /// Bound from the number of mixture components; 0 once the model is universal.
    pub mixture_term: f64,
    /// Finest cylinder-partition level reachable with `m` units, if any.
    pub partition_level: Option<usize>,
}

/// `(n+k) - ⌊log2(m+1)⌋ - (m+1)/2^⌊log2(m+1)⌋`, and 0 beyond `m = 2^(n+k-1) - 1`
/// (larger models contain the universal one).
pub fn mixture_divergence_term(k: usize, n: usize, m: usize) -> f64 {
    let width = (k + n) as u32;
    let limit = (1u128 << (width - 1)) - 1;
    if m as u128 >= limit {
        return 0.0;
    }
    let j = floor_log2(m as u128 + 1);
    width as f64 - j as f64 - (m as f64 + 1.0) / 2f64.powi(j as i32)
}

/// Upper bound on `max_q min_p D(q || p)` over the CRBM with `m` hidden units, in bits.
pub fn divergence_upper(k: usize, n: usize, m: usize) -> DivergenceBound {
    let mixture_term = mixture_divergence_term(k, n, m);
    let partition_level = feasible_partition_level(k, n, m).map(|(l, _)| l);
    let partition = (n - partition_level.unwrap_or(0)) as f64;
    DivergenceBound {
        value: mixture_term.min(n as f64).min(partition),
        mixture_term,
        partition_level,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeterministicBounds {
    #[serde(with = "crate::numeric::decimal")]
    pub sufficient: BigUint,
    pub necessary: f64,
}

/// Hidden units sufficient / necessary to approximate every deterministic table.
pub fn deterministic_m_bounds(k: usize, n: usize) -> DeterministicBounds {
    let a = (BigUint::one() << k) - 1u32;
    // ⌈3n 2^k / (k+2)⌉ in exact integers
    let num = (BigUint::from(3 * n) << k) + BigUint::from(k + 1);
    let b = num / BigUint::from(k + 2);
    let sufficient = a.min(b);
    let raw = 2f64.powf(k as f64 / 2.0) - ((n + k) * (n + k)) as f64 / (2.0 * n as f64);
    DeterministicBounds {
        sufficient,
        necessary: raw.ceil().max(0.0),
    }
}

/// Counting bound `2^(N² M)` on the number of threshold networks' functions.
pub fn ltf_count_bound(inputs: usize, outputs: usize) -> BigUint {
    BigUint::one() << (inputs * inputs * outputs)
}

/// Smallest `m` with `m (n+k)² + n m² ≥ n 2^k`.
pub fn counting_min_units(k: usize, n: usize) -> BigUint {
    let target = BigUint::from(n) << k;
    let lhs = |m: &BigUint| m * BigUint::from((n + k) * (n + k)) + BigUint::from(n) * m * m;
    // exponential then binary search
    let mut hi = BigUint::one();
    while lhs(&hi) < target {
        hi <<= 1;
    }
    let mut lo = BigUint::zero();
    while lo < hi {
        let mid: BigUint = (&lo + &hi) >> 1;
        if lhs(&mid) >= target {
            hi = mid;
        } else {
            lo = mid + 1u32;
        }
    }
    lo
}

/// The stated necessary count never exceeds the counting minimum.
pub fn deterministic_counting_consistent(k: usize, n: usize) -> bool {
    let need = deterministic_m_bounds(k, n).necessary;
    counting_min_units(k, n).to_f64().is_some_and(|m| need <= m)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub k: usize,
    pub n: usize,
    pub m: Option<usize>,
    #[serde(with = "crate::numeric::decimal")]
    pub code_a4_lower: BigUint,
    #[serde(with = "crate::numeric::decimal")]
    pub code_k1_upper: BigUint,
    pub universal: UniversalTable,
    pub deterministic: DeterministicBounds,
    pub expected_dim: Option<ExpectedDim>,
    pub divergence: Option<DivergenceBound>,
}

pub fn bounds_report(k: usize, n: usize, m: Option<usize>) -> Result<BoundsReport> {
    if n == 0 {
        return Err(Error::InvalidWidth(0));
    }
    if k + n > 120 {
        return Err(Error::CapExceeded {
            width: k + n,
            cap: 120,
        });
    }
    Ok(BoundsReport {
        k,
        n,
        m,
        code_a4_lower: a4_lower(k + n),
        code_k1_upper: k1_upper(k + n),
        universal: universal_m_table(k, n),
        deterministic: deterministic_m_bounds(k, n),
        expected_dim: m.map(|m| expected_dim(k, n, m)),
        divergence: m.map(|m| divergence_upper(k, n, m)),
    })
}
