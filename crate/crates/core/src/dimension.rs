//! Model dimension: Jacobian rank at random parameters and an exact tropical
//! lower bound built from radius-1 Hamming-ball slicings.

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bitspace::{check_width, HammingBall, State};
use crate::bounds::{expected_dim, ExpectedDim};
use crate::crbm::CrbmParams;
use crate::error::{Error, Result};

/// Relative singular-value threshold `2^-40`.
pub const RANK_REL_TOL: f64 = 9.094947017729282e-13;
pub const DEFAULT_TRIALS: usize = 8;
/// Seeds used by [`certify_dimension`] for its stability check.
pub const CERTIFY_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

fn rank_at(singular: &[f64], tol: f64) -> usize {
    singular.iter().filter(|&&s| s > tol).count()
}

/// Rank by singular-value thresholding at `σ_max · max(rows, cols) · rel`,
/// rejected when halving or doubling the threshold changes the answer.
pub fn numeric_rank_with(matrix: &DMatrix<f64>, rel: f64) -> Result<usize> {
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(Error::ShapeMismatch("non-finite matrix entry".into()));
    }
    if matrix.is_empty() {
        return Ok(0);
    }
    let singular = matrix.clone().svd(false, false).singular_values;
    let smax = singular.max();
    if smax == 0.0 {
        return Ok(0);
    }
    let tol = smax * matrix.nrows().max(matrix.ncols()) as f64 * rel;
    let s = singular.as_slice();
    let (low, mid, high) = (
        rank_at(s, tol / 2.0),
        rank_at(s, tol),
        rank_at(s, tol * 2.0),
    );
    if low != mid || mid != high {
        return Err(Error::UnstableRank { low, mid, high });
    }
    Ok(mid)
}

pub fn numeric_rank(matrix: &DMatrix<f64>) -> Result<usize> {
    numeric_rank_with(matrix, RANK_REL_TOL)
}

/// Max Jacobian rank of `p(y|x)` over `trials` standard-normal draws.
///
/// Trial `t` draws from `ChaCha8Rng::seed_from_u64(seed)` advanced through
/// the previous draws, so the result does not depend on thread scheduling.
pub fn crbm_dimension_estimate(
    k: usize,
    n: usize,
    m: usize,
    trials: usize,
    seed: u64,
) -> Result<usize> {
    check_width(k + n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: Vec<CrbmParams> = (0..trials.max(1))
        .map(|_| CrbmParams::random(k, n, m, 1.0, &mut rng))
        .collect();
    let ranks: Vec<Result<usize>> = std::thread::scope(|scope| {
        let handles: Vec<_> = draws
            .iter()
            .map(|p| scope.spawn(move || p.conditional_jacobian().and_then(|j| numeric_rank(&j))))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("rank thread panicked"))
            .collect()
    });
    let mut best = 0;
    for r in ranks {
        best = best.max(r?);
    }
    Ok(best)
}

/// Exact rank of an integer matrix by fraction-free (Bareiss) elimination.
pub fn exact_rank(rows: &[Vec<i64>]) -> usize {
    let mut a: Vec<Vec<BigInt>> = rows
        .iter()
        .map(|r| r.iter().map(|&v| BigInt::from(v)).collect())
        .collect();
    let nrows = a.len();
    let ncols = a.first().map_or(0, Vec::len);
    let mut rank = 0;
    let mut prev = BigInt::from(1);
    for col in 0..ncols {
        let Some(p) = (rank..nrows).find(|&r| !a[r][col].is_zero()) else {
            continue;
        };
        a.swap(rank, p);
        for r in rank + 1..nrows {
            for c in col + 1..ncols {
                let v = (&a[rank][col] * &a[r][c] - &a[r][col] * &a[rank][c]) / &prev;
                a[r][c] = v;
            }
            a[r][col] = BigInt::zero();
        }
        prev = a[rank][col].clone();
        rank += 1;
        if rank == nrows {
            break;
        }
    }
    rank
}

/// Rows `(1, v)` of the tropical Jacobian, one block per slicing plus the
/// unmasked block, followed by the `2^k` input-cylinder indicators.
pub fn tropical_matrix(k: usize, n: usize, slicings: &[HammingBall]) -> Result<Vec<Vec<i64>>> {
    let width = k + n;
    check_width(width)?;
    for b in slicings {
        if b.width() != width {
            return Err(Error::WidthMismatch {
                left: b.width(),
                right: width,
            });
        }
    }
    let xmask = (1usize << k) - 1;
    let rows = (0..1usize << width)
        .map(|v| {
            let affine: Vec<i64> = std::iter::once(1)
                .chain((0..width).map(|i| (v >> i & 1) as i64))
                .collect();
            let mut row = affine.clone();
            for ball in slicings {
                let on = ball.contains(State::new(v, width).expect("in range"));
                row.extend(affine.iter().map(|&a| if on { a } else { 0 }));
            }
            row.extend((0..1usize << k).map(|x| ((v & xmask) == x) as i64));
            row
        })
        .collect();
    Ok(rows)
}

/// Exact rank of the tropical Jacobian modulo functions of the input.
pub fn tropical_rank_mod_inputs(k: usize, n: usize, slicings: &[HammingBall]) -> Result<usize> {
    let rows = tropical_matrix(k, n, slicings)?;
    Ok(exact_rank(&rows) - (1usize << k))
}

/// Lexicographic first-fit centers at pairwise distance ≥ 4, at most `m`.
pub fn greedy_centers(width: usize, m: usize) -> Result<Vec<State>> {
    check_width(width)?;
    let mut out: Vec<usize> = Vec::new();
    for v in 0..1usize << width {
        if out.len() == m {
            break;
        }
        if out.iter().all(|&c| (c ^ v).count_ones() >= 4) {
            out.push(v);
        }
    }
    out.into_iter().map(|v| State::new(v, width)).collect()
}

/// Whether the balls avoid covering any `[x]` and leave a complement of full
/// affine rank.
pub fn relaxed_condition(k: usize, n: usize, balls: &[HammingBall]) -> bool {
    let width = k + n;
    let covered = |v: usize| {
        balls
            .iter()
            .any(|b| b.contains(State::new(v, width).expect("in range")))
    };
    let swallows_input = (0..1usize << k).any(|x| (0..1usize << n).all(|y| covered(x | y << k)));
    if swallows_input {
        return false;
    }
    let complement: Vec<Vec<i64>> = (0..1usize << width)
        .filter(|&v| !covered(v))
        .map(|v| {
            std::iter::once(1)
                .chain((0..width).map(|i| (v >> i & 1) as i64))
                .collect()
        })
        .collect();
    exact_rank(&complement) == width + 1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimensionReport {
    pub k: usize,
    pub n: usize,
    pub m: usize,
    pub expected: ExpectedDim,
    pub numeric: usize,
    pub numeric_per_seed: Vec<usize>,
    pub numeric_stable: bool,
    pub tropical: usize,
    pub centers: Vec<usize>,
    pub relaxed_condition: bool,
    pub agree: bool,
}

/// Combine the closed-form expectation, the tropical bound and the numeric rank.
pub fn certify_dimension(k: usize, n: usize, m: usize) -> Result<DimensionReport> {
    certify_dimension_with(k, n, m, DEFAULT_TRIALS)
}

pub fn certify_dimension_with(
    k: usize,
    n: usize,
    m: usize,
    trials: usize,
) -> Result<DimensionReport> {
    let expected = expected_dim(k, n, m);
    let numeric_per_seed = CERTIFY_SEEDS
        .iter()
        .map(|&s| crbm_dimension_estimate(k, n, m, trials, s))
        .collect::<Result<Vec<_>>>()?;
    let numeric = *numeric_per_seed.iter().max().expect("seeds nonempty");
    let numeric_stable = numeric_per_seed.iter().all(|&r| r == numeric);
    let centers = greedy_centers(k + n, m)?;
    let balls: Vec<HammingBall> = centers.iter().map(|&c| HammingBall::new(c)).collect();
    let tropical = tropical_rank_mod_inputs(k, n, &balls)?;
    let agree = numeric_stable && expected.value.to_usize() == Some(numeric) && tropical <= numeric;
    Ok(DimensionReport {
        k,
        n,
        m,
        expected,
        numeric,
        numeric_per_seed,
        numeric_stable,
        tropical,
        centers: centers.iter().map(State::index).collect(),
        relaxed_condition: relaxed_condition(k, n, &balls),
        agree,
    })
}
