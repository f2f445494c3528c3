//! Dense distributions on `{0,1}^N` and conditional tables `p(y|x)`.
//!
//! Divergences are measured in bits. Zeros are kept exact; operations that
//! need strict positivity check for it explicitly.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::bitspace::{check_width, full_mask};
use crate::error::{Error, Result};
use crate::numeric::logsumexp;

/// Tolerance on the total mass of a distribution.
pub const MASS_TOL: f64 = 1e-12;

/// A probability vector over `{0,1}^width`, indexed by state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dist {
    width: usize,
    probs: Vec<f64>,
}

impl Dist {
    pub fn new(width: usize, probs: Vec<f64>) -> Result<Self> {
        check_width(width)?;
        if probs.len() != 1usize << width {
            return Err(Error::ShapeMismatch(format!(
                "expected {} probabilities, got {}",
                1usize << width,
                probs.len()
            )));
        }
        if let Some(bad) = probs.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(Error::InvalidDistribution(format!("entry {bad}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidDistribution(format!("total mass {total}")));
        }
        Ok(Self { width, probs })
    }

    /// Normalizes non-negative weights.
    pub fn from_weights(width: usize, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::InvalidDistribution(format!("total weight {total}")));
        }
        Self::new(width, weights.into_iter().map(|w| w / total).collect())
    }

    /// Normalizes unnormalized log-weights.
    pub fn from_log_weights(width: usize, logw: &[f64]) -> Result<Self> {
        let z = logsumexp(logw);
        if !z.is_finite() {
            return Err(Error::InvalidDistribution(format!("log normalizer {z}")));
        }
        Self::new(width, logw.iter().map(|l| (l - z).exp()).collect())
    }

    pub fn uniform(width: usize) -> Result<Self> {
        check_width(width)?;
        let size = 1usize << width;
        Self::new(width, vec![1.0 / size as f64; size])
    }

    pub fn point_mass(width: usize, index: usize) -> Result<Self> {
        check_width(width)?;
        let mut probs = vec![0.0; 1usize << width];
        *probs
            .get_mut(index)
            .ok_or(Error::StateOutOfRange { index, width })? = 1.0;
        Self::new(width, probs)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn get(&self, index: usize) -> f64 {
        self.probs[index]
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.probs.iter().all(|&p| p > 0.0)
    }

    pub fn support_size(&self) -> usize {
        self.probs.iter().filter(|&&p| p > 0.0).count()
    }

    pub fn log_probs(&self) -> Vec<f64> {
        self.probs.iter().map(|p| p.ln()).collect()
    }

    /// L1 distance `sum |p - q|`.
    pub fn l1_distance(&self, other: &Dist) -> Result<f64> {
        same_width(self, other)?;
        Ok(self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .sum())
    }
}

fn same_width(p: &Dist, q: &Dist) -> Result<()> {
    if p.width != q.width {
        return Err(Error::WidthMismatch {
            left: p.width,
            right: q.width,
        });
    }
    Ok(())
}

/// Renormalized entry-wise product.
pub fn hadamard(p: &Dist, q: &Dist) -> Result<Dist> {
    same_width(p, q)?;
    let prod: Vec<f64> = p.probs.iter().zip(&q.probs).map(|(a, b)| a * b).collect();
    let z: f64 = prod.iter().sum();
    if z <= 0.0 {
        return Err(Error::DisjointSupports);
    }
    Dist::new(p.width, prod.into_iter().map(|v| v / z).collect())
}

/// Kullback-Leibler divergence in bits; `+inf` when `supp(p)` is not inside `supp(q)`.
pub fn kl_dist(p: &Dist, q: &Dist) -> Result<f64> {
    same_width(p, q)?;
    let mut total = 0.0;
    for (&a, &b) in p.probs.iter().zip(&q.probs) {
        if a > 0.0 {
            if b <= 0.0 {
                return Ok(f64::INFINITY);
            }
            total += a * (a / b).log2();
        }
    }
    Ok(total.max(0.0))
}

/// A `2^k x 2^n` row-stochastic table; row `x` is `p(.|x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionalTable {
    k: usize,
    n: usize,
    rows: Vec<Dist>,
}

impl ConditionalTable {
    pub fn new(k: usize, n: usize, rows: Vec<Dist>) -> Result<Self> {
        check_width(k + n)?;
        if n == 0 {
            return Err(Error::InvalidWidth(n));
        }
        if rows.len() != 1usize << k {
            return Err(Error::ShapeMismatch(format!(
                "expected {} rows, got {}",
                1usize << k,
                rows.len()
            )));
        }
        if let Some(r) = rows.iter().find(|r| r.width != n) {
            return Err(Error::WidthMismatch {
                left: n,
                right: r.width,
            });
        }
        Ok(Self { k, n, rows })
    }

    pub fn from_rows(k: usize, n: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        let rows = rows
            .into_iter()
            .map(|r| Dist::new(n, r))
            .collect::<Result<Vec<_>>>()?;
        Self::new(k, n, rows)
    }

    pub fn uniform(k: usize, n: usize) -> Result<Self> {
        let row = Dist::uniform(n)?;
        Self::new(k, n, vec![row; 1 << k])
    }

    /// The deterministic table `p(y|x) = [y = f(x)]`.
    pub fn deterministic(k: usize, n: usize, f: &[usize]) -> Result<Self> {
        let rows = f
            .iter()
            .map(|&y| Dist::point_mass(n, y))
            .collect::<Result<Vec<_>>>()?;
        Self::new(k, n, rows)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rows(&self) -> &[Dist] {
        &self.rows
    }

    pub fn row(&self, x: usize) -> &Dist {
        &self.rows[x]
    }

    pub fn prob(&self, x: usize, y: usize) -> f64 {
        self.rows[x].probs[y]
    }

    pub fn nonzero_count(&self) -> usize {
        self.rows.iter().map(Dist::support_size).sum()
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.rows.iter().all(Dist::is_strictly_positive)
    }

    fn check_shape(&self, other: &ConditionalTable) -> Result<()> {
        if self.k != other.k || self.n != other.n {
            return Err(Error::ShapeMismatch(format!(
                "({}, {}) vs ({}, {})",
                self.k, self.n, other.k, other.n
            )));
        }
        Ok(())
    }

    /// Joint distribution `marginal(x) p(y|x)` over `k + n` bits, with `x` in
    /// the low `k` bits.
    pub fn joint(&self, marginal: &Dist) -> Result<Dist> {
        if marginal.width != self.k {
            return Err(Error::WidthMismatch {
                left: self.k,
                right: marginal.width,
            });
        }
        let mut probs = vec![0.0; 1 << (self.k + self.n)];
        for (x, row) in self.rows.iter().enumerate() {
            for (y, &p) in row.probs.iter().enumerate() {
                probs[x | (y << self.k)] = marginal.probs[x] * p;
            }
        }
        Dist::from_weights(self.k + self.n, probs)
    }

    /// Floors every entry at `floor` and renormalizes each row.
    pub fn clamp_floor(&self, floor: f64) -> Result<Self> {
        let rows = self
            .rows
            .iter()
            .map(|r| Dist::from_weights(self.n, r.probs.iter().map(|p| p.max(floor)).collect()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.k, self.n, rows)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["x".to_string()];
        header.extend((0..1usize << self.n).map(|y| format!("y{y}")));
        w.write_record(&header)?;
        for (x, row) in self.rows.iter().enumerate() {
            let mut rec = vec![x.to_string()];
            rec.extend(row.probs.iter().map(|p| format!("{p:.16e}")));
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let ncols = r.headers()?.len();
        if ncols < 3 || !(ncols - 1).is_power_of_two() {
            return Err(Error::Parse(format!("{ncols} columns")));
        }
        let n = (ncols - 1).trailing_zeros() as usize;
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let vals = rec
                .iter()
                .skip(1)
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Parse(e.to_string()))
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(vals);
        }
        if !rows.len().is_power_of_two() {
            return Err(Error::Parse(format!("{} rows", rows.len())));
        }
        let k = rows.len().trailing_zeros() as usize;
        Self::from_rows(k, n, rows)
    }
}

/// Average row divergence `2^-k sum_x D(p(.|x) || q(.|x))` in bits.
pub fn kl_conditional(p: &ConditionalTable, q: &ConditionalTable) -> Result<f64> {
    p.check_shape(q)?;
    let mut total = 0.0;
    for (a, b) in p.rows.iter().zip(&q.rows) {
        total += kl_dist(a, b)?;
    }
    Ok(total / p.rows.len() as f64)
}

/// Block-normalizes a joint over `k + n` bits (inputs in the low `k` bits).
pub fn conditional_of_joint(p: &Dist, k: usize) -> Result<ConditionalTable> {
    if p.width <= k {
        return Err(Error::ShapeMismatch(format!(
            "joint width {} must exceed k = {k}",
            p.width
        )));
    }
    let n = p.width - k;
    let mut rows = Vec::with_capacity(1 << k);
    for x in 0..1usize << k {
        let block: Vec<f64> = (0..1usize << n).map(|y| p.probs[x | (y << k)]).collect();
        let mass: f64 = block.iter().sum();
        if mass <= 0.0 {
            return Err(Error::ZeroInputMass(x));
        }
        rows.push(Dist::from_weights(n, block)?);
    }
    ConditionalTable::new(k, n, rows)
}

/// `max_x sum_y |p(y|x) - q(y|x)|`.
pub fn tv_row_distance(p: &ConditionalTable, q: &ConditionalTable) -> Result<f64> {
    p.check_shape(q)?;
    let mut worst: f64 = 0.0;
    for (a, b) in p.rows.iter().zip(&q.rows) {
        worst = worst.max(a.l1_distance(b)?);
    }
    Ok(worst)
}

/// The set of tables with at most `2^k + d` non-zero entries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupportClass {
    k: usize,
    n: usize,
    d: usize,
}

impl SupportClass {
    pub fn new(k: usize, n: usize, d: usize) -> Result<Self> {
        let max = (1usize << k) * ((1usize << n) - 1);
        if d > max {
            return Err(Error::InvalidSupportClass { d, max });
        }
        Ok(Self { k, n, d })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn limit(&self) -> usize {
        (1usize << self.k) + self.d
    }
}

pub fn in_support_class(p: &ConditionalTable, c: &SupportClass) -> Result<bool> {
    if p.k != c.k || p.n != c.n {
        return Err(Error::ShapeMismatch("support class shape".into()));
    }
    Ok(p.nonzero_count() <= c.limit())
}

/// A partition of `{0,1}^n` into disjoint non-empty blocks.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionModel {
    n: usize,
    blocks: Vec<Vec<usize>>,
}

impl PartitionModel {
    pub fn new(n: usize, blocks: Vec<Vec<usize>>) -> Result<Self> {
        check_width(n)?;
        let size = 1usize << n;
        let mut seen = vec![false; size];
        for block in &blocks {
            if block.is_empty() {
                return Err(Error::InvalidPartition("empty block".into()));
            }
            for &y in block {
                if y >= size || seen[y] {
                    return Err(Error::InvalidPartition(format!("state {y}")));
                }
                seen[y] = true;
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidPartition(
                "blocks do not cover the cube".into(),
            ));
        }
        Ok(Self { n, blocks })
    }

    /// Blocks `{y : y restricted to the first l bits = z}` for `z` in `{0,1}^l`.
    pub fn cylinders(n: usize, l: usize) -> Result<Self> {
        if l > n {
            return Err(Error::InvalidPartition(format!("l = {l} > n = {n}")));
        }
        let low = full_mask(l);
        let mut blocks = vec![Vec::new(); 1 << l];
        for y in 0..1usize << n {
            blocks[y & low].push(y);
        }
        Self::new(n, blocks)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn is_block_constant(&self, p: &Dist, tol: f64) -> bool {
        self.blocks.iter().all(|b| {
            let first = p.probs[b[0]];
            b.iter().all(|&y| (p.probs[y] - first).abs() <= tol)
        })
    }
}

/// Divergence projection onto a partition model: spreads each block's mass
/// uniformly over the block. Returns the projection and the divergence to it.
pub fn partition_project(p: &Dist, m: &PartitionModel) -> Result<(Dist, f64)> {
    if p.width != m.n {
        return Err(Error::WidthMismatch {
            left: p.width,
            right: m.n,
        });
    }
    let mut probs = vec![0.0; p.len()];
    for block in &m.blocks {
        let mass: f64 = block.iter().map(|&y| p.probs[y]).sum();
        let each = mass / block.len() as f64;
        for &y in block {
            probs[y] = each;
        }
    }
    let proj = Dist::from_weights(p.width, probs)?;
    let div = kl_dist(p, &proj)?;
    Ok((proj, div))
}

/// A table with rows drawn independently from the flat Dirichlet distribution.
pub fn random_conditional(k: usize, n: usize, seed: u64) -> Result<ConditionalTable> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_conditional_with(k, n, &mut rng)
}

pub fn random_conditional_with<R: rand::Rng + ?Sized>(
    k: usize,
    n: usize,
    rng: &mut R,
) -> Result<ConditionalTable> {
    check_width(k + n)?;
    if n == 0 {
        return Err(Error::InvalidWidth(n));
    }
    let rows = (0..1usize << k)
        .map(|_| random_dist_with(n, rng))
        .collect::<Result<Vec<_>>>()?;
    ConditionalTable::new(k, n, rows)
}

pub fn random_dist_with<R: rand::Rng + ?Sized>(width: usize, rng: &mut R) -> Result<Dist> {
    let w: Vec<f64> = (0..1usize << width)
        .map(|_| {
            let e: f64 = Exp1.sample(rng);
            e.max(f64::MIN_POSITIVE)
        })
        .collect();
    Dist::from_weights(width, w)
}
