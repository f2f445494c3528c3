//! Sharing steps `p ↦ λp + (1-λ) p∗s` and their realization by hidden units.
//!
//! A hidden unit with visible weights `w` and bias `β` multiplies the visible
//! distribution by `1 + exp(wᵀv + β)`. Normalizing shows this is the sharing
//! step with `s(v) ∝ exp(wᵀv)` and `λ = 1 / (1 + exp(β) Z)` where
//! `Z = Σ_v p(v) exp(wᵀv)`. Steps store `log((1-λ)/λ)` instead of `λ` so
//! that weights very close to 0 or 1 stay representable.
//!
//! Joint states are `x | y << k`. Everything is computed on log-probabilities.

use serde::{Deserialize, Serialize};

use crate::bitspace::{CylinderSet, Star, State};
use crate::crbm::dot_bits;
use crate::distributions::Dist;
use crate::error::{Error, Result};
use crate::numeric::{logsumexp, sigmoid, softplus};

/// Largest hidden bias magnitude accepted when converting steps to units.
pub const BIAS_CAP: f64 = 1e6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SharingStep {
    width: usize,
    log_odds: Vec<f64>,
    mix_logit: f64,
}

impl SharingStep {
    /// `lambda` in `[0, 1]`; `log_odds[i] = log(s_i(1) / s_i(0))`.
    pub fn new(lambda: f64, log_odds: Vec<f64>) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::InvalidStep(format!("lambda = {lambda}")));
        }
        let mix_logit = if lambda == 0.0 {
            f64::INFINITY
        } else {
            (1.0 - lambda).ln() - lambda.ln()
        };
        Self::from_logit(mix_logit, log_odds)
    }

    pub fn from_factors(lambda: f64, factors: &[(f64, f64)]) -> Result<Self> {
        if factors
            .iter()
            .any(|&(a, b)| !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()))
        {
            return Err(Error::InvalidStep("factors must be positive".into()));
        }
        Self::new(
            lambda,
            factors.iter().map(|&(a, b)| b.ln() - a.ln()).collect(),
        )
    }

    pub fn from_logit(mix_logit: f64, log_odds: Vec<f64>) -> Result<Self> {
        if mix_logit.is_nan() || log_odds.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidStep("non-finite step parameters".into()));
        }
        Ok(Self {
            width: log_odds.len(),
            log_odds,
            mix_logit,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn lambda(&self) -> f64 {
        sigmoid(-self.mix_logit)
    }

    /// `log((1 - λ) / λ)`.
    pub fn mix_logit(&self) -> f64 {
        self.mix_logit
    }

    pub fn log_odds(&self) -> &[f64] {
        &self.log_odds
    }

    /// Normalized per-coordinate factors `(s_i(0), s_i(1))`.
    pub fn factors(&self) -> Vec<(f64, f64)> {
        self.log_odds
            .iter()
            .map(|&w| (sigmoid(-w), sigmoid(w)))
            .collect()
    }
}

/// Hidden unit acting on the joint visible vector (inputs first, then outputs).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HiddenUnit {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl HiddenUnit {
    pub fn exponent(&self, v: usize) -> f64 {
        self.bias + dot_bits(&self.weights, v)
    }
}

fn log_normalizer(logp: &[f64], w: &[f64]) -> Result<f64> {
    let terms: Vec<f64> = logp
        .iter()
        .enumerate()
        .map(|(v, lp)| lp + dot_bits(w, v))
        .collect();
    let z = logsumexp(&terms);
    if !z.is_finite() {
        return Err(Error::DegenerateStep);
    }
    Ok(z)
}

/// Applies a step to log-probabilities.
pub fn apply_sharing_log(logp: &[f64], step: &SharingStep) -> Result<Vec<f64>> {
    if logp.len() != 1usize << step.width {
        return Err(Error::WidthMismatch {
            left: logp.len().trailing_zeros() as usize,
            right: step.width,
        });
    }
    let z = log_normalizer(logp, &step.log_odds)?;
    let a = step.mix_logit;
    Ok(logp
        .iter()
        .enumerate()
        .map(|(v, lp)| {
            let u = dot_bits(&step.log_odds, v) - z;
            if a == f64::INFINITY {
                lp + u
            } else {
                // log(λ + (1-λ) e^u) with λ = 1 / (1 + e^a)
                lp + softplus(a + u) - softplus(a)
            }
        })
        .collect())
}

pub fn apply_sharing(p: &Dist, step: &SharingStep) -> Result<Dist> {
    let out = apply_sharing_log(&p.log_probs(), step)?;
    Dist::from_log_weights(p.width(), &out)
}

/// The hidden unit whose multiplicative effect on `p` equals `step`.
pub fn step_to_hidden_unit(p: &Dist, step: &SharingStep) -> Result<HiddenUnit> {
    step_to_hidden_unit_log(&p.log_probs(), step)
}

pub fn step_to_hidden_unit_log(logp: &[f64], step: &SharingStep) -> Result<HiddenUnit> {
    if step.mix_logit == f64::INFINITY {
        return Err(Error::LambdaZero);
    }
    let bias = step.mix_logit - log_normalizer(logp, &step.log_odds)?;
    if bias.is_nan() || bias.abs() > BIAS_CAP {
        return Err(Error::BiasOutOfRange(bias));
    }
    Ok(HiddenUnit {
        weights: step.log_odds.clone(),
        bias,
    })
}

/// The step realized by appending `unit` to a model currently at `logp`.
pub fn unit_to_step_log(logp: &[f64], unit: &HiddenUnit) -> Result<SharingStep> {
    let z = log_normalizer(logp, &unit.weights)?;
    SharingStep::from_logit(unit.bias + z, unit.weights.clone())
}

/// Multiplies the joint by the unit's factor `1 + e^a` (unnormalized log weights).
pub fn apply_unit_log(logp: &[f64], unit: &HiddenUnit) -> Vec<f64> {
    let mut out: Vec<f64> = logp
        .iter()
        .enumerate()
        .map(|(v, lp)| lp + softplus(unit.exponent(v)))
        .collect();
    crate::numeric::log_normalize(&mut out);
    out
}

/// Row-wise log conditional table `[x][y]`, kept normalized per row.
#[derive(Clone, Debug, PartialEq)]
pub struct LogTable {
    pub k: usize,
    pub n: usize,
    pub rows: Vec<Vec<f64>>,
}

impl LogTable {
    pub fn new(k: usize, n: usize, mut rows: Vec<Vec<f64>>) -> Self {
        for r in rows.iter_mut() {
            crate::numeric::log_normalize(r);
        }
        Self { k, n, rows }
    }

    /// Rows of a joint over `k + n` bits, inputs in the low bits.
    pub fn from_joint(logp: &[f64], k: usize) -> Self {
        let n = (logp.len().trailing_zeros() as usize) - k;
        let rows = (0..1usize << k)
            .map(|x| (0..1usize << n).map(|y| logp[x | (y << k)]).collect())
            .collect();
        Self::new(k, n, rows)
    }

    /// Joint with a uniform input marginal.
    pub fn to_joint(&self) -> Vec<f64> {
        let shift = -(self.k as f64) * std::f64::consts::LN_2;
        let mut out = vec![0.0; 1usize << (self.k + self.n)];
        for (x, row) in self.rows.iter().enumerate() {
            for (y, l) in row.iter().enumerate() {
                out[x | (y << self.k)] = shift + l;
            }
        }
        out
    }

    pub fn apply_unit(&mut self, unit: &HiddenUnit) {
        for (x, row) in self.rows.iter_mut().enumerate() {
            for (y, l) in row.iter_mut().enumerate() {
                *l += softplus(unit.exponent(x | (y << self.k)));
            }
            crate::numeric::log_normalize(row);
        }
    }

    pub fn cell_log_mass(&self, x: usize, cell: OutputCell) -> f64 {
        let terms: Vec<f64> = self.rows[x]
            .iter()
            .enumerate()
            .filter(|(y, _)| cell.contains(*y))
            .map(|(_, l)| *l)
            .collect();
        logsumexp(&terms)
    }

    pub fn row_probs(&self, x: usize) -> Vec<f64> {
        self.rows[x].iter().map(|l| l.exp()).collect()
    }
}

/// Output states `y` with `y & mask == value`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputCell {
    pub mask: usize,
    pub value: usize,
}

impl OutputCell {
    pub fn point(n: usize, y: usize) -> Self {
        Self {
            mask: crate::bitspace::full_mask(n),
            value: y,
        }
    }

    pub fn contains(&self, y: usize) -> bool {
        y & self.mask == self.value
    }
}

/// A sharp product-distribution step: exponent `level(x)` on the target
/// region `C × cell`, at most `-τ` everywhere else.
///
/// `level` is affine on the free coordinates of `C`. The mismatch penalties
/// use `τ + max(0, max_C level)` so every state outside the region sits at
/// least `τ` below zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SharpStepSpec {
    pub k: usize,
    pub n: usize,
    pub cylinder: CylinderSet,
    pub anchor: usize,
    pub anchor_level: f64,
    /// Per input coordinate; only free coordinates of the cylinder are used.
    pub slopes: Vec<f64>,
    pub cell: OutputCell,
    pub tau: f64,
}

impl SharpStepSpec {
    pub fn constant(
        n: usize,
        cylinder: CylinderSet,
        level: f64,
        cell: OutputCell,
        tau: f64,
    ) -> Self {
        let k = cylinder.width();
        Self {
            k,
            n,
            anchor: cylinder.smallest_member().index(),
            cylinder,
            anchor_level: level,
            slopes: vec![0.0; k],
            cell,
            tau,
        }
    }

    /// Levels prescribed on every member of the star, given as `(x, level)`.
    pub fn on_star(
        n: usize,
        star: &Star,
        levels: &[(usize, f64)],
        cell: OutputCell,
        tau: f64,
    ) -> Result<Self> {
        let cyl = star.cylinder();
        let center = star.center().index();
        let lookup = |x: usize| {
            levels
                .iter()
                .find(|(s, _)| *s == x)
                .map(|(_, l)| *l)
                .ok_or_else(|| Error::InfeasibleProfile(format!("no level for star member {x}")))
        };
        let base = lookup(center)?;
        if !base.is_finite() {
            return Err(Error::InfeasibleProfile(format!("level {base}")));
        }
        let mut slopes = vec![0.0; cyl.width()];
        for i in cyl.free_coords() {
            let l = lookup(center ^ (1 << i))?;
            if !l.is_finite() {
                return Err(Error::InfeasibleProfile(format!("level {l}")));
            }
            let dir = if center >> i & 1 == 0 { 1.0 } else { -1.0 };
            slopes[i] = (l - base) * dir;
        }
        Ok(Self {
            k: cyl.width(),
            n,
            cylinder: cyl,
            anchor: center,
            anchor_level: base,
            slopes,
            cell,
            tau,
        })
    }

    pub fn level(&self, x: usize) -> f64 {
        self.anchor_level
            + self
                .cylinder
                .free_coords()
                .into_iter()
                .map(|i| self.slopes[i] * ((x >> i & 1) as f64 - (self.anchor >> i & 1) as f64))
                .sum::<f64>()
    }

    /// Largest level over the cylinder.
    pub fn max_level(&self) -> f64 {
        self.anchor_level
            + self
                .cylinder
                .free_coords()
                .into_iter()
                .map(|i| {
                    let a = (self.anchor >> i & 1) as f64;
                    (self.slopes[i] * -a).max(self.slopes[i] * (1.0 - a))
                })
                .sum::<f64>()
    }

    pub fn to_unit(&self) -> HiddenUnit {
        let (k, n) = (self.k, self.n);
        let penalty = self.tau + self.max_level().max(0.0);
        let mut weights = vec![0.0; k + n];
        let mut bias = self.anchor_level;
        let fixed = self.cylinder.fixed_mask();
        for (i, w) in weights.iter_mut().enumerate().take(k) {
            let a = (self.anchor >> i & 1) as f64;
            if fixed >> i & 1 == 1 {
                // penalty * [x_i != z_i] = penalty * (z_i + (1 - 2 z_i) x_i)
                let z = (self.cylinder.fixed_values() >> i & 1) as f64;
                *w = -penalty * (1.0 - 2.0 * z);
                bias -= penalty * z;
            } else {
                *w = self.slopes[i];
                bias -= self.slopes[i] * a;
            }
        }
        for i in 0..n {
            if self.cell.mask >> i & 1 == 1 {
                let z = (self.cell.value >> i & 1) as f64;
                weights[k + i] = -penalty * (1.0 - 2.0 * z);
                bias -= penalty * z;
            }
        }
        HiddenUnit { weights, bias }
    }
}

/// Per-member cell masses of the target, in the same order as the cells.
pub type CellTargets = Vec<(usize, Vec<f64>)>;

/// Cell mass of the target at which one step for cell `ci` should leave the row.
fn fill_fraction(masses: &[f64], ci: usize, tau: f64) -> Result<f64> {
    let cumulative: f64 = masses[..=ci].iter().sum();
    let t = if cumulative > 0.0 {
        masses[ci] / cumulative
    } else {
        0.0
    };
    if !(0.0..=1.0 + 1e-12).contains(&t) {
        return Err(Error::InfeasibleProfile(format!("fill fraction {t}")));
    }
    Ok(t.min(1.0 - (-tau).exp()))
}

/// Exponent level taking the cell mass `exp(log_p)` to `t` under a factor `1 + e^L`.
fn level_for(log_p: f64, t: f64, tau: f64) -> f64 {
    let p = log_p.exp();
    if p >= t {
        return -tau;
    }
    // (1 + E) p / (1 + E p) = t  ⇔  E = (t - p) / (p (1 - t))
    (t - p).ln() - log_p - (1.0 - t).ln()
}

/// Hidden units filling the rows of a star, one per non-start cell.
///
/// `cells[0]` is the start cell; `targets` gives the target mass of each cell
/// for every star member. `table` is updated in place.
pub fn star_fill_units(
    table: &mut LogTable,
    star: &Star,
    targets: &CellTargets,
    cells: &[OutputCell],
    tau: f64,
) -> Result<Vec<HiddenUnit>> {
    let mut units = Vec::with_capacity(cells.len().saturating_sub(1));
    for (ci, &cell) in cells.iter().enumerate().skip(1) {
        let mut levels = Vec::with_capacity(targets.len());
        for (x, masses) in targets {
            let t = fill_fraction(masses, ci, tau)?;
            levels.push((*x, level_for(table.cell_log_mass(*x, cell), t, tau)));
        }
        let unit = SharpStepSpec::on_star(table.n, star, &levels, cell, tau)?.to_unit();
        table.apply_unit(&unit);
        units.push(unit);
    }
    Ok(units)
}

/// Hidden unit pushing every row of `cylinder` into `cell`.
pub fn reset_unit(
    table: &mut LogTable,
    cylinder: &CylinderSet,
    cell: OutputCell,
    tau: f64,
) -> HiddenUnit {
    let worst = cylinder
        .members()
        .iter()
        .map(|x| -table.cell_log_mass(x.index(), cell))
        .fold(0.0f64, f64::max);
    let unit = SharpStepSpec::constant(table.n, *cylinder, tau + worst, cell, tau).to_unit();
    table.apply_unit(&unit);
    unit
}

fn units_to_steps(mut logp: Vec<f64>, units: &[HiddenUnit]) -> Result<Vec<SharingStep>> {
    let mut steps = Vec::with_capacity(units.len());
    for unit in units {
        let step = unit_to_step_log(&logp, unit)?;
        logp = apply_sharing_log(&logp, &step)?;
        steps.push(step);
    }
    Ok(steps)
}

/// Sharing steps taking the rows at the star members to `q_rows`, applied to
/// the current joint `log_joint` (inputs in the low bits). Output states are
/// processed in ascending order with `0` as the start state.
pub fn make_star_fill_steps(
    q_rows: &[(usize, Dist)],
    star: &Star,
    tau: f64,
    log_joint: &[f64],
) -> Result<Vec<SharingStep>> {
    let k = star.cylinder().width();
    let mut table = LogTable::from_joint(log_joint, k);
    let n = table.n;
    let cells: Vec<OutputCell> = (0..1usize << n).map(|y| OutputCell::point(n, y)).collect();
    let members = star.members();
    if q_rows.len() != members.len()
        || members
            .iter()
            .any(|m| !q_rows.iter().any(|(x, _)| *x == m.index()))
    {
        return Err(Error::InfeasibleProfile(
            "targets must cover exactly the star members".into(),
        ));
    }
    let targets: CellTargets = q_rows
        .iter()
        .map(|(x, d)| (*x, d.probs().to_vec()))
        .collect();
    let units = star_fill_units(&mut table, star, &targets, &cells, tau)?;
    units_to_steps(log_joint.to_vec(), &units)
}

/// A step moving the rows of `cylinder` close to `δ_{y_target}`.
pub fn make_reset_step(
    cylinder: &CylinderSet,
    y_target: State,
    tau: f64,
    log_joint: &[f64],
) -> Result<SharingStep> {
    let mut table = LogTable::from_joint(log_joint, cylinder.width());
    if y_target.width() != table.n {
        return Err(Error::WidthMismatch {
            left: table.n,
            right: y_target.width(),
        });
    }
    let cell = OutputCell::point(table.n, y_target.index());
    let unit = reset_unit(&mut table, cylinder, cell, tau);
    unit_to_step_log(log_joint, &unit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bitspace::HammingBall;
    use crate::crbm::CrbmParams;
    use crate::distributions::random_dist_with;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// The defining formula in the linear domain.
    fn mixture_oracle(p: &Dist, lambda: f64, factors: &[(f64, f64)]) -> Vec<f64> {
        let s: Vec<f64> = (0..p.len())
            .map(|v| {
                factors
                    .iter()
                    .enumerate()
                    .map(|(i, &(a, b))| if v >> i & 1 == 1 { b } else { a })
                    .product()
            })
            .collect();
        let z: f64 = (0..p.len()).map(|v| p.get(v) * s[v]).sum();
        (0..p.len())
            .map(|v| lambda * p.get(v) + (1.0 - lambda) * p.get(v) * s[v] / z)
            .collect()
    }

    #[test]
    fn apply_sharing_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = random_dist_with(2, &mut rng).unwrap();
        let step = SharingStep::from_factors(1.0, &[(1.0, 3.0), (2.0, 1.0)]).unwrap();
        assert!(apply_sharing(&p, &step).unwrap().l1_distance(&p).unwrap() < 1e-15);
        let step = SharingStep::new(0.0, vec![0.0, 0.0]).unwrap();
        assert!(apply_sharing(&p, &step).unwrap().l1_distance(&p).unwrap() < 1e-15);

        let u = Dist::uniform(2).unwrap();
        let factors = [(1.0, 3.0), (1.0, 3.0)];
        let step = SharingStep::from_factors(0.5, &factors).unwrap();
        let got = apply_sharing(&u, &step).unwrap();
        let want = mixture_oracle(&u, 0.5, &factors);
        for (v, w) in want.iter().enumerate() {
            assert!((got.get(v) - w).abs() < 1e-15);
        }
        // hand value: s = (1, 3, 3, 9)/16, so p'(11) = 0.5 * 0.25 + 0.5 * 9/16
        assert!((got.get(3) - (0.125 + 0.28125)).abs() < 1e-15);
    }

    #[test]
    fn step_validation() {
        assert!(SharingStep::new(1.5, vec![0.0]).is_err());
        assert!(SharingStep::from_factors(0.5, &[(0.0, 1.0)]).is_err());
        let s = SharingStep::new(0.3, vec![0.2]).unwrap();
        assert!((s.lambda() - 0.3).abs() < 1e-15);
        let (a, b) = s.factors()[0];
        assert!((a + b - 1.0).abs() < 1e-15 && (b / a - 0.2f64.exp()).abs() < 1e-14);
    }

    #[test]
    fn step_to_unit_examples() {
        let p = Dist::uniform(3).unwrap();
        let unit = step_to_hidden_unit(&p, &SharingStep::new(0.5, vec![0.0; 3]).unwrap()).unwrap();
        assert!(unit.weights.iter().all(|&w| w == 0.0));
        assert!(unit.bias.abs() < 1e-15);
        assert_eq!(
            step_to_hidden_unit(&p, &SharingStep::new(0.0, vec![0.0; 3]).unwrap()).unwrap_err(),
            Error::LambdaZero
        );
        assert!(matches!(
            step_to_hidden_unit(&p, &SharingStep::new(1.0, vec![0.0; 3]).unwrap()),
            Err(Error::BiasOutOfRange(_))
        ));
    }

    /// Appends the unit to an RBM representing `p` exactly and evaluates.
    fn eval_after_append(p: &Dist, unit: &HiddenUnit) -> Dist {
        // an RBM with no hidden units represents only products, so carry p via
        // a reference point: compare ratios against the unit-less evaluation
        let width = p.width();
        let base = CrbmParams::zeros(0, width, 0);
        let with = base
            .append_hidden_unit(&unit.weights, &[], unit.bias)
            .unwrap();
        let f = with.eval_joint_rbm().unwrap();
        let g = base.eval_joint_rbm().unwrap();
        let w: Vec<f64> = (0..p.len())
            .map(|v| p.get(v) * f.get(v) / g.get(v))
            .collect();
        Dist::from_weights(width, w).unwrap()
    }

    #[test]
    fn unit_round_trip_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let p = random_dist_with(3, &mut rng).unwrap();
            let lambda = rng.random_range(0.05..=1.0);
            let w: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let step = SharingStep::new(lambda, w).unwrap();
            let want = apply_sharing(&p, &step).unwrap();
            let unit = match step_to_hidden_unit(&p, &step) {
                Ok(u) => u,
                Err(Error::BiasOutOfRange(_)) if lambda == 1.0 => continue,
                Err(e) => panic!("{e}"),
            };
            let got = eval_after_append(&p, &unit);
            assert!(got.l1_distance(&want).unwrap() <= 1e-10);
            let back = unit_to_step_log(&p.log_probs(), &unit).unwrap();
            assert!((back.lambda() - lambda).abs() < 1e-10);
        }
    }

    #[test]
    fn star_profile_is_proportional() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let k = 4;
            let n = 2;
            let center = rng.random_range(0..16usize);
            let fixed = 0b1000usize;
            let cyl = CylinderSet::new(k, fixed, center & fixed).unwrap();
            let star = Star::new(HammingBall::new(State::new(center, k).unwrap()), cyl).unwrap();
            let levels: Vec<(usize, f64)> = star
                .members()
                .iter()
                .map(|x| (x.index(), rng.random_range(-3.0..3.0)))
                .collect();
            let cell = OutputCell::point(n, 2);
            let unit = SharpStepSpec::on_star(n, &star, &levels, cell, 20.0)
                .unwrap()
                .to_unit();
            // s(v) ∝ exp(wᵀv) restricted to star members × {y} ∝ profile
            let (x0, l0) = levels[0];
            for &(x, l) in &levels {
                let ratio =
                    dot_bits(&unit.weights, x | (2 << k)) - dot_bits(&unit.weights, x0 | (2 << k));
                assert!((ratio - (l - l0)).abs() < 1e-9);
                assert!((unit.exponent(x | (2 << k)) - l).abs() < 1e-9);
            }
            // outside the region the exponent is at most -tau
            for v in 0..1usize << (k + n) {
                let (x, y) = (v & 15, v >> k);
                if !(cyl.contains_index(x) && cell.contains(y)) {
                    assert!(unit.exponent(v) <= -20.0 + 1e-9);
                }
            }
        }
    }

    fn near_delta0_joint(k: usize, n: usize, tau: f64) -> Vec<f64> {
        let mut b = CrbmParams::zeros(k, n, 0);
        b.b = vec![-tau; n];
        LogTable::new(k, n, b.log_conditional().unwrap()).to_joint()
    }

    fn rows_of(logp: &[f64], k: usize) -> LogTable {
        LogTable::from_joint(logp, k)
    }

    #[test]
    fn delta_targets_give_no_op_steps() {
        let (k, n) = (2, 2);
        let joint = near_delta0_joint(k, n, 30.0);
        let star = Star::at_smallest(CylinderSet::full(k).unwrap());
        let q: Vec<(usize, Dist)> = star
            .members()
            .iter()
            .map(|x| (x.index(), Dist::point_mass(n, 0).unwrap()))
            .collect();
        let steps = make_star_fill_steps(&q, &star, 30.0, &joint).unwrap();
        assert_eq!(steps.len(), 3);
        let mut cur = joint.clone();
        for s in &steps {
            assert!(s.lambda() > 1.0 - 1e-9);
            cur = apply_sharing_log(&cur, s).unwrap();
        }
        let before = Dist::from_log_weights(k + n, &joint).unwrap();
        let after = Dist::from_log_weights(k + n, &cur).unwrap();
        assert!(before.l1_distance(&after).unwrap() < 1e-9);
    }

    #[test]
    fn single_member_one_bit_formula() {
        let (k, n) = (1, 1);
        let tau = 40.0;
        let joint = near_delta0_joint(k, n, tau);
        let star = Star::at_smallest(CylinderSet::new(1, 1, 0).unwrap());
        assert_eq!(star.len(), 1);
        let q = Dist::new(1, vec![0.35, 0.65]).unwrap();
        let steps = make_star_fill_steps(&[(0, q.clone())], &star, tau, &joint).unwrap();
        assert_eq!(steps.len(), 1);
        let out = rows_of(&apply_sharing_log(&joint, &steps[0]).unwrap(), k);
        assert!((out.row_probs(0)[1] - 0.65).abs() < 1e-9);
        // row x = 1 sits outside the cylinder and keeps its value
        assert!(out.row_probs(1)[1] < 1e-9);
        // the realized mixture weight at x = 0 is 1 - q(1|0): the row becomes
        // λ δ0 + (1 - λ) δ1 up to e^-tau
        let before = rows_of(&joint, k).row_probs(0)[0];
        let after = out.row_probs(0)[0];
        assert!((after / before - (1.0 - 0.65)).abs() < 1e-9);
    }

    fn fill_error(tau: f64, seed: u64) -> f64 {
        let (k, n) = (2, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let joint = near_delta0_joint(k, n, tau);
        let star = Star::at_smallest(CylinderSet::full(k).unwrap());
        let q: Vec<(usize, Dist)> = star
            .members()
            .iter()
            .map(|x| (x.index(), random_dist_with(n, &mut rng).unwrap()))
            .collect();
        let mut cur = joint;
        for s in make_star_fill_steps(&q, &star, tau, &cur).unwrap() {
            cur = apply_sharing_log(&cur, &s).unwrap();
        }
        let rows = rows_of(&cur, k);
        q.iter()
            .map(|(x, d)| {
                rows.row_probs(*x)
                    .iter()
                    .zip(d.probs())
                    .map(|(a, b)| (a - b).abs())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn full_star_fill_reaches_targets() {
        for seed in 0..10 {
            assert!(fill_error(30.0, seed) <= 1e-3);
        }
    }

    #[test]
    fn fill_error_non_increasing_in_tau() {
        for seed in 0..5 {
            let errs: Vec<f64> = [10.0, 20.0, 40.0, 80.0]
                .iter()
                .map(|&t| fill_error(t, seed))
                .collect();
            for w in errs.windows(2) {
                // below ~1e-14 the error is rounding noise
                assert!(w[1] <= w[0].max(1e-13), "{errs:?}");
            }
        }
    }

    #[test]
    fn reset_examples() {
        let (k, n) = (2, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let joint = random_dist_with(k + n, &mut rng).unwrap().log_probs();
        let y0 = State::new(0, n).unwrap();

        let full = CylinderSet::full(k).unwrap();
        let s = make_reset_step(&full, y0, 30.0, &joint).unwrap();
        let rows = rows_of(&apply_sharing_log(&joint, &s).unwrap(), k);
        for x in 0..4 {
            assert!(1.0 - rows.row_probs(x)[0] < 1e-9);
        }

        // C fixes x_1 = 0 (bit 0)
        let c = CylinderSet::new(k, 1, 0).unwrap();
        let s = make_reset_step(&c, y0, 30.0, &joint).unwrap();
        assert!(s.lambda() < 1e-6);
        let before = rows_of(&joint, k);
        let after = rows_of(&apply_sharing_log(&joint, &s).unwrap(), k);
        for x in 0..4 {
            let tv: f64 = if c.contains_index(x) {
                2.0 * (1.0 - after.row_probs(x)[0])
            } else {
                before
                    .row_probs(x)
                    .iter()
                    .zip(after.row_probs(x))
                    .map(|(a, b)| (a - b).abs())
                    .sum()
            };
            assert!(tv <= 1e-3, "x={x} tv={tv}");
        }

        // τ → 0 on an already-reset table barely moves anything
        let start = near_delta0_joint(k, n, 30.0);
        let s = make_reset_step(&full, y0, 1e-6, &start).unwrap();
        let moved = Dist::from_log_weights(k + n, &apply_sharing_log(&start, &s).unwrap()).unwrap();
        let orig = Dist::from_log_weights(k + n, &start).unwrap();
        assert!(moved.l1_distance(&orig).unwrap() < 1e-9);
    }

    proptest! {
        #[test]
        fn sharing_preserves_positivity(seed in any::<u64>(), lambda in 0.0f64..=1.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = random_dist_with(3, &mut rng).unwrap();
            let w: Vec<f64> = (0..3).map(|_| rng.random_range(-5.0..5.0)).collect();
            let out = apply_sharing(&p, &SharingStep::new(lambda, w).unwrap()).unwrap();
            prop_assert!(out.is_strictly_positive());
            prop_assert!((out.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
