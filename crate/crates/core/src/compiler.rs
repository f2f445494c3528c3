//! Compiles target conditional tables into explicit CRBM parameters by
//! sequences of sharing steps along a star packing of the input cube.
//!
//! Every mode follows the same loop. Start from an `m = 0` model whose rows
//! sit in a start cell. For each star, optionally reset the rows of pending
//! cylinders back to the start. Then append one hidden unit per remaining
//! output cell, each moving the star rows toward their target. The whole run is
//! repeated with doubled sharpness `τ` until the tolerance is met.

use serde::{Deserialize, Serialize};

use crate::bitspace::{full_mask, CylinderSet, Star};
use crate::crbm::CrbmParams;
use crate::distributions::{
    kl_conditional, partition_project, tv_row_distance, ConditionalTable, Dist, PartitionModel,
};
use crate::error::{Error, Result};
use crate::packing::{best_depth, build_packing, packing_budget};
use crate::sharing::{reset_unit, star_fill_units, CellTargets, HiddenUnit, LogTable, OutputCell};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompileOptions {
    pub eps: f64,
    /// Packing depth; `None` picks the depth with the smallest budget.
    pub r: Option<usize>,
    pub tau0: f64,
    pub tau_max: f64,
}

impl Default for CompileOptions {
    fn default() -> Self {
        Self {
            eps: 1e-2,
            r: None,
            tau0: 16.0,
            tau_max: 1024.0,
        }
    }
}

impl CompileOptions {
    pub fn with_eps(eps: f64) -> Self {
        Self {
            eps,
            ..Self::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompileMode {
    Universal,
    SupportPoints,
    CommonSupport,
    Partition,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompileReport {
    pub mode: CompileMode,
    pub k: usize,
    pub n: usize,
    pub r: Option<usize>,
    pub eps: f64,
    pub hidden_units_used: usize,
    pub resets_used: usize,
    pub star_steps_used: usize,
    /// Units per star when every star uses the same number.
    pub steps_per_star: Option<usize>,
    pub fill_units_used: usize,
    pub achieved_tv: f64,
    /// Row distance between the given target and the floored table actually compiled;
    /// the compiler spends the rest of `eps` on the floored table.
    pub clamp_tv: f64,
    pub tau_final: f64,
    pub budget_bound: u64,
    pub within_budget: bool,
    /// After each star: the largest row distance over all rows processed so far.
    pub phase_errors: Vec<f64>,
}

#[derive(Clone, Copy, Debug)]
enum Start {
    /// Rows concentrated on one output state.
    Point(usize),
    /// Rows uniform on the block whose first `l` bits are zero.
    LowBits(usize),
}

impl Start {
    fn bias(self, n: usize, tau: f64) -> Vec<f64> {
        match self {
            Start::Point(y) => (0..n)
                .map(|i| if y >> i & 1 == 1 { tau } else { -tau })
                .collect(),
            Start::LowBits(l) => (0..n).map(|i| if i < l { -tau } else { 0.0 }).collect(),
        }
    }

    fn cell(self, n: usize) -> OutputCell {
        match self {
            Start::Point(y) => OutputCell::point(n, y),
            Start::LowBits(l) => OutputCell {
                mask: full_mask(l),
                value: 0,
            },
        }
    }
}

enum Phase {
    Reset(CylinderSet),
    Fill {
        star: Star,
        cells: Vec<OutputCell>,
        targets: CellTargets,
    },
}

struct Plan {
    k: usize,
    n: usize,
    start: Start,
    phases: Vec<Phase>,
}

struct Run {
    params: CrbmParams,
    resets_used: usize,
    fill_units: usize,
    stars: usize,
    achieved_tv: f64,
    tau: f64,
    phase_errors: Vec<f64>,
}

fn row_tv(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).abs()).sum()
}

fn run_once(plan: &Plan, target: &ConditionalTable, tau: f64, phase_tol: f64) -> Result<Run> {
    let (k, n) = (plan.k, plan.n);
    let mut params = CrbmParams::zeros(k, n, 0);
    params.b = plan.start.bias(n, tau);
    let mut table = LogTable::new(k, n, params.log_conditional()?);
    let start_row = table.row_probs(0);
    let start_cell = plan.start.cell(n);
    let mut units: Vec<HiddenUnit> = Vec::new();
    let mut resets_used = 0;
    let mut fill_units = 0;
    let mut stars = 0;
    let mut processed: Vec<usize> = Vec::new();
    let mut phase_errors = Vec::new();
    for phase in &plan.phases {
        match phase {
            Phase::Reset(cyl) => {
                let needed = cyl
                    .members()
                    .iter()
                    .any(|x| row_tv(&table.row_probs(x.index()), &start_row) > phase_tol);
                if needed {
                    units.push(reset_unit(&mut table, cyl, start_cell, tau));
                    resets_used += 1;
                }
            }
            Phase::Fill {
                star,
                cells,
                targets,
            } => {
                let new = star_fill_units(&mut table, star, targets, cells, tau)?;
                fill_units += new.len();
                units.extend(new);
                stars += 1;
                processed.extend(star.members().iter().map(|x| x.index()));
                let worst = processed
                    .iter()
                    .map(|&x| row_tv(&table.row_probs(x), target.row(x).probs()))
                    .fold(0.0, f64::max);
                phase_errors.push(worst);
            }
        }
    }
    for unit in &units {
        params = params.append_visible_unit(&unit.weights, unit.bias)?;
    }
    let achieved_tv = tv_row_distance(&params.eval_conditional()?, target)?;
    Ok(Run {
        params,
        resets_used,
        fill_units,
        stars,
        achieved_tv,
        tau,
        phase_errors,
    })
}

/// Runs on the clamped table with what is left of `eps`, then measures
/// against the caller's table.
fn run_clamped(
    plan: &Plan,
    target: &ConditionalTable,
    clamped: &ConditionalTable,
    clamp_tv: f64,
    opts: &CompileOptions,
) -> Result<Run> {
    let inner = CompileOptions {
        eps: opts.eps - clamp_tv,
        ..*opts
    };
    let mut run = run_plan(plan, clamped, &inner).map_err(|e| match e {
        Error::BudgetExceeded { tau_max, .. } => Error::BudgetExceeded {
            eps: opts.eps,
            tau_max,
        },
        e => e,
    })?;
    run.achieved_tv = tv_row_distance(&run.params.eval_conditional()?, target)?;
    Ok(run)
}

fn run_plan(plan: &Plan, target: &ConditionalTable, opts: &CompileOptions) -> Result<Run> {
    let phases = plan.phases.len().max(1);
    let phase_tol = opts.eps / (2.0 * phases as f64);
    let mut tau = opts.tau0;
    while tau <= opts.tau_max {
        let run = run_once(plan, target, tau, phase_tol)?;
        if run.achieved_tv <= opts.eps {
            return Ok(run);
        }
        tau *= 2.0;
    }
    Err(Error::BudgetExceeded {
        eps: opts.eps,
        tau_max: opts.tau_max,
    })
}

/// Phases along the depth-`r` packing with the same cells for every star.
fn packing_phases(
    k: usize,
    r: usize,
    cells: &[OutputCell],
    masses: &dyn Fn(usize) -> Vec<f64>,
) -> Result<Vec<Phase>> {
    let seq = build_packing(k, r)?;
    let mut resets = seq.resets.iter().peekable();
    let mut phases = Vec::new();
    for (pos, star) in seq.stars.iter().enumerate() {
        while let Some((_, cyl)) = resets.next_if(|(p, _)| *p == pos) {
            phases.push(Phase::Reset(*cyl));
        }
        let targets = star
            .members()
            .iter()
            .map(|x| (x.index(), masses(x.index())))
            .collect();
        phases.push(Phase::Fill {
            star: *star,
            cells: cells.to_vec(),
            targets,
        });
    }
    Ok(phases)
}

fn choose_depth(k: usize, cells: usize, r: Option<usize>) -> Result<(usize, u64)> {
    let cells = cells as u128;
    let (r, budget) = match r {
        Some(r) => {
            let needed = crate::packing::s_value(r as u64) as usize;
            let b = packing_budget(k, r, cells).ok_or(Error::InfeasibleDepth { k, r, needed })?;
            (r, b)
        }
        None => best_depth(k, cells).ok_or(Error::InfeasibleDepth { k, r: 1, needed: 1 })?,
    };
    Ok((r, u64::try_from(budget).unwrap_or(u64::MAX)))
}

#[allow(clippy::too_many_arguments)]
fn report(
    mode: CompileMode,
    target: &ConditionalTable,
    r: Option<usize>,
    opts: &CompileOptions,
    run: &Run,
    steps_per_star: Option<usize>,
    clamp_tv: f64,
    budget: u64,
) -> CompileReport {
    let used = run.params.m;
    CompileReport {
        mode,
        k: target.k(),
        n: target.n(),
        r,
        eps: opts.eps,
        hidden_units_used: used,
        resets_used: run.resets_used,
        star_steps_used: run.stars,
        steps_per_star,
        fill_units_used: run.fill_units,
        achieved_tv: run.achieved_tv,
        clamp_tv,
        tau_final: run.tau,
        budget_bound: budget,
        within_budget: (used as u64) <= budget,
        phase_errors: run.phase_errors.clone(),
    }
}

fn clamp(target: &ConditionalTable, eps: f64) -> Result<(ConditionalTable, f64)> {
    let floor = eps / (1u64 << (target.n() + 2)) as f64;
    let clamped = target.clamp_floor(floor)?;
    let dist = tv_row_distance(target, &clamped)?;
    Ok((clamped, dist))
}

/// Universal compilation of an arbitrary table (entries are floored first).
pub fn compile_universal(
    target: &ConditionalTable,
    opts: &CompileOptions,
) -> Result<(CrbmParams, CompileReport)> {
    let (k, n) = (target.k(), target.n());
    let (clamped, clamp_tv) = clamp(target, opts.eps)?;
    let ncells = 1usize << n;
    let (r, budget) = choose_depth(k, ncells - 1, opts.r)?;
    let cells: Vec<OutputCell> = (0..ncells).map(|y| OutputCell::point(n, y)).collect();
    let masses = |x: usize| clamped.row(x).probs().to_vec();
    let plan = Plan {
        k,
        n,
        start: Start::Point(0),
        phases: packing_phases(k, r, &cells, &masses)?,
    };
    let run = run_clamped(&plan, target, &clamped, clamp_tv, opts)?;
    let rep = report(
        CompileMode::Universal,
        target,
        Some(r),
        opts,
        &run,
        Some(ncells - 1),
        clamp_tv,
        budget,
    );
    Ok((run.params, rep))
}

/// Compiles a table whose rows all share the support `T`, with `|T| - 1` units per star.
pub fn compile_common_support(
    target: &ConditionalTable,
    opts: &CompileOptions,
) -> Result<(CrbmParams, CompileReport)> {
    let (k, n) = (target.k(), target.n());
    let support: Vec<usize> = (0..1usize << n)
        .filter(|&y| target.prob(0, y) > 0.0)
        .collect();
    for x in 0..1usize << k {
        let row: Vec<usize> = (0..1usize << n)
            .filter(|&y| target.prob(x, y) > 0.0)
            .collect();
        if row != support {
            return Err(Error::SupportsDiffer);
        }
    }
    let (r, budget) = choose_depth(k, support.len() - 1, opts.r)?;
    let cells: Vec<OutputCell> = support.iter().map(|&y| OutputCell::point(n, y)).collect();
    let masses = |x: usize| support.iter().map(|&y| target.prob(x, y)).collect();
    let plan = Plan {
        k,
        n,
        start: Start::Point(support[0]),
        phases: packing_phases(k, r, &cells, &masses)?,
    };
    let run = run_plan(&plan, target, opts)?;
    let rep = report(
        CompileMode::CommonSupport,
        target,
        Some(r),
        opts,
        &run,
        Some(support.len() - 1),
        0.0,
        budget,
    );
    Ok((run.params, rep))
}

/// Compiles a table with at most `2^k + d` non-zero entries using point-mass
/// steps, one per non-zero entry beyond a shared start state.
pub fn compile_support_points(
    target: &ConditionalTable,
    d: usize,
    opts: &CompileOptions,
) -> Result<(CrbmParams, CompileReport)> {
    let (k, n) = (target.k(), target.n());
    let limit = (1usize << k) + d;
    let support = target.nonzero_count();
    if support > limit {
        return Err(Error::SupportTooLarge { support, limit });
    }
    // start state: the output present in the most rows (ties to the smallest)
    let ny = 1usize << n;
    let start = (0..ny)
        .max_by_key(|&y| {
            let rows = (0..1usize << k)
                .filter(|&x| target.prob(x, y) > 0.0)
                .count();
            (rows, std::cmp::Reverse(y))
        })
        .expect("non-empty output space");
    let mut phases = Vec::new();
    for x in 0..1usize << k {
        let mut ys = vec![start];
        ys.extend((0..ny).filter(|&y| y != start && target.prob(x, y) > 0.0));
        let cells = ys.iter().map(|&y| OutputCell::point(n, y)).collect();
        let masses = ys.iter().map(|&y| target.prob(x, y)).collect();
        let star = Star::at_smallest(CylinderSet::point(crate::bitspace::State::new(x, k)?));
        phases.push(Phase::Fill {
            star,
            cells,
            targets: vec![(x, masses)],
        });
    }
    let plan = Plan {
        k,
        n,
        start: Start::Point(start),
        phases,
    };
    let run = run_plan(&plan, target, opts)?;
    let budget = (limit - 1) as u64;
    let rep = report(
        CompileMode::SupportPoints,
        target,
        None,
        opts,
        &run,
        None,
        0.0,
        budget,
    );
    Ok((run.params, rep))
}

/// Compiles a table whose rows are constant on the blocks fixed by the first
/// `l` output bits, with `2^l - 1` units per star.
pub fn compile_partition(
    target: &ConditionalTable,
    l: usize,
    opts: &CompileOptions,
) -> Result<(CrbmParams, CompileReport)> {
    let (k, n) = (target.k(), target.n());
    let model = PartitionModel::cylinders(n, l)?;
    for (x, row) in target.rows().iter().enumerate() {
        let scale = row.probs().iter().fold(0.0f64, |a, &b| a.max(b));
        if !model.is_block_constant(row, 1e-12 * scale.max(1e-300)) {
            return Err(Error::NotBlockConstant(x));
        }
    }
    let (clamped, clamp_tv) = clamp(target, opts.eps)?;
    let ncells = 1usize << l;
    let (r, budget) = choose_depth(k, ncells - 1, opts.r)?;
    let low = full_mask(l);
    let cells: Vec<OutputCell> = (0..ncells)
        .map(|z| OutputCell {
            mask: low,
            value: z,
        })
        .collect();
    let masses = |x: usize| {
        let mut m = vec![0.0; ncells];
        for (y, p) in clamped.row(x).probs().iter().enumerate() {
            m[y & low] += p;
        }
        m
    };
    let plan = Plan {
        k,
        n,
        start: Start::LowBits(l),
        phases: packing_phases(k, r, &cells, &masses)?,
    };
    let run = run_clamped(&plan, target, &clamped, clamp_tv, opts)?;
    let rep = report(
        CompileMode::Partition,
        target,
        Some(r),
        opts,
        &run,
        Some(ncells - 1),
        clamp_tv,
        budget,
    );
    Ok((run.params, rep))
}

/// Largest `l` (and a depth realizing it) whose partition budget fits in `m`.
pub fn feasible_partition_level(k: usize, n: usize, m: usize) -> Option<(usize, usize)> {
    (1..=n).rev().find_map(|l| {
        let cells = (1u128 << l) - 1;
        let mut best: Option<(usize, u128)> = None;
        let mut r = 1;
        while crate::packing::s_value(r as u64) as usize <= k {
            if let Some(b) = packing_budget(k, r, cells) {
                if b <= m as u128 && best.is_none_or(|(_, v)| b < v) {
                    best = Some((r, b));
                }
            }
            r += 1;
        }
        best.map(|(r, _)| (l, r))
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessReport {
    pub l: usize,
    pub r: Option<usize>,
    pub m_budget: usize,
    pub hidden_units_used: usize,
    /// Average row divergence in bits from the target to the compiled model.
    pub divergence: f64,
    /// `n - l`.
    pub bound: f64,
}

/// Compiles the projection of `target` onto the finest cylinder partition the
/// budget allows and reports the divergence actually achieved.
pub fn divergence_witness(
    target: &ConditionalTable,
    m_budget: usize,
    opts: &CompileOptions,
) -> Result<(CrbmParams, WitnessReport)> {
    let (k, n) = (target.k(), target.n());
    let (params, l, r) = match feasible_partition_level(k, n, m_budget) {
        Some((l, r)) => {
            let model = PartitionModel::cylinders(n, l)?;
            let rows = target
                .rows()
                .iter()
                .map(|row| partition_project(row, &model).map(|(p, _)| p))
                .collect::<Result<Vec<Dist>>>()?;
            let projected = ConditionalTable::new(k, n, rows)?;
            let opts = CompileOptions {
                r: Some(r),
                ..*opts
            };
            let (params, _) = compile_partition(&projected, l, &opts)?;
            (params, l, Some(r))
        }
        None => (CrbmParams::zeros(k, n, 0), 0, None),
    };
    let divergence = kl_conditional(target, &params.eval_conditional()?)?;
    let rep = WitnessReport {
        l,
        r,
        m_budget,
        hidden_units_used: params.m,
        divergence,
        bound: (n - l) as f64,
    };
    Ok((params, rep))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{random_conditional, random_dist_with};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn check(params: &CrbmParams, rep: &CompileReport, target: &ConditionalTable, eps: f64) {
        let got = params.eval_conditional().unwrap();
        assert!(tv_row_distance(&got, target).unwrap() <= eps + 1e-12);
        assert!(rep.achieved_tv <= eps);
        assert_eq!(rep.hidden_units_used, rep.fill_units_used + rep.resets_used);
        if let Some(s) = rep.steps_per_star {
            assert_eq!(rep.fill_units_used, s * rep.star_steps_used);
        }
    }

    #[test]
    fn uniform_target() {
        for (k, n) in [(1, 1), (2, 2), (3, 1)] {
            let t = ConditionalTable::uniform(k, n).unwrap();
            let (p, rep) = compile_universal(&t, &CompileOptions::default()).unwrap();
            check(&p, &rep, &t, 1e-2);
            assert!(rep.within_budget);
        }
    }

    #[test]
    fn one_input_one_output() {
        for seed in 0..5 {
            let t = random_conditional(1, 1, seed).unwrap();
            let (p, rep) = compile_universal(
                &t,
                &CompileOptions {
                    r: Some(1),
                    ..Default::default()
                },
            )
            .unwrap();
            check(&p, &rep, &t, 1e-2);
            assert_eq!(rep.budget_bound, 1);
            assert!(rep.hidden_units_used <= 1);
        }
    }

    #[test]
    fn three_inputs_depth_two() {
        for seed in 0..5 {
            let t = random_conditional(3, 1, seed).unwrap();
            let opts = CompileOptions {
                r: Some(2),
                ..Default::default()
            };
            let (p, rep) = compile_universal(&t, &opts).unwrap();
            check(&p, &rep, &t, 1e-2);
            assert_eq!(rep.budget_bound, 4);
            assert!(rep.hidden_units_used <= 4);
            assert_eq!(rep.star_steps_used, 3);
        }
    }

    #[test]
    fn processed_rows_stay_close() {
        let t = random_conditional(3, 2, 9).unwrap();
        let (_, rep) = compile_universal(
            &t,
            &CompileOptions {
                r: Some(2),
                ..Default::default()
            },
        )
        .unwrap();
        let phases = rep.phase_errors.len() as f64;
        assert!(rep.phase_errors.iter().all(|&e| e <= 1e-2));
        assert!(phases >= 3.0);
    }

    #[test]
    fn larger_eps_never_uses_more_units() {
        let t = random_conditional(3, 2, 4).unwrap();
        let mut last = usize::MAX;
        for eps in [1e-4, 1e-3, 1e-2, 1e-1] {
            let (_, rep) = compile_universal(
                &t,
                &CompileOptions {
                    r: Some(2),
                    ..CompileOptions::with_eps(eps)
                },
            )
            .unwrap();
            assert!(rep.hidden_units_used <= last);
            last = rep.hidden_units_used;
        }
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let t = random_conditional(2, 2, 1).unwrap();
        let opts = CompileOptions {
            eps: 1e-300,
            tau_max: 32.0,
            ..Default::default()
        };
        assert!(matches!(
            compile_universal(&t, &opts),
            Err(Error::BudgetExceeded { .. })
        ));
        let opts = CompileOptions {
            r: Some(2),
            ..Default::default()
        };
        assert!(matches!(
            compile_universal(&t, &opts),
            Err(Error::InfeasibleDepth { .. })
        ));
    }

    #[test]
    fn support_points_examples() {
        let det = ConditionalTable::deterministic(1, 1, &[1, 0]).unwrap();
        let (p, rep) = compile_support_points(&det, 0, &CompileOptions::default()).unwrap();
        check(&p, &rep, &det, 1e-2);
        assert!(rep.hidden_units_used <= 1);

        let t = ConditionalTable::from_rows(
            1,
            2,
            vec![vec![0.3, 0.0, 0.7, 0.0], vec![0.0, 0.0, 1.0, 0.0]],
        )
        .unwrap();
        let (p, rep) = compile_support_points(&t, 1, &CompileOptions::default()).unwrap();
        check(&p, &rep, &t, 1e-2);
        assert!(rep.hidden_units_used <= 2);

        let full = random_conditional(1, 2, 3).unwrap();
        assert!(matches!(
            compile_support_points(&full, 0, &CompileOptions::default()),
            Err(Error::SupportTooLarge {
                support: 8,
                limit: 2
            })
        ));
        let (p, rep) = compile_support_points(&full, 6, &CompileOptions::default()).unwrap();
        check(&p, &rep, &full, 1e-2);
        assert!(rep.hidden_units_used <= 7);
    }

    fn common_target(k: usize, n: usize, support: &[usize], seed: u64) -> ConditionalTable {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = (0..1usize << k)
            .map(|_| {
                let w = random_dist_with(support.len().trailing_zeros() as usize + 2, &mut rng)
                    .unwrap();
                let mut row = vec![0.0; 1 << n];
                for (i, &y) in support.iter().enumerate() {
                    row[y] = w.get(i) + 0.05;
                }
                Dist::from_weights(n, row).unwrap()
            })
            .collect();
        ConditionalTable::new(k, n, rows).unwrap()
    }

    #[test]
    fn common_support_examples() {
        let t = ConditionalTable::deterministic(2, 2, &[0, 0, 0, 0]).unwrap();
        let (p, rep) = compile_common_support(&t, &CompileOptions::default()).unwrap();
        check(&p, &rep, &t, 1e-2);
        assert_eq!(rep.fill_units_used, 0);

        let t = common_target(2, 2, &[1, 2], 5);
        let opts = CompileOptions {
            r: Some(1),
            ..Default::default()
        };
        let (p, rep) = compile_common_support(&t, &opts).unwrap();
        check(&p, &rep, &t, 1e-2);
        assert_eq!(rep.budget_bound, 2);
        assert!(rep.hidden_units_used <= 2);

        let t = common_target(1, 3, &[0, 3, 6], 6);
        let (p, rep) = compile_common_support(&t, &opts).unwrap();
        check(&p, &rep, &t, 1e-2);
        assert_eq!(rep.budget_bound, 2);

        let bad = ConditionalTable::deterministic(1, 1, &[0, 1]).unwrap();
        assert_eq!(
            compile_common_support(&bad, &opts).unwrap_err(),
            Error::SupportsDiffer
        );
    }

    fn block_constant(k: usize, n: usize, l: usize, seed: u64) -> ConditionalTable {
        let model = PartitionModel::cylinders(n, l).unwrap();
        let t = random_conditional(k, n, seed).unwrap();
        let rows = t
            .rows()
            .iter()
            .map(|r| partition_project(r, &model).unwrap().0)
            .collect();
        ConditionalTable::new(k, n, rows).unwrap()
    }

    #[test]
    fn partition_examples() {
        let t = block_constant(1, 2, 1, 3);
        let opts = CompileOptions {
            r: Some(1),
            ..Default::default()
        };
        let (p, rep) = compile_partition(&t, 1, &opts).unwrap();
        check(&p, &rep, &t, 1e-2);
        assert_eq!(rep.budget_bound, 1);
        assert!(rep.hidden_units_used <= 1);

        let u = ConditionalTable::uniform(2, 2).unwrap();
        let (p, rep) = compile_partition(&u, 0, &opts).unwrap();
        assert_eq!(p.m, 0);
        check(&p, &rep, &u, 1e-2);

        let t = random_conditional(2, 2, 8).unwrap();
        let (pa, ra) = compile_partition(&t, 2, &opts).unwrap();
        let (pb, rb) = compile_universal(&t, &opts).unwrap();
        assert_eq!(ra.hidden_units_used, rb.hidden_units_used);
        let d = tv_row_distance(
            &pa.eval_conditional().unwrap(),
            &pb.eval_conditional().unwrap(),
        )
        .unwrap();
        assert!(d < 1e-9);

        assert_eq!(
            compile_partition(&t, 1, &opts).unwrap_err(),
            Error::NotBlockConstant(0)
        );
    }

    #[test]
    fn witness_examples() {
        for seed in 0..5 {
            let t = random_conditional(1, 2, seed).unwrap();
            let (p, rep) = divergence_witness(&t, 1, &CompileOptions::with_eps(1e-3)).unwrap();
            assert_eq!(rep.l, 1);
            assert!(p.m <= 1);
            assert!(rep.divergence <= 1.0 + 0.05);

            let (_, rep) = divergence_witness(&t, 3, &CompileOptions::with_eps(1e-3)).unwrap();
            assert_eq!(rep.l, 2);
            assert!(rep.divergence <= 0.05);
        }
        let t = block_constant(1, 2, 1, 11);
        let (_, rep) = divergence_witness(&t, 1, &CompileOptions::with_eps(1e-3)).unwrap();
        assert!(rep.divergence <= 0.05);
        let (p, rep) = divergence_witness(&t, 0, &CompileOptions::default()).unwrap();
        assert_eq!((p.m, rep.l), (0, 0));
        assert!(rep.divergence <= 2.0);
    }
}
