//! Budget-coupled incentive optimization: per-participant spend-to-loss
//! frontiers from beam search, combined by a multiple-choice knapsack.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::incentives::types::{
    BudgetLedger, IncentivePlan, LossFunction, PlanningInput, RewardGrid,
};
use crate::mip::incentive::state_at;
use crate::model::boxes::Boxes;
use crate::model::plan::PlanCoefficients;
use crate::model::rollout::{ce_week, check_length, rollout_ce};
use crate::model::state::{MotivationalState, PhysicalState, Rewards, DAYS};

pub const STUDY_WEEKS: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    /// Knapsack spend step in dollars; every grid level must be a multiple.
    pub spend_step: f64,
    /// Sequences kept per spend level between weeks.
    pub beam_width: usize,
    /// Planning ends after this many weeks from week 0.
    pub horizon: usize,
    /// Zero-reward weeks simulated to rank sequences when a spend level
    /// overflows the beam; `None` runs to the horizon.
    pub lookahead: Option<usize>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            spend_step: 5.0,
            beam_width: 64,
            horizon: STUDY_WEEKS,
            lookahead: None,
        }
    }
}

/// Best loss for each spend cap `S = k * spend_step`, nonincreasing in `S`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frontier {
    pub spend_step: f64,
    pub loss: Vec<f64>,
    /// Schedule achieving `loss[k]`; its spend is at most `k * spend_step`.
    pub schedules: Vec<Vec<Rewards>>,
    pub spend_units: Vec<u32>,
}

/// Grid levels as whole spend steps.
fn grid_units(grid: &RewardGrid, step: f64) -> Result<Vec<u32>> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(invalid("spend_step", "must be positive"));
    }
    grid.levels()
        .iter()
        .map(|&v| {
            let k = (v / step).round();
            if (k * step - v).abs() > 1e-9 * step.max(1.0) {
                Err(invalid(
                    "spend_step",
                    format!("{step} does not divide grid level {v}"),
                ))
            } else {
                Ok(k as u32)
            }
        })
        .collect()
}

/// Sum of certainty-equivalent losses for full reward sequences from week 0.
pub fn eval_psi(
    inputs: &[PlanningInput],
    sequences: &[Vec<Rewards>],
    loss: &LossFunction,
    horizon: usize,
    boxes: &Boxes,
) -> Result<f64> {
    check_length("sequences", inputs.len(), sequences.len())?;
    loss.validate()?;
    let mut total = 0.0;
    for (input, seq) in inputs.iter().zip(sequences) {
        check_length("reward sequence", horizon, seq.len())?;
        let traj = rollout_ce(
            &input.estimate.theta0,
            &input.estimate.initial_phys(),
            &input.traits,
            boxes,
            seq,
        );
        let end = traj.final_weight().unwrap_or(input.estimate.w00);
        total += loss.eval(end, input.estimate.w00);
    }
    Ok(total)
}

struct Planner<'a> {
    input: &'a PlanningInput,
    loss: &'a LossFunction,
    boxes: &'a Boxes,
    coef: PlanCoefficients,
    weeks: usize,
}

impl Planner<'_> {
    fn step(
        &self,
        phys: &PhysicalState,
        theta: &MotivationalState,
        r: Rewards,
    ) -> (PhysicalState, MotivationalState, f64) {
        let (p, th, w) = ce_week(&self.coef, phys, theta, &self.input.traits, self.boxes, r);
        (p, th, w[DAYS - 1])
    }

    /// Ranking key after `done` weeks: loss and weight once nothing more is
    /// paid, or only the weight when the lookahead stops short.
    fn rank_key(
        &self,
        phys: &PhysicalState,
        theta: &MotivationalState,
        done: usize,
        last: f64,
        lookahead: Option<usize>,
    ) -> (f64, f64) {
        let left = self.weeks - done;
        let steps = lookahead.map_or(left, |l| l.min(left));
        let (mut p, mut th, mut w) = (*phys, *theta, last);
        for _ in 0..steps {
            let next = self.step(&p, &th, Rewards::ZERO);
            (p, th, w) = next;
        }
        let loss = if steps == left {
            self.loss.eval(w, self.input.estimate.w00)
        } else {
            0.0
        };
        (loss, w)
    }
}

#[derive(Clone, Copy)]
struct Node {
    units: u32,
    phys: PhysicalState,
    theta: MotivationalState,
    last: f64,
    /// Index into the choice arena.
    trail: usize,
}

/// Eligible `(weight, calorie)` pairs with their spend in steps.
fn pairs(input: &PlanningInput, grid: &RewardGrid, units: &[u32]) -> Vec<(Rewards, u32)> {
    let levels = grid.levels();
    let mut out = Vec::new();
    for (i, &w) in levels.iter().enumerate() {
        for (j, &c) in levels.iter().enumerate() {
            let r = Rewards::new(w, c);
            if input.eligibility.allows(r) {
                out.push((r, units[i] + units[j]));
            }
        }
    }
    out
}

/// Spend-to-loss frontier for one participant up to `max_units` steps.
pub fn participant_frontier(
    input: &PlanningInput,
    loss: &LossFunction,
    grid: &RewardGrid,
    max_units: u32,
    config: &OptimizerConfig,
    boxes: &Boxes,
) -> Result<Frontier> {
    let units = grid_units(grid, config.spend_step)?;
    let start = input.history.len();
    if start > config.horizon {
        return Err(invalid(
            "history",
            format!("{start} weeks exceeds horizon {}", config.horizon),
        ));
    }
    let planner = Planner {
        input,
        loss,
        boxes,
        coef: PlanCoefficients::new(&input.traits),
        weeks: config.horizon - start,
    };
    let (phys0, theta0) = state_at(input, boxes);
    let choices = pairs(input, grid, &units);
    let width = config.beam_width.max(1);
    // arena of (parent, choice) links; index 0 is the root
    let mut arena: Vec<(usize, usize)> = vec![(usize::MAX, usize::MAX)];
    let start_weight = phys0.w;
    let mut beam = vec![Node {
        units: 0,
        phys: phys0,
        theta: theta0,
        last: start_weight,
        trail: 0,
    }];
    for week in 0..planner.weeks {
        let mut buckets: Vec<Vec<Node>> = vec![Vec::new(); max_units as usize + 1];
        let final_week = week + 1 == planner.weeks;
        // a final-week reward cannot move the final weight
        let offered = if final_week {
            &choices[..1]
        } else {
            &choices[..]
        };
        for node in &beam {
            for (k, &(r, cost)) in offered.iter().enumerate() {
                let spent = node.units + cost;
                if spent > max_units {
                    continue;
                }
                let (phys, theta, last) = planner.step(&node.phys, &node.theta, r);
                arena.push((node.trail, k));
                buckets[spent as usize].push(Node {
                    units: spent,
                    phys,
                    theta,
                    last,
                    trail: arena.len() - 1,
                });
            }
        }
        beam.clear();
        for mut bucket in buckets {
            if bucket.len() > width || final_week {
                let mut keyed: Vec<((f64, f64), Node)> = bucket
                    .drain(..)
                    .map(|n| {
                        (
                            planner.rank_key(&n.phys, &n.theta, week + 1, n.last, config.lookahead),
                            n,
                        )
                    })
                    .collect();
                // stable: equal keys keep generation order
                keyed.sort_by(|a, b| a.0 .0.total_cmp(&b.0 .0).then(a.0 .1.total_cmp(&b.0 .1)));
                let keep = if final_week { 1 } else { width };
                bucket = keyed.into_iter().take(keep).map(|(_, n)| n).collect();
            }
            beam.extend(bucket);
        }
    }
    // exact loss per spend level, then the running minimum over caps
    let mut best: Vec<Option<(f64, usize, u32)>> = vec![None; max_units as usize + 1];
    if planner.weeks == 0 {
        best[0] = Some((loss.eval(start_weight, input.estimate.w00), 0, 0));
    }
    for n in &beam {
        let l = loss.eval(n.last, input.estimate.w00);
        let slot = &mut best[n.units as usize];
        if slot.is_none_or(|(b, _, _)| l < b) {
            *slot = Some((l, n.trail, n.units));
        }
    }
    let schedule_of = |mut trail: usize| {
        let mut seq = Vec::with_capacity(planner.weeks);
        while trail != 0 {
            let (parent, k) = arena[trail];
            seq.push(choices[k].0);
            trail = parent;
        }
        seq.reverse();
        seq
    };
    let mut frontier = Frontier {
        spend_step: config.spend_step,
        loss: Vec::new(),
        schedules: Vec::new(),
        spend_units: Vec::new(),
    };
    let mut running: Option<(f64, usize, u32)> = None;
    for slot in best {
        if let Some(cand) = slot {
            if running.is_none_or(|(b, _, _)| cand.0 < b) {
                running = Some(cand);
            }
        }
        let (l, trail, units) =
            running.ok_or_else(|| Error::Infeasible("zero-spend schedule missing".into()))?;
        frontier.loss.push(l);
        frontier.schedules.push(schedule_of(trail));
        frontier.spend_units.push(units);
    }
    Ok(frontier)
}

/// Multiple-choice knapsack over frontiers: the cap chosen for each
/// participant, minimizing total loss within `budget_units`.
pub fn allocate(frontiers: &[Frontier], budget_units: u32) -> Vec<usize> {
    let cap = budget_units as usize;
    let n = frontiers.len();
    // table[u][b]: best loss for participants u.. with b units left
    let mut table = vec![vec![0.0; cap + 1]; n + 1];
    let mut choice = vec![vec![0usize; cap + 1]; n];
    for u in (0..n).rev() {
        let f = &frontiers[u];
        for b in 0..=cap {
            let mut best = f64::INFINITY;
            let mut arg = 0;
            for k in 0..f.loss.len().min(b + 1) {
                // only caps where the frontier improves are worth their units
                if k > 0 && f.loss[k] >= f.loss[k - 1] {
                    continue;
                }
                let used = f.spend_units[k] as usize;
                let v = f.loss[k] + table[u + 1][b - used];
                if v < best {
                    best = v;
                    arg = k;
                }
            }
            table[u][b] = best;
            choice[u][b] = arg;
        }
    }
    let mut left = cap;
    let mut out = Vec::with_capacity(n);
    for (u, f) in frontiers.iter().enumerate() {
        let k = choice[u][left];
        out.push(k);
        left -= f.spend_units[k] as usize;
    }
    out
}

fn validate_inputs(
    inputs: &[PlanningInput],
    loss: &LossFunction,
    grid: &RewardGrid,
    boxes: &Boxes,
) -> Result<usize> {
    loss.validate()?;
    grid.validate(boxes)?;
    let start = inputs.first().map_or(0, |i| i.history.len());
    if inputs.iter().any(|i| i.history.len() != start) {
        return Err(invalid(
            "history",
            "all participants must share the planning week",
        ));
    }
    Ok(start)
}

fn assemble(
    inputs: &[PlanningInput],
    schedules: Vec<Vec<Rewards>>,
    loss: &LossFunction,
    horizon: usize,
    boxes: &Boxes,
    start: usize,
) -> Result<IncentivePlan> {
    let full: Vec<Vec<Rewards>> = inputs
        .iter()
        .zip(&schedules)
        .map(|(i, s)| i.history.iter().chain(s).copied().collect())
        .collect();
    let value = eval_psi(inputs, &full, loss, horizon, boxes)?;
    let total_spend = schedules.iter().flatten().map(Rewards::total).sum();
    Ok(IncentivePlan {
        start_week: start,
        schedules,
        total_spend,
        loss: value,
    })
}

/// Plan rewards for the weeks after each participant's history.
pub fn optimize_incentives(
    inputs: &[PlanningInput],
    ledger: &BudgetLedger,
    loss: &LossFunction,
    grid: &RewardGrid,
    config: &OptimizerConfig,
    boxes: &Boxes,
) -> Result<IncentivePlan> {
    let start = validate_inputs(inputs, loss, grid, boxes)?;
    let remaining = ledger.remaining();
    let budget_units = ((remaining / config.spend_step) + 1e-9).floor().max(0.0) as u32;
    let units = grid_units(grid, config.spend_step)?;
    let weeks = config.horizon.saturating_sub(start) as u32;
    let top = units.iter().copied().max().unwrap_or(0);
    let frontiers: Vec<Frontier> = inputs
        .iter()
        .map(|input| {
            let per_week =
                top * (u32::from(input.eligibility.weight) + u32::from(input.eligibility.calorie));
            participant_frontier(
                input,
                loss,
                grid,
                budget_units.min(per_week * weeks.saturating_sub(1)),
                config,
                boxes,
            )
        })
        .collect::<Result<_>>()?;
    let picks = allocate(&frontiers, budget_units);
    let schedules = frontiers
        .iter()
        .zip(&picks)
        .map(|(f, &k)| f.schedules[k].clone())
        .collect();
    let plan = assemble(inputs, schedules, loss, config.horizon, boxes, start)?;
    if plan.total_spend > remaining + 1e-9 {
        return Err(Error::Budget(format!(
            "plan spends {} of {remaining}",
            plan.total_spend
        )));
    }
    Ok(plan)
}

pub const BRUTE_FORCE_LIMIT: u128 = 1_000_000;

/// Exhaustive search over every joint schedule within the budget.
pub fn brute_force_incentives(
    inputs: &[PlanningInput],
    ledger: &BudgetLedger,
    loss: &LossFunction,
    grid: &RewardGrid,
    horizon: usize,
    boxes: &Boxes,
) -> Result<IncentivePlan> {
    let start = validate_inputs(inputs, loss, grid, boxes)?;
    let weeks = horizon.saturating_sub(start);
    let unit_free: Vec<u32> = vec![0; grid.levels().len()];
    let options: Vec<Vec<(Rewards, u32)>> =
        inputs.iter().map(|i| pairs(i, grid, &unit_free)).collect();
    let mut size: u128 = 1;
    for o in &options {
        size = size.saturating_mul((o.len() as u128).saturating_pow(weeks as u32));
    }
    if size > BRUTE_FORCE_LIMIT {
        return Err(Error::TooLarge(format!(
            "{size} joint schedules exceed {BRUTE_FORCE_LIMIT}"
        )));
    }
    // every schedule per participant with its spend and loss
    let mut tables: Vec<Vec<(Vec<Rewards>, f64, f64)>> = Vec::new();
    for (input, opts) in inputs.iter().zip(&options) {
        let count = opts.len().pow(weeks as u32);
        let mut table = Vec::with_capacity(count);
        for mut code in 0..count {
            let mut seq = Vec::with_capacity(weeks);
            for _ in 0..weeks {
                seq.push(opts[code % opts.len()].0);
                code /= opts.len();
            }
            seq.reverse();
            let full: Vec<Rewards> = input.history.iter().chain(&seq).copied().collect();
            let traj = rollout_ce(
                &input.estimate.theta0,
                &input.estimate.initial_phys(),
                &input.traits,
                boxes,
                &full,
            );
            let l = loss.eval(
                traj.final_weight().unwrap_or(input.estimate.w00),
                input.estimate.w00,
            );
            let spend = seq.iter().map(Rewards::total).sum();
            table.push((seq, spend, l));
        }
        tables.push(table);
    }
    let remaining = ledger.remaining();
    let mut best: Option<(f64, f64, Vec<usize>)> = None;
    let mut idx = vec![0usize; tables.len()];
    loop {
        let spend: f64 = idx.iter().zip(&tables).map(|(&i, t)| t[i].1).sum();
        if spend <= remaining + 1e-9 {
            let mut value = 0.0;
            for (&i, t) in idx.iter().zip(&tables) {
                value += t[i].2;
            }
            let better = best
                .as_ref()
                .is_none_or(|(v, s, _)| value < *v || (value == *v && spend < *s));
            if better {
                best = Some((value, spend, idx.clone()));
            }
        }
        // odometer over participants, last fastest
        let mut u = tables.len();
        loop {
            if u == 0 {
                let (_, _, pick) =
                    best.ok_or_else(|| Error::Infeasible("no schedule fits the budget".into()))?;
                let schedules = pick
                    .iter()
                    .zip(&tables)
                    .map(|(&i, t)| t[i].0.clone())
                    .collect();
                return assemble(inputs, schedules, loss, horizon, boxes, start);
            }
            u -= 1;
            idx[u] += 1;
            if idx[u] < tables[u].len() {
                break;
            }
            idx[u] = 0;
        }
    }
}
