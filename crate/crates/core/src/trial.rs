//! Simulated trials: ground-truth dynamics under a disbursement policy,
//! budget sweeps and outcome metrics.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cohort::{CohortDistributions, CohortSpec, PopulationPrior};
use crate::error::{invalid, Error, Result};
use crate::estimation::synthetic::laplace;
use crate::estimation::{ObservationSet, SmleConfig};
use crate::incentives::{
    apply_stochastic_wrapper, dia_plan, BudgetLedger, DiaConfig, DiaParticipant, LossFunction,
    LossKind, OptimizerConfig, RewardGrid,
};
use crate::model::dynamics::simulate_week_with;
use crate::model::{Boxes, InitialConditions, PlanCoefficients, Rewards, DAYS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Policy {
    /// Weekly re-estimation and re-optimization, each offer kept with
    /// probability `q`.
    Dia { loss: LossKind, q: f64 },
    /// The cohort's predetermined schedule.
    Fixed,
}

impl Policy {
    pub fn label(&self) -> String {
        match self {
            Policy::Dia { loss, q } => {
                let loss = match loss {
                    LossKind::Indicator => "indicator",
                    LossKind::Hinge => "hinge",
                };
                format!("dia-{loss}-q{q:.2}")
            }
            Policy::Fixed => "fixed".to_string(),
        }
    }

    /// Both losses at q = 1, 0.75 and 0.25, plus the fixed schedule.
    pub fn study_set() -> Vec<Policy> {
        let mut out = Vec::new();
        for loss in [LossKind::Indicator, LossKind::Hinge] {
            for q in [1.0, 0.75, 0.25] {
                out.push(Policy::Dia { loss, q });
            }
        }
        out.push(Policy::Fixed);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrialConfig {
    pub weeks: usize,
    pub run_in_weeks: usize,
    pub budgets: Vec<f64>,
    pub replicates: usize,
    pub policies: Vec<Policy>,
    pub master_seed: u64,
    /// Probability that a mid-week day is weighed.
    pub p_obs: f64,
    /// Probability that the first and last day are weighed.
    pub p_end: f64,
    /// Fractional loss that counts as success.
    pub success_fraction: f64,
    pub grid: RewardGrid,
    pub optimizer: OptimizerConfig,
    pub estimation: SmleConfig,
    pub reestimation: SmleConfig,
    /// Prior for the weekly estimates.
    pub population_prior: PopulationPrior,
    /// Off keeps the estimation config's own prior.
    pub use_population_prior: bool,
}

pub fn study_budgets() -> Vec<f64> {
    vec![
        520.0, 620.0, 720.0, 820.0, 920.0, 1171.0, 2343.0, 3514.0, 4686.0, 5857.0,
    ]
}

impl Default for TrialConfig {
    fn default() -> Self {
        TrialConfig {
            weeks: 24,
            run_in_weeks: 2,
            budgets: study_budgets(),
            replicates: 5,
            policies: Policy::study_set(),
            master_seed: 2024,
            p_obs: 0.7,
            p_end: 0.9,
            success_fraction: 0.05,
            grid: RewardGrid::standard(),
            optimizer: OptimizerConfig {
                beam_width: 8,
                lookahead: Some(1),
                ..OptimizerConfig::default()
            },
            estimation: SmleConfig::nominal(),
            reestimation: SmleConfig::nominal().fast(),
            population_prior: PopulationPrior::from_distributions(&CohortDistributions::default()),
            use_population_prior: true,
        }
    }
}

impl TrialConfig {
    pub fn validate(&self, boxes: &Boxes) -> Result<()> {
        if self.run_in_weeks >= self.weeks {
            return Err(invalid("run_in_weeks", "must be shorter than the trial"));
        }
        if self.budgets.iter().any(|&b| !(b > 0.0 && b.is_finite()))
            || self.budgets.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(invalid(
                "budgets",
                "must be positive and strictly ascending",
            ));
        }
        if self.replicates == 0 {
            return Err(invalid("replicates", "must be at least 1"));
        }
        for (name, p) in [("p_obs", self.p_obs), ("p_end", self.p_end)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(invalid(name, "must lie in [0, 1]"));
            }
        }
        for p in &self.policies {
            if let Policy::Dia { q, .. } = p {
                if !(*q > 0.0 && *q <= 1.0) {
                    return Err(invalid("q", format!("{q} must lie in (0, 1]")));
                }
            }
        }
        if !(self.success_fraction > 0.0 && self.success_fraction < 1.0) {
            return Err(invalid("success_fraction", "must lie in (0, 1)"));
        }
        self.grid.validate(boxes)
    }

    fn dia(&self, loss: LossKind) -> DiaConfig {
        DiaConfig {
            loss: LossFunction {
                kind: loss,
                threshold_fraction: self.success_fraction,
            },
            grid: self.grid.clone(),
            optimizer: OptimizerConfig {
                horizon: self.weeks,
                ..self.optimizer
            },
            estimation: self.estimation.clone(),
            reestimation: self.reestimation.clone(),
        }
    }
}

/// Outcome of one (policy, budget, replicate) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub policy: Policy,
    pub budget: f64,
    pub replicate: usize,
    pub weekly_spend: Vec<f64>,
    pub cumulative_spend: Vec<f64>,
    /// True daily weights per participant, `weeks * 7` entries each.
    pub weights: Vec<Vec<f64>>,
    pub initial_weights: Vec<f64>,
    /// What the policy saw: noisy weights, outcomes and disbursements.
    pub observations: Vec<ObservationSet>,
    pub success_count: usize,
    pub bottom5_avg_pct_loss: f64,
    pub estimation_failures: usize,
}

impl CellResult {
    pub fn total_spend(&self) -> f64 {
        self.cumulative_spend.last().copied().unwrap_or(0.0)
    }

    pub fn final_weights(&self) -> Vec<f64> {
        self.weights
            .iter()
            .map(|w| w.last().copied().unwrap_or(f64::NAN))
            .collect()
    }
}

fn mix(a: u64, b: u64) -> u64 {
    // splitmix64 finalizer over the pair
    let mut z = a ^ b
        .wrapping_add(0x9e37_79b9_7f4a_7c15)
        .wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Participant stream for a replicate: shared by every policy and budget so
/// that cells differ only through their disbursements.
fn participant_rng(seed: u64, replicate: usize, u: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, replicate as u64));
    rng.set_stream(u as u64);
    rng
}

fn wrapper_rng(seed: u64, replicate: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed ^ 0x7772_6170, replicate as u64));
    rng.set_stream(u64::MAX);
    rng
}

/// Simulate one cell. Offers are disbursed unconditionally and count
/// against the budget when made.
pub fn run_trial(
    config: &TrialConfig,
    cohort: &CohortSpec,
    policy: &Policy,
    budget: f64,
    replicate: usize,
    boxes: &Boxes,
) -> Result<CellResult> {
    let run_in_spend = cohort.fixed_total(config.run_in_weeks);
    if budget + 1e-9 < run_in_spend {
        return Err(Error::Budget(format!(
            "budget {budget} is below the run-in spend {run_in_spend}"
        )));
    }
    let n = cohort.participants.len();
    let mut ledger = BudgetLedger::new(budget)?;
    let mut rngs: Vec<ChaCha8Rng> = (0..n)
        .map(|u| participant_rng(config.master_seed, replicate, u))
        .collect();
    let mut wrap_rng = wrapper_rng(config.master_seed, replicate);
    let coefs: Vec<PlanCoefficients> = cohort
        .participants
        .iter()
        .map(|m| PlanCoefficients::new(&m.traits))
        .collect();
    let mut phys: Vec<_> = cohort
        .participants
        .iter()
        .map(|m| m.truth.initial_phys())
        .collect();
    let mut thetas: Vec<_> = cohort.participants.iter().map(|m| m.truth.theta0).collect();
    let mut observed: Vec<ObservationSet> = vec![ObservationSet::default(); n];
    let mut warm: Vec<Option<InitialConditions>> = vec![None; n];
    let mut weights: Vec<Vec<f64>> = vec![Vec::with_capacity(config.weeks * DAYS); n];
    let mut weekly_spend = Vec::with_capacity(config.weeks);
    let mut failures = 0;
    let dia = match policy {
        Policy::Dia { loss, .. } => Some(config.dia(*loss)),
        Policy::Fixed => None,
    };
    for t in 0..config.weeks {
        let offers: Vec<Rewards> = match (&dia, policy) {
            (Some(dia), Policy::Dia { q, .. }) if t >= config.run_in_weeks => {
                let members: Vec<DiaParticipant> = cohort
                    .participants
                    .iter()
                    .zip(&observed)
                    .zip(&warm)
                    .map(|((m, obs), w)| DiaParticipant {
                        observations: obs.clone(),
                        traits: m.traits,
                        eligibility: m.eligibility,
                        warm_start: *w,
                        prior: config
                            .use_population_prior
                            .then_some(&config.population_prior)
                            .and_then(|pp| {
                                obs.iter_observed()
                                    .next()
                                    .map(|(_, _, first)| pp.for_participant(first, &m.traits))
                            }),
                    })
                    .collect();
                let out = dia_plan(&members, &ledger, dia, boxes)?;
                failures += out.failures.len();
                for (w, e) in warm.iter_mut().zip(&out.estimates) {
                    if e.is_some() {
                        *w = *e;
                    }
                }
                if *q < 1.0 {
                    apply_stochastic_wrapper(&out.incentives, *q, &mut wrap_rng)?
                } else {
                    out.incentives
                }
            }
            _ => {
                // fixed schedule, truncated once the budget runs out
                let mut left = ledger.remaining();
                cohort
                    .participants
                    .iter()
                    .map(|m| {
                        let r = cohort.fixed_offer(m, t);
                        if r.total() <= left + 1e-9 {
                            left -= r.total();
                            r
                        } else {
                            Rewards::ZERO
                        }
                    })
                    .collect()
            }
        };
        let spend: f64 = offers.iter().map(Rewards::total).sum();
        ledger.commit(spend)?;
        weekly_spend.push(spend);
        for u in 0..n {
            let m = &cohort.participants[u];
            let rng = &mut rngs[u];
            let week = simulate_week_with(
                &coefs[u], &phys[u], &thetas[u], &m.traits, boxes, offers[u], rng,
            );
            let seen: [Option<f64>; DAYS] = std::array::from_fn(|d| {
                let p = if d == 0 || d == DAYS - 1 {
                    config.p_end
                } else {
                    config.p_obs
                };
                let kept = rng.random::<f64>() < p;
                let noise = laplace(rng, m.traits.sigma);
                kept.then_some(week.outcome.w_path[d] + noise)
            });
            observed[u].weights.push(seen);
            observed[u].goals.push(week.outcome.goal_met);
            observed[u].rewards.push(offers[u]);
            weights[u].extend_from_slice(&week.outcome.w_path);
            phys[u] = week.phys;
            thetas[u] = week.theta;
        }
    }
    let cumulative_spend = weekly_spend
        .iter()
        .scan(0.0, |acc, s| {
            *acc += s;
            Some(*acc)
        })
        .collect();
    let initial_weights: Vec<f64> = cohort.participants.iter().map(|m| m.truth.w00).collect();
    let finals: Vec<f64> = weights
        .iter()
        .map(|w| *w.last().expect("at least one week"))
        .collect();
    let success_count = success_count(&initial_weights, &finals, config.success_fraction);
    let (bottom5_avg_pct_loss, _) = bottom_k_avg_pct_loss(&initial_weights, &finals, 5);
    Ok(CellResult {
        policy: *policy,
        budget,
        replicate,
        weekly_spend,
        cumulative_spend,
        weights,
        initial_weights,
        observations: observed,
        success_count,
        bottom5_avg_pct_loss,
        estimation_failures: failures,
    })
}

/// Participants whose fractional loss reaches `fraction`, inclusive.
pub fn success_count(initial: &[f64], finals: &[f64], fraction: f64) -> usize {
    initial
        .iter()
        .zip(finals)
        .filter(|(&w0, &w)| w <= (1.0 - fraction) * w0 * (1.0 + 1e-12))
        .count()
}

/// Mean percent loss of the `k` participants who lost the least; `k` is
/// reduced to the cohort size, which the flag reports.
pub fn bottom_k_avg_pct_loss(initial: &[f64], finals: &[f64], k: usize) -> (f64, bool) {
    let mut pct: Vec<f64> = initial
        .iter()
        .zip(finals)
        .map(|(&w0, &w)| 100.0 * (w0 - w) / w0)
        .collect();
    pct.sort_by(f64::total_cmp);
    let k_used = k.min(pct.len());
    if k_used == 0 {
        return (f64::NAN, true);
    }
    (
        pct[..k_used].iter().sum::<f64>() / k_used as f64,
        k_used < k,
    )
}

/// Means over replicates for one (policy, budget) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub policy: Policy,
    pub budget: f64,
    pub replicates: usize,
    pub mean_success: f64,
    pub mean_bottom5: f64,
    pub mean_spend: f64,
    pub max_spend: f64,
    pub weekly_spend: Vec<f64>,
    pub cumulative_spend: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResults {
    pub cells: Vec<CellResult>,
    pub summary: Vec<CellSummary>,
}

impl SweepResults {
    pub fn summary_for(&self, policy: &Policy, budget: f64) -> Option<&CellSummary> {
        self.summary
            .iter()
            .find(|s| s.policy == *policy && s.budget == budget)
    }

    /// Cells whose spend exceeds their budget.
    pub fn budget_violations(&self) -> Vec<&CellResult> {
        self.cells
            .iter()
            .filter(|c| c.total_spend() > c.budget + 1e-9)
            .collect()
    }
}

/// Per (policy, budget) means over replicates, in first-seen order.
pub fn metrics(cells: &[CellResult]) -> Vec<CellSummary> {
    let mut keys: Vec<(Policy, f64)> = Vec::new();
    for c in cells {
        if !keys.iter().any(|(p, b)| *p == c.policy && *b == c.budget) {
            keys.push((c.policy, c.budget));
        }
    }
    keys.into_iter()
        .map(|(policy, budget)| {
            let group: Vec<&CellResult> = cells
                .iter()
                .filter(|c| c.policy == policy && c.budget == budget)
                .collect();
            let n = group.len() as f64;
            let mean = |f: &dyn Fn(&CellResult) -> f64| group.iter().map(|c| f(c)).sum::<f64>() / n;
            let weeks = group
                .iter()
                .map(|c| c.weekly_spend.len())
                .max()
                .unwrap_or(0);
            let curve = |f: &dyn Fn(&CellResult) -> &Vec<f64>| {
                (0..weeks)
                    .map(|t| {
                        group
                            .iter()
                            .map(|c| f(c).get(t).copied().unwrap_or(0.0))
                            .sum::<f64>()
                            / n
                    })
                    .collect()
            };
            CellSummary {
                policy,
                budget,
                replicates: group.len(),
                mean_success: mean(&|c| c.success_count as f64),
                mean_bottom5: mean(&|c| c.bottom5_avg_pct_loss),
                mean_spend: mean(&|c| c.total_spend()),
                max_spend: group.iter().map(|c| c.total_spend()).fold(0.0, f64::max),
                weekly_spend: curve(&|c| &c.weekly_spend),
                cumulative_spend: curve(&|c| &c.cumulative_spend),
            }
        })
        .collect()
}

/// Every policy at every budget for every replicate. Cells are independent
/// and spread over the available cores; results come back in
/// policy-budget-replicate order regardless of scheduling.
pub fn budget_sweep(
    config: &TrialConfig,
    cohort: &CohortSpec,
    boxes: &Boxes,
    progress: Option<&(dyn Fn(usize, usize) + Sync)>,
) -> Result<SweepResults> {
    config.validate(boxes)?;
    cohort.validate(boxes)?;
    let mut jobs = Vec::new();
    for p in &config.policies {
        for &b in &config.budgets {
            for r in 0..config.replicates {
                jobs.push((*p, b, r));
            }
        }
    }
    let next = AtomicUsize::new(0);
    let done = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<CellResult>>>> = Mutex::new(vec![None; jobs.len()]);
    let workers = std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(jobs.len())
        .max(1);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some((p, b, r)) = jobs.get(i) else { break };
                let cell = run_trial(config, cohort, p, *b, *r, boxes);
                slots
                    .lock()
                    .expect("no worker panics while holding the lock")[i] = Some(cell);
                let finished = done.fetch_add(1, Ordering::Relaxed) + 1;
                if let Some(cb) = progress {
                    cb(finished, jobs.len());
                }
            });
        }
    });
    let cells = slots
        .into_inner()
        .expect("workers joined")
        .into_iter()
        .map(|c| c.expect("every job ran"))
        .collect::<Result<Vec<_>>>()?;
    let summary = metrics(&cells);
    Ok(SweepResults { cells, summary })
}
