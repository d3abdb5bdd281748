//! Weekly receding-horizon loop and the randomized wrapper.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::estimation::{solve_smle, solve_smle_from, ObservationSet, Prior, SmleConfig};
use crate::incentives::optimizer::{optimize_incentives, OptimizerConfig};
use crate::incentives::types::{
    BudgetLedger, Eligibility, IncentivePlan, LossFunction, PlanningInput, RewardGrid,
};
use crate::model::boxes::Boxes;
use crate::model::rollout::check_length;
use crate::model::state::{InitialConditions, Rewards};
use crate::model::traits::ParticipantTraits;

/// One participant as seen by the weekly loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiaParticipant {
    /// Data for weeks `0..T`; its rewards are the disbursed history.
    pub observations: ObservationSet,
    pub traits: ParticipantTraits,
    pub eligibility: Eligibility,
    /// Last week's estimate; enables the cheaper re-estimation.
    pub warm_start: Option<InitialConditions>,
    /// Replaces the configured prior for this participant.
    pub prior: Option<Prior>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiaConfig {
    pub loss: LossFunction,
    pub grid: RewardGrid,
    pub optimizer: OptimizerConfig,
    /// Cold-start estimation.
    pub estimation: SmleConfig,
    /// Estimation from a warm start.
    pub reestimation: SmleConfig,
}

impl DiaConfig {
    pub fn new(loss: LossFunction) -> Self {
        DiaConfig {
            loss,
            grid: RewardGrid::standard(),
            optimizer: OptimizerConfig::default(),
            estimation: SmleConfig::nominal(),
            reestimation: SmleConfig::nominal().fast(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiaOutcome {
    pub week: usize,
    /// Week-T offer per participant.
    pub incentives: Vec<Rewards>,
    /// Full plan for weeks `T..horizon`; failed participants hold zeros.
    pub plan: IncentivePlan,
    pub estimates: Vec<Option<InitialConditions>>,
    /// `(participant, message)` for every failed estimate.
    pub failures: Vec<(usize, String)>,
}

/// Estimate every participant and plan the remaining weeks without
/// touching the ledger.
pub fn dia_plan(
    cohort: &[DiaParticipant],
    ledger: &BudgetLedger,
    config: &DiaConfig,
    boxes: &Boxes,
) -> Result<DiaOutcome> {
    let week = cohort.first().map_or(0, |p| p.observations.weeks());
    for p in cohort {
        check_length("observed weeks", week, p.observations.weeks())?;
    }
    let weeks_left = config.optimizer.horizon.saturating_sub(week);
    let zero_plan = |estimates, failures| DiaOutcome {
        week,
        incentives: vec![Rewards::ZERO; cohort.len()],
        plan: IncentivePlan {
            start_week: week,
            schedules: vec![vec![Rewards::ZERO; weeks_left]; cohort.len()],
            total_spend: 0.0,
            loss: f64::NAN,
        },
        estimates,
        failures,
    };
    if ledger.remaining() <= 0.0 || weeks_left == 0 {
        return Ok(zero_plan(vec![None; cohort.len()], Vec::new()));
    }
    let mut estimates = Vec::with_capacity(cohort.len());
    let mut failures = Vec::new();
    for (u, p) in cohort.iter().enumerate() {
        let with_prior = |c: &SmleConfig| {
            let mut c = c.clone();
            if let Some(prior) = &p.prior {
                c.eta.prior = prior.clone();
            }
            c
        };
        let fit = match &p.warm_start {
            Some(start) => solve_smle_from(
                &p.observations,
                &p.traits,
                boxes,
                &with_prior(&config.reestimation),
                start,
            ),
            None => solve_smle(
                &p.observations,
                &p.traits,
                boxes,
                &with_prior(&config.estimation),
            ),
        };
        match fit {
            Ok(r) => estimates.push(Some(r.initial_conditions())),
            Err(e) => {
                failures.push((u, e.to_string()));
                estimates.push(None);
            }
        }
    }
    let members: Vec<usize> = (0..cohort.len())
        .filter(|&u| estimates[u].is_some())
        .collect();
    if members.is_empty() {
        return Ok(zero_plan(estimates, failures));
    }
    let inputs: Vec<PlanningInput> = members
        .iter()
        .map(|&u| PlanningInput {
            estimate: estimates[u].expect("member has an estimate"),
            traits: cohort[u].traits,
            history: cohort[u].observations.rewards.clone(),
            eligibility: cohort[u].eligibility,
        })
        .collect();
    let sub = optimize_incentives(
        &inputs,
        ledger,
        &config.loss,
        &config.grid,
        &config.optimizer,
        boxes,
    )?;
    let mut schedules = vec![vec![Rewards::ZERO; weeks_left]; cohort.len()];
    for (&u, s) in members.iter().zip(sub.schedules) {
        schedules[u] = s;
    }
    let plan = IncentivePlan {
        start_week: week,
        schedules,
        total_spend: sub.total_spend,
        loss: sub.loss,
    };
    Ok(DiaOutcome {
        week,
        incentives: plan.first_week(),
        plan,
        estimates,
        failures,
    })
}

/// One weekly step: plan, then commit the week-T offers to the ledger.
pub fn dia_step(
    cohort: &[DiaParticipant],
    ledger: &mut BudgetLedger,
    config: &DiaConfig,
    boxes: &Boxes,
) -> Result<DiaOutcome> {
    let outcome = dia_plan(cohort, ledger, config, boxes)?;
    ledger.commit(outcome.incentives.iter().map(Rewards::total).sum())?;
    Ok(outcome)
}

/// Keep each reward type of each participant with probability `q`.
pub fn apply_stochastic_wrapper<R: Rng + ?Sized>(
    incentives: &[Rewards],
    q: f64,
    rng: &mut R,
) -> Result<Vec<Rewards>> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(invalid("q", format!("{q} must lie in (0, 1]")));
    }
    Ok(incentives
        .iter()
        .map(|r| {
            let mut keep = |v: f64| if rng.random::<f64>() < q { v } else { 0.0 };
            let weight = keep(r.weight);
            let calorie = keep(r.calorie);
            Rewards::new(weight, calorie)
        })
        .collect())
}
