//! Multi-week trajectories, stochastic or certainty-equivalent.

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::boxes::Boxes;
use crate::model::dynamics::{advance, simulate_week_with, week_path, WeekSignals};
use crate::model::plan::{plan_with, PlanCoefficients};
use crate::model::state::{MotivationalState, PhysicalState, Rewards, WeekOutcome, DAYS};
use crate::model::traits::ParticipantTraits;

pub enum RolloutMode<'a, R: Rng + ?Sized> {
    Stochastic(&'a mut R),
    /// Zero execution noise; the recording outcome is replaced by its mean.
    CertaintyEquivalent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub weeks: Vec<WeekOutcome>,
    /// Motivational states at the start of each week plus the final state.
    pub thetas: Vec<MotivationalState>,
    /// Recording signal fed to the update: 0/1 draws, or `p` in
    /// certainty-equivalent mode.
    pub goals: Vec<f64>,
    pub clamps: u32,
}

impl Trajectory {
    pub fn final_weight(&self) -> Option<f64> {
        self.weeks.last().map(|w| w.w_path[DAYS - 1])
    }

    pub fn weights(&self) -> impl Iterator<Item = f64> + '_ {
        self.weeks.iter().flat_map(|w| w.w_path.iter().copied())
    }
}

/// One certainty-equivalent week. Returns the next physical and motivational
/// states along with the week's weight path.
pub fn ce_week(
    coef: &PlanCoefficients,
    phys: &PhysicalState,
    theta: &MotivationalState,
    traits: &ParticipantTraits,
    boxes: &Boxes,
    rewards: Rewards,
) -> (PhysicalState, MotivationalState, [f64; DAYS]) {
    let plan = plan_with(coef, theta, boxes);
    let path = week_path(phys, &plan.calories, &[0.0; DAYS], traits, boxes);
    let signals = WeekSignals {
        lost_weight: path.w[0] - path.w[DAYS - 1] > 0.0,
        goal: theta.p,
        rewards,
        mean_calories: path.f.iter().sum::<f64>() / DAYS as f64,
    };
    let next = advance(theta, &signals, traits, boxes);
    (PhysicalState::carried(path.w[DAYS - 1]), next.state, path.w)
}

pub fn rollout<R: Rng + ?Sized>(
    theta0: &MotivationalState,
    phys0: &PhysicalState,
    traits: &ParticipantTraits,
    boxes: &Boxes,
    rewards: &[Rewards],
    mode: RolloutMode<'_, R>,
) -> Trajectory {
    let coef = PlanCoefficients::new(traits);
    let mut theta = *theta0;
    let mut phys = *phys0;
    let mut out = Trajectory {
        weeks: Vec::with_capacity(rewards.len()),
        thetas: vec![theta],
        goals: Vec::with_capacity(rewards.len()),
        clamps: 0,
    };
    match mode {
        RolloutMode::Stochastic(rng) => {
            for &r in rewards {
                let week = simulate_week_with(&coef, &phys, &theta, traits, boxes, r, rng);
                out.goals
                    .push(if week.outcome.goal_met { 1.0 } else { 0.0 });
                out.clamps += week.outcome.clamps;
                phys = week.phys;
                theta = week.theta;
                out.weeks.push(week.outcome);
                out.thetas.push(theta);
            }
        }
        RolloutMode::CertaintyEquivalent => {
            for &r in rewards {
                let plan = plan_with(&coef, &theta, boxes);
                let path = week_path(&phys, &plan.calories, &[0.0; DAYS], traits, boxes);
                let outcome = WeekOutcome {
                    w_path: path.w,
                    f_path: path.f,
                    c_path: plan.calories,
                    goal_met: false,
                    lost_weight: path.w[0] - path.w[DAYS - 1] > 0.0,
                    rewards: r,
                    clamps: plan.clamps + path.clamps,
                };
                let signals = WeekSignals {
                    lost_weight: outcome.lost_weight,
                    goal: theta.p,
                    rewards: r,
                    mean_calories: outcome.mean_calories(),
                };
                let next = advance(&theta, &signals, traits, boxes);
                out.goals.push(theta.p);
                out.clamps += outcome.clamps + next.clamps;
                phys = PhysicalState::carried(path.w[DAYS - 1]);
                theta = next.state;
                out.weeks.push(outcome);
                out.thetas.push(theta);
            }
        }
    }
    out
}

/// Certainty-equivalent rollout without a random generator.
pub fn rollout_ce(
    theta0: &MotivationalState,
    phys0: &PhysicalState,
    traits: &ParticipantTraits,
    boxes: &Boxes,
    rewards: &[Rewards],
) -> Trajectory {
    rollout::<rand_chacha::ChaCha8Rng>(
        theta0,
        phys0,
        traits,
        boxes,
        rewards,
        RolloutMode::CertaintyEquivalent,
    )
}

pub fn check_length(name: &str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::LengthMismatch {
            name: name.to_string(),
            expected,
            got,
        });
    }
    Ok(())
}
