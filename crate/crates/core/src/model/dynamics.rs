//! Within-week weight dynamics and between-week motivational updates.

use rand::Rng;

use crate::model::boxes::Boxes;
use crate::model::plan::{plan_with, PlanCoefficients};
use crate::model::state::{Anchor, MotivationalState, PhysicalState, Rewards, WeekOutcome, DAYS};
use crate::model::traits::ParticipantTraits;

/// Motivational state after an update, with the number of projections applied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub state: MotivationalState,
    pub clamps: u32,
}

/// Weekly signals that drive the motivational update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeekSignals {
    pub lost_weight: bool,
    /// Recording outcome; a probability in certainty-equivalent mode.
    pub goal: f64,
    pub rewards: Rewards,
    pub mean_calories: f64,
}

/// Between-week update of every motivational field.
pub fn advance(
    theta: &MotivationalState,
    signals: &WeekSignals,
    traits: &ParticipantTraits,
    boxes: &Boxes,
) -> Transition {
    let lost = if signals.lost_weight { 1.0 } else { 0.0 };
    let committed = if theta.p >= theta.threshold { 1.0 } else { 0.0 };
    let r = signals.rewards;
    let t = theta.week as f64;
    let mut next = *theta;
    next.a1 = traits.gamma1 * (theta.a1 - traits.a1_base)
        + traits.a1_base
        + theta.k1 * lost
        + r.calorie * committed;
    next.a2 =
        traits.gamma2 * (theta.a2 - traits.a2_base) + traits.a2_base + theta.k2 * r.weight * lost;
    next.p = traits.gamma_p * (theta.p - traits.p_base) + traits.p_base + theta.kp * signals.goal;
    next.f_pref = traits.gamma_f * theta.f_pref + (1.0 - traits.gamma_f) * signals.mean_calories;
    if signals.lost_weight {
        next.reward_belief = (t / (t + 1.0)) * theta.reward_belief + r.weight / (t + 1.0);
    }
    next.week = theta.week + 1;
    let clamps = next.project(boxes);
    Transition {
        state: next,
        clamps,
    }
}

/// Update from a realized week.
pub fn between_week_update(
    theta: &MotivationalState,
    outcome: &WeekOutcome,
    traits: &ParticipantTraits,
    boxes: &Boxes,
) -> Transition {
    let signals = WeekSignals {
        lost_weight: outcome.lost_weight,
        goal: if outcome.goal_met { 1.0 } else { 0.0 },
        rewards: outcome.rewards,
        mean_calories: outcome.mean_calories(),
    };
    advance(theta, &signals, traits, boxes)
}

/// Weight and calorie paths for one week given the plan and execution noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeekPath {
    pub w: [f64; DAYS],
    pub f: [f64; DAYS],
    pub clamps: u32,
}

pub fn week_path(
    phys: &PhysicalState,
    plan: &[f64; DAYS],
    noise: &[f64; DAYS],
    traits: &ParticipantTraits,
    boxes: &Boxes,
) -> WeekPath {
    let mut clamps = 0;
    let f: [f64; DAYS] = std::array::from_fn(|d| plan[d] + noise[d]);
    let f = f.map(|x| boxes.calories.project(x, &mut clamps));
    let mut w = [0.0; DAYS];
    let step = |prev: f64, cal: f64, clamps: &mut u32| {
        boxes
            .weight
            .project(traits.b * prev + traits.c * cal + traits.k, clamps)
    };
    w[0] = match phys.anchor {
        Anchor::WeekStart => phys.w,
        Anchor::PreviousWeekEnd => step(phys.w, f[0], &mut clamps),
    };
    for d in 1..DAYS {
        w[d] = step(w[d - 1], f[d], &mut clamps);
    }
    WeekPath { w, f, clamps }
}

/// Result of simulating one week.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedWeek {
    pub outcome: WeekOutcome,
    pub phys: PhysicalState,
    pub theta: MotivationalState,
}

/// Simulate one week: uniform execution noise, weight roll-forward, Bernoulli
/// recording outcome, then the between-week update.
pub fn simulate_week<R: Rng + ?Sized>(
    phys: &PhysicalState,
    theta: &MotivationalState,
    traits: &ParticipantTraits,
    boxes: &Boxes,
    rewards: Rewards,
    rng: &mut R,
) -> SimulatedWeek {
    let coef = PlanCoefficients::new(traits);
    simulate_week_with(&coef, phys, theta, traits, boxes, rewards, rng)
}

/// As [`simulate_week`] with precomputed plan coefficients.
pub fn simulate_week_with<R: Rng + ?Sized>(
    coef: &PlanCoefficients,
    phys: &PhysicalState,
    theta: &MotivationalState,
    traits: &ParticipantTraits,
    boxes: &Boxes,
    rewards: Rewards,
    rng: &mut R,
) -> SimulatedWeek {
    let plan = plan_with(coef, theta, boxes);
    let a = traits.noise_half_width;
    let noise: [f64; DAYS] = std::array::from_fn(|_| a * (2.0 * rng.random::<f64>() - 1.0));
    let goal_met = rng.random::<f64>() < theta.p;
    let path = week_path(phys, &plan.calories, &noise, traits, boxes);
    let mut outcome = WeekOutcome {
        w_path: path.w,
        f_path: path.f,
        c_path: plan.calories,
        goal_met,
        lost_weight: path.w[0] - path.w[DAYS - 1] > 0.0,
        rewards,
        clamps: plan.clamps + path.clamps,
    };
    let next = between_week_update(theta, &outcome, traits, boxes);
    outcome.clamps += next.clamps;
    SimulatedWeek {
        phys: PhysicalState::carried(path.w[DAYS - 1]),
        theta: next.state,
        outcome,
    }
}
