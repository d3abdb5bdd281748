//! Observation sets generated from planted initial conditions.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::estimation::observations::ObservationSet;
use crate::model::boxes::Boxes;
use crate::model::dynamics::{between_week_update, week_path};
use crate::model::plan::{plan_with, PlanCoefficients};
use crate::model::rollout::Trajectory;
use crate::model::state::{InitialConditions, PhysicalState, Rewards, WeekOutcome, DAYS};
use crate::model::traits::ParticipantTraits;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GoalDraw {
    /// `g ~ Bernoulli(p)`.
    Bernoulli,
    /// `g = 1{p >= 0.5}`.
    Rounded,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Uniform calorie deviations in `[-A, A]`.
    pub execution: bool,
    /// Laplace measurement noise scale, lbs.
    pub measurement: Option<f64>,
    /// Probability that a day is not recorded.
    pub missing: f64,
    pub goals: GoalDraw,
}

impl NoiseSpec {
    pub const NONE: NoiseSpec = NoiseSpec {
        execution: false,
        measurement: None,
        missing: 0.0,
        goals: GoalDraw::Rounded,
    };

    /// Execution noise, Laplace noise with the participant's sigma and
    /// Bernoulli goals.
    pub fn full(sigma: f64, missing: f64) -> Self {
        NoiseSpec {
            execution: true,
            measurement: Some(sigma),
            missing,
            goals: GoalDraw::Bernoulli,
        }
    }
}

/// Laplace draw with scale `b` by inverse CDF.
pub fn laplace<R: Rng + ?Sized>(rng: &mut R, b: f64) -> f64 {
    let u: f64 = rng.random::<f64>() - 0.5;
    -b * u.signum() * (1.0 - 2.0 * u.abs()).max(f64::MIN_POSITIVE).ln()
}

/// Simulate `rewards.len()` weeks from planted initial conditions and
/// return the observations together with the latent trajectory.
pub fn planted_observations<R: Rng + ?Sized>(
    ic: &InitialConditions,
    traits: &ParticipantTraits,
    boxes: &Boxes,
    rewards: &[Rewards],
    noise: &NoiseSpec,
    rng: &mut R,
) -> (ObservationSet, Trajectory) {
    let coef = PlanCoefficients::new(traits);
    let mut theta = ic.theta0;
    let mut phys = ic.initial_phys();
    let mut traj = Trajectory {
        weeks: Vec::new(),
        thetas: vec![theta],
        goals: Vec::new(),
        clamps: 0,
    };
    let mut obs = ObservationSet {
        weights: Vec::new(),
        goals: Vec::new(),
        rewards: rewards.to_vec(),
    };
    let a = traits.noise_half_width;
    for &r in rewards {
        let plan = plan_with(&coef, &theta, boxes);
        let xi: [f64; DAYS] = std::array::from_fn(|_| {
            if noise.execution {
                a * (2.0 * rng.random::<f64>() - 1.0)
            } else {
                0.0
            }
        });
        let goal_met = match noise.goals {
            GoalDraw::Bernoulli => rng.random::<f64>() < theta.p,
            GoalDraw::Rounded => theta.p >= 0.5,
        };
        let path = week_path(&phys, &plan.calories, &xi, traits, boxes);
        let outcome = WeekOutcome {
            w_path: path.w,
            f_path: path.f,
            c_path: plan.calories,
            goal_met,
            lost_weight: path.w[0] - path.w[DAYS - 1] > 0.0,
            rewards: r,
            clamps: plan.clamps + path.clamps,
        };
        let observed: [Option<f64>; DAYS] = std::array::from_fn(|d| {
            let noise_w = noise.measurement.map_or(0.0, |s| laplace(rng, s));
            let keep = noise.missing <= 0.0 || rng.random::<f64>() >= noise.missing;
            keep.then_some(path.w[d] + noise_w)
        });
        let next = between_week_update(&theta, &outcome, traits, boxes);
        traj.clamps += outcome.clamps + next.clamps;
        theta = next.state;
        phys = PhysicalState::carried(path.w[DAYS - 1]);
        obs.weights.push(observed);
        obs.goals.push(goal_met);
        traj.goals.push(if goal_met { 1.0 } else { 0.0 });
        traj.thetas.push(theta);
        traj.weeks.push(outcome);
    }
    (obs, traj)
}
