//! Closed-form in-week calorie plan.

use crate::model::boxes::Boxes;
use crate::model::state::{MotivationalState, DAYS};
use crate::model::traits::ParticipantTraits;

/// Per-day sensitivities of the plan: `c[j] = f_b - a1*internal[j] - a2*r_hat*external[j]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanCoefficients {
    pub internal: [f64; DAYS],
    pub external: [f64; DAYS],
}

impl PlanCoefficients {
    pub fn new(traits: &ParticipantTraits) -> Self {
        let mut internal = [0.0; DAYS];
        let mut external = [0.0; DAYS];
        for j in 0..DAYS {
            let horizon = DAYS - 1 - j;
            let geometric: f64 = (0..=horizon).map(|i| traits.b.powi(i as i32)).sum();
            internal[j] = traits.c * geometric / 2.0;
            external[j] =
                traits.c * traits.b.powi(horizon as i32) / (4.0 * traits.noise_half_width);
        }
        PlanCoefficients { internal, external }
    }

    /// Unclamped plan for the given motivations.
    pub fn raw(&self, f_pref: f64, a1: f64, incentive_drive: f64) -> [f64; DAYS] {
        std::array::from_fn(|j| f_pref - a1 * self.internal[j] - incentive_drive * self.external[j])
    }
}

/// Planned calories with the number of days clamped into the calorie box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plan {
    pub calories: [f64; DAYS],
    pub clamps: u32,
}

/// Optimal planned daily calories for one week. The plan does not depend on
/// the current weight.
pub fn optimal_plan(theta: &MotivationalState, traits: &ParticipantTraits, boxes: &Boxes) -> Plan {
    plan_with(&PlanCoefficients::new(traits), theta, boxes)
}

/// As [`optimal_plan`] with precomputed coefficients.
pub fn plan_with(coef: &PlanCoefficients, theta: &MotivationalState, boxes: &Boxes) -> Plan {
    let raw = coef.raw(theta.f_pref, theta.a1, theta.a2 * theta.reward_belief);
    let mut clamps = 0;
    let calories = raw.map(|x| boxes.calories.project(x, &mut clamps));
    Plan { calories, clamps }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn traits() -> ParticipantTraits {
        ParticipantTraits {
            b: 0.9984,
            c: 2.857e-4,
            k: -0.3,
            noise_half_width: 500.0,
            sigma: 2.0,
            gamma1: 0.8,
            gamma2: 0.8,
            gamma_p: 0.8,
            gamma_f: 0.8,
            a1_base: 0.0,
            a2_base: 0.0,
            p_base: 0.5,
        }
    }

    fn theta(a1: f64, a2: f64, r: f64) -> MotivationalState {
        MotivationalState {
            a1,
            a2,
            p: 0.5,
            threshold: 0.5,
            f_pref: 2000.0,
            reward_belief: r,
            k1: 0.0,
            k2: 0.0,
            kp: 0.0,
            week: 0,
        }
    }

    #[test]
    fn zero_motivation_keeps_preference() {
        let p = optimal_plan(&theta(0.0, 0.0, 20.0), &traits(), &Boxes::default());
        assert_eq!(p.calories, [2000.0; DAYS]);
        assert_eq!(p.clamps, 0);
    }

    #[test]
    fn last_day_matches_single_stage_optimum() {
        let t = traits();
        let p = optimal_plan(&theta(2.0, 1.0, 20.0), &t, &Boxes::study());
        let expected = 2000.0 - 2.0 * t.c / 2.0 - 1.0 * 20.0 * t.c / (4.0 * 500.0);
        assert!((p.calories[6] - expected).abs() < 1e-12);
    }

    #[test]
    fn clamps_into_calorie_box() {
        let p = optimal_plan(&theta(1.0e8, 0.0, 0.0), &traits(), &Boxes::study());
        assert!(p.calories.iter().all(|&c| c == 800.0));
        assert_eq!(p.clamps, 7);
    }
}
