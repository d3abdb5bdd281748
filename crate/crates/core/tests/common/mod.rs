#![allow(dead_code)]

use incentives_core::estimation::synthetic::{planted_observations, NoiseSpec};
use incentives_core::estimation::ObservationSet;
use incentives_core::incentives::*;
use incentives_core::model::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Study-scale participant whose recording probability sits at its ceiling.
pub fn traits() -> ParticipantTraits {
    ParticipantTraits {
        b: 0.998445,
        c: 0.998445 * 2.20462 / 7700.0,
        k: -0.30,
        noise_half_width: 500.0,
        sigma: 2.0,
        gamma1: 0.7,
        gamma2: 0.8,
        gamma_p: 0.8,
        gamma_f: 0.9,
        a1_base: 0.0,
        a2_base: 0.0,
        p_base: 0.95,
    }
}

pub fn planted() -> InitialConditions {
    InitialConditions {
        w00: 215.0,
        theta0: MotivationalState {
            a1: 1.0e5,
            a2: 4.0e7,
            p: 0.95,
            threshold: 0.95,
            f_pref: 2240.0,
            reward_belief: 8.0,
            k1: 4.0e4,
            k2: 5.0e5,
            kp: 0.0,
            week: 0,
        },
    }
}

pub fn random_rewards(weeks: usize, seed: u64) -> Vec<Rewards> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let levels = [0.0, 5.0, 10.0, 15.0, 20.0];
    (0..weeks)
        .map(|_| {
            Rewards::new(
                levels[rng.random_range(0..levels.len())],
                levels[rng.random_range(0..levels.len())],
            )
        })
        .collect()
}

pub fn observations(
    ic: &InitialConditions,
    weeks: usize,
    noise: &NoiseSpec,
    seed: u64,
) -> (ObservationSet, Trajectory) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    planted_observations(
        ic,
        &traits(),
        &Boxes::study(),
        &random_rewards(weeks, seed ^ 0x5eed),
        noise,
        &mut rng,
    )
}

/// Planted truth drawn around [`planted`], kept on a losing trend so that
/// every gain is excited.
pub fn random_plant(seed: u64) -> InitialConditions {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tr = traits();
    let mut ic = planted();
    ic.w00 = rng.random_range(170.0..260.0);
    let maintenance = ((1.0 - tr.b) * ic.w00 - tr.k) / tr.c;
    let th = &mut ic.theta0;
    th.a1 *= rng.random_range(0.7..1.3);
    th.a2 *= rng.random_range(0.7..1.3);
    th.reward_belief = rng.random_range(5.0..12.0);
    th.k1 *= rng.random_range(0.7..1.3);
    th.k2 *= rng.random_range(0.7..1.3);
    th.f_pref = maintenance + rng.random_range(0.0..40.0);
    ic
}

pub fn input(
    ic: InitialConditions,
    history: Vec<Rewards>,
    eligibility: Eligibility,
) -> PlanningInput {
    PlanningInput {
        estimate: ic,
        traits: traits(),
        history,
        eligibility,
    }
}

pub fn tiny_config(horizon: usize) -> OptimizerConfig {
    OptimizerConfig {
        spend_step: 15.0,
        beam_width: 64,
        horizon,
        lookahead: None,
    }
}

pub fn tiny_instance(seed: u64) -> (Vec<PlanningInput>, BudgetLedger, LossFunction) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eligibilities = [
        Eligibility::BOTH,
        Eligibility {
            weight: true,
            calorie: false,
        },
        Eligibility {
            weight: false,
            calorie: true,
        },
    ];
    let inputs = (0..2)
        .map(|u| {
            input(
                random_plant(seed * 7 + u),
                vec![],
                eligibilities[rng.random_range(0..3)],
            )
        })
        .collect();
    let budget = 15.0 * rng.random_range(0..=12) as f64;
    let loss = if seed.is_multiple_of(2) {
        LossFunction::hinge()
    } else {
        // a target some but not all sequences reach within three weeks
        LossFunction {
            kind: LossKind::Indicator,
            threshold_fraction: rng.random_range(0.001..0.004),
        }
    };
    (inputs, BudgetLedger::new(budget).unwrap(), loss)
}
