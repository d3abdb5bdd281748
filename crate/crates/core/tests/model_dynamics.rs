use incentives_core::model::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn traits() -> ParticipantTraits {
    ParticipantTraits {
        b: 0.998,
        c: 1.0 / 3500.0,
        k: -0.3,
        noise_half_width: 500.0,
        sigma: 2.0,
        gamma1: 0.5,
        gamma2: 0.7,
        gamma_p: 0.6,
        gamma_f: 0.8,
        a1_base: 1.0,
        a2_base: 2.0,
        p_base: 0.5,
    }
}

fn theta() -> MotivationalState {
    MotivationalState {
        a1: 1.0,
        a2: 2.0,
        p: 0.5,
        threshold: 0.7,
        f_pref: 2100.0,
        reward_belief: 10.0,
        k1: 0.5,
        k2: 0.2,
        kp: 0.1,
        week: 3,
    }
}

fn outcome(lost: bool, goal: bool, rewards: Rewards, f: f64) -> WeekOutcome {
    let w0 = 200.0;
    let w6 = if lost { 199.0 } else { 200.5 };
    WeekOutcome {
        w_path: [w0, w0, w0, w0, w0, w0, w6],
        f_path: [f; DAYS],
        c_path: [f; DAYS],
        goal_met: goal,
        lost_weight: lost,
        rewards,
        clamps: 0,
    }
}

#[test]
fn baseline_without_triggers_is_a_fixed_point() {
    let th = theta();
    let out = outcome(false, false, Rewards::ZERO, th.f_pref);
    let next = between_week_update(&th, &out, &traits(), &Boxes::default()).state;
    assert_eq!(next.a1, th.a1);
    assert_eq!(next.a2, th.a2);
    assert_eq!(next.p, th.p);
    assert_eq!(next.f_pref, th.f_pref);
    assert_eq!(next.reward_belief, th.reward_belief);
    assert_eq!(next.week, th.week + 1);
}

#[test]
fn internal_motivation_halves_toward_baseline() {
    let th = MotivationalState { a1: 3.0, ..theta() };
    let out = outcome(false, false, Rewards::ZERO, th.f_pref);
    let next = between_week_update(&th, &out, &traits(), &Boxes::default()).state;
    assert!((next.a1 - 2.0).abs() < 1e-12);
}

#[test]
fn loss_without_weight_reward_only_lifts_internal_motivation() {
    let tr = traits();
    let th = MotivationalState {
        a1: 3.0,
        a2: 5.0,
        ..theta()
    };
    let out = outcome(true, false, Rewards::new(0.0, 0.0), th.f_pref);
    let next = between_week_update(&th, &out, &tr, &Boxes::default()).state;
    let a2_decay = tr.gamma2 * (th.a2 - tr.a2_base) + tr.a2_base;
    assert!((next.a2 - a2_decay).abs() < 1e-12);
    assert!(next.a1 >= tr.gamma1 * (th.a1 - tr.a1_base) + tr.a1_base + th.k1 - 1e-12);
}

#[test]
fn recording_threshold_gates_calorie_reward() {
    let tr = traits();
    let boxes = Boxes::study();
    let r = Rewards::new(0.0, 10.0);
    let below = MotivationalState {
        p: 0.6,
        threshold: 0.7,
        ..theta()
    };
    let above = MotivationalState {
        p: 0.7,
        threshold: 0.7,
        ..theta()
    };
    let out = outcome(false, false, r, 2100.0);
    let nb = between_week_update(&below, &out, &tr, &boxes).state;
    let na = between_week_update(&above, &out, &tr, &boxes).state;
    assert!((na.a1 - nb.a1 - 10.0).abs() < 1e-12);
}

#[test]
fn reward_belief_updates_only_on_loss() {
    let tr = traits();
    let th = MotivationalState {
        reward_belief: 10.0,
        week: 3,
        ..theta()
    };
    let r = Rewards::new(30.0, 0.0);
    let gained = between_week_update(
        &th,
        &outcome(false, false, r, 2100.0),
        &tr,
        &Boxes::default(),
    )
    .state;
    assert_eq!(gained.reward_belief, 10.0);
    let lost = between_week_update(
        &th,
        &outcome(true, false, r, 2100.0),
        &tr,
        &Boxes::default(),
    )
    .state;
    assert!((lost.reward_belief - (0.75 * 10.0 + 30.0 / 4.0)).abs() < 1e-12);
}

#[test]
fn near_zero_noise_executes_the_plan() {
    let tr = ParticipantTraits {
        noise_half_width: 1e-9,
        ..traits()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let wk = simulate_week(
        &PhysicalState::initial(220.0),
        &theta(),
        &tr,
        &Boxes::default(),
        Rewards::ZERO,
        &mut rng,
    );
    for d in 0..DAYS {
        assert!((wk.outcome.f_path[d] - wk.outcome.c_path[d]).abs() <= 1e-9);
    }
}

#[test]
fn execution_noise_stays_within_half_width() {
    let tr = traits();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let th = MotivationalState {
        f_pref: 2000.0,
        ..theta()
    };
    for _ in 0..500 {
        let wk = simulate_week(
            &PhysicalState::carried(220.0),
            &th,
            &tr,
            &Boxes::default(),
            Rewards::ZERO,
            &mut rng,
        );
        for d in 0..DAYS {
            assert!(
                (wk.outcome.f_path[d] - wk.outcome.c_path[d]).abs() <= tr.noise_half_width + 1e-9
            );
        }
        let lost = wk.outcome.w_path[0] - wk.outcome.w_path[6] > 0.0;
        assert_eq!(lost, wk.outcome.lost_weight);
    }
}

#[test]
fn recording_rate_at_floor_probability() {
    let boxes = Boxes::default();
    let th = MotivationalState {
        p: boxes.eps,
        ..theta()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 100_000;
    let mut hits = 0usize;
    for _ in 0..n {
        let wk = simulate_week(
            &PhysicalState::carried(220.0),
            &th,
            &traits(),
            &boxes,
            Rewards::ZERO,
            &mut rng,
        );
        hits += wk.outcome.goal_met as usize;
    }
    let rate = hits as f64 / n as f64;
    let se = (boxes.eps * (1.0 - boxes.eps) / n as f64).sqrt();
    assert!((rate - boxes.eps).abs() <= 3.0 * se, "rate {rate}");
}

#[test]
fn simulate_week_is_deterministic_for_a_seed() {
    let run = || {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        simulate_week(
            &PhysicalState::initial(210.0),
            &theta(),
            &traits(),
            &Boxes::default(),
            Rewards::new(5.0, 5.0),
            &mut rng,
        )
    };
    assert_eq!(run(), run());
}

#[test]
fn first_week_keeps_initial_weight_and_later_weeks_chain() {
    let tr = ParticipantTraits {
        noise_half_width: 1e-12,
        ..traits()
    };
    let boxes = Boxes::default();
    let rewards = vec![Rewards::ZERO; 2];
    let traj = rollout_ce(
        &theta(),
        &PhysicalState::initial(210.0),
        &tr,
        &boxes,
        &rewards,
    );
    assert_eq!(traj.weeks[0].w_path[0], 210.0);
    let w6 = traj.weeks[0].w_path[6];
    let f0 = traj.weeks[1].f_path[0];
    let expect = tr.b * w6 + tr.c * f0 + tr.k;
    assert!((traj.weeks[1].w_path[0] - expect).abs() < 1e-12);
}

#[test]
fn certainty_equivalent_rollout_is_deterministic() {
    let rewards = vec![Rewards::new(10.0, 5.0); 24];
    let a = rollout_ce(
        &theta(),
        &PhysicalState::initial(230.0),
        &traits(),
        &Boxes::default(),
        &rewards,
    );
    let b = rollout_ce(
        &theta(),
        &PhysicalState::initial(230.0),
        &traits(),
        &Boxes::default(),
        &rewards,
    );
    assert_eq!(a, b);
}

#[test]
fn noise_free_stochastic_rollout_matches_certainty_equivalent() {
    let boxes = Boxes::default();
    let tr = ParticipantTraits {
        noise_half_width: 1e-12,
        sigma: 1e-12,
        ..traits()
    };
    let th = MotivationalState {
        p: boxes.eps,
        kp: 0.0,
        ..theta()
    };
    let rewards = vec![Rewards::new(10.0, 0.0); 12];
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let sto = rollout(
        &th,
        &PhysicalState::initial(230.0),
        &tr,
        &boxes,
        &rewards,
        RolloutMode::Stochastic(&mut rng),
    );
    let ce = rollout_ce(&th, &PhysicalState::initial(230.0), &tr, &boxes, &rewards);
    for (x, y) in sto.weights().zip(ce.weights()) {
        assert!((x - y).abs() < 1e-9);
    }
    for (x, y) in sto.thetas.iter().zip(&ce.thetas) {
        assert!(
            (x.a1 - y.a1).abs() < 1e-9 && (x.a2 - y.a2).abs() < 1e-9 && (x.p - y.p).abs() < 1e-9
        );
    }
}

#[test]
fn long_rollout_stays_in_boxes() {
    let boxes = Boxes::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let th = MotivationalState {
        k1: 5.0,
        k2: 5.0,
        kp: 5.0,
        ..theta()
    };
    let rewards = vec![Rewards::new(30.0, 30.0); 24];
    let traj = rollout(
        &th,
        &PhysicalState::initial(395.0),
        &traits(),
        &boxes,
        &rewards,
        RolloutMode::Stochastic(&mut rng),
    );
    for t in &traj.thetas {
        t.validate(&boxes).unwrap();
    }
    for w in traj.weights() {
        assert!(boxes.weight.contains(w));
    }
    assert!(traj.clamps > 0);
}

fn arb_theta(boxes: Boxes) -> impl Strategy<Value = MotivationalState> {
    let pb = boxes.probability();
    (
        boxes.motivation.lo..=boxes.motivation.hi,
        boxes.motivation.lo..=boxes.motivation.hi,
        pb.lo..=pb.hi,
        pb.lo..=pb.hi,
        1200.0..3000.0f64,
        boxes.reward.lo..=boxes.reward.hi,
        (
            boxes.gain.lo..=boxes.gain.hi,
            boxes.gain.lo..=boxes.gain.hi,
            boxes.gain.lo..=boxes.gain.hi,
        ),
        0u32..30,
    )
        .prop_map(
            |(a1, a2, p, threshold, f_pref, reward_belief, (k1, k2, kp), week)| MotivationalState {
                a1,
                a2,
                p,
                threshold,
                f_pref,
                reward_belief,
                k1,
                k2,
                kp,
                week,
            },
        )
}

proptest! {
    #[test]
    fn plan_ignores_current_weight(th in arb_theta(Boxes::study()), w in 90.0..400.0f64) {
        let boxes = Boxes::study();
        let tr = traits();
        let plan = optimal_plan(&th, &tr, &boxes).calories;
        let dp_a = dp_oracle_plan(&th, &tr, &boxes, &DpOptions { grid_step: 4.0, reference_weight: Some(w), ..DpOptions::default() }).unwrap();
        let dp_b = dp_oracle_plan(&th, &tr, &boxes, &DpOptions { grid_step: 4.0, reference_weight: Some(200.0), ..DpOptions::default() }).unwrap();
        prop_assert_eq!(dp_a, dp_b);
        let again = optimal_plan(&th, &tr, &boxes).calories;
        prop_assert_eq!(plan, again);
    }

    #[test]
    fn more_motivation_never_raises_calories(th in arb_theta(Boxes::study()), da1 in 0.0..1.0e5f64, dx in 0.0..1.0e8f64) {
        let tr = traits();
        let coef = PlanCoefficients::new(&tr);
        let base = coef.raw(th.f_pref, th.a1, th.a2 * th.reward_belief);
        let more_a1 = coef.raw(th.f_pref, th.a1 + da1, th.a2 * th.reward_belief);
        let more_x = coef.raw(th.f_pref, th.a1, th.a2 * th.reward_belief + dx);
        for j in 0..DAYS {
            prop_assert!(more_a1[j] <= base[j]);
            prop_assert!(more_x[j] <= base[j]);
        }
    }

    #[test]
    fn untriggered_weeks_decay_geometrically(n in 1usize..12, a1 in 0.0..10.0f64, a2 in 0.0..10.0f64, p in 0.05..0.95f64) {
        let tr = traits();
        let boxes = Boxes::default();
        let mut th = MotivationalState { a1, a2, p, kp: 0.0, threshold: 0.95, ..theta() };
        let start = th;
        for _ in 0..n {
            let out = outcome(false, false, Rewards::ZERO, th.f_pref);
            th = between_week_update(&th, &out, &tr, &boxes).state;
        }
        let gap = |x: f64, base: f64| (x - base).abs();
        prop_assert!((gap(th.a1, tr.a1_base) - tr.gamma1.powi(n as i32) * gap(start.a1, tr.a1_base)).abs() < 1e-9);
        prop_assert!((gap(th.a2, tr.a2_base) - tr.gamma2.powi(n as i32) * gap(start.a2, tr.a2_base)).abs() < 1e-9);
        prop_assert!((gap(th.p, tr.p_base) - tr.gamma_p.powi(n as i32) * gap(start.p, tr.p_base)).abs() < 1e-9);
    }

    #[test]
    fn preference_is_a_convex_combination(th in arb_theta(Boxes::default()), fs in proptest::array::uniform7(800.0..4000.0f64)) {
        let mut out = outcome(false, false, Rewards::ZERO, 2000.0);
        out.f_path = fs;
        let next = between_week_update(&th, &out, &traits(), &Boxes::default()).state;
        let lo = fs.iter().cloned().fold(th.f_pref, f64::min);
        let hi = fs.iter().cloned().fold(th.f_pref, f64::max);
        prop_assert!(next.f_pref >= lo - 1e-9 && next.f_pref <= hi + 1e-9);
    }

    #[test]
    fn reward_belief_is_a_running_mean(r in 0.0..30.0f64, r0 in 0.0..30.0f64, weeks in 1usize..40) {
        let tr = traits();
        let boxes = Boxes::default();
        let mut th = MotivationalState { reward_belief: r0, week: 0, ..theta() };
        for _ in 0..weeks {
            let out = outcome(true, false, Rewards::new(r, 0.0), th.f_pref);
            th = between_week_update(&th, &out, &tr, &boxes).state;
        }
        prop_assert!((th.reward_belief - r).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 10, ..ProptestConfig::default() })]

    #[test]
    fn random_update_sequences_stay_in_boxes(seed in any::<u64>()) {
        let boxes = Boxes::default();
        let tr = traits();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        use rand::Rng;
        let mut th = theta();
        let mut phys = PhysicalState::initial(200.0);
        for _ in 0..1000 {
            th.k1 = rng.random_range(0.0..=5.0);
            th.k2 = rng.random_range(0.0..=5.0);
            th.kp = rng.random_range(0.0..=5.0);
            let r = Rewards::new(rng.random_range(0.0..=30.0), rng.random_range(0.0..=30.0));
            let wk = simulate_week(&phys, &th, &tr, &boxes, r, &mut rng);
            wk.theta.validate(&boxes).unwrap();
            for w in wk.outcome.w_path {
                prop_assert!(boxes.weight.contains(w));
            }
            th = wk.theta;
            phys = wk.phys;
        }
    }
}
