use std::path::PathBuf;

use incentives_core::estimation::ObservationSet;
use incentives_core::incentives::*;
use incentives_core::mip::*;
use incentives_core::model::*;
use incentives_core::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn traits() -> ParticipantTraits {
    ParticipantTraits {
        b: 0.998445,
        c: 0.998445 * 2.20462 / 7700.0,
        k: -0.30,
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

fn theta(scale: f64) -> MotivationalState {
    MotivationalState {
        a1: 6.0e4 * scale,
        a2: 1.0e7 * scale,
        p: 0.6,
        threshold: 0.55,
        f_pref: 2400.0,
        reward_belief: 8.0,
        k1: 2.0e4,
        k2: 3.0e5,
        kp: 0.1,
        week: 0,
    }
}

fn smle_model() -> MipModel {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let rewards: Vec<Rewards> = (0..4).map(|t| Rewards::new(5.0 * t as f64, 0.0)).collect();
    let traj = rollout(
        &theta(1.0),
        &PhysicalState::initial(210.0),
        &traits(),
        &Boxes::study(),
        &rewards,
        RolloutMode::Stochastic(&mut rng),
    );
    let mut obs = ObservationSet::from_trajectory(&traj);
    obs.weights[2][4] = None;
    build_smle_mip(&obs, &traits(), &Boxes::study(), &SmleMipOptions::default()).unwrap()
}

fn inputs() -> Vec<PlanningInput> {
    [
        (1.0, Eligibility::BOTH),
        (
            0.5,
            Eligibility {
                weight: true,
                calorie: false,
            },
        ),
    ]
    .into_iter()
    .enumerate()
    .map(|(u, (scale, eligibility))| PlanningInput {
        estimate: InitialConditions {
            w00: 200.0 + 15.0 * u as f64,
            theta0: theta(scale),
        },
        traits: traits(),
        history: vec![Rewards::new(10.0, 0.0)],
        eligibility,
    })
    .collect()
}

#[test]
fn smle_model_round_trips_through_both_formats() {
    let m = smle_model();
    assert_eq!(read_lp(&write_lp(&m)).unwrap(), m);
    assert_eq!(read_mps(&write_mps(&m)).unwrap(), m);
}

#[test]
fn incentive_model_round_trips_through_both_formats() {
    let grid = RewardGrid(vec![0.0, 5.0, 10.0]);
    for loss in [LossFunction::hinge(), LossFunction::indicator()] {
        let m = build_incentive_mip(
            &inputs(),
            40.0,
            &loss,
            &grid,
            4,
            &Boxes::study(),
            &IncentiveMipOptions::default(),
        )
        .unwrap();
        assert_eq!(read_lp(&write_lp(&m)).unwrap(), m);
        assert_eq!(read_mps(&write_mps(&m)).unwrap(), m);
    }
}

#[test]
fn certainty_equivalent_schedule_satisfies_incentive_rows() {
    let grid = RewardGrid(vec![0.0, 5.0, 10.0]);
    let boxes = Boxes::study();
    let opts = IncentiveMipOptions::default();
    let schedules = vec![
        vec![
            Rewards::new(10.0, 5.0),
            Rewards::new(0.0, 0.0),
            Rewards::new(5.0, 10.0),
        ],
        vec![
            Rewards::new(5.0, 0.0),
            Rewards::new(10.0, 0.0),
            Rewards::new(0.0, 0.0),
        ],
    ];
    let spend: f64 = schedules.iter().flatten().map(Rewards::total).sum();
    for loss in [LossFunction::hinge(), LossFunction::indicator()] {
        let m = build_incentive_mip(&inputs(), spend, &loss, &grid, 4, &boxes, &opts).unwrap();
        let x =
            incentive_assignment(&m, &inputs(), &schedules, &loss, &grid, &boxes, &opts).unwrap();
        let report = check_assignment(&m, &x).unwrap();
        assert!(
            report.max_violation <= 1e-6,
            "{:?} {}",
            report.worst,
            report.max_violation
        );
        // objective equals the loss of the certainty-equivalent rollout
        let mut expected = 0.0;
        for (input, sched) in inputs().iter().zip(&schedules) {
            let mut all = input.history.clone();
            all.extend(sched);
            let traj = rollout_ce(
                &input.estimate.theta0,
                &input.estimate.initial_phys(),
                &input.traits,
                &boxes,
                &all,
            );
            expected += loss.eval(traj.final_weight().unwrap(), input.estimate.w00);
        }
        assert!(
            (report.objective - expected).abs() < 1e-9,
            "{} vs {expected}",
            report.objective
        );
        // one dollar less budget makes the same schedule infeasible
        let tight =
            build_incentive_mip(&inputs(), spend - 1.0, &loss, &grid, 4, &boxes, &opts).unwrap();
        let report = check_assignment(&tight, &x).unwrap();
        assert_eq!(report.violated(1e-6), vec!["budget"]);
    }
}

#[test]
fn ineligible_reward_type_is_fixed_at_zero() {
    let grid = RewardGrid(vec![0.0, 5.0, 10.0]);
    let m = build_incentive_mip(
        &inputs(),
        100.0,
        &LossFunction::hinge(),
        &grid,
        3,
        &Boxes::study(),
        &IncentiveMipOptions::default(),
    )
    .unwrap();
    for i in 1..3 {
        let v = &m.variables[m.symbol_index(&format!("yc[1,1,{i}]")).unwrap()];
        assert_eq!(v.hi, 0.0);
        let v = &m.variables[m.symbol_index(&format!("yc[0,1,{i}]")).unwrap()];
        assert_eq!(v.hi, 1.0);
    }
}

fn fake_solver(dir: &std::path::Path, body: &str) -> PathBuf {
    use std::os::unix::fs::PermissionsExt;
    let path = dir.join("solver.sh");
    std::fs::write(&path, format!("#!/bin/sh\n{body}\n")).unwrap();
    std::fs::set_permissions(&path, std::fs::Permissions::from_mode(0o755)).unwrap();
    path
}

#[test]
fn bridge_reads_back_and_checks_a_solver_answer() {
    let dir = tempfile::tempdir().unwrap();
    let mut m = MipModel::new();
    let x = m.add_var("x", 0.0, 10.0, VarKind::Continuous).unwrap();
    let y = m.add_var("y[0]", 0.0, 1.0, VarKind::Binary).unwrap();
    m.add_row("cap", vec![(x, 1.0), (y, 5.0)], Sense::Le, 8.0);
    m.set_objective(vec![(x, -1.0), (y, -2.0)], 0.0);
    let answer = dir.path().join("answer.txt");
    std::fs::write(&answer, "status optimal\nx 3\ny_0 1\n").unwrap();
    for format in [ModelFormat::Lp, ModelFormat::Mps] {
        let script = fake_solver(
            dir.path(),
            &format!("test -s \"$1\" || exit 3\ncp {} \"$2\"", answer.display()),
        );
        let cmd = SolverCommand {
            program: script,
            args: vec!["{model}".into(), "{solution}".into()],
            format,
        };
        let out = solve_external(&m, &cmd, &dir.path().join("work")).unwrap();
        assert_eq!(out.status.as_deref(), Some("optimal"));
        assert_eq!(out.report.max_violation, 0.0);
        assert_eq!(out.report.objective, -5.0);
    }
}

#[test]
fn bridge_surfaces_solver_failure_and_unknown_names() {
    let dir = tempfile::tempdir().unwrap();
    let mut m = MipModel::new();
    m.add_var("x", 0.0, 1.0, VarKind::Continuous).unwrap();
    let failing = fake_solver(dir.path(), "echo boom >&2\nexit 4");
    let cmd = SolverCommand {
        program: failing,
        args: vec![],
        format: ModelFormat::Lp,
    };
    assert!(matches!(
        solve_external(&m, &cmd, dir.path()),
        Err(Error::Solver(_))
    ));
    let wrong = fake_solver(dir.path(), "echo 'z 1' > \"$1\"");
    let cmd = SolverCommand {
        program: wrong,
        args: vec!["{solution}".into()],
        format: ModelFormat::Lp,
    };
    assert!(solve_external(&m, &cmd, dir.path()).is_err());
}
