use criterion::{criterion_group, criterion_main, Criterion};
use incentives_core::cohort::{generate_synthetic_cohort, CohortDistributions};
use incentives_core::estimation::synthetic::{planted_observations, NoiseSpec};
use incentives_core::estimation::{eval_eta, solve_smle, EtaOptions, SmleConfig};
use incentives_core::incentives::LossKind;
use incentives_core::incentives::{
    optimize_incentives, BudgetLedger, LossFunction, OptimizerConfig, PlanningInput, RewardGrid,
};
use incentives_core::model::{dp_oracle_plan, optimal_plan, Boxes, DpOptions, Rewards};
use incentives_core::trial::{run_trial, Policy, TrialConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

fn benches(c: &mut Criterion) {
    let boxes = Boxes::study();
    let cohort = generate_synthetic_cohort(8, 1, &CohortDistributions::default(), &boxes).unwrap();
    let m = &cohort.participants[0];

    c.bench_function("optimal_plan", |b| {
        b.iter(|| optimal_plan(black_box(&m.truth.theta0), &m.traits, &boxes))
    });
    c.bench_function("dp_oracle_plan", |b| {
        let opts = DpOptions {
            grid_step: 2.0,
            ..DpOptions::default()
        };
        b.iter(|| dp_oracle_plan(black_box(&m.truth.theta0), &m.traits, &boxes, &opts))
    });

    let rewards: Vec<Rewards> = (0..8).map(|t| cohort.fixed_offer(m, t)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (obs, _) = planted_observations(
        &m.truth,
        &m.traits,
        &boxes,
        &rewards,
        &NoiseSpec::full(2.0, 0.3),
        &mut rng,
    );
    c.bench_function("eval_eta_nominal_8w", |b| {
        b.iter(|| {
            eval_eta(
                black_box(&m.truth),
                &obs,
                &m.traits,
                &boxes,
                &EtaOptions::nominal(),
            )
        })
    });
    let mut group = c.benchmark_group("slow");
    group.sample_size(10);
    group.bench_function("solve_smle_fast_8w", |b| {
        b.iter(|| {
            solve_smle(
                black_box(&obs),
                &m.traits,
                &boxes,
                &SmleConfig::nominal().fast(),
            )
        })
    });

    let inputs: Vec<PlanningInput> = cohort
        .participants
        .iter()
        .map(|p| PlanningInput {
            estimate: p.truth,
            traits: p.traits,
            history: (0..2).map(|t| cohort.fixed_offer(p, t)).collect(),
            eligibility: p.eligibility,
        })
        .collect();
    let mut ledger = BudgetLedger::new(1000.0).unwrap();
    ledger.commit(100.0).unwrap();
    let cfg = OptimizerConfig {
        beam_width: 8,
        lookahead: Some(1),
        ..OptimizerConfig::default()
    };
    group.bench_function("optimize_incentives_8x22w", |b| {
        b.iter(|| {
            optimize_incentives(
                &inputs,
                &ledger,
                &LossFunction::hinge(),
                &RewardGrid::standard(),
                &cfg,
                &boxes,
            )
        })
    });

    let trial = TrialConfig {
        weeks: 6,
        ..TrialConfig::default()
    };
    let budget = cohort.fixed_total(6) + 100.0;
    let policy = Policy::Dia {
        loss: LossKind::Hinge,
        q: 1.0,
    };
    group.bench_function("run_trial_dia_8x6w", |b| {
        b.iter(|| run_trial(&trial, &cohort, &policy, budget, 0, &boxes))
    });
    group.finish();
}

criterion_group!(pipeline, benches);
criterion_main!(pipeline);
