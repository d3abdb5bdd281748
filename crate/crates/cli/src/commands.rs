use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use incentives_core::cohort::{generate_synthetic_cohort, CohortSpec};
use incentives_core::estimation::synthetic::{planted_observations, NoiseSpec};
use incentives_core::estimation::{solve_smle, surrogate_bound_check, ObservationSet};
use incentives_core::incentives::{
    dia_plan, BudgetLedger, DiaConfig, DiaParticipant, Eligibility, LossKind, PlanningInput,
};
use incentives_core::io::{
    load_observations, write_observations, write_spend_curves, write_sweep_long,
    write_sweep_summary, Config, RunManifest,
};
use incentives_core::mip::{
    build_incentive_mip, build_smle_mip, read_lp, read_mps, write_lp, write_mps,
};
use incentives_core::model::{InitialConditions, ParticipantTraits, Rewards};
use incentives_core::prediction::{predict_final_weight, Belief};
use incentives_core::trial::{budget_sweep, run_trial, Policy};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Cli, Command, Log, MipFormat, MipKind};

struct Run<'a> {
    config: Config,
    out: PathBuf,
    manifest: RunManifest,
    log: &'a Log,
}

impl Run<'_> {
    fn input(&mut self, path: &Path) -> Result<()> {
        self.manifest.add_input(path)?;
        Ok(())
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.out.join(name);
        std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.manifest.add_output(&self.out, name)?;
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(value)? + "\n";
        self.write(name, text.as_bytes())
    }

    fn cohort(&mut self, path: Option<&Path>) -> Result<CohortSpec> {
        match path {
            Some(p) => {
                self.input(p)?;
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading {}", p.display()))?;
                let cohort: CohortSpec = serde_json::from_str(&text)
                    .with_context(|| format!("parsing cohort {}", p.display()))?;
                cohort.validate(&self.config.boxes)?;
                Ok(cohort)
            }
            None => {
                let c = &self.config.cohort;
                Ok(generate_synthetic_cohort(
                    c.size,
                    self.config.seed,
                    &c.distributions,
                    &self.config.boxes,
                )?)
            }
        }
    }

    fn warn_small(&self, cohort: &CohortSpec) {
        let n = cohort.participants.len();
        if n < 5 {
            self.log.warn(&format!(
                "cohort has {n} participants; the bottom-5 metric averages all {n}"
            ));
        }
    }

    fn observations(&mut self, path: &Path) -> Result<BTreeMap<String, ObservationSet>> {
        self.input(path)?;
        Ok(load_observations(path, &self.config.boxes)?)
    }

    /// Traits and eligibility from the cohort record, else the configured defaults.
    fn member(&self, cohort: Option<&CohortSpec>, id: &str) -> (ParticipantTraits, Eligibility) {
        cohort
            .and_then(|c| c.participants.iter().find(|m| m.id == id))
            .map_or((self.config.participant, Eligibility::BOTH), |m| {
                (m.traits, m.eligibility)
            })
    }
}

pub fn run(cli: &Cli, log: &Log) -> Result<()> {
    let mut config = match &cli.common.config {
        Some(p) => Config::load(p).with_context(|| format!("loading config {}", p.display()))?,
        None => Config::default(),
    };
    if let Some(seed) = cli.common.seed {
        config.seed = seed;
        config.trial.master_seed = seed;
        config.prediction.seed = seed;
    }
    std::fs::create_dir_all(&cli.common.out)
        .with_context(|| format!("creating {}", cli.common.out.display()))?;
    let name = command_name(&cli.command);
    let args: Vec<String> = std::env::args().skip(1).collect();
    let manifest = RunManifest::new(name, args, &config);
    let mut run = Run {
        config,
        out: cli.common.out.clone(),
        manifest,
        log,
    };
    if let Some(p) = &cli.common.config {
        run.input(p)?;
    }
    match &cli.command {
        Command::GenCohort { n } => gen_cohort(&mut run, *n)?,
        Command::Fit { obs, cohort } => fit(&mut run, obs, cohort.as_deref())?,
        Command::Predict {
            estimates,
            obs,
            cohort,
            weeks,
        } => predict(
            &mut run,
            estimates,
            obs.as_deref(),
            cohort.as_deref(),
            *weeks,
        )?,
        Command::Optimize {
            obs,
            cohort,
            budget,
            spent,
        } => optimize(&mut run, obs, cohort.as_deref(), *budget, *spent)?,
        Command::Simulate {
            cohort,
            policy,
            budget,
            replicate,
        } => simulate(&mut run, cohort.as_deref(), policy, *budget, *replicate)?,
        Command::Sweep { cohort } => sweep(&mut run, cohort.as_deref())?,
        Command::ExportMip {
            weeks,
            kind,
            format,
            obs,
            participant,
            budget,
        } => export_mip(
            &mut run,
            *weeks,
            *kind,
            *format,
            obs.as_deref(),
            participant.as_deref(),
            *budget,
        )?,
        Command::BoundCheck { p, g, eps } => bound_check(&mut run, *p, *g, *eps)?,
    }
    run.manifest.write(&run.out)?;
    Ok(())
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::GenCohort { .. } => "gen-cohort",
        Command::Fit { .. } => "fit",
        Command::Predict { .. } => "predict",
        Command::Optimize { .. } => "optimize",
        Command::Simulate { .. } => "simulate",
        Command::Sweep { .. } => "sweep",
        Command::ExportMip { .. } => "export-mip",
        Command::BoundCheck { .. } => "bound-check",
    }
}

fn gen_cohort(run: &mut Run, n: Option<usize>) -> Result<()> {
    let c = &run.config.cohort;
    let cohort = generate_synthetic_cohort(
        n.unwrap_or(c.size),
        run.config.seed,
        &c.distributions,
        &run.config.boxes,
    )?;
    run.log.info(&format!(
        "generated {} participants",
        cohort.participants.len()
    ));
    run.write_json("cohort.json", &cohort)
}

#[derive(Debug, Serialize, Deserialize)]
struct FitRecord {
    initial_conditions: InitialConditions,
    objective: f64,
    weeks: usize,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct FitOutput {
    estimates: BTreeMap<String, FitRecord>,
    failures: BTreeMap<String, String>,
}

fn fit(run: &mut Run, obs: &Path, cohort: Option<&Path>) -> Result<()> {
    let data = run.observations(obs)?;
    let cohort = cohort.map(|p| run.cohort(Some(p))).transpose()?;
    let mut out = FitOutput::default();
    for (id, o) in &data {
        let (traits, _) = run.member(cohort.as_ref(), id);
        match solve_smle(o, &traits, &run.config.boxes, &run.config.estimation) {
            Ok(r) => {
                run.log.info(&format!("{id}: objective {:.4}", r.objective));
                out.estimates.insert(
                    id.clone(),
                    FitRecord {
                        initial_conditions: r.initial_conditions(),
                        objective: r.objective,
                        weeks: o.weeks(),
                    },
                );
            }
            Err(e) => {
                run.log.info(&format!("{id}: {e}"));
                out.failures.insert(id.clone(), e.to_string());
            }
        }
    }
    run.write_json("estimates.json", &out)
}

#[derive(Debug, Serialize)]
struct ForecastRecord {
    p_success: f64,
    mean_final_weight: f64,
    p05: f64,
    p50: f64,
    p95: f64,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let i = ((sorted.len() - 1) as f64 * q).round() as usize;
    sorted[i]
}

fn predict(
    run: &mut Run,
    estimates: &Path,
    obs: Option<&Path>,
    cohort: Option<&Path>,
    weeks: usize,
) -> Result<()> {
    run.input(estimates)?;
    let text = std::fs::read_to_string(estimates)
        .with_context(|| format!("reading {}", estimates.display()))?;
    let fits: FitOutput = serde_json::from_str(&text).context("parsing estimates")?;
    let history = obs.map(|p| run.observations(p)).transpose()?;
    let cohort = cohort.map(|p| run.cohort(Some(p))).transpose()?;
    let mut out = BTreeMap::new();
    for (id, rec) in &fits.estimates {
        let (traits, _) = run.member(cohort.as_ref(), id);
        let mut rewards: Vec<Rewards> = history
            .as_ref()
            .and_then(|h| h.get(id))
            .map(|o| o.rewards.clone())
            .unwrap_or_default();
        if rewards.len() > weeks {
            bail!(
                "{id} has {} weeks of history, beyond the {weeks}-week horizon",
                rewards.len()
            );
        }
        rewards.resize(weeks, Rewards::ZERO);
        let f = predict_final_weight(
            Belief::Point(rec.initial_conditions),
            &rewards,
            &traits,
            &run.config.boxes,
            &run.config.prediction,
        )?;
        let mut sorted = f.samples.clone();
        sorted.sort_by(f64::total_cmp);
        out.insert(
            id.clone(),
            ForecastRecord {
                p_success: f.p_success,
                mean_final_weight: sorted.iter().sum::<f64>() / sorted.len() as f64,
                p05: quantile(&sorted, 0.05),
                p50: quantile(&sorted, 0.5),
                p95: quantile(&sorted, 0.95),
            },
        );
    }
    run.write_json("forecast.json", &out)
}

#[derive(Debug, Serialize)]
struct PlannedParticipant {
    id: String,
    offer: Rewards,
    schedule: Vec<Rewards>,
    estimate: Option<InitialConditions>,
}

#[derive(Debug, Serialize)]
struct PlanOutput {
    week: usize,
    budget: f64,
    spent: f64,
    planned_spend: f64,
    loss: f64,
    participants: Vec<PlannedParticipant>,
    failures: BTreeMap<String, String>,
}

fn optimize(
    run: &mut Run,
    obs: &Path,
    cohort: Option<&Path>,
    budget: f64,
    spent: f64,
) -> Result<()> {
    let data = run.observations(obs)?;
    let cohort = cohort.map(|p| run.cohort(Some(p))).transpose()?;
    let ids: Vec<&String> = data.keys().collect();
    let members: Vec<DiaParticipant> = data
        .iter()
        .map(|(id, o)| {
            let (traits, eligibility) = run.member(cohort.as_ref(), id);
            DiaParticipant {
                observations: o.clone(),
                traits,
                eligibility,
                warm_start: None,
                prior: None,
            }
        })
        .collect();
    let mut ledger = BudgetLedger::new(budget)?;
    ledger.commit(spent)?;
    let inc = &run.config.incentives;
    let config = DiaConfig {
        loss: inc.loss,
        grid: inc.grid.clone(),
        optimizer: inc.optimizer,
        estimation: run.config.estimation.clone(),
        reestimation: run.config.estimation.clone().fast(),
    };
    let outcome = dia_plan(&members, &ledger, &config, &run.config.boxes)?;
    let participants = ids
        .iter()
        .enumerate()
        .map(|(u, id)| PlannedParticipant {
            id: id.to_string(),
            offer: outcome.incentives[u],
            schedule: outcome.plan.schedules[u].clone(),
            estimate: outcome.estimates[u],
        })
        .collect();
    let failures = outcome
        .failures
        .iter()
        .map(|(u, msg)| (ids[*u].clone(), msg.clone()))
        .collect();
    run.log.info(&format!(
        "week {}: planned spend {}",
        outcome.week, outcome.plan.total_spend
    ));
    run.write_json(
        "plan.json",
        &PlanOutput {
            week: outcome.week,
            budget,
            spent,
            planned_spend: outcome.plan.total_spend,
            loss: outcome.plan.loss,
            participants,
            failures,
        },
    )
}

fn parse_policy(label: &str) -> Result<Policy> {
    if label == "fixed" {
        return Ok(Policy::Fixed);
    }
    let rest = label
        .strip_prefix("dia-")
        .ok_or_else(|| anyhow!("unknown policy {label:?}"))?;
    let (loss, q) = rest
        .split_once("-q")
        .ok_or_else(|| anyhow!("policy {label:?} lacks -q<probability>"))?;
    let loss = match loss {
        "indicator" => LossKind::Indicator,
        "hinge" => LossKind::Hinge,
        other => bail!("unknown loss {other:?}"),
    };
    let q: f64 = q
        .parse()
        .with_context(|| format!("probability in {label:?}"))?;
    Ok(Policy::Dia { loss, q })
}

fn simulate(
    run: &mut Run,
    cohort: Option<&Path>,
    policy: &str,
    budget: f64,
    replicate: usize,
) -> Result<()> {
    let policy = parse_policy(policy)?;
    let cohort = run.cohort(cohort)?;
    run.warn_small(&cohort);
    run.config.trial.validate(&run.config.boxes)?;
    let cell = run_trial(
        &run.config.trial,
        &cohort,
        &policy,
        budget,
        replicate,
        &run.config.boxes,
    )?;
    run.log.info(&format!(
        "{}: {} of {} succeeded, spent {} of {budget}",
        policy.label(),
        cell.success_count,
        cohort.participants.len(),
        cell.total_spend()
    ));
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["participant_id", "day", "weight_lbs"])?;
    for (m, path) in cohort.participants.iter().zip(&cell.weights) {
        for (d, v) in path.iter().enumerate() {
            w.write_record([m.id.clone(), d.to_string(), v.to_string()])?;
        }
    }
    let weights = w.into_inner().map_err(|e| anyhow!("{e}"))?;
    run.write("weights.csv", &weights)?;
    let observed: BTreeMap<String, ObservationSet> = cohort
        .participants
        .iter()
        .map(|m| m.id.clone())
        .zip(cell.observations.iter().cloned())
        .collect();
    let mut obs = Vec::new();
    write_observations(&mut obs, &observed)?;
    run.write("observations.csv", &obs)?;
    run.write_json("cell.json", &cell)
}

fn sweep(run: &mut Run, cohort: Option<&Path>) -> Result<()> {
    let cohort = run.cohort(cohort)?;
    run.warn_small(&cohort);
    let log = run.log;
    let started = std::time::Instant::now();
    let progress = |done: usize, total: usize| log.info(&format!("cell {done}/{total}"));
    let results = budget_sweep(
        &run.config.trial,
        &cohort,
        &run.config.boxes,
        Some(&progress),
    )?;
    let violations = results.budget_violations().len();
    log.info(&format!(
        "sweep finished in {:.1}s, {violations} budget violations",
        started.elapsed().as_secs_f64()
    ));
    let mut long = Vec::new();
    write_sweep_long(&mut long, &results)?;
    run.write("sweep_long.csv", &long)?;
    let mut summary = Vec::new();
    write_sweep_summary(&mut summary, &results)?;
    run.write("sweep_summary.csv", &summary)?;
    let mut curves = Vec::new();
    write_spend_curves(&mut curves, &results)?;
    run.write("spend_curves.csv", &curves)?;
    if violations > 0 {
        bail!("{violations} cells exceeded their budget");
    }
    Ok(())
}

fn export_mip(
    run: &mut Run,
    weeks: usize,
    kind: MipKind,
    format: MipFormat,
    obs: Option<&Path>,
    participant: Option<&str>,
    budget: f64,
) -> Result<()> {
    let boxes = run.config.boxes.clone();
    let model = match kind {
        MipKind::Smle => {
            let (o, traits) = match obs {
                Some(p) => {
                    let data = run.observations(p)?;
                    let (id, o) = match participant {
                        Some(id) => data
                            .get_key_value(id)
                            .ok_or_else(|| anyhow!("participant {id} not in {}", p.display()))?,
                        None => data
                            .iter()
                            .next()
                            .ok_or_else(|| anyhow!("{} holds no participants", p.display()))?,
                    };
                    if o.weeks() < weeks {
                        bail!("{id} has {} weeks, fewer than {weeks}", o.weeks());
                    }
                    (o.truncated(weeks), run.member(None, id).0)
                }
                None => {
                    let cohort = run.cohort(None)?;
                    let m = &cohort.participants[0];
                    let rewards: Vec<Rewards> =
                        (0..weeks).map(|t| cohort.fixed_offer(m, t)).collect();
                    let mut rng = ChaCha8Rng::seed_from_u64(run.config.seed);
                    let noise = NoiseSpec::full(m.traits.sigma, 1.0 - run.config.trial.p_obs);
                    let (o, _) = planted_observations(
                        &m.truth, &m.traits, &boxes, &rewards, &noise, &mut rng,
                    );
                    (o, m.traits)
                }
            };
            build_smle_mip(&o, &traits, &boxes, &run.config.mip.smle)?
        }
        MipKind::Incentive => {
            let cohort = run.cohort(None)?;
            let inputs: Vec<PlanningInput> = cohort
                .participants
                .iter()
                .take(2)
                .map(|m| PlanningInput {
                    estimate: m.truth,
                    traits: m.traits,
                    history: Vec::new(),
                    eligibility: m.eligibility,
                })
                .collect();
            let inc = &run.config.incentives;
            build_incentive_mip(
                &inputs,
                budget,
                &inc.loss,
                &inc.grid,
                weeks,
                &boxes,
                &run.config.mip.incentive,
            )?
        }
    };
    let (name, text) = match format {
        MipFormat::Lp => ("model.lp", write_lp(&model)),
        MipFormat::Mps => ("model.mps", write_mps(&model)),
    };
    let reparsed = match format {
        MipFormat::Lp => read_lp(&text)?,
        MipFormat::Mps => read_mps(&text)?,
    };
    if reparsed.variables.len() != model.variables.len()
        || reparsed.constraints.len() != model.constraints.len()
    {
        bail!("exported model does not parse back to the same size");
    }
    run.log.info(&format!(
        "{name}: {} variables ({} binary), {} rows",
        model.variables.len(),
        model.binary_count(),
        model.constraints.len()
    ));
    run.write(name, text.as_bytes())
}

#[derive(Debug, Serialize)]
struct BoundCheck {
    p: f64,
    g: bool,
    eps: f64,
    lower: f64,
    neg_log_likelihood: f64,
    upper: f64,
}

fn bound_check(run: &mut Run, p: f64, g: u8, eps: f64) -> Result<()> {
    let g = match g {
        0 => false,
        1 => true,
        _ => bail!("g must be 0 or 1"),
    };
    let (lower, mid, upper) = surrogate_bound_check(p, g, eps)?;
    let record = BoundCheck {
        p,
        g,
        eps,
        lower,
        neg_log_likelihood: mid,
        upper,
    };
    println!("{lower:.4} <= {mid:.4} <= {upper:.4}");
    run.write_json("bound_check.json", &record)
}
