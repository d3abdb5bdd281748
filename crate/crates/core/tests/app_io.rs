mod common;

use std::collections::BTreeMap;

use incentives_core::estimation::synthetic::{planted_observations, NoiseSpec};
use incentives_core::estimation::ObservationSet;
use incentives_core::io::*;
use incentives_core::model::{Boxes, Rewards};
use incentives_core::trial::{budget_sweep, Policy, TrialConfig};
use incentives_core::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const HEADER: &str = "participant_id,week,day,weight_lbs,goal_met,reward_w,reward_c\n";

fn sample() -> BTreeMap<String, ObservationSet> {
    let boxes = Boxes::study();
    let mut out = BTreeMap::new();
    for (i, id) in ["A07", "B12"].into_iter().enumerate() {
        let rewards = common::random_rewards(4, i as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(i as u64);
        let (obs, _) = planted_observations(
            &common::planted(),
            &common::traits(),
            &boxes,
            &rewards,
            &NoiseSpec::full(2.0, 0.3),
            &mut rng,
        );
        out.insert(id.to_string(), obs);
    }
    out
}

fn parse(text: &str) -> incentives_core::Result<BTreeMap<String, ObservationSet>> {
    read_observations(text.as_bytes(), FILE_WEEKS, &Boxes::study())
}

fn week_rows(id: &str, week: usize, reward_w: &str) -> String {
    let mut s = String::new();
    for d in 0..6 {
        s += &format!("{id},{week},{d},{},,,\n", 200.0 - d as f64 * 0.1);
    }
    s + &format!("{id},{week},6,,1,{reward_w},0\n")
}

#[test]
fn header_only_gives_empty_map() {
    assert!(parse(HEADER).unwrap().is_empty());
}

#[test]
fn round_trip_is_lossless_and_byte_identical() {
    let data = sample();
    let mut first = Vec::new();
    write_observations(&mut first, &data).unwrap();
    let back = parse(std::str::from_utf8(&first).unwrap()).unwrap();
    assert_eq!(back, data);
    let mut second = Vec::new();
    write_observations(&mut second, &back).unwrap();
    assert_eq!(first, second);
    assert!(first.starts_with(HEADER.as_bytes()));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("obs.csv");
    save_observations(&path, &data).unwrap();
    assert_eq!(load_observations(&path, &Boxes::study()).unwrap(), data);
}

#[test]
fn hand_written_file_parses() {
    let text = format!(
        "{HEADER}{}{}",
        week_rows("P1", 0, "10"),
        week_rows("P1", 1, "0")
    );
    let data = parse(&text).unwrap();
    let obs = &data["P1"];
    assert_eq!(obs.weeks(), 2);
    assert_eq!(obs.weights[0][6], None);
    assert_eq!(obs.weights[1][2], Some(199.8));
    assert_eq!(obs.rewards, vec![Rewards::new(10.0, 0.0), Rewards::ZERO]);
    assert_eq!(obs.goals, vec![true, true]);
}

#[test]
fn reward_above_box_is_rejected_with_line_number() {
    let text = format!("{HEADER}{}", week_rows("P1", 0, "31"));
    let err = parse(&text).unwrap_err();
    let Error::Schema(msg) = err else {
        panic!("{err}")
    };
    assert!(msg.contains("line 8"), "{msg}");
    assert!(msg.contains("reward_w 31"), "{msg}");
}

#[test]
fn reports_at_most_ten_offending_lines() {
    let mut text = HEADER.to_string();
    for d in 0..15 {
        text += &format!("P1,0,{},abc,,,\n", d % 6);
    }
    let Error::Schema(msg) = parse(&text).unwrap_err() else {
        panic!()
    };
    assert_eq!(msg.lines().count(), 10);
    assert!(msg.lines().next().unwrap().starts_with("line 2:"));
}

#[test]
fn schema_violations() {
    let cases = [
        (format!("{HEADER}P1,24,0,200,,,\n"), "week 24"),
        (format!("{HEADER}P1,0,7,200,,,\n"), "day 7"),
        (format!("{HEADER}P1,0,2,200,1,,\n"), "day 6 rows only"),
        (format!("{HEADER}P1,0,0,200,,,\n"), "lacks rows"),
        (
            format!("{HEADER}{}P1,0,3,200,,,\n", week_rows("P1", 0, "0")),
            "duplicate",
        ),
        (format!("{HEADER}P1,0,6,,2,0,0\n"), "goal_met"),
        (format!("{HEADER}P1,0,1,200\n"), "line 2"),
    ];
    for (text, needle) in cases {
        let err = parse(&text).unwrap_err().to_string();
        assert!(err.contains(needle), "{needle}: {err}");
    }
    let err = parse("id,week\n").unwrap_err();
    assert!(matches!(err, Error::Parse { line: 1, .. }));
}

#[test]
fn default_config_round_trips_through_toml() {
    let config = Config::default();
    let text = config.to_toml();
    assert_eq!(Config::from_toml(&text).unwrap(), config);
    assert_eq!(Config::from_toml("").unwrap(), config);
    assert_eq!(config.digest().len(), 64);
}

#[test]
fn partial_config_keeps_other_defaults() {
    let config = Config::from_toml(
        "seed = 7\n[trial]\nreplicates = 2\n[incentives.optimizer]\nbeam_width = 3\n",
    )
    .unwrap();
    assert_eq!(config.seed, 7);
    assert_eq!(config.trial.replicates, 2);
    assert_eq!(config.trial.weeks, 24);
    assert_eq!(config.incentives.optimizer.beam_width, 3);
    assert_eq!(config.incentives.optimizer.spend_step, 5.0);
    assert_eq!(config.boxes, Boxes::study());
}

#[test]
fn bad_config_is_rejected() {
    assert!(matches!(
        Config::from_toml("seed = \"x\"").unwrap_err(),
        Error::Config(_)
    ));
    assert!(matches!(
        Config::from_toml("unknown_key = 1").unwrap_err(),
        Error::Config(_)
    ));
    assert!(matches!(
        Config::from_toml("[trial.optimizer]\nbeam = 1").unwrap_err(),
        Error::Config(_)
    ));
    assert!(matches!(
        Config::from_toml("[trial]\nreplicates = 0").unwrap_err(),
        Error::InvalidParameter { .. }
    ));
}

#[test]
fn documented_defaults_match_code() {
    let doc = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../docs/config.md"))
        .unwrap();
    let start = doc.find("```toml\n").expect("toml block") + 8;
    let end = start + doc[start..].find("```").unwrap();
    assert_eq!(&doc[start..end], Config::default().to_toml());
}

#[test]
fn manifest_records_and_verifies_outputs() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("a.txt"), "hello").unwrap();
    let config = Config::default();
    let mut m = RunManifest::new("fit", vec!["--seed".into(), "1".into()], &config);
    m.add_output(dir.path(), "a.txt").unwrap();
    m.write(dir.path()).unwrap();
    let back = RunManifest::read(dir.path()).unwrap();
    assert_eq!(back, m);
    assert_eq!(back.schema, MANIFEST_SCHEMA);
    assert_eq!(
        back.outputs[0].sha256,
        "2cf24dba5fb0a30e26e83b2ac5b9e29e1b161e5c1fa7425e73043362938b9824"
    );
    assert_eq!(back.module_versions.len(), 7);
    back.verify(dir.path()).unwrap();
    std::fs::write(dir.path().join("a.txt"), "hellO").unwrap();
    assert!(back.verify(dir.path()).is_err());
}

#[test]
fn sweep_tables_have_expected_shape() {
    let boxes = Boxes::study();
    let cohort = incentives_core::cohort::generate_synthetic_cohort(
        2,
        1,
        &incentives_core::cohort::CohortDistributions::default(),
        &boxes,
    )
    .unwrap();
    let run_in = cohort.fixed_total(2);
    let config = TrialConfig {
        weeks: 3,
        budgets: vec![run_in, run_in + 20.0],
        replicates: 2,
        policies: vec![Policy::Fixed],
        ..TrialConfig::default()
    };
    let results = budget_sweep(&config, &cohort, &boxes, None).unwrap();
    let mut long = Vec::new();
    write_sweep_long(&mut long, &results).unwrap();
    let text = String::from_utf8(long).unwrap();
    assert!(text.starts_with("policy,budget,replicate,metric,value\n"));
    assert_eq!(text.lines().count(), 1 + 4 * (4 + 3));
    let mut summary = Vec::new();
    write_sweep_summary(&mut summary, &results).unwrap();
    assert_eq!(String::from_utf8(summary).unwrap().lines().count(), 3);
    let mut curves = Vec::new();
    write_spend_curves(&mut curves, &results).unwrap();
    assert_eq!(
        String::from_utf8(curves).unwrap().lines().count(),
        1 + 2 * 3
    );
}
