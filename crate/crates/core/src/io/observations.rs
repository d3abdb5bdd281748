//! Long-format observation CSV: one row per participant, week and day.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::estimation::ObservationSet;
use crate::model::{Boxes, Rewards, DAYS};

pub const OBSERVATION_HEADER: [&str; 7] = [
    "participant_id",
    "week",
    "day",
    "weight_lbs",
    "goal_met",
    "reward_w",
    "reward_c",
];

/// Weeks a file may hold by default, numbered `0..24`.
pub const FILE_WEEKS: usize = 24;

/// Offending lines reported before giving up.
const MAX_REPORTED: usize = 10;

#[derive(Debug, Default)]
struct Partial {
    weights: Vec<[Option<f64>; DAYS]>,
    goals: Vec<Option<bool>>,
    rewards: Vec<Option<Rewards>>,
    seen: Vec<[bool; DAYS]>,
    first_line: usize,
}

impl Partial {
    fn grow(&mut self, weeks: usize) {
        if self.weights.len() < weeks {
            self.weights.resize(weeks, [None; DAYS]);
            self.goals.resize(weeks, None);
            self.rewards.resize(weeks, None);
            self.seen.resize(weeks, [false; DAYS]);
        }
    }
}

fn parse_f64(field: &str, name: &str) -> std::result::Result<f64, String> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| format!("{name} {field:?} is not a number"))?;
    if !v.is_finite() {
        return Err(format!("{name} {field:?} is not finite"));
    }
    Ok(v)
}

fn parse_index(field: &str, name: &str, limit: usize) -> std::result::Result<usize, String> {
    let v: usize = field
        .trim()
        .parse()
        .map_err(|_| format!("{name} {field:?} is not a nonnegative integer"))?;
    if v >= limit {
        return Err(format!("{name} {v} outside [0, {}]", limit - 1));
    }
    Ok(v)
}

fn parse_goal(field: &str) -> std::result::Result<bool, String> {
    match field.trim() {
        "1" | "true" => Ok(true),
        "0" | "false" => Ok(false),
        other => Err(format!("goal_met {other:?} must be 0 or 1")),
    }
}

/// id, week, day, weight, end-of-week goal and rewards.
type ParsedRow = (String, usize, usize, Option<f64>, Option<(bool, Rewards)>);

/// Parse observation rows. Every participant needs all seven days of weeks
/// `0..T`; recording outcomes and rewards go on day-6 rows only.
pub fn read_observations<R: Read>(
    reader: R,
    max_weeks: usize,
    boxes: &Boxes,
) -> Result<BTreeMap<String, ObservationSet>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            detail: e.to_string(),
        })?
        .clone();
    if header.iter().ne(OBSERVATION_HEADER) {
        return Err(Error::Parse {
            line: 1,
            detail: format!("header must be {}", OBSERVATION_HEADER.join(",")),
        });
    }
    let mut problems: Vec<String> = Vec::new();
    let mut report = |line: usize, msg: String| {
        if problems.len() < MAX_REPORTED {
            problems.push(format!("line {line}: {msg}"));
        }
    };
    let mut people: BTreeMap<String, Partial> = BTreeMap::new();
    for row in rdr.records() {
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line() as usize);
                report(line, e.to_string());
                continue;
            }
        };
        let line = row.position().map_or(0, |p| p.line() as usize);
        let parsed = (|| -> std::result::Result<ParsedRow, String> {
            let id = row[0].to_string();
            if id.is_empty() {
                return Err("participant_id is empty".into());
            }
            let week = parse_index(&row[1], "week", max_weeks)?;
            let day = parse_index(&row[2], "day", DAYS)?;
            let weight = match row[3].trim() {
                "" => None,
                w => Some(parse_f64(w, "weight_lbs")?),
            };
            let tail = (&row[4], &row[5], &row[6]);
            let weekly = if day == DAYS - 1 {
                let goal = parse_goal(tail.0)?;
                let rw = parse_f64(tail.1, "reward_w")?;
                let rc = parse_f64(tail.2, "reward_c")?;
                for (name, v) in [("reward_w", rw), ("reward_c", rc)] {
                    if !boxes.reward.contains(v) {
                        return Err(format!(
                            "{name} {v} outside [{}, {}]",
                            boxes.reward.lo, boxes.reward.hi
                        ));
                    }
                }
                Some((goal, Rewards::new(rw, rc)))
            } else {
                if [tail.0, tail.1, tail.2].iter().any(|f| !f.is_empty()) {
                    return Err(format!(
                        "goal_met and rewards belong on day {} rows only",
                        DAYS - 1
                    ));
                }
                None
            };
            Ok((id, week, day, weight, weekly))
        })();
        match parsed {
            Err(msg) => report(line, msg),
            Ok((id, week, day, weight, weekly)) => {
                let p = people.entry(id.clone()).or_insert_with(|| Partial {
                    first_line: line,
                    ..Partial::default()
                });
                p.grow(week + 1);
                if p.seen[week][day] {
                    report(
                        line,
                        format!("duplicate row for {id} week {week} day {day}"),
                    );
                    continue;
                }
                p.seen[week][day] = true;
                p.weights[week][day] = weight;
                if let Some((goal, rewards)) = weekly {
                    p.goals[week] = Some(goal);
                    p.rewards[week] = Some(rewards);
                }
            }
        }
    }
    let mut out = BTreeMap::new();
    for (id, p) in people {
        let missing: Vec<String> = p
            .seen
            .iter()
            .enumerate()
            .flat_map(|(t, days)| {
                days.iter()
                    .enumerate()
                    .filter(|(_, s)| !**s)
                    .map(move |(d, _)| format!("{t}/{d}"))
            })
            .collect();
        if !missing.is_empty() {
            let shown = missing
                .iter()
                .take(5)
                .cloned()
                .collect::<Vec<_>>()
                .join(", ");
            report(
                p.first_line,
                format!("participant {id} lacks rows for week/day {shown}"),
            );
            continue;
        }
        out.insert(
            id,
            ObservationSet {
                weights: p.weights,
                goals: p
                    .goals
                    .into_iter()
                    .map(|g| g.expect("day-6 row present"))
                    .collect(),
                rewards: p
                    .rewards
                    .into_iter()
                    .map(|r| r.expect("day-6 row present"))
                    .collect(),
            },
        );
    }
    if !problems.is_empty() {
        return Err(Error::Schema(problems.join("\n")));
    }
    Ok(out)
}

pub fn load_observations(path: &Path, boxes: &Boxes) -> Result<BTreeMap<String, ObservationSet>> {
    let file =
        std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_observations(file, FILE_WEEKS, boxes)
}

/// Canonical form: participants in id order, then week and day.
pub fn write_observations<W: Write>(
    writer: W,
    data: &BTreeMap<String, ObservationSet>,
) -> Result<()> {
    let mut w = csv::WriterBuilder::new().from_writer(writer);
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(OBSERVATION_HEADER).map_err(io)?;
    for (id, obs) in data {
        for t in 0..obs.weeks() {
            for d in 0..DAYS {
                let weight = obs.weights[t][d].map(|v| v.to_string()).unwrap_or_default();
                let (goal, rw, rc) = if d == DAYS - 1 {
                    let r = obs.rewards[t];
                    (
                        (obs.goals[t] as u8).to_string(),
                        r.weight.to_string(),
                        r.calorie.to_string(),
                    )
                } else {
                    Default::default()
                };
                w.write_record([
                    id.as_str(),
                    &t.to_string(),
                    &d.to_string(),
                    &weight,
                    &goal,
                    &rw,
                    &rc,
                ])
                .map_err(io)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn save_observations(path: &Path, data: &BTreeMap<String, ObservationSet>) -> Result<()> {
    let file =
        std::fs::File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    write_observations(std::io::BufWriter::new(file), data)
}
