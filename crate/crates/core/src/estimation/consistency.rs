//! Estimation error as the observation horizon grows.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::estimation::search::{solve_smle, SmleConfig};
use crate::estimation::synthetic::{planted_observations, NoiseSpec};
use crate::model::boxes::Boxes;
use crate::model::state::{InitialConditions, Rewards};
use crate::model::traits::ParticipantTraits;

/// Weekly rewards fed to the simulated participant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum IncentiveSource {
    /// Independent uniform draws from `levels` for each reward type.
    Random {
        levels: Vec<f64>,
        calorie: bool,
    },
    Zero,
    /// Repeated cyclically.
    Fixed {
        schedule: Vec<Rewards>,
    },
}

impl IncentiveSource {
    pub fn draw<R: Rng + ?Sized>(&self, weeks: usize, rng: &mut R) -> Vec<Rewards> {
        match self {
            IncentiveSource::Random { levels, calorie } => (0..weeks)
                .map(|_| {
                    let w = levels[rng.random_range(0..levels.len())];
                    let c = if *calorie {
                        levels[rng.random_range(0..levels.len())]
                    } else {
                        0.0
                    };
                    Rewards::new(w, c)
                })
                .collect(),
            IncentiveSource::Zero => vec![Rewards::ZERO; weeks],
            IncentiveSource::Fixed { schedule } => {
                schedule.iter().copied().cycle().take(weeks).collect()
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            IncentiveSource::Random { levels, .. } if levels.is_empty() => {
                Err(invalid("levels", "empty"))
            }
            IncentiveSource::Fixed { schedule } if schedule.is_empty() => {
                Err(invalid("schedule", "empty"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencySetup {
    pub horizons: Vec<usize>,
    pub seeds: u64,
    pub incentives: IncentiveSource,
    pub noise: NoiseSpec,
    pub config: SmleConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub horizons: Vec<usize>,
    /// Median over seeds of the box-normalized error norm, per horizon.
    pub median_error: Vec<f64>,
    /// Median absolute box-normalized error per coordinate, per horizon.
    pub median_coordinate_error: Vec<[f64; 10]>,
    /// `errors[h][s]` for horizon `h` and seed `s`.
    pub errors: Vec<Vec<f64>>,
}

impl ConsistencyReport {
    pub fn weakly_decreasing(&self) -> bool {
        self.median_error.windows(2).all(|w| w[1] <= w[0])
    }
}

/// Coordinate errors divided by the box widths.
pub fn normalized_error(
    estimate: &InitialConditions,
    truth: &InitialConditions,
    boxes: &Boxes,
) -> [f64; 10] {
    let bounds = InitialConditions::bounds(boxes);
    let (x, y) = (estimate.to_array(), truth.to_array());
    std::array::from_fn(|i| (x[i] - y[i]) / bounds[i].width())
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    match n {
        0 => f64::NAN,
        _ if n % 2 == 1 => v[n / 2],
        _ => 0.5 * (v[n / 2 - 1] + v[n / 2]),
    }
}

/// Simulate each seed once at the longest horizon and fit every prefix.
pub fn consistency_experiment(
    truth: &InitialConditions,
    traits: &ParticipantTraits,
    boxes: &Boxes,
    setup: &ConsistencySetup,
) -> Result<ConsistencyReport> {
    if setup.horizons.is_empty() || setup.horizons.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid(
            "horizons",
            "must be non-empty and strictly ascending",
        ));
    }
    setup.incentives.validate()?;
    let longest = *setup.horizons.last().unwrap_or(&0);
    let mut errors = vec![Vec::new(); setup.horizons.len()];
    let mut coordinates = vec![Vec::new(); setup.horizons.len()];
    for seed in 0..setup.seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rewards = setup.incentives.draw(longest, &mut rng);
        let (obs, _) = planted_observations(truth, traits, boxes, &rewards, &setup.noise, &mut rng);
        for (h, &weeks) in setup.horizons.iter().enumerate() {
            let est = solve_smle(&obs.truncated(weeks), traits, boxes, &setup.config)?;
            let e = normalized_error(&est.initial_conditions(), truth, boxes);
            errors[h].push(e.iter().map(|v| v * v).sum::<f64>().sqrt());
            coordinates[h].push(e.map(f64::abs));
        }
    }
    let median_error = errors.iter().map(|e| median(e)).collect();
    let median_coordinate_error = coordinates
        .iter()
        .map(|rows| std::array::from_fn(|i| median(&rows.iter().map(|r| r[i]).collect::<Vec<_>>())))
        .collect();
    Ok(ConsistencyReport {
        horizons: setup.horizons.clone(),
        median_error,
        median_coordinate_error,
        errors,
    })
}
