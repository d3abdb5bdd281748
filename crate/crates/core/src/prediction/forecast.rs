use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::estimation::posterior::PosteriorGrid;
use crate::model::boxes::Boxes;
use crate::model::rollout::{rollout, RolloutMode};
use crate::model::state::{InitialConditions, Rewards};
use crate::model::traits::ParticipantTraits;

/// What is known about a participant's initial conditions.
#[derive(Debug, Clone, Copy)]
pub enum Belief<'a> {
    Grid(&'a PosteriorGrid),
    Point(InitialConditions),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictOptions {
    pub samples: usize,
    /// Fractional loss that counts as success.
    pub threshold: f64,
    /// Execution noise and random recording outcomes; otherwise the
    /// certainty-equivalent path.
    pub noisy: bool,
    pub seed: u64,
}

impl Default for PredictOptions {
    fn default() -> Self {
        PredictOptions {
            samples: 1000,
            threshold: 0.05,
            noisy: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forecast {
    /// Final weight of each draw.
    pub samples: Vec<f64>,
    /// Initial weight of each draw, the baseline for success.
    pub baselines: Vec<f64>,
    pub p_success: f64,
    pub threshold: f64,
    pub horizon_weeks: usize,
}

impl Forecast {
    /// Share of draws losing at least `threshold` of their own initial weight.
    pub fn success_rate(&self, threshold: f64) -> f64 {
        let hits = self
            .samples
            .iter()
            .zip(&self.baselines)
            .filter(|(w, w0)| **w <= (1.0 - threshold) * **w0)
            .count();
        hits as f64 / self.samples.len() as f64
    }
}

/// Draw initial conditions from the belief and roll each forward over
/// `rewards`, which run from week 0 to the end of the horizon.
pub fn predict_final_weight(
    belief: Belief<'_>,
    rewards: &[Rewards],
    traits: &ParticipantTraits,
    boxes: &Boxes,
    opts: &PredictOptions,
) -> Result<Forecast> {
    if rewards.is_empty() {
        return Err(Error::InsufficientData("no weeks to forecast".into()));
    }
    if opts.samples == 0 {
        return Err(invalid("samples", "must be positive"));
    }
    if !(0.0..1.0).contains(&opts.threshold) {
        return Err(invalid("threshold", "must lie in [0, 1)"));
    }
    let cumulative: Vec<f64> = match belief {
        Belief::Grid(g) => {
            if g.weights.is_empty() {
                return Err(Error::InsufficientData("posterior grid is empty".into()));
            }
            g.weights
                .iter()
                .scan(0.0, |acc, w| {
                    *acc += w;
                    Some(*acc)
                })
                .collect()
        }
        Belief::Point(_) => vec![1.0],
    };
    // a noise-free point forecast is a single deterministic path
    let draws = if !opts.noisy && matches!(belief, Belief::Point(_)) {
        1
    } else {
        opts.samples
    };
    let mut samples = Vec::with_capacity(draws);
    let mut baselines = Vec::with_capacity(draws);
    for i in 0..draws {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        rng.set_stream(i as u64);
        let ic = match belief {
            Belief::Point(ic) => ic,
            Belief::Grid(g) => {
                let u = rng.random::<f64>() * cumulative[cumulative.len() - 1];
                let cell = cumulative
                    .partition_point(|c| *c <= u)
                    .min(cumulative.len() - 1);
                g.spec.cell(cell)
            }
        };
        let mode = if opts.noisy {
            RolloutMode::Stochastic(&mut rng)
        } else {
            RolloutMode::CertaintyEquivalent
        };
        let traj = rollout(&ic.theta0, &ic.initial_phys(), traits, boxes, rewards, mode);
        samples.push(traj.final_weight().unwrap_or(ic.w00));
        baselines.push(ic.w00);
    }
    let mut forecast = Forecast {
        samples,
        baselines,
        p_success: 0.0,
        threshold: opts.threshold,
        horizon_weeks: rewards.len(),
    };
    forecast.p_success = forecast.success_rate(opts.threshold);
    Ok(forecast)
}
