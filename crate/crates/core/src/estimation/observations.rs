use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::boxes::{Boxes, Interval};
use crate::model::rollout::Trajectory;
use crate::model::state::{Rewards, DAYS};

/// Noisy daily weights with missing days, weekly recording outcomes and the
/// rewards offered each week.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ObservationSet {
    /// `weights[t][d]`, `None` when day `d` of week `t` was not recorded.
    pub weights: Vec<[Option<f64>; DAYS]>,
    pub goals: Vec<bool>,
    pub rewards: Vec<Rewards>,
}

/// An observed weight outside the plausibility band.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Anomaly {
    pub week: usize,
    pub day: usize,
    pub value: f64,
}

impl ObservationSet {
    pub fn weeks(&self) -> usize {
        self.weights.len()
    }

    pub fn observed_count(&self) -> usize {
        self.weights
            .iter()
            .flatten()
            .filter(|w| w.is_some())
            .count()
    }

    pub fn iter_observed(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.weights.iter().enumerate().flat_map(|(t, days)| {
            days.iter()
                .enumerate()
                .filter_map(move |(d, w)| w.map(|v| (t, d, v)))
        })
    }

    /// Structural checks; rewards must lie in the reward box.
    pub fn validate(&self, boxes: &Boxes) -> Result<()> {
        let n = self.weights.len();
        for (name, got) in [("goals", self.goals.len()), ("rewards", self.rewards.len())] {
            if got != n {
                return Err(Error::LengthMismatch {
                    name: name.into(),
                    expected: n,
                    got,
                });
            }
        }
        for (t, r) in self.rewards.iter().enumerate() {
            boxes.reward.check(&format!("reward_w[{t}]"), r.weight)?;
            boxes.reward.check(&format!("reward_c[{t}]"), r.calorie)?;
        }
        for (t, d, w) in self.iter_observed() {
            if !w.is_finite() {
                return Err(Error::InvalidParameter {
                    name: format!("weight[{t},{d}]"),
                    detail: "not finite".into(),
                });
            }
        }
        Ok(())
    }

    /// Observed weights outside `band`; they are reported, not removed.
    pub fn anomalies(&self, band: Interval) -> Vec<Anomaly> {
        self.iter_observed()
            .filter(|&(_, _, v)| !band.contains(v))
            .map(|(week, day, value)| Anomaly { week, day, value })
            .collect()
    }

    /// First `weeks` weeks of data.
    pub fn truncated(&self, weeks: usize) -> ObservationSet {
        let n = weeks.min(self.weeks());
        ObservationSet {
            weights: self.weights[..n].to_vec(),
            goals: self.goals[..n].to_vec(),
            rewards: self.rewards[..n].to_vec(),
        }
    }

    /// Exact, fully observed data from a trajectory.
    pub fn from_trajectory(traj: &Trajectory) -> ObservationSet {
        ObservationSet {
            weights: traj.weeks.iter().map(|w| w.w_path.map(Some)).collect(),
            goals: traj.weeks.iter().map(|w| w.goal_met).collect(),
            rewards: traj.weeks.iter().map(|w| w.rewards).collect(),
        }
    }
}
