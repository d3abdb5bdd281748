use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::boxes::Boxes;
use crate::model::state::{InitialConditions, Rewards};
use crate::model::traits::ParticipantTraits;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    /// One for every participant who ends above the success weight.
    Indicator,
    /// Pounds above the success weight.
    Hinge,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossFunction {
    pub kind: LossKind,
    /// Required fractional loss, default 0.05.
    pub threshold_fraction: f64,
}

impl Default for LossFunction {
    fn default() -> Self {
        LossFunction::hinge()
    }
}

impl LossFunction {
    pub fn indicator() -> Self {
        LossFunction {
            kind: LossKind::Indicator,
            threshold_fraction: 0.05,
        }
    }

    pub fn hinge() -> Self {
        LossFunction {
            kind: LossKind::Hinge,
            threshold_fraction: 0.05,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold_fraction > 0.0 && self.threshold_fraction < 1.0) {
            return Err(invalid("threshold_fraction", "must lie in (0, 1)"));
        }
        Ok(())
    }

    pub fn target(&self, initial_weight: f64) -> f64 {
        (1.0 - self.threshold_fraction) * initial_weight
    }

    pub fn eval(&self, final_weight: f64, initial_weight: f64) -> f64 {
        let excess = final_weight - self.target(initial_weight);
        match self.kind {
            LossKind::Indicator => {
                if excess > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            LossKind::Hinge => excess.max(0.0),
        }
    }
}

/// Reward types a participant may receive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Eligibility {
    pub weight: bool,
    pub calorie: bool,
}

impl Eligibility {
    pub const BOTH: Eligibility = Eligibility {
        weight: true,
        calorie: true,
    };

    pub fn allows(&self, r: Rewards) -> bool {
        (self.weight || r.weight == 0.0) && (self.calorie || r.calorie == 0.0)
    }
}

/// Everything the planner knows about one participant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanningInput {
    pub estimate: InitialConditions,
    pub traits: ParticipantTraits,
    /// Rewards already disbursed, weeks `0..history.len()`.
    pub history: Vec<Rewards>,
    pub eligibility: Eligibility,
}

/// Ascending list of allowed weekly amounts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardGrid(pub Vec<f64>);

impl Default for RewardGrid {
    fn default() -> Self {
        RewardGrid::standard()
    }
}

impl RewardGrid {
    pub fn standard() -> Self {
        RewardGrid(vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0])
    }

    pub fn validate(&self, boxes: &Boxes) -> Result<()> {
        if self.0.is_empty() {
            return Err(invalid("reward_grid", "empty"));
        }
        if self.0.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("reward_grid", "must be strictly ascending"));
        }
        for &v in &self.0 {
            boxes.reward.check("reward_grid", v)?;
        }
        if self.0[0] != 0.0 {
            return Err(invalid("reward_grid", "must contain 0 as its first level"));
        }
        Ok(())
    }

    pub fn levels(&self) -> &[f64] {
        &self.0
    }
}

/// Per-participant reward sequences for weeks `start_week..horizon`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncentivePlan {
    pub start_week: usize,
    pub schedules: Vec<Vec<Rewards>>,
    pub total_spend: f64,
    /// Objective value under certainty-equivalent rollout.
    pub loss: f64,
}

impl IncentivePlan {
    pub fn first_week(&self) -> Vec<Rewards> {
        self.schedules
            .iter()
            .map(|s| s.first().copied().unwrap_or(Rewards::ZERO))
            .collect()
    }

    pub fn spend(&self) -> f64 {
        self.schedules.iter().flatten().map(Rewards::total).sum()
    }
}

/// Total budget and disbursements to date.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetLedger {
    pub budget: f64,
    pub spent: f64,
}

impl BudgetLedger {
    pub fn new(budget: f64) -> Result<Self> {
        if !(budget >= 0.0 && budget.is_finite()) {
            return Err(Error::Budget(format!(
                "budget {budget} must be finite and >= 0"
            )));
        }
        Ok(BudgetLedger { budget, spent: 0.0 })
    }

    pub fn remaining(&self) -> f64 {
        (self.budget - self.spent).max(0.0)
    }

    /// Record a disbursement; refuses any amount that would overdraw.
    pub fn commit(&mut self, amount: f64) -> Result<()> {
        if !(amount >= 0.0) {
            return Err(Error::Budget(format!("negative disbursement {amount}")));
        }
        if self.spent + amount > self.budget + 1e-9 {
            return Err(Error::Budget(format!(
                "disbursing {amount} would exceed budget {} (spent {})",
                self.budget, self.spent
            )));
        }
        self.spent += amount;
        Ok(())
    }
}
