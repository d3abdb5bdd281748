use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::boxes::{Boxes, Interval};

pub const DAYS: usize = 7;

/// Latent weekly motivational state of one participant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotivationalState {
    /// Internal weight-loss motivation.
    pub a1: f64,
    /// External (financial) motivation.
    pub a2: f64,
    /// Probability of meeting the calorie recording goal.
    pub p: f64,
    /// Recording-probability threshold above which calorie rewards register.
    pub threshold: f64,
    /// Preferred daily calories, kcal.
    pub f_pref: f64,
    /// Believed weekly weight-loss reward, dollars.
    pub reward_belief: f64,
    pub k1: f64,
    pub k2: f64,
    pub kp: f64,
    pub week: u32,
}

/// Names of the estimated coordinates, in [`MotivationalState::to_array`] order.
pub const THETA_NAMES: [&str; 9] = ["a1", "a2", "p", "B", "f_b", "r_hat", "k1", "k2", "kp"];

impl MotivationalState {
    pub fn to_array(&self) -> [f64; 9] {
        [
            self.a1,
            self.a2,
            self.p,
            self.threshold,
            self.f_pref,
            self.reward_belief,
            self.k1,
            self.k2,
            self.kp,
        ]
    }

    pub fn from_array(v: [f64; 9], week: u32) -> Self {
        MotivationalState {
            a1: v[0],
            a2: v[1],
            p: v[2],
            threshold: v[3],
            f_pref: v[4],
            reward_belief: v[5],
            k1: v[6],
            k2: v[7],
            kp: v[8],
            week,
        }
    }

    pub fn validate(&self, boxes: &Boxes) -> Result<()> {
        let pb = boxes.probability();
        boxes.motivation.check("a1", self.a1)?;
        boxes.motivation.check("a2", self.a2)?;
        pb.check("p", self.p)?;
        pb.check("B", self.threshold)?;
        boxes.calories.check("f_b", self.f_pref)?;
        boxes.reward.check("r_hat", self.reward_belief)?;
        boxes.gain.check("k1", self.k1)?;
        boxes.gain.check("k2", self.k2)?;
        boxes.gain.check("kp", self.kp)?;
        Ok(())
    }

    /// Project every field into its box, returning the number of moved fields.
    pub fn project(&mut self, boxes: &Boxes) -> u32 {
        let mut n = 0;
        let pb = boxes.probability();
        self.a1 = boxes.motivation.project(self.a1, &mut n);
        self.a2 = boxes.motivation.project(self.a2, &mut n);
        self.p = pb.project(self.p, &mut n);
        self.threshold = pb.project(self.threshold, &mut n);
        self.f_pref = boxes.calories.project(self.f_pref, &mut n);
        self.reward_belief = boxes.reward.project(self.reward_belief, &mut n);
        self.k1 = boxes.gain.project(self.k1, &mut n);
        self.k2 = boxes.gain.project(self.k2, &mut n);
        self.kp = boxes.gain.project(self.kp, &mut n);
        n
    }
}

/// Latent initial conditions: starting weight and week-0 motivational state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialConditions {
    pub w00: f64,
    pub theta0: MotivationalState,
}

/// Coordinate names of [`InitialConditions::to_array`].
pub const PARAM_NAMES: [&str; 10] = [
    "w00", "a1", "a2", "p", "B", "f_b", "r_hat", "k1", "k2", "kp",
];

impl InitialConditions {
    pub fn to_array(&self) -> [f64; 10] {
        let t = self.theta0.to_array();
        std::array::from_fn(|i| if i == 0 { self.w00 } else { t[i - 1] })
    }

    pub fn from_array(v: [f64; 10]) -> Self {
        InitialConditions {
            w00: v[0],
            theta0: MotivationalState::from_array(std::array::from_fn(|i| v[i + 1]), 0),
        }
    }

    /// Box of each coordinate, in [`InitialConditions::to_array`] order.
    pub fn bounds(boxes: &Boxes) -> [Interval; 10] {
        let p = boxes.probability();
        [
            boxes.weight,
            boxes.motivation,
            boxes.motivation,
            p,
            p,
            boxes.calories,
            boxes.reward,
            boxes.gain,
            boxes.gain,
            boxes.gain,
        ]
    }

    pub fn initial_phys(&self) -> PhysicalState {
        PhysicalState::initial(self.w00)
    }

    pub fn validate(&self, boxes: &Boxes) -> Result<()> {
        boxes.weight.check("w00", self.w00)?;
        self.theta0.validate(boxes)
    }
}

/// Where a week's weight path starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Anchor {
    /// `w` is the first-day weight of the week (the trial's initial weight).
    WeekStart,
    /// `w` is the last-day weight of the previous week; day 0 applies the
    /// daily dynamics to it.
    PreviousWeekEnd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalState {
    pub w: f64,
    pub anchor: Anchor,
}

impl PhysicalState {
    pub fn initial(w: f64) -> Self {
        PhysicalState {
            w,
            anchor: Anchor::WeekStart,
        }
    }

    pub fn carried(w: f64) -> Self {
        PhysicalState {
            w,
            anchor: Anchor::PreviousWeekEnd,
        }
    }
}

/// Weekly reward offer in dollars.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Rewards {
    /// Weight-loss reward.
    pub weight: f64,
    /// Calorie-recording reward.
    pub calorie: f64,
}

impl Rewards {
    pub const ZERO: Rewards = Rewards {
        weight: 0.0,
        calorie: 0.0,
    };

    pub fn new(weight: f64, calorie: f64) -> Self {
        Rewards { weight, calorie }
    }

    pub fn total(&self) -> f64 {
        self.weight + self.calorie
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeekOutcome {
    pub w_path: [f64; DAYS],
    pub f_path: [f64; DAYS],
    pub c_path: [f64; DAYS],
    /// Calorie recording goal met.
    pub goal_met: bool,
    /// First-day weight exceeds last-day weight.
    pub lost_weight: bool,
    pub rewards: Rewards,
    /// Number of box projections applied while simulating this week.
    pub clamps: u32,
}

impl WeekOutcome {
    pub fn mean_calories(&self) -> f64 {
        self.f_path.iter().sum::<f64>() / DAYS as f64
    }
}
