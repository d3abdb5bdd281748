//! Participant behavioral model: boxes, physiology, the in-week calorie plan
//! and the week-to-week dynamics.

pub mod boxes;
pub mod dp;
pub mod dynamics;
pub mod plan;
pub mod rollout;
pub mod state;
pub mod traits;

pub use boxes::{Boxes, Interval};
pub use dp::{dp_oracle_plan, DpOptions};
pub use dynamics::{
    advance, between_week_update, simulate_week, week_path, SimulatedWeek, Transition, WeekSignals,
};
pub use plan::{optimal_plan, Plan, PlanCoefficients};
pub use rollout::{ce_week, rollout, rollout_ce, RolloutMode, Trajectory};
pub use state::{
    Anchor, InitialConditions, MotivationalState, PhysicalState, Rewards, WeekOutcome, DAYS,
    PARAM_NAMES, THETA_NAMES,
};
pub use traits::{
    mifflin_traits, Demographics, EnergyConstants, ParticipantTraits, Physiology, Sex,
};
