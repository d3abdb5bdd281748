//! Budget-constrained personalized incentive design.

pub mod dia;
pub mod optimizer;
pub mod types;

pub use dia::{
    apply_stochastic_wrapper, dia_plan, dia_step, DiaConfig, DiaOutcome, DiaParticipant,
};
pub use optimizer::{
    allocate, brute_force_incentives, eval_psi, optimize_incentives, participant_frontier,
    Frontier, OptimizerConfig, BRUTE_FORCE_LIMIT, STUDY_WEEKS,
};
pub use types::{
    BudgetLedger, Eligibility, IncentivePlan, LossFunction, LossKind, PlanningInput, RewardGrid,
};
