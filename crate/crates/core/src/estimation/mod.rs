//! Parameter estimation from noisy, partially missing observations.

pub mod consistency;
pub mod eta;
pub mod observations;
pub mod posterior;
pub mod search;
pub mod simplex;
pub mod synthetic;

pub use consistency::{
    consistency_experiment, normalized_error, ConsistencyReport, ConsistencySetup, IncentiveSource,
};
pub use eta::{eval_eta, EtaOptions, EtaValue, GoalLikelihood, InnerFit, Prior};
pub use observations::{Anomaly, ObservationSet};
pub use posterior::{
    surrogate_bound_check, surrogate_posterior, GridSpec, PosteriorGrid, DEFAULT_CELL_BUDGET,
};
pub use search::{seeds, solve_smle, solve_smle_from, Diagnostics, EstimationResult, SmleConfig};
pub use simplex::{LinearProgram, LpSolution};
pub use synthetic::{planted_observations, GoalDraw, NoiseSpec};
