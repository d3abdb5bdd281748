//! Mixed-integer formulations, residual checking and solver file exchange.

pub mod bigm;
pub mod bridge;
pub mod check;
pub mod incentive;
pub mod lp;
pub mod model;
pub mod smle;

pub use bigm::{derive_big_m, BigM, Piecewise, PiecewiseSpec};
pub use bridge::{parse_solution, solve_external, ModelFormat, SolverCommand, SolverOutcome};
pub use check::{
    check_assignment, check_dense, propagate, Propagation, ResidualReport, RowResidual,
};
pub use incentive::{build_incentive_mip, incentive_assignment, IncentiveMipOptions};
pub use lp::{read_lp, read_mps, write_lp, write_mps};
pub use model::{Constraint, MipModel, NameMap, Sense, VarKind, Variable};
pub use smle::{
    build_smle_mip, linking_block, smle_assignment, smle_census, Census, LinkingPoint,
    SmleMipOptions,
};
