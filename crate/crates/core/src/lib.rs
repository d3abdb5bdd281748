//! Behavioral weight-loss dynamics, surrogate likelihood estimation and
//! budget-constrained personalized incentive design.

pub mod cohort;
pub mod error;
pub mod estimation;
pub mod incentives;
pub mod io;
pub mod mip;
pub mod model;
pub mod prediction;
pub mod trial;

pub use error::{Error, Result};
