//! Forecasts of final weight and ROC utilities.

pub mod forecast;
pub mod roc;

pub use forecast::{predict_final_weight, Belief, Forecast, PredictOptions};
pub use roc::{roc_auc, roc_curve};
