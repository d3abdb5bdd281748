//! Sweep tables: long-format cells, per-budget summaries and spend curves.

use std::io::Write;

use crate::error::{Error, Result};
use crate::trial::SweepResults;

fn io(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// `policy,budget,replicate,metric,value`, one row per cell metric.
pub fn write_sweep_long<W: Write>(writer: W, results: &SweepResults) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["policy", "budget", "replicate", "metric", "value"])
        .map_err(io)?;
    for c in &results.cells {
        let policy = c.policy.label();
        let metrics = [
            ("success_count", c.success_count as f64),
            ("bottom5_avg_pct_loss", c.bottom5_avg_pct_loss),
            ("total_spend", c.total_spend()),
            ("estimation_failures", c.estimation_failures as f64),
        ];
        for (name, value) in metrics {
            w.write_record([
                policy.as_str(),
                &c.budget.to_string(),
                &c.replicate.to_string(),
                name,
                &value.to_string(),
            ])
            .map_err(io)?;
        }
        for (t, s) in c.weekly_spend.iter().enumerate() {
            w.write_record([
                policy.as_str(),
                &c.budget.to_string(),
                &c.replicate.to_string(),
                &format!("weekly_spend_{t}"),
                &s.to_string(),
            ])
            .map_err(io)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Replicate means per policy and budget: the success-vs-budget and
/// bottom-5-vs-budget curves.
pub fn write_sweep_summary<W: Write>(writer: W, results: &SweepResults) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "policy",
        "budget",
        "replicates",
        "mean_success",
        "mean_bottom5",
        "mean_spend",
        "max_spend",
    ])
    .map_err(io)?;
    for s in &results.summary {
        w.write_record([
            s.policy.label(),
            s.budget.to_string(),
            s.replicates.to_string(),
            s.mean_success.to_string(),
            s.mean_bottom5.to_string(),
            s.mean_spend.to_string(),
            s.max_spend.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// Mean weekly and cumulative spend per policy and budget.
pub fn write_spend_curves<W: Write>(writer: W, results: &SweepResults) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "policy",
        "budget",
        "week",
        "weekly_spend",
        "cumulative_spend",
    ])
    .map_err(io)?;
    for s in &results.summary {
        for (t, (ws, cs)) in s.weekly_spend.iter().zip(&s.cumulative_spend).enumerate() {
            w.write_record([
                s.policy.label(),
                s.budget.to_string(),
                t.to_string(),
                ws.to_string(),
                cs.to_string(),
            ])
            .map_err(io)?;
        }
    }
    w.flush()?;
    Ok(())
}
