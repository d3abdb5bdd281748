//! Assignment checking and bound-propagation feasibility.

use std::collections::HashMap;

use serde::Serialize;

use crate::error::Result;
use crate::mip::model::{MipModel, Sense, VarKind};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowResidual {
    pub name: String,
    /// `lhs - rhs`.
    pub residual: f64,
    pub violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    pub rows: Vec<RowResidual>,
    /// Bound and integrality violations, one entry per offending variable.
    pub bound_violations: Vec<RowResidual>,
    pub max_violation: f64,
    /// Name of the row or variable with the largest violation.
    pub worst: Option<String>,
    pub objective: f64,
}

impl ResidualReport {
    /// Rows (and variables) violated by more than `tol`.
    pub fn violated(&self, tol: f64) -> Vec<&str> {
        self.rows
            .iter()
            .chain(&self.bound_violations)
            .filter(|r| r.violation > tol)
            .map(|r| r.name.as_str())
            .collect()
    }
}

pub fn check_assignment(
    model: &MipModel,
    assignment: &HashMap<String, f64>,
) -> Result<ResidualReport> {
    let x = model.dense(assignment)?;
    Ok(check_dense(model, &x))
}

pub fn check_dense(model: &MipModel, x: &[f64]) -> ResidualReport {
    let mut max_violation = 0.0;
    let mut worst = None;
    let rows: Vec<RowResidual> = model
        .constraints
        .iter()
        .map(|c| {
            let residual = c.activity(x) - c.rhs;
            let violation = c.violation(x);
            if violation > max_violation {
                max_violation = violation;
                worst = Some(c.name.clone());
            }
            RowResidual {
                name: c.name.clone(),
                residual,
                violation,
            }
        })
        .collect();
    let mut bound_violations = Vec::new();
    for (v, &xv) in model.variables.iter().zip(x) {
        let mut viol = (v.lo - xv).max(xv - v.hi).max(0.0);
        if v.kind == VarKind::Binary {
            viol = viol.max((xv - xv.round()).abs());
        }
        if viol > 0.0 {
            if viol > max_violation {
                max_violation = viol;
                worst = Some(v.name.clone());
            }
            bound_violations.push(RowResidual {
                name: v.name.clone(),
                residual: viol,
                violation: viol,
            });
        }
    }
    ResidualReport {
        rows,
        bound_violations,
        max_violation,
        worst,
        objective: model.objective_value(x),
    }
}

/// Outcome of bound propagation with some variables fixed.
#[derive(Debug, Clone, PartialEq)]
pub enum Propagation {
    /// Every free variable was pinned to a point and that point satisfies
    /// every row within tolerance.
    Feasible(Vec<f64>),
    /// A row cannot be satisfied by any point in the propagated box.
    Infeasible { row: String },
    /// Propagation reached a fixpoint without pinning every variable and
    /// without proving infeasibility.
    Undecided { lo: Vec<f64>, hi: Vec<f64> },
}

/// Fix the given variables, then tighten bounds row by row until nothing
/// moves. Decides feasibility when propagation pins every variable.
pub fn propagate(model: &MipModel, fixed: &HashMap<usize, f64>, tol: f64) -> Propagation {
    let n = model.variables.len();
    let mut lo: Vec<f64> = model.variables.iter().map(|v| v.lo).collect();
    let mut hi: Vec<f64> = model.variables.iter().map(|v| v.hi).collect();
    for (&i, &v) in fixed {
        if v < lo[i] - tol || v > hi[i] + tol {
            return Propagation::Infeasible {
                row: format!("bound:{}", model.variables[i].name),
            };
        }
        lo[i] = v;
        hi[i] = v;
    }
    for _ in 0..(4 * n + 16) {
        let mut changed = false;
        for c in &model.constraints {
            let (mut amin, mut amax) = (0.0, 0.0);
            for &(i, a) in &c.terms {
                if a > 0.0 {
                    amin += a * lo[i];
                    amax += a * hi[i];
                } else {
                    amin += a * hi[i];
                    amax += a * lo[i];
                }
            }
            let scale = 1.0 + c.rhs.abs();
            let need_le = matches!(c.sense, Sense::Le | Sense::Eq);
            let need_ge = matches!(c.sense, Sense::Ge | Sense::Eq);
            if (need_le && amin > c.rhs + tol * scale) || (need_ge && amax < c.rhs - tol * scale) {
                return Propagation::Infeasible {
                    row: c.name.clone(),
                };
            }
            for &(i, a) in &c.terms {
                let (own_min, own_max) = if a > 0.0 {
                    (a * lo[i], a * hi[i])
                } else {
                    (a * hi[i], a * lo[i])
                };
                let rest_min = amin - own_min;
                let rest_max = amax - own_max;
                // a*x <= rhs - rest_min and a*x >= rhs - rest_max
                let mut new_lo = lo[i];
                let mut new_hi = hi[i];
                if need_le {
                    let bound = (c.rhs - rest_min) / a;
                    if a > 0.0 {
                        new_hi = new_hi.min(bound);
                    } else {
                        new_lo = new_lo.max(bound);
                    }
                }
                if need_ge {
                    let bound = (c.rhs - rest_max) / a;
                    if a > 0.0 {
                        new_lo = new_lo.max(bound);
                    } else {
                        new_hi = new_hi.min(bound);
                    }
                }
                if model.variables[i].kind == VarKind::Binary {
                    new_lo = (new_lo - tol).ceil().max(lo[i]);
                    new_hi = (new_hi + tol).floor().min(hi[i]);
                }
                if new_lo > new_hi + tol * (1.0 + new_hi.abs()) {
                    return Propagation::Infeasible {
                        row: c.name.clone(),
                    };
                }
                if new_lo > new_hi {
                    let mid = 0.5 * (new_lo + new_hi);
                    new_lo = mid;
                    new_hi = mid;
                }
                let eps = 1e-12 * (1.0 + hi[i].abs().max(lo[i].abs()));
                if new_lo > lo[i] + eps || new_hi < hi[i] - eps {
                    changed = true;
                }
                lo[i] = new_lo.max(lo[i]);
                hi[i] = new_hi.min(hi[i]);
            }
        }
        if !changed {
            break;
        }
    }
    let pinned = (0..n).all(|i| hi[i] - lo[i] <= tol * (1.0 + lo[i].abs()));
    if pinned {
        let x: Vec<f64> = (0..n).map(|i| 0.5 * (lo[i] + hi[i])).collect();
        let report = check_dense(model, &x);
        if report.max_violation <= tol * 10.0 {
            Propagation::Feasible(x)
        } else {
            Propagation::Infeasible {
                row: report.worst.unwrap_or_default(),
            }
        }
    } else {
        Propagation::Undecided { lo, hi }
    }
}
