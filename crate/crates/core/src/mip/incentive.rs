//! Mixed-integer model of the budget-coupled incentive design problem.
//!
//! Rewards are picked from a finite grid, so every reward-by-state product is
//! a binary times a bounded quantity and is linearized exactly. The product of
//! the two continuous states `a2 * r_hat` is relaxed with a piecewise
//! McCormick envelope; it is exact when the planning horizon is one week.

use serde::{Deserialize, Serialize};
use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::incentives::types::{LossFunction, LossKind, PlanningInput, RewardGrid};
use crate::mip::bigm::{derive_big_m, Piecewise, PiecewiseSpec};
use crate::mip::model::{MipModel, Sense, VarKind};
use crate::mip::smle::DEFAULT_TAU;
use crate::model::boxes::Boxes;
use crate::model::plan::PlanCoefficients;
use crate::model::rollout::ce_week;
use crate::model::state::{Anchor, MotivationalState, PhysicalState, Rewards, DAYS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IncentiveMipOptions {
    pub piecewise: PiecewiseSpec,
    pub tau: f64,
}

impl Default for IncentiveMipOptions {
    fn default() -> Self {
        IncentiveMipOptions {
            piecewise: PiecewiseSpec::default(),
            tau: DEFAULT_TAU,
        }
    }
}

/// State of each participant at the first planned week.
pub fn state_at(input: &PlanningInput, boxes: &Boxes) -> (PhysicalState, MotivationalState) {
    let coef = PlanCoefficients::new(&input.traits);
    let mut phys = input.estimate.initial_phys();
    let mut theta = input.estimate.theta0;
    for &r in &input.history {
        let (p, th, _) = ce_week(&coef, &phys, &theta, &input.traits, boxes, r);
        phys = p;
        theta = th;
    }
    (phys, theta)
}

struct WeekVars {
    a1: usize,
    a2: usize,
    fb: usize,
    rh: usize,
    l1: usize,
    c: [usize; DAYS],
    u: usize,
    mw: Vec<usize>,
}

fn sym(name: &str, u: usize, t: usize) -> String {
    format!("{name}[{u},{t}]")
}

/// Build the planning model for weeks `start..horizon`.
pub fn build_incentive_mip(
    inputs: &[PlanningInput],
    budget_remaining: f64,
    loss: &LossFunction,
    grid: &RewardGrid,
    horizon: usize,
    boxes: &Boxes,
    opts: &IncentiveMipOptions,
) -> Result<MipModel> {
    grid.validate(boxes)?;
    loss.validate()?;
    if budget_remaining < 0.0 {
        return Err(Error::Budget(format!(
            "negative remaining budget {budget_remaining}"
        )));
    }
    let big_m = derive_big_m(boxes)?;
    let pb = boxes.probability();
    let rmax = boxes.reward.hi;
    let mut m = MipModel::new();
    let mut objective = Vec::new();
    let mut budget_row = Vec::new();
    for (u, input) in inputs.iter().enumerate() {
        let start = input.history.len();
        if start >= horizon {
            return Err(Error::InvalidParameter {
                name: "horizon".into(),
                detail: format!("participant {u} has no weeks left"),
            });
        }
        let tr = &input.traits;
        let coef = PlanCoefficients::new(tr);
        let pw = Piecewise::new(boxes.motivation, boxes.reward, opts.piecewise)?;
        let (phys, theta) = state_at(input, boxes);
        // recording probabilities do not depend on rewards under certainty equivalence
        let mut p_path = vec![theta.p];
        for _ in start..horizon {
            let p = *p_path.last().expect("nonempty");
            let next = tr.gamma_p * (p - tr.p_base) + tr.p_base + theta.kp * p;
            p_path.push(pb.clamp(next));
        }
        let mut prev: Option<WeekVars> = None;
        let mut last_w6: Option<usize> = None;
        for t in start..horizon {
            let a1 = m.add_var(
                &sym("a1", u, t),
                boxes.motivation.lo,
                boxes.motivation.hi,
                VarKind::Continuous,
            )?;
            let a2 = m.add_var(
                &sym("a2", u, t),
                boxes.motivation.lo,
                boxes.motivation.hi,
                VarKind::Continuous,
            )?;
            let fb = m.add_var(
                &sym("f_b", u, t),
                boxes.calories.lo,
                boxes.calories.hi,
                VarKind::Continuous,
            )?;
            let rh = m.add_var(
                &sym("r_hat", u, t),
                boxes.reward.lo,
                boxes.reward.hi,
                VarKind::Continuous,
            )?;
            let q = pw.add_to(&mut m, &sym("a2r", u, t), a2, rh)?;
            if t == start {
                for (v, val) in [
                    (a1, theta.a1),
                    (a2, theta.a2),
                    (fb, theta.f_pref),
                    (rh, theta.reward_belief),
                ] {
                    m.add_row(
                        format!("init_{}", m.variables[v].name),
                        vec![(v, 1.0)],
                        Sense::Eq,
                        val,
                    );
                }
            }
            let mut w = [0usize; DAYS];
            let mut c = [0usize; DAYS];
            for d in 0..DAYS {
                w[d] = m.add_var(
                    &format!("w[{u},{t},{d}]"),
                    boxes.weight.lo,
                    boxes.weight.hi,
                    VarKind::Continuous,
                )?;
                c[d] = m.add_var(
                    &format!("c[{u},{t},{d}]"),
                    boxes.calories.lo,
                    boxes.calories.hi,
                    VarKind::Continuous,
                )?;
                m.add_row(
                    format!("plan[{u},{t},{d}]"),
                    vec![
                        (c[d], 1.0),
                        (fb, -1.0),
                        (a1, coef.internal[d]),
                        (q, coef.external[d]),
                    ],
                    Sense::Eq,
                    0.0,
                );
                let name = format!("weight[{u},{t},{d}]");
                if d > 0 {
                    m.add_row(
                        name,
                        vec![(w[d], 1.0), (w[d - 1], -tr.b), (c[d], -tr.c)],
                        Sense::Eq,
                        tr.k,
                    );
                } else if let Some(prev_w) = last_w6 {
                    m.add_row(
                        name,
                        vec![(w[0], 1.0), (prev_w, -tr.b), (c[0], -tr.c)],
                        Sense::Eq,
                        tr.k,
                    );
                } else {
                    match phys.anchor {
                        Anchor::WeekStart => m.add_row(name, vec![(w[0], 1.0)], Sense::Eq, phys.w),
                        Anchor::PreviousWeekEnd => m.add_row(
                            name,
                            vec![(w[0], 1.0), (c[0], -tr.c)],
                            Sense::Eq,
                            tr.b * phys.w + tr.k,
                        ),
                    }
                }
            }
            last_w6 = Some(w[DAYS - 1]);

            // one grid level per reward type
            let mut yw = Vec::new();
            let mut yc = Vec::new();
            for (i, &v) in grid.levels().iter().enumerate() {
                let hw = if input.eligibility.weight || v == 0.0 {
                    1.0
                } else {
                    0.0
                };
                let hc = if input.eligibility.calorie || v == 0.0 {
                    1.0
                } else {
                    0.0
                };
                let bw = m.add_var(&format!("yw[{u},{t},{i}]"), 0.0, hw, VarKind::Binary)?;
                let bc = m.add_var(&format!("yc[{u},{t},{i}]"), 0.0, hc, VarKind::Binary)?;
                budget_row.push((bw, v));
                budget_row.push((bc, v));
                yw.push(bw);
                yc.push(bc);
            }
            m.add_row(
                sym("pick_w", u, t),
                yw.iter().map(|&b| (b, 1.0)).collect(),
                Sense::Eq,
                1.0,
            );
            m.add_row(
                sym("pick_c", u, t),
                yc.iter().map(|&b| (b, 1.0)).collect(),
                Sense::Eq,
                1.0,
            );

            // loss indicator for the week
            let l1 = m.add_var(&sym("l1", u, t), 0.0, 1.0, VarKind::Binary)?;
            let tau = opts.tau;
            m.add_row(
                sym("l1_off", u, t),
                vec![(w[0], 1.0), (w[DAYS - 1], -1.0), (l1, -big_m.m1)],
                Sense::Le,
                0.0,
            );
            m.add_row(
                sym("l1_on", u, t),
                vec![(w[0], 1.0), (w[DAYS - 1], -1.0), (l1, -(big_m.m1 + tau))],
                Sense::Ge,
                -big_m.m1,
            );
            // m_i = yw_i * l1
            let mut mw = Vec::new();
            for (i, &bw) in yw.iter().enumerate() {
                let mi = m.add_var(&format!("mw[{u},{t},{i}]"), 0.0, 1.0, VarKind::Continuous)?;
                m.add_row(
                    format!("mw_y[{u},{t},{i}]"),
                    vec![(mi, 1.0), (bw, -1.0)],
                    Sense::Le,
                    0.0,
                );
                m.add_row(
                    format!("mw_l[{u},{t},{i}]"),
                    vec![(mi, 1.0), (l1, -1.0)],
                    Sense::Le,
                    0.0,
                );
                m.add_row(
                    format!("mw_and[{u},{t},{i}]"),
                    vec![(mi, 1.0), (bw, -1.0), (l1, -1.0)],
                    Sense::Ge,
                    -1.0,
                );
                mw.push(mi);
            }
            // v = l1 * r_hat
            let uv = m.add_var(&sym("u", u, t), 0.0, rmax, VarKind::Continuous)?;
            m.add_row(
                sym("u_gate", u, t),
                vec![(uv, 1.0), (l1, -rmax)],
                Sense::Le,
                0.0,
            );
            m.add_row(
                sym("u_cap", u, t),
                vec![(uv, 1.0), (rh, -1.0)],
                Sense::Le,
                0.0,
            );
            m.add_row(
                sym("u_floor", u, t),
                vec![(uv, 1.0), (rh, -1.0), (l1, -rmax)],
                Sense::Ge,
                -rmax,
            );

            if let Some(WeekVars {
                a1: pa1,
                a2: pa2,
                fb: pfb,
                rh: prh,
                l1: pl1,
                c: pc,
                u: pu,
                mw: pmw,
            }) = prev.take()
            {
                let s = t - 1;
                let committed = if p_path[s - start] >= theta.threshold {
                    1.0
                } else {
                    0.0
                };
                let pyc = yc_prev(&m, u, s, grid.levels().len())?;
                let mut row = vec![(a1, 1.0), (pa1, -tr.gamma1), (pl1, -theta.k1)];
                row.extend(
                    pyc.iter()
                        .zip(grid.levels())
                        .map(|(&b, &v)| (b, -committed * v)),
                );
                m.add_row(
                    sym("a1_next", u, s),
                    row,
                    Sense::Eq,
                    (1.0 - tr.gamma1) * tr.a1_base,
                );
                let mut row = vec![(a2, 1.0), (pa2, -tr.gamma2)];
                row.extend(
                    pmw.iter()
                        .zip(grid.levels())
                        .map(|(&b, &v)| (b, -theta.k2 * v)),
                );
                m.add_row(
                    sym("a2_next", u, s),
                    row,
                    Sense::Eq,
                    (1.0 - tr.gamma2) * tr.a2_base,
                );
                let mut row = vec![(fb, 1.0), (pfb, -tr.gamma_f)];
                row.extend(pc.iter().map(|&ci| (ci, -(1.0 - tr.gamma_f) / DAYS as f64)));
                m.add_row(sym("f_b_next", u, s), row, Sense::Eq, 0.0);
                let step = 1.0 / (s as f64 + 1.0);
                let mut row = vec![(rh, 1.0), (prh, -1.0), (pu, step)];
                row.extend(pmw.iter().zip(grid.levels()).map(|(&b, &v)| (b, -v * step)));
                m.add_row(sym("r_hat_next", u, s), row, Sense::Eq, 0.0);
            }
            prev = Some(WeekVars {
                a1,
                a2,
                fb,
                rh,
                l1,
                c,
                u: uv,
                mw,
            });
        }
        let w_final = last_w6.expect("at least one planned week");
        let target = loss.target(input.estimate.w00);
        match loss.kind {
            LossKind::Hinge => {
                let e = m.add_var(&format!("excess[{u}]"), 0.0, big_m.m1, VarKind::Continuous)?;
                m.add_row(
                    format!("hinge[{u}]"),
                    vec![(e, 1.0), (w_final, -1.0)],
                    Sense::Ge,
                    -target,
                );
                objective.push((e, 1.0));
            }
            LossKind::Indicator => {
                let fail = m.add_var(&format!("fail[{u}]"), 0.0, 1.0, VarKind::Binary)?;
                m.add_row(
                    format!("fail_link[{u}]"),
                    vec![(w_final, 1.0), (fail, -big_m.m1)],
                    Sense::Le,
                    target,
                );
                objective.push((fail, 1.0));
            }
        }
    }
    m.add_row("budget", budget_row, Sense::Le, budget_remaining);
    m.set_objective(objective, 0.0);
    Ok(m)
}

fn yc_prev(m: &MipModel, u: usize, s: usize, levels: usize) -> Result<Vec<usize>> {
    (0..levels)
        .map(|i| {
            let symbol = format!("yc[{u},{s},{i}]");
            m.symbol_index(&symbol)
                .ok_or(Error::UnknownVariable(symbol))
        })
        .collect()
}

/// Assignment realizing the given schedules under certainty-equivalent
/// dynamics, keyed by file name. Schedules must use grid levels.
pub fn incentive_assignment(
    model: &MipModel,
    inputs: &[PlanningInput],
    schedules: &[Vec<Rewards>],
    loss: &LossFunction,
    grid: &RewardGrid,
    boxes: &Boxes,
    opts: &IncentiveMipOptions,
) -> Result<HashMap<String, f64>> {
    let mut vals: Vec<(String, f64)> = Vec::new();
    let level = |v: f64| -> Result<usize> {
        grid.levels()
            .iter()
            .position(|&g| g == v)
            .ok_or_else(|| Error::InvalidParameter {
                name: "schedule".into(),
                detail: format!("{v} not on grid"),
            })
    };
    for (u, (input, sched)) in inputs.iter().zip(schedules).enumerate() {
        let start = input.history.len();
        let coef = PlanCoefficients::new(&input.traits);
        let pw = Piecewise::new(boxes.motivation, boxes.reward, opts.piecewise)?;
        let (mut phys, mut theta) = state_at(input, boxes);
        let mut w_final = phys.w;
        for (j, &r) in sched.iter().enumerate() {
            let t = start + j;
            let plan = crate::model::plan::plan_with(&coef, &theta, boxes);
            let (next_phys, next_theta, w) = ce_week(&coef, &phys, &theta, &input.traits, boxes, r);
            vals.push((sym("a1", u, t), theta.a1));
            vals.push((sym("a2", u, t), theta.a2));
            vals.push((sym("f_b", u, t), theta.f_pref));
            vals.push((sym("r_hat", u, t), theta.reward_belief));
            pw.assign(&sym("a2r", u, t), theta.a2, theta.reward_belief, &mut vals);
            for d in 0..DAYS {
                vals.push((format!("w[{u},{t},{d}]"), w[d]));
                vals.push((format!("c[{u},{t},{d}]"), plan.calories[d]));
            }
            let (iw, ic) = (level(r.weight)?, level(r.calorie)?);
            let l1 = if w[0] - w[DAYS - 1] > 0.0 { 1.0 } else { 0.0 };
            for i in 0..grid.levels().len() {
                let yw = if i == iw { 1.0 } else { 0.0 };
                vals.push((format!("yw[{u},{t},{i}]"), yw));
                vals.push((format!("yc[{u},{t},{i}]"), if i == ic { 1.0 } else { 0.0 }));
                vals.push((format!("mw[{u},{t},{i}]"), yw * l1));
            }
            vals.push((sym("l1", u, t), l1));
            vals.push((sym("u", u, t), l1 * theta.reward_belief));
            w_final = w[DAYS - 1];
            phys = next_phys;
            theta = next_theta;
        }
        let lossv = loss.eval(w_final, input.estimate.w00);
        match loss.kind {
            LossKind::Hinge => vals.push((format!("excess[{u}]"), lossv)),
            LossKind::Indicator => vals.push((format!("fail[{u}]"), lossv)),
        }
    }
    let mut out = HashMap::new();
    for (symbol, v) in vals {
        let name = model
            .name_map
            .name(&symbol)
            .ok_or_else(|| Error::UnknownVariable(symbol.clone()))?;
        out.insert(name.to_string(), v);
    }
    Ok(out)
}
