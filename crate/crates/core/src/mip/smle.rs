//! Mixed-integer model of the surrogate maximum-likelihood problem.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::observations::ObservationSet;
use crate::mip::bigm::{derive_big_m, BigM, Piecewise, PiecewiseSpec};
use crate::mip::model::{MipModel, Sense, VarKind};
use crate::model::boxes::{Boxes, Interval};
use crate::model::plan::PlanCoefficients;
use crate::model::rollout::Trajectory;
use crate::model::state::{MotivationalState, DAYS};
use crate::model::traits::ParticipantTraits;

/// Tolerance used on the open side of strict inequalities.
pub const DEFAULT_TAU: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmleMipOptions {
    pub piecewise: PiecewiseSpec,
    /// Weight-residual weight; `None` means `1 / sigma`.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub tau: f64,
}

impl Default for SmleMipOptions {
    fn default() -> Self {
        SmleMipOptions {
            piecewise: PiecewiseSpec::default(),
            alpha: None,
            beta: 1.0,
            tau: DEFAULT_TAU,
        }
    }
}

/// Variable indices for the quantities that enter the indicator linking rows
/// of one week.
#[derive(Debug, Clone, Copy)]
pub struct LinkVars {
    pub w_first: usize,
    pub w_last: usize,
    pub p: usize,
    pub threshold: usize,
    pub k1: usize,
    pub k2: usize,
    pub l1: usize,
    pub l2: usize,
    pub z1: usize,
    pub z2: usize,
    pub z3: usize,
}

/// Add the `l1`, `l2`, `z1`, `z2`, `z3` variables of week `t`.
pub fn add_link_vars(
    model: &mut MipModel,
    t: usize,
    big_m: &BigM,
) -> Result<(usize, usize, usize, usize, usize)> {
    let l1 = model.add_var(&format!("l1[{t}]"), 0.0, 1.0, VarKind::Binary)?;
    let l2 = model.add_var(&format!("l2[{t}]"), 0.0, 1.0, VarKind::Binary)?;
    let z1 = model.add_var(&format!("z1[{t}]"), 0.0, big_m.mz1, VarKind::Continuous)?;
    let z2 = model.add_var(&format!("z2[{t}]"), 0.0, big_m.mz2, VarKind::Continuous)?;
    let z3 = model.add_var(&format!("z3[{t}]"), 0.0, big_m.mz3, VarKind::Continuous)?;
    Ok((l1, l2, z1, z2, z3))
}

/// Indicator linking rows for week `t`:
/// `l1 = 1` iff the week's first weight exceeds its last by at least `tau`
/// (and `l1 = 0` forces no loss), `l2 = 1` iff `p >= B`,
/// `z1 = r_c * l2`, `z2 = k2 * l1`, `z3 = k1 * l1`.
pub fn add_link_rows(
    model: &mut MipModel,
    t: usize,
    v: &LinkVars,
    calorie_reward: f64,
    big_m: &BigM,
    tau: f64,
) {
    let loss = vec![(v.w_first, 1.0), (v.w_last, -1.0)];
    // l1 = 0 -> loss <= 0
    let mut row = loss.clone();
    row.push((v.l1, -big_m.m1));
    model.add_row(format!("l1_off[{t}]"), row, Sense::Le, 0.0);
    // l1 = 1 -> loss >= tau
    let mut row = loss;
    row.push((v.l1, -(big_m.m1 + tau)));
    model.add_row(
        format!("l1_on[{t}]"),
        row,
        Sense::Ge,
        tau - (big_m.m1 + tau),
    );
    // l2 = 1 -> p - B >= 0
    model.add_row(
        format!("l2_on[{t}]"),
        vec![(v.p, 1.0), (v.threshold, -1.0), (v.l2, -big_m.m2)],
        Sense::Ge,
        -big_m.m2,
    );
    // l2 = 0 -> p - B <= -tau
    model.add_row(
        format!("l2_off[{t}]"),
        vec![(v.p, 1.0), (v.threshold, -1.0), (v.l2, -(big_m.m2 + tau))],
        Sense::Le,
        -tau,
    );
    // z1 = r_c * l2
    model.add_row(
        format!("z1_gate[{t}]"),
        vec![(v.z1, 1.0), (v.l2, -big_m.mz1)],
        Sense::Le,
        0.0,
    );
    model.add_row(
        format!("z1_cap[{t}]"),
        vec![(v.z1, 1.0)],
        Sense::Le,
        calorie_reward,
    );
    model.add_row(
        format!("z1_floor[{t}]"),
        vec![(v.z1, 1.0), (v.l2, -big_m.mz1)],
        Sense::Ge,
        calorie_reward - big_m.mz1,
    );
    // z2 = k2 * l1
    model.add_row(
        format!("z2_gate[{t}]"),
        vec![(v.z2, 1.0), (v.l1, -big_m.mz2)],
        Sense::Le,
        0.0,
    );
    model.add_row(
        format!("z2_cap[{t}]"),
        vec![(v.z2, 1.0), (v.k2, -1.0)],
        Sense::Le,
        0.0,
    );
    model.add_row(
        format!("z2_floor[{t}]"),
        vec![(v.z2, 1.0), (v.k2, -1.0), (v.l1, -big_m.mz2)],
        Sense::Ge,
        -big_m.mz2,
    );
    // z3 = k1 * l1
    model.add_row(
        format!("z3_gate[{t}]"),
        vec![(v.z3, 1.0), (v.l1, -big_m.mz3)],
        Sense::Le,
        0.0,
    );
    model.add_row(
        format!("z3_cap[{t}]"),
        vec![(v.z3, 1.0), (v.k1, -1.0)],
        Sense::Le,
        0.0,
    );
    model.add_row(
        format!("z3_floor[{t}]"),
        vec![(v.z3, 1.0), (v.k1, -1.0), (v.l1, -big_m.mz3)],
        Sense::Ge,
        -big_m.mz3,
    );
}

/// Motivation updates written with the linking variables:
/// `a1' = g1*(a1 - a1b) + a1b + z1 + z3` and `a2' = g2*(a2 - a2b) + a2b + r_w*z2`.
#[allow(clippy::too_many_arguments)]
pub fn add_motivation_updates(
    model: &mut MipModel,
    t: usize,
    traits: &ParticipantTraits,
    (a1, a1_next): (usize, usize),
    (a2, a2_next): (usize, usize),
    v: &LinkVars,
    weight_reward: f64,
) {
    model.add_row(
        format!("a1_next[{t}]"),
        vec![
            (a1_next, 1.0),
            (a1, -traits.gamma1),
            (v.z1, -1.0),
            (v.z3, -1.0),
        ],
        Sense::Eq,
        (1.0 - traits.gamma1) * traits.a1_base,
    );
    model.add_row(
        format!("a2_next[{t}]"),
        vec![(a2_next, 1.0), (a2, -traits.gamma2), (v.z2, -weight_reward)],
        Sense::Eq,
        (1.0 - traits.gamma2) * traits.a2_base,
    );
}

/// Symbol names of the per-week state variables.
fn sym(name: &str, t: usize) -> String {
    format!("{name}[{t}]")
}

fn sym2(name: &str, t: usize, d: usize) -> String {
    format!("{name}[{t},{d}]")
}

/// Build the surrogate-likelihood model for one participant.
pub fn build_smle_mip(
    obs: &ObservationSet,
    traits: &ParticipantTraits,
    boxes: &Boxes,
    opts: &SmleMipOptions,
) -> Result<MipModel> {
    let weeks = obs.weeks();
    if weeks < 2 {
        return Err(Error::InsufficientData(format!(
            "{weeks} weeks; at least 2 required"
        )));
    }
    obs.validate(boxes)?;
    traits.validate(boxes)?;
    let big_m = derive_big_m(boxes)?;
    let alpha = opts.alpha.unwrap_or(1.0 / traits.sigma);
    let coef = PlanCoefficients::new(traits);
    let pw = Piecewise::new(boxes.motivation, boxes.reward, opts.piecewise)?;
    let pb = boxes.probability();
    let a = traits.noise_half_width;
    let slack_hi = boxes.weight.hi
        + obs
            .iter_observed()
            .map(|(_, _, v)| v.abs())
            .fold(0.0, f64::max);

    let mut m = MipModel::new();
    let threshold = m.add_var("B", pb.lo, pb.hi, VarKind::Continuous)?;
    let k1 = m.add_var("k1", boxes.gain.lo, boxes.gain.hi, VarKind::Continuous)?;
    let k2 = m.add_var("k2", boxes.gain.lo, boxes.gain.hi, VarKind::Continuous)?;
    let kp = m.add_var("kp", boxes.gain.lo, boxes.gain.hi, VarKind::Continuous)?;

    let mut objective = Vec::new();
    type WeekVars = (
        usize,
        usize,
        usize,
        usize,
        usize,
        usize,
        usize,
        [usize; DAYS],
    );
    let mut prev: Option<WeekVars> = None;
    let mut last_w6 = None;
    for t in 0..weeks {
        let a1 = m.add_var(
            &sym("a1", t),
            boxes.motivation.lo,
            boxes.motivation.hi,
            VarKind::Continuous,
        )?;
        let a2 = m.add_var(
            &sym("a2", t),
            boxes.motivation.lo,
            boxes.motivation.hi,
            VarKind::Continuous,
        )?;
        let p = m.add_var(&sym("p", t), pb.lo, pb.hi, VarKind::Continuous)?;
        let fb = m.add_var(
            &sym("f_b", t),
            boxes.calories.lo,
            boxes.calories.hi,
            VarKind::Continuous,
        )?;
        let rh = m.add_var(
            &sym("r_hat", t),
            boxes.reward.lo,
            boxes.reward.hi,
            VarKind::Continuous,
        )?;
        let q = pw.add_to(&mut m, &sym("a2r", t), a2, rh)?;

        let mut w = [0usize; DAYS];
        let mut f = [0usize; DAYS];
        for d in 0..DAYS {
            w[d] = m.add_var(
                &sym2("w", t, d),
                boxes.weight.lo,
                boxes.weight.hi,
                VarKind::Continuous,
            )?;
            let c = m.add_var(
                &sym2("c", t, d),
                boxes.calories.lo,
                boxes.calories.hi,
                VarKind::Continuous,
            )?;
            f[d] = m.add_var(
                &sym2("f", t, d),
                boxes.calories.lo,
                boxes.calories.hi,
                VarKind::Continuous,
            )?;
            let xi = m.add_var(&sym2("xi", t, d), -a, a, VarKind::Continuous)?;
            m.add_row(
                sym2("plan", t, d),
                vec![
                    (c, 1.0),
                    (fb, -1.0),
                    (a1, coef.internal[d]),
                    (q, coef.external[d]),
                ],
                Sense::Eq,
                0.0,
            );
            m.add_row(
                sym2("exec", t, d),
                vec![(f[d], 1.0), (c, -1.0), (xi, -1.0)],
                Sense::Eq,
                0.0,
            );
            let prior = if d > 0 { Some(w[d - 1]) } else { last_w6 };
            if let Some(pw_idx) = prior {
                m.add_row(
                    sym2("weight", t, d),
                    vec![(w[d], 1.0), (pw_idx, -traits.b), (f[d], -traits.c)],
                    Sense::Eq,
                    traits.k,
                );
            }
            if let Some(obs_w) = obs.weights[t][d] {
                let ep = m.add_var(&sym2("ew_pos", t, d), 0.0, slack_hi, VarKind::Continuous)?;
                let en = m.add_var(&sym2("ew_neg", t, d), 0.0, slack_hi, VarKind::Continuous)?;
                m.add_row(
                    sym2("fit", t, d),
                    vec![(w[d], 1.0), (ep, -1.0), (en, 1.0)],
                    Sense::Eq,
                    obs_w,
                );
                objective.push((ep, alpha));
                objective.push((en, alpha));
            }
        }
        last_w6 = Some(w[DAYS - 1]);

        let (l1, l2, z1, z2, z3) = add_link_vars(&mut m, t, &big_m)?;
        let link = LinkVars {
            w_first: w[0],
            w_last: w[DAYS - 1],
            p,
            threshold,
            k1,
            k2,
            l1,
            l2,
            z1,
            z2,
            z3,
        };
        add_link_rows(&mut m, t, &link, obs.rewards[t].calorie, &big_m, opts.tau);

        // u = l1 * r_hat for the reward-belief update
        let rmax = boxes.reward.hi;
        let u = m.add_var(&sym("u", t), 0.0, rmax, VarKind::Continuous)?;
        m.add_row(
            sym("u_gate", t),
            vec![(u, 1.0), (l1, -rmax)],
            Sense::Le,
            0.0,
        );
        m.add_row(sym("u_cap", t), vec![(u, 1.0), (rh, -1.0)], Sense::Le, 0.0);
        m.add_row(
            sym("u_floor", t),
            vec![(u, 1.0), (rh, -1.0), (l1, -rmax)],
            Sense::Ge,
            -rmax,
        );

        let gp = m.add_var(&sym("eg_pos", t), 0.0, 1.0, VarKind::Continuous)?;
        let gn = m.add_var(&sym("eg_neg", t), 0.0, 1.0, VarKind::Continuous)?;
        let g = if obs.goals[t] { 1.0 } else { 0.0 };
        m.add_row(
            sym("goal", t),
            vec![(p, 1.0), (gp, -1.0), (gn, 1.0)],
            Sense::Eq,
            g,
        );
        if opts.beta != 0.0 {
            objective.push((gp, opts.beta));
            objective.push((gn, opts.beta));
        }

        if let Some((pa1, pa2, pp, pfb, prh, pu, _, pf)) = prev {
            let s = t - 1;
            let plink = link_of(&m, s, threshold, k1, k2)?;
            add_motivation_updates(
                &mut m,
                s,
                traits,
                (pa1, a1),
                (pa2, a2),
                &plink,
                obs.rewards[s].weight,
            );
            let gs = if obs.goals[s] { 1.0 } else { 0.0 };
            m.add_row(
                sym("p_next", s),
                vec![(p, 1.0), (pp, -traits.gamma_p), (kp, -gs)],
                Sense::Eq,
                (1.0 - traits.gamma_p) * traits.p_base,
            );
            let mut row = vec![(fb, 1.0), (pfb, -traits.gamma_f)];
            row.extend(
                pf.iter()
                    .map(|&fi| (fi, -(1.0 - traits.gamma_f) / DAYS as f64)),
            );
            m.add_row(sym("f_b_next", s), row, Sense::Eq, 0.0);
            let step = 1.0 / (s as f64 + 1.0);
            m.add_row(
                sym("r_hat_next", s),
                vec![
                    (rh, 1.0),
                    (prh, -1.0),
                    (plink.l1, -obs.rewards[s].weight * step),
                    (pu, step),
                ],
                Sense::Eq,
                0.0,
            );
        }
        prev = Some((a1, a2, p, fb, rh, u, l1, f));
    }
    m.set_objective(objective, 0.0);
    Ok(m)
}

fn link_of(m: &MipModel, t: usize, threshold: usize, k1: usize, k2: usize) -> Result<LinkVars> {
    let get = |s: String| m.symbol_index(&s).ok_or(Error::UnknownVariable(s));
    Ok(LinkVars {
        w_first: get(sym2("w", t, 0))?,
        w_last: get(sym2("w", t, DAYS - 1))?,
        p: get(sym("p", t))?,
        threshold,
        k1,
        k2,
        l1: get(sym("l1", t))?,
        l2: get(sym("l2", t))?,
        z1: get(sym("z1", t))?,
        z2: get(sym("z2", t))?,
        z3: get(sym("z3", t))?,
    })
}

/// Closed-form size of the model built by [`build_smle_mip`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Census {
    pub variables: usize,
    pub binaries: usize,
    pub constraints: usize,
}

pub fn smle_census(weeks: usize, observed: usize, segments: usize) -> Census {
    let per_week_vars = 4 * DAYS + 5 + 2 + 3 + 1 + 2 + (1 + 4 * segments);
    let per_week_rows = 3 * DAYS + 4 + 9 + 3 + 1 + (8 * segments + 4);
    Census {
        variables: 4 + weeks * per_week_vars + 2 * observed,
        binaries: weeks * (2 + segments),
        constraints: weeks * per_week_rows - 1 + observed + 5 * (weeks - 1),
    }
}

/// Full variable assignment reproducing a trajectory, keyed by file name.
pub fn smle_assignment(
    model: &MipModel,
    obs: &ObservationSet,
    traj: &Trajectory,
    boxes: &Boxes,
    opts: &SmleMipOptions,
) -> Result<HashMap<String, f64>> {
    let pw = Piecewise::new(boxes.motivation, boxes.reward, opts.piecewise)?;
    let theta0 = traj
        .thetas
        .first()
        .ok_or_else(|| Error::InsufficientData("empty trajectory".into()))?;
    let mut vals: Vec<(String, f64)> = vec![
        ("B".into(), theta0.threshold),
        ("k1".into(), theta0.k1),
        ("k2".into(), theta0.k2),
        ("kp".into(), theta0.kp),
    ];
    for (t, week) in traj.weeks.iter().enumerate().take(obs.weeks()) {
        let th: &MotivationalState = &traj.thetas[t];
        vals.push((sym("a1", t), th.a1));
        vals.push((sym("a2", t), th.a2));
        vals.push((sym("p", t), th.p));
        vals.push((sym("f_b", t), th.f_pref));
        vals.push((sym("r_hat", t), th.reward_belief));
        pw.assign(&sym("a2r", t), th.a2, th.reward_belief, &mut vals);
        for d in 0..DAYS {
            vals.push((sym2("w", t, d), week.w_path[d]));
            vals.push((sym2("c", t, d), week.c_path[d]));
            vals.push((sym2("f", t, d), week.f_path[d]));
            vals.push((sym2("xi", t, d), week.f_path[d] - week.c_path[d]));
            if let Some(o) = obs.weights[t][d] {
                let r = week.w_path[d] - o;
                vals.push((sym2("ew_pos", t, d), r.max(0.0)));
                vals.push((sym2("ew_neg", t, d), (-r).max(0.0)));
            }
        }
        let l1 = if week.lost_weight { 1.0 } else { 0.0 };
        let l2 = if th.p >= th.threshold { 1.0 } else { 0.0 };
        vals.push((sym("l1", t), l1));
        vals.push((sym("l2", t), l2));
        vals.push((sym("z1", t), obs.rewards[t].calorie * l2));
        vals.push((sym("z2", t), th.k2 * l1));
        vals.push((sym("z3", t), th.k1 * l1));
        vals.push((sym("u", t), th.reward_belief * l1));
        let g = if obs.goals[t] { 1.0 } else { 0.0 };
        vals.push((sym("eg_pos", t), (th.p - g).max(0.0)));
        vals.push((sym("eg_neg", t), (g - th.p).max(0.0)));
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

/// One week of indicator-linking data used by the reformulation check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkingPoint {
    pub w_first: f64,
    pub w_last: f64,
    pub p: f64,
    pub threshold: f64,
    pub k1: f64,
    pub k2: f64,
    pub calorie_reward: f64,
    pub weight_reward: f64,
    pub a1: f64,
    pub a1_next: f64,
    pub a2: f64,
    pub a2_next: f64,
}

/// Model holding only the indicator linking rows and the two motivation
/// updates of a single week, with every data variable fixed by `fixed`.
pub fn linking_block(
    point: &LinkingPoint,
    traits: &ParticipantTraits,
    boxes: &Boxes,
    tau: f64,
) -> Result<(MipModel, HashMap<usize, f64>)> {
    let big_m = derive_big_m(boxes)?;
    let mut m = MipModel::new();
    let wide = |iv: Interval| (iv.lo - iv.width(), iv.hi + iv.width());
    let mut fixed = HashMap::new();
    let mut var = |m: &mut MipModel, s: &str, value: f64, iv: Interval| -> Result<usize> {
        let (lo, hi) = wide(iv);
        let i = m.add_var(s, lo.min(value), hi.max(value), VarKind::Continuous)?;
        fixed.insert(i, value);
        Ok(i)
    };
    let pb = boxes.probability();
    let w_first = var(&mut m, "w[0,0]", point.w_first, boxes.weight)?;
    let w_last = var(&mut m, "w[0,6]", point.w_last, boxes.weight)?;
    let p = var(&mut m, "p[0]", point.p, pb)?;
    let threshold = var(&mut m, "B", point.threshold, pb)?;
    let k1 = var(&mut m, "k1", point.k1, boxes.gain)?;
    let k2 = var(&mut m, "k2", point.k2, boxes.gain)?;
    let a1 = var(&mut m, "a1[0]", point.a1, boxes.motivation)?;
    let a1n = var(&mut m, "a1[1]", point.a1_next, boxes.motivation)?;
    let a2 = var(&mut m, "a2[0]", point.a2, boxes.motivation)?;
    let a2n = var(&mut m, "a2[1]", point.a2_next, boxes.motivation)?;
    let (l1, l2, z1, z2, z3) = add_link_vars(&mut m, 0, &big_m)?;
    let link = LinkVars {
        w_first,
        w_last,
        p,
        threshold,
        k1,
        k2,
        l1,
        l2,
        z1,
        z2,
        z3,
    };
    add_link_rows(&mut m, 0, &link, point.calorie_reward, &big_m, tau);
    add_motivation_updates(
        &mut m,
        0,
        traits,
        (a1, a1n),
        (a2, a2n),
        &link,
        point.weight_reward,
    );
    Ok((m, fixed))
}
