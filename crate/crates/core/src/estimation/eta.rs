//! Profile objective over initial conditions: the smallest surrogate negative
//! log-likelihood reachable by any latent trajectory.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::observations::ObservationSet;
use crate::estimation::simplex::LinearProgram;
use crate::mip::model::Sense;
use crate::model::boxes::Boxes;
use crate::model::dynamics::{advance, week_path, WeekSignals};
use crate::model::plan::{plan_with, PlanCoefficients};
use crate::model::state::{InitialConditions, MotivationalState, PhysicalState, DAYS};
use crate::model::traits::ParticipantTraits;

/// How the latent calorie deviations are handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InnerFit {
    /// Minimize over deviations in `[-A, A]` by linear programming, branching
    /// over the weekly loss indicators.
    Exact,
    /// Deviations fixed at zero; the indicators follow from the nominal path.
    Nominal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GoalLikelihood {
    /// `|p - g|`.
    Surrogate,
    /// `-log P(g | p)`.
    Bernoulli,
}

/// Prior over initial conditions, as a negative log density up to a constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Prior {
    Uniform,
    /// Independent Laplace factors in [`InitialConditions::to_array`] order.
    Laplace {
        center: [f64; 10],
        scale: [f64; 10],
    },
}

impl Prior {
    pub fn neg_log(&self, ic: &InitialConditions) -> f64 {
        match self {
            Prior::Uniform => 0.0,
            Prior::Laplace { center, scale } => {
                let x = ic.to_array();
                (0..10).map(|i| (x[i] - center[i]).abs() / scale[i]).sum()
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Prior::Laplace { scale, .. } = self {
            if scale.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
                return Err(Error::InvalidParameter {
                    name: "prior.scale".into(),
                    detail: "must be positive".into(),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EtaOptions {
    pub beta: f64,
    pub inner: InnerFit,
    pub goal: GoalLikelihood,
    pub prior: Prior,
    /// Margin on the loss side of the indicator.
    pub tau: f64,
    /// Observed first/last difference beyond which a week's indicator is
    /// fixed; `None` means twice sigma.
    pub ambiguity: Option<f64>,
    pub max_branches: usize,
}

impl Default for EtaOptions {
    fn default() -> Self {
        EtaOptions {
            beta: 1.0,
            inner: InnerFit::Exact,
            goal: GoalLikelihood::Surrogate,
            prior: Prior::Uniform,
            tau: 1e-6,
            ambiguity: None,
            max_branches: 1 << 12,
        }
    }
}

impl EtaOptions {
    pub fn nominal() -> Self {
        EtaOptions {
            inner: InnerFit::Nominal,
            ..EtaOptions::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EtaValue {
    pub value: f64,
    pub fit: f64,
    pub goal: f64,
    pub prior: f64,
    pub l1_path: Vec<bool>,
    /// Leaf trajectory fits solved.
    pub branches: usize,
    pub clamps: u32,
    /// Fitted latent weights.
    pub weights: Vec<[f64; DAYS]>,
}

/// Motivational states for weeks `0..=T` given the loss indicators; the
/// recording-probability path uses the observed goal outcomes.
pub fn motivation_path(
    theta0: &MotivationalState,
    l1: &[bool],
    obs: &ObservationSet,
    traits: &ParticipantTraits,
    boxes: &Boxes,
) -> (Vec<MotivationalState>, u32) {
    let mut states = Vec::with_capacity(l1.len() + 1);
    let mut theta = *theta0;
    let mut clamps = 0;
    states.push(theta);
    for (t, &lost) in l1.iter().enumerate() {
        let signals = WeekSignals {
            lost_weight: lost,
            goal: if obs.goals[t] { 1.0 } else { 0.0 },
            rewards: obs.rewards[t],
            mean_calories: theta.f_pref,
        };
        let next = advance(&theta, &signals, traits, boxes);
        clamps += next.clamps;
        theta = next.state;
        states.push(theta);
    }
    (states, clamps)
}

pub fn goal_cost(thetas: &[MotivationalState], obs: &ObservationSet, opts: &EtaOptions) -> f64 {
    let terms = thetas
        .iter()
        .zip(&obs.goals)
        .map(|(th, &g)| match opts.goal {
            GoalLikelihood::Surrogate => (th.p - if g { 1.0 } else { 0.0 }).abs(),
            GoalLikelihood::Bernoulli => -(if g { th.p } else { 1.0 - th.p }).ln(),
        });
    opts.beta * terms.sum::<f64>()
}

fn check_inputs(
    ic: &InitialConditions,
    obs: &ObservationSet,
    traits: &ParticipantTraits,
    boxes: &Boxes,
    opts: &EtaOptions,
) -> Result<()> {
    if obs.weeks() == 0 {
        return Err(Error::InsufficientData("no weeks observed".into()));
    }
    obs.validate(boxes)?;
    ic.validate(boxes)?;
    traits.validate(boxes)?;
    opts.prior.validate()
}

/// Evaluate the profile objective at fixed initial conditions.
pub fn eval_eta(
    ic: &InitialConditions,
    obs: &ObservationSet,
    traits: &ParticipantTraits,
    boxes: &Boxes,
    opts: &EtaOptions,
) -> Result<EtaValue> {
    check_inputs(ic, obs, traits, boxes, opts)?;
    match opts.inner {
        InnerFit::Nominal => Ok(eval_nominal(ic, obs, traits, boxes, opts)),
        InnerFit::Exact => eval_exact(ic, obs, traits, boxes, opts),
    }
}

/// Nominal path and per-observation residuals `(fitted - observed) / sigma`,
/// followed by per-week goal residuals; used by least-squares refinement.
pub fn nominal_residuals(
    ic: &InitialConditions,
    obs: &ObservationSet,
    traits: &ParticipantTraits,
    boxes: &Boxes,
    opts: &EtaOptions,
) -> (EtaValue, Vec<f64>) {
    let coef = PlanCoefficients::new(traits);
    let mut theta = ic.theta0;
    let mut phys = ic.initial_phys();
    let mut thetas = vec![theta];
    let mut l1_path = Vec::with_capacity(obs.weeks());
    let mut weights = Vec::with_capacity(obs.weeks());
    let mut residuals = Vec::new();
    let mut clamps = 0;
    let mut fit = 0.0;
    for t in 0..obs.weeks() {
        let plan = plan_with(&coef, &theta, boxes);
        let path = week_path(&phys, &plan.calories, &[0.0; DAYS], traits, boxes);
        clamps += plan.clamps + path.clamps;
        let lost = path.w[0] - path.w[DAYS - 1] > 0.0;
        for d in 0..DAYS {
            if let Some(o) = obs.weights[t][d] {
                let r = (path.w[d] - o) / traits.sigma;
                fit += r.abs();
                residuals.push(r);
            }
        }
        let signals = WeekSignals {
            lost_weight: lost,
            goal: if obs.goals[t] { 1.0 } else { 0.0 },
            rewards: obs.rewards[t],
            mean_calories: path.f.iter().sum::<f64>() / DAYS as f64,
        };
        let next = advance(&theta, &signals, traits, boxes);
        clamps += next.clamps;
        theta = next.state;
        thetas.push(theta);
        phys = PhysicalState::carried(path.w[DAYS - 1]);
        l1_path.push(lost);
        weights.push(path.w);
    }
    let goal = goal_cost(&thetas, obs, opts);
    for (th, &g) in thetas.iter().zip(&obs.goals) {
        residuals.push(opts.beta * (th.p - if g { 1.0 } else { 0.0 }));
    }
    let prior = opts.prior.neg_log(ic);
    let value = fit + goal + prior;
    (
        EtaValue {
            value,
            fit,
            goal,
            prior,
            l1_path,
            branches: 1,
            clamps,
            weights,
        },
        residuals,
    )
}

fn eval_nominal(
    ic: &InitialConditions,
    obs: &ObservationSet,
    traits: &ParticipantTraits,
    boxes: &Boxes,
    opts: &EtaOptions,
) -> EtaValue {
    nominal_residuals(ic, obs, traits, boxes, opts).0
}

/// Affine map from deviations to latent weights for a fixed indicator path:
/// `w[t][d] = offset[t][d] + gain[t][d] . xi` with `xi` indexed `7t + d`.
#[derive(Debug, Clone)]
pub struct AffinePath {
    pub offset: Vec<[f64; DAYS]>,
    pub gain: Vec<[Vec<f64>; DAYS]>,
}

pub fn affine_path(
    ic: &InitialConditions,
    thetas: &[MotivationalState],
    weeks: usize,
    traits: &ParticipantTraits,
    boxes: &Boxes,
) -> AffinePath {
    let coef = PlanCoefficients::new(traits);
    let n = weeks * DAYS;
    let mut fb_const = ic.theta0.f_pref;
    let mut fb_gain = vec![0.0; n];
    let mut w_const = ic.w00;
    let mut w_gain = vec![0.0; n];
    let mut offset = Vec::with_capacity(weeks);
    let mut gain = Vec::with_capacity(weeks);
    for (t, theta) in thetas.iter().enumerate().take(weeks) {
        let drive = theta.a2 * theta.reward_belief;
        let mut week_off = [0.0; DAYS];
        let mut week_gain: [Vec<f64>; DAYS] = std::array::from_fn(|_| Vec::new());
        let mut f_sum_const = 0.0;
        let mut f_sum_gain = vec![0.0; n];
        for d in 0..DAYS {
            // the plan is projected into the box before deviations apply
            let c_const = boxes
                .calories
                .clamp(fb_const - theta.a1 * coef.internal[d] - drive * coef.external[d]);
            // f = c + xi
            let f_const = c_const;
            let mut f_gain = fb_gain.clone();
            f_gain[DAYS * t + d] += 1.0;
            if t == 0 && d == 0 {
                // initial weight is a parameter, not a transition
            } else {
                w_const = traits.b * w_const + traits.c * f_const + traits.k;
                for (wg, fg) in w_gain.iter_mut().zip(&f_gain) {
                    *wg = traits.b * *wg + traits.c * fg;
                }
            }
            f_sum_const += f_const;
            for (s, fg) in f_sum_gain.iter_mut().zip(&f_gain) {
                *s += fg;
            }
            week_off[d] = w_const;
            week_gain[d] = w_gain.clone();
        }
        let gf = traits.gamma_f;
        fb_const = gf * fb_const + (1.0 - gf) * f_sum_const / DAYS as f64;
        for (g, s) in fb_gain.iter_mut().zip(&f_sum_gain) {
            *g = gf * *g + (1.0 - gf) * s / DAYS as f64;
        }
        offset.push(week_off);
        gain.push(week_gain);
    }
    AffinePath { offset, gain }
}

/// Trajectory fit for a fixed indicator path over weeks `0..upto`;
/// `None` when no deviations in the box reproduce the indicators.
pub fn fit_given_path(
    ic: &InitialConditions,
    l1: &[bool],
    upto: usize,
    obs: &ObservationSet,
    traits: &ParticipantTraits,
    boxes: &Boxes,
    opts: &EtaOptions,
) -> Result<Option<(f64, Vec<[f64; DAYS]>)>> {
    let (thetas, _) = motivation_path(&ic.theta0, &l1[..upto], obs, traits, boxes);
    let aff = affine_path(ic, &thetas, upto, traits, boxes);
    let a = traits.noise_half_width;
    let n = upto * DAYS;
    let mut lp = LinearProgram::default();
    for _ in 0..n {
        lp.add_var(0.0, -a, a);
    }
    let terms = |g: &[f64]| -> Vec<(usize, f64)> {
        g.iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, v)| (i, *v))
            .collect()
    };
    for t in 0..upto {
        for d in 0..DAYS {
            if let Some(o) = obs.weights[t][d] {
                let ep = lp.add_var(1.0 / traits.sigma, 0.0, f64::INFINITY);
                let en = lp.add_var(1.0 / traits.sigma, 0.0, f64::INFINITY);
                let mut row = terms(&aff.gain[t][d]);
                row.push((ep, -1.0));
                row.push((en, 1.0));
                lp.add_row(row, Sense::Eq, o - aff.offset[t][d]);
            }
        }
        // first minus last weight of the week
        let diff: Vec<f64> = aff.gain[t][0]
            .iter()
            .zip(&aff.gain[t][DAYS - 1])
            .map(|(x, y)| x - y)
            .collect();
        let diff_const = aff.offset[t][0] - aff.offset[t][DAYS - 1];
        if l1[t] {
            lp.add_row(terms(&diff), Sense::Ge, opts.tau - diff_const);
        } else {
            lp.add_row(terms(&diff), Sense::Le, -diff_const);
        }
    }
    match lp.solve() {
        Ok(sol) => {
            let xi = &sol.x[..n];
            let weights = (0..upto)
                .map(|t| {
                    std::array::from_fn(|d| {
                        aff.offset[t][d]
                            + aff.gain[t][d]
                                .iter()
                                .zip(xi)
                                .map(|(g, x)| g * x)
                                .sum::<f64>()
                    })
                })
                .collect();
            Ok(Some((sol.objective, weights)))
        }
        Err(Error::Infeasible(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Indicator fixed by the observations, or `None` when ambiguous.
pub fn observed_indicator(obs: &ObservationSet, t: usize, threshold: f64) -> Option<bool> {
    match (obs.weights[t][0], obs.weights[t][DAYS - 1]) {
        (Some(first), Some(last)) if (first - last).abs() > threshold => Some(first > last),
        _ => None,
    }
}

struct Search<'a> {
    ic: &'a InitialConditions,
    obs: &'a ObservationSet,
    traits: &'a ParticipantTraits,
    boxes: &'a Boxes,
    opts: &'a EtaOptions,
    fixed: Vec<Option<bool>>,
    best: Option<(f64, Vec<bool>, Vec<[f64; DAYS]>)>,
    leaves: usize,
}

impl Search<'_> {
    fn dfs(&mut self, path: &mut Vec<bool>) -> Result<()> {
        let t = path.len();
        if t == self.obs.weeks() {
            return Ok(());
        }
        let choices: Vec<bool> = match self.fixed[t] {
            Some(v) => vec![v],
            None => vec![false, true],
        };
        for v in choices {
            path.push(v);
            let done = path.len() == self.obs.weeks();
            let fit = fit_given_path(
                self.ic,
                path,
                path.len(),
                self.obs,
                self.traits,
                self.boxes,
                self.opts,
            )?;
            if done {
                self.leaves += 1;
            }
            if let Some((value, weights)) = fit {
                let incumbent = self.best.as_ref().map_or(f64::INFINITY, |b| b.0);
                if done {
                    if value < incumbent {
                        self.best = Some((value, path.clone(), weights));
                    }
                } else if value < incumbent {
                    // prefix fit is a lower bound on every completion
                    self.dfs(path)?;
                }
            }
            path.pop();
        }
        Ok(())
    }
}

fn eval_exact(
    ic: &InitialConditions,
    obs: &ObservationSet,
    traits: &ParticipantTraits,
    boxes: &Boxes,
    opts: &EtaOptions,
) -> Result<EtaValue> {
    let threshold = opts.ambiguity.unwrap_or(2.0 * traits.sigma);
    let fixed: Vec<Option<bool>> = (0..obs.weeks())
        .map(|t| observed_indicator(obs, t, threshold))
        .collect();
    let free = fixed.iter().filter(|f| f.is_none()).count();
    let mut search = Search {
        ic,
        obs,
        traits,
        boxes,
        opts,
        fixed,
        best: None,
        leaves: 0,
    };
    if free < usize::BITS as usize && (1usize << free) <= opts.max_branches {
        search.dfs(&mut Vec::with_capacity(obs.weeks()))?;
    } else {
        flip_search(&mut search)?;
    }
    let (fit, l1_path, weights) = search.best.ok_or_else(|| {
        Error::Infeasible("no loss-indicator path is consistent with the boxes".into())
    })?;
    let (thetas, clamps) = motivation_path(&ic.theta0, &l1_path, obs, traits, boxes);
    let goal = goal_cost(&thetas, obs, opts);
    let prior = opts.prior.neg_log(ic);
    Ok(EtaValue {
        value: fit + goal + prior,
        fit,
        goal,
        prior,
        l1_path,
        branches: search.leaves,
        clamps,
        weights,
    })
}

/// Local search over single indicator flips from the nominal path.
fn flip_search(search: &mut Search<'_>) -> Result<()> {
    let weeks = search.obs.weeks();
    let nominal = eval_nominal(
        search.ic,
        search.obs,
        search.traits,
        search.boxes,
        search.opts,
    );
    let mut path: Vec<bool> = (0..weeks)
        .map(|t| search.fixed[t].unwrap_or(nominal.l1_path[t]))
        .collect();
    let eval = |p: &[bool], s: &mut Search<'_>| -> Result<Option<(f64, Vec<[f64; DAYS]>)>> {
        s.leaves += 1;
        fit_given_path(s.ic, p, weeks, s.obs, s.traits, s.boxes, s.opts)
    };
    let mut current = eval(&path, search)?;
    loop {
        let mut improved = false;
        for t in 0..weeks {
            if search.fixed[t].is_some() {
                continue;
            }
            path[t] = !path[t];
            let cand = eval(&path, search)?;
            let better = match (&cand, &current) {
                (Some(c), Some(b)) => c.0 < b.0 - 1e-12,
                (Some(_), None) => true,
                _ => false,
            };
            if better {
                current = cand;
                improved = true;
            } else {
                path[t] = !path[t];
            }
        }
        if !improved {
            break;
        }
    }
    if let Some((v, w)) = current {
        search.best = Some((v, path, w));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prior_scale_must_be_positive() {
        let bad = Prior::Laplace {
            center: [0.0; 10],
            scale: [0.0; 10],
        };
        assert!(bad.validate().is_err());
        assert!(Prior::Uniform.validate().is_ok());
    }
}
