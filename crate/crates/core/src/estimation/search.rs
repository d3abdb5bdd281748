//! Surrogate maximum-likelihood search over initial conditions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::eta::{eval_eta, nominal_residuals, EtaOptions, EtaValue, InnerFit};
use crate::estimation::observations::ObservationSet;
use crate::model::boxes::{Boxes, Interval};
use crate::model::plan::PlanCoefficients;
use crate::model::state::{InitialConditions, MotivationalState, DAYS};
use crate::model::traits::ParticipantTraits;

const P_INDEX: usize = 3;
const B_INDEX: usize = 4;
const KP_INDEX: usize = 9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmleConfig {
    pub eta: EtaOptions,
    /// Seeds refined by local search.
    pub starts: usize,
    pub lm_iterations: usize,
    /// Objective evaluations allowed per pattern search.
    pub pattern_evaluations: usize,
    /// Pattern steps stop below this fraction of the coordinate scale.
    pub tolerance: f64,
    /// Move flat recording-probability coordinates to a canonical edge.
    pub canonicalize: bool,
}

impl Default for SmleConfig {
    fn default() -> Self {
        SmleConfig {
            eta: EtaOptions::default(),
            starts: 9,
            lm_iterations: 200,
            pattern_evaluations: 4000,
            tolerance: 1e-9,
            canonicalize: true,
        }
    }
}

impl SmleConfig {
    pub fn nominal() -> Self {
        SmleConfig {
            eta: EtaOptions::nominal(),
            ..SmleConfig::default()
        }
    }

    /// Small budgets for repeated re-estimation from a warm start.
    pub fn fast(mut self) -> Self {
        self.starts = 1;
        self.lm_iterations = 40;
        self.pattern_evaluations = 600;
        self.tolerance = 1e-6;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub branches: usize,
    pub clamps: u32,
    pub mode: InnerFit,
    pub evaluations: usize,
    pub starts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimationResult {
    pub w00_hat: f64,
    pub theta0_hat: MotivationalState,
    pub objective: f64,
    pub l1_path: Vec<bool>,
    /// Latent weights of the best trajectory.
    pub fitted: Vec<[f64; DAYS]>,
    pub diagnostics: Diagnostics,
}

impl EstimationResult {
    pub fn initial_conditions(&self) -> InitialConditions {
        InitialConditions {
            w00: self.w00_hat,
            theta0: self.theta0_hat,
        }
    }
}

struct Objective<'a> {
    obs: &'a ObservationSet,
    traits: &'a ParticipantTraits,
    boxes: &'a Boxes,
    opts: &'a EtaOptions,
    bounds: [Interval; 10],
    evaluations: usize,
}

impl Objective<'_> {
    fn project(&self, x: &mut [f64; 10]) {
        for (v, b) in x.iter_mut().zip(&self.bounds) {
            *v = b.clamp(*v);
        }
    }

    fn eta(&mut self, x: &[f64; 10]) -> Result<EtaValue> {
        self.evaluations += 1;
        eval_eta(
            &InitialConditions::from_array(*x),
            self.obs,
            self.traits,
            self.boxes,
            self.opts,
        )
    }

    /// Objective value, infinite where the inner fit is infeasible.
    fn value(&mut self, x: &[f64; 10]) -> Result<f64> {
        match self.eta(x) {
            Ok(v) => Ok(v.value),
            Err(Error::Infeasible(_)) => Ok(f64::INFINITY),
            Err(e) => Err(e),
        }
    }

    fn residuals(&mut self, x: &[f64; 10]) -> Vec<f64> {
        self.evaluations += 1;
        nominal_residuals(
            &InitialConditions::from_array(*x),
            self.obs,
            self.traits,
            self.boxes,
            self.opts,
        )
        .1
    }

    /// Typical magnitude of a coordinate, used for steps and stopping.
    fn scale(&self, x: &[f64; 10], i: usize) -> f64 {
        x[i].abs().max(1e-4 * self.bounds[i].width()).max(1e-12)
    }
}

fn check_data(obs: &ObservationSet) -> Result<()> {
    if obs.weeks() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 weeks, got {}",
            obs.weeks()
        )));
    }
    if obs.observed_count() == 0 {
        return Err(Error::InsufficientData("every weight is missing".into()));
    }
    Ok(())
}

/// Coarse starting points built from the data.
pub fn seeds(
    obs: &ObservationSet,
    traits: &ParticipantTraits,
    boxes: &Boxes,
) -> Vec<InitialConditions> {
    let bounds = InitialConditions::bounds(boxes);
    let coef = PlanCoefficients::new(traits);
    let internal = coef.internal.iter().sum::<f64>() / DAYS as f64;
    let external = coef.external.iter().sum::<f64>() / DAYS as f64;
    let observed: Vec<(usize, f64)> = obs
        .iter_observed()
        .map(|(t, d, w)| (t * DAYS + d, w))
        .collect();
    let (first_day, w0) = observed[0];
    let (last_day, w1) = *observed.last().unwrap_or(&observed[0]);
    let slope = if last_day > first_day {
        (w1 - w0) / (last_day - first_day) as f64
    } else {
        0.0
    };
    let w00 = bounds[0].clamp(w0 - slope * first_day as f64);
    // calories that keep weight on the observed trend
    let mean_plan = ((1.0 - traits.b) * w00 - traits.k + slope) / traits.c;
    let met = obs.goals.iter().filter(|g| **g).count() as f64 / obs.weeks() as f64;
    let p = bounds[P_INDEX].clamp(met);
    let paid: Vec<f64> = obs
        .rewards
        .iter()
        .map(|r| r.weight)
        .filter(|r| *r > 0.0)
        .collect();
    let r_hat = bounds[6].clamp(if paid.is_empty() {
        1.0
    } else {
        paid.iter().sum::<f64>() / paid.len() as f64
    });
    let k1 = bounds[7].clamp(20.0 / internal);
    let k2 = bounds[8].clamp(20.0 / (r_hat * r_hat * external));
    let mut out = Vec::new();
    for a1_kcal in [0.0, 100.0, 300.0] {
        for a2_kcal in [0.0, 50.0, 200.0] {
            let a1 = bounds[1].clamp(a1_kcal / internal);
            let a2 = bounds[2].clamp(a2_kcal / (r_hat * external));
            let f_pref = bounds[5].clamp(mean_plan + a1 * internal + a2 * r_hat * external);
            out.push(InitialConditions::from_array([
                w00, a1, a2, p, p, f_pref, r_hat, k1, k2, 0.0,
            ]));
        }
    }
    out
}

/// Minimize the profile objective over initial conditions.
pub fn solve_smle(
    obs: &ObservationSet,
    traits: &ParticipantTraits,
    boxes: &Boxes,
    config: &SmleConfig,
) -> Result<EstimationResult> {
    check_data(obs)?;
    obs.validate(boxes)?;
    let starts = seeds(obs, traits, boxes);
    run(obs, traits, boxes, config, starts)
}

/// As [`solve_smle`] but refining only from `start`.
pub fn solve_smle_from(
    obs: &ObservationSet,
    traits: &ParticipantTraits,
    boxes: &Boxes,
    config: &SmleConfig,
    start: &InitialConditions,
) -> Result<EstimationResult> {
    check_data(obs)?;
    obs.validate(boxes)?;
    let mut start = *start;
    let mut x = start.to_array();
    for (v, b) in x.iter_mut().zip(&InitialConditions::bounds(boxes)) {
        *v = b.clamp(*v);
    }
    start = InitialConditions::from_array(x);
    run(
        obs,
        traits,
        boxes,
        &SmleConfig {
            starts: 1,
            ..config.clone()
        },
        vec![start],
    )
}

fn run(
    obs: &ObservationSet,
    traits: &ParticipantTraits,
    boxes: &Boxes,
    config: &SmleConfig,
    seeds: Vec<InitialConditions>,
) -> Result<EstimationResult> {
    let mut f = Objective {
        obs,
        traits,
        boxes,
        opts: &config.eta,
        bounds: InitialConditions::bounds(boxes),
        evaluations: 0,
    };
    let mut ranked = Vec::with_capacity(seeds.len());
    for (i, s) in seeds.iter().enumerate() {
        let x = s.to_array();
        ranked.push((f.value(&x)?, i, x));
    }
    // stable order: value, then seed index
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut best: Option<(f64, [f64; 10])> = None;
    let used = config.starts.max(1).min(ranked.len());
    for &(_, _, x0) in ranked.iter().take(used) {
        let x = refine(&mut f, x0, config)?;
        let v = f.value(&x)?;
        if best.is_none_or(|(b, _)| v < b) {
            best = Some((v, x));
        }
    }
    let (_, mut x) =
        best.ok_or_else(|| Error::Infeasible("no seed admits a feasible trajectory".into()))?;
    if config.canonicalize {
        canonicalize(&mut f, &mut x)?;
    }
    let eta = f.eta(&x)?;
    let ic = InitialConditions::from_array(x);
    Ok(EstimationResult {
        w00_hat: ic.w00,
        theta0_hat: ic.theta0,
        objective: eta.value,
        l1_path: eta.l1_path,
        fitted: eta.weights,
        diagnostics: Diagnostics {
            branches: eta.branches,
            clamps: eta.clamps,
            mode: config.eta.inner,
            evaluations: f.evaluations,
            starts: used,
        },
    })
}

fn refine(f: &mut Objective<'_>, x0: [f64; 10], config: &SmleConfig) -> Result<[f64; 10]> {
    let x = levenberg_marquardt(f, x0, config.lm_iterations);
    // least squares works on the nominal path; keep whichever is better
    let x = if f.value(&x)? <= f.value(&x0)? { x } else { x0 };
    pattern_search(f, x, config)
}

/// Reweighted damped least squares on the nominal residuals, approximating
/// the absolute-error objective.
fn levenberg_marquardt(f: &mut Objective<'_>, mut x: [f64; 10], iterations: usize) -> [f64; 10] {
    const FLOOR: f64 = 1e-3;
    let mut lambda = 1e-3;
    let mut r = f.residuals(&x);
    for _ in 0..iterations {
        let w: Vec<f64> = r.iter().map(|v| 1.0 / v.abs().max(FLOOR)).collect();
        let cost = |res: &[f64]| res.iter().zip(&w).map(|(v, wi)| wi * v * v).sum::<f64>();
        let base = cost(&r);
        if base < 1e-26 {
            break;
        }
        let jac = jacobian(f, &x, &r);
        let gradient: Vec<f64> = (0..10)
            .map(|i| (0..r.len()).map(|k| w[k] * jac[i][k] * r[k]).sum())
            .collect();
        // drop flat coordinates and those pinned at a bound the step would cross
        let active: Vec<usize> = (0..10)
            .filter(|&i| jac[i].iter().any(|v| *v != 0.0))
            .filter(|&i| {
                let b = f.bounds[i];
                !((x[i] <= b.lo && gradient[i] > 0.0) || (x[i] >= b.hi && gradient[i] < 0.0))
            })
            .collect();
        if active.is_empty() {
            break;
        }
        let n = active.len();
        let mut jtj = vec![vec![0.0; n]; n];
        let mut jtr = vec![0.0; n];
        for (a, &i) in active.iter().enumerate() {
            for (b, &j) in active.iter().enumerate().skip(a) {
                let s: f64 = (0..r.len()).map(|k| w[k] * jac[i][k] * jac[j][k]).sum();
                jtj[a][b] = s;
                jtj[b][a] = s;
            }
            jtr[a] = gradient[i];
        }
        let mut accepted = false;
        for _ in 0..12 {
            let mut m = jtj.clone();
            for (a, row) in m.iter_mut().enumerate() {
                row[a] += lambda * jtj[a][a].max(1e-300);
            }
            let rhs: Vec<f64> = jtr.iter().map(|v| -v).collect();
            let Some(step) = solve_dense(m, rhs) else {
                lambda *= 10.0;
                continue;
            };
            let mut cand = x;
            for (a, &i) in active.iter().enumerate() {
                cand[i] += step[a];
            }
            f.project(&mut cand);
            let rc = f.residuals(&cand);
            if cost(&rc) < base {
                let moved = (0..10)
                    .map(|i| (cand[i] - x[i]).abs() / f.scale(&x, i))
                    .fold(0.0, f64::max);
                x = cand;
                r = rc;
                lambda = (lambda / 3.0).max(1e-12);
                accepted = true;
                if moved < 1e-13 {
                    return x;
                }
                break;
            }
            lambda *= 4.0;
        }
        if !accepted {
            break;
        }
    }
    x
}

/// Central differences, one-sided at box edges; rows are coordinates.
fn jacobian(f: &mut Objective<'_>, x: &[f64; 10], r: &[f64]) -> Vec<Vec<f64>> {
    (0..10)
        .map(|i| {
            let h = 1e-6 * f.scale(x, i);
            let b = f.bounds[i];
            let (lo, hi) = ((x[i] - h).max(b.lo), (x[i] + h).min(b.hi));
            if hi - lo <= 0.0 {
                return vec![0.0; r.len()];
            }
            let mut xl = *x;
            let mut xh = *x;
            xl[i] = lo;
            xh[i] = hi;
            let rl = f.residuals(&xl);
            let rh = f.residuals(&xh);
            rl.iter()
                .zip(&rh)
                .map(|(a, b)| (b - a) / (hi - lo))
                .collect()
        })
        .collect()
}

/// Gaussian elimination with partial pivoting.
fn solve_dense(mut m: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Option<Vec<f64>> {
    let n = rhs.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[pivot][col].abs() < 1e-300 || !m[pivot][col].is_finite() {
            return None;
        }
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in col + 1..n {
            let factor = m[row][col] / m[col][col];
            for k in col..n {
                m[row][k] -= factor * m[col][k];
            }
            rhs[row] -= factor * rhs[col];
        }
    }
    let mut out = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| m[row][k] * out[k]).sum();
        out[row] = (rhs[row] - s) / m[row][row];
    }
    out.iter().all(|v| v.is_finite()).then_some(out)
}

/// Coordinate pattern search with step halving on the exact objective.
fn pattern_search(
    f: &mut Objective<'_>,
    mut x: [f64; 10],
    config: &SmleConfig,
) -> Result<[f64; 10]> {
    let mut value = f.value(&x)?;
    let mut step: [f64; 10] = std::array::from_fn(|i| 0.05 * f.scale(&x, i));
    let budget = f.evaluations + config.pattern_evaluations;
    while f.evaluations < budget {
        let mut improved = false;
        for i in 0..10 {
            if f.bounds[i].width() == 0.0 {
                continue;
            }
            for dir in [1.0, -1.0] {
                let mut cand = x;
                cand[i] += dir * step[i];
                f.project(&mut cand);
                if cand[i] == x[i] {
                    continue;
                }
                let v = f.value(&cand)?;
                if v < value {
                    x = cand;
                    value = v;
                    improved = true;
                    // keep going in a successful direction
                    step[i] *= 2.0;
                    break;
                }
            }
        }
        if !improved {
            let mut done = true;
            for (i, s) in step.iter_mut().enumerate() {
                *s *= 0.5;
                if *s > config.tolerance * f.scale(&x, i) {
                    done = false;
                }
            }
            if done {
                break;
            }
        }
    }
    Ok(x)
}

/// Slide `kp` down and `B` up as far as the objective stays unchanged.
fn canonicalize(f: &mut Objective<'_>, x: &mut [f64; 10]) -> Result<()> {
    let reference = f.value(x)?;
    let tol = 1e-12 * (1.0 + reference.abs());
    for (i, target) in [
        (KP_INDEX, f.bounds[KP_INDEX].lo),
        (B_INDEX, f.bounds[B_INDEX].hi),
    ] {
        let mut cand = *x;
        cand[i] = target;
        if f.value(&cand)? <= reference + tol {
            *x = cand;
            continue;
        }
        let (mut good, mut bad) = (x[i], target);
        for _ in 0..40 {
            let mid = 0.5 * (good + bad);
            cand[i] = mid;
            if f.value(&cand)? <= reference + tol {
                good = mid;
            } else {
                bad = mid;
            }
        }
        x[i] = good;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_solver_handles_pivoting() {
        let x = solve_dense(vec![vec![0.0, 2.0], vec![3.0, 1.0]], vec![4.0, 5.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 2.0).abs() < 1e-12);
        assert!(solve_dense(vec![vec![1.0, 1.0], vec![1.0, 1.0]], vec![1.0, 2.0]).is_none());
    }
}
