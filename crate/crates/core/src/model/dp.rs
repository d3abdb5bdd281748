//! Numerical backward-induction solver for the in-week decision problem.
//!
//! Used as an independent check of the closed-form plan. The weight state is
//! carried from the pre-week weight `w_ref`: every day, including day 0,
//! applies `w = b*w + c*f + k`. The recording-goal probability is the
//! uniform-noise expression `(w_ref - b*w5 - c*c6 - k + A) / (2A)` clipped to
//! `[0, 1]`.

use crate::error::{invalid, Error, Result};
use crate::model::boxes::Boxes;
use crate::model::state::{MotivationalState, DAYS};
use crate::model::traits::ParticipantTraits;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DpOptions {
    /// Spacing of the calorie decision grid, kcal.
    pub grid_step: f64,
    /// Midpoint quadrature nodes for the uniform execution noise.
    pub noise_nodes: usize,
    /// Parabolic refinement around the best grid point.
    pub refine: bool,
    /// Pre-week weight; defaults to the middle of the weight box.
    pub reference_weight: Option<f64>,
}

impl Default for DpOptions {
    fn default() -> Self {
        DpOptions {
            grid_step: 0.5,
            noise_nodes: 8,
            refine: false,
            reference_weight: None,
        }
    }
}

/// Piecewise-linear value function over a small weight grid, extrapolated
/// linearly outside it.
#[derive(Debug, Clone)]
struct ValueFn {
    nodes: Vec<f64>,
    values: Vec<f64>,
}

impl ValueFn {
    fn zero(nodes: &[f64]) -> Self {
        ValueFn {
            nodes: nodes.to_vec(),
            values: vec![0.0; nodes.len()],
        }
    }

    fn eval(&self, w: f64) -> f64 {
        let n = self.nodes.len();
        let mut seg = 0;
        while seg + 2 < n && w > self.nodes[seg + 1] {
            seg += 1;
        }
        let (x0, x1) = (self.nodes[seg], self.nodes[seg + 1]);
        let (y0, y1) = (self.values[seg], self.values[seg + 1]);
        y0 + (y1 - y0) * (w - x0) / (x1 - x0)
    }
}

struct Stage<'a> {
    theta: &'a MotivationalState,
    traits: &'a ParticipantTraits,
    w_ref: f64,
    noise: Vec<f64>,
}

impl Stage<'_> {
    /// Expected stage reward plus continuation for day `day`, pre-day weight `w`
    /// and planned calories `cal`.
    fn value(&self, day: usize, w: f64, cal: f64, next: &ValueFn) -> f64 {
        let t = self.traits;
        let th = self.theta;
        let mut acc = 0.0;
        for &xi in &self.noise {
            let w_next = t.b * w + t.c * (cal + xi) + t.k;
            acc += -th.a1 * w_next + next.eval(w_next);
        }
        let mut v = acc / self.noise.len() as f64 - (cal - th.f_pref).powi(2);
        if day == DAYS - 1 {
            let a = t.noise_half_width;
            let prob = ((self.w_ref - t.b * w - t.c * cal - t.k + a) / (2.0 * a)).clamp(0.0, 1.0);
            v += th.a2 * th.reward_belief * prob;
        }
        v
    }

    fn best(&self, day: usize, w: f64, grid: &[f64], next: &ValueFn, refine: bool) -> (f64, f64) {
        let mut best_i = 0;
        let mut best_v = f64::NEG_INFINITY;
        let mut vals = Vec::with_capacity(grid.len());
        for (i, &cal) in grid.iter().enumerate() {
            let v = self.value(day, w, cal, next);
            vals.push(v);
            if v > best_v {
                best_v = v;
                best_i = i;
            }
        }
        let mut x = grid[best_i];
        if refine && best_i > 0 && best_i + 1 < grid.len() {
            let (fm, f0, fp) = (vals[best_i - 1], vals[best_i], vals[best_i + 1]);
            let curv = fm - 2.0 * f0 + fp;
            if curv < 0.0 {
                let h = grid[1] - grid[0];
                x += h * (fm - fp) / (2.0 * curv);
                best_v = self.value(day, w, x, next);
            }
        }
        (x, best_v)
    }
}

/// Solve the in-week problem by backward induction over a calorie grid.
pub fn dp_oracle_plan(
    theta: &MotivationalState,
    traits: &ParticipantTraits,
    boxes: &Boxes,
    opts: &DpOptions,
) -> Result<[f64; DAYS]> {
    if !(opts.grid_step > 0.0 && opts.grid_step.is_finite()) {
        return Err(invalid("grid_step", "must be positive and finite"));
    }
    if opts.noise_nodes == 0 {
        return Err(invalid("noise_nodes", "must be at least 1"));
    }
    let f = boxes.calories;
    let count = (f.width() / opts.grid_step).floor() as usize + 1;
    if count < 3 {
        return Err(Error::GridTooCoarse(format!(
            "step {} leaves {count} points on [{}, {}]",
            opts.grid_step, f.lo, f.hi
        )));
    }
    let grid: Vec<f64> = (0..count)
        .map(|i| f.lo + i as f64 * opts.grid_step)
        .collect();

    let a = traits.noise_half_width;
    let m = opts.noise_nodes;
    let noise: Vec<f64> = (0..m)
        .map(|i| -a + (2.0 * i as f64 + 1.0) * a / m as f64)
        .collect();
    let w_ref = opts
        .reference_weight
        .unwrap_or(0.5 * (boxes.weight.lo + boxes.weight.hi));
    let stage = Stage {
        theta,
        traits,
        w_ref,
        noise,
    };

    let nodes = [boxes.weight.lo, w_ref, boxes.weight.hi];
    let mut value_fns = vec![ValueFn::zero(&nodes); DAYS + 1];
    for day in (0..DAYS).rev() {
        let next = value_fns[day + 1].clone();
        let values = nodes
            .iter()
            .map(|&w| stage.best(day, w, &grid, &next, opts.refine).1)
            .collect();
        value_fns[day] = ValueFn {
            nodes: nodes.to_vec(),
            values,
        };
    }

    let mut plan = [0.0; DAYS];
    let mut w = w_ref;
    for day in 0..DAYS {
        let (cal, _) = stage.best(day, w, &grid, &value_fns[day + 1], opts.refine);
        plan[day] = cal;
        w = traits.b * w + traits.c * cal + traits.k;
    }
    Ok(plan)
}
