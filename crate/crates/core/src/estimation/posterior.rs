//! Grid approximation of the surrogate posterior and the surrogate bound.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::estimation::eta::{eval_eta, EtaOptions};
use crate::estimation::observations::ObservationSet;
use crate::model::boxes::Boxes;
use crate::model::state::{InitialConditions, PARAM_NAMES};
use crate::model::traits::ParticipantTraits;

pub const DEFAULT_CELL_BUDGET: usize = 100_000;

/// Grid values per coordinate, in [`InitialConditions::to_array`] order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub axes: [Vec<f64>; 10],
}

impl GridSpec {
    /// Single cell at `ic`.
    pub fn point(ic: &InitialConditions) -> Self {
        GridSpec {
            axes: ic.to_array().map(|v| vec![v]),
        }
    }

    /// `points[i]` evenly spaced values over `center ± span[i]`, clipped to the boxes.
    pub fn around(
        center: &InitialConditions,
        span: [f64; 10],
        points: [usize; 10],
        boxes: &Boxes,
    ) -> Self {
        let c = center.to_array();
        let bounds = InitialConditions::bounds(boxes);
        let axes = std::array::from_fn(|i| {
            let n = points[i].max(1);
            if n == 1 || span[i] <= 0.0 {
                return vec![c[i]];
            }
            let lo = bounds[i].clamp(c[i] - span[i]);
            let hi = bounds[i].clamp(c[i] + span[i]);
            let mut v: Vec<f64> = (0..n)
                .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
                .collect();
            v.dedup();
            v
        });
        GridSpec { axes }
    }

    /// Five points on coordinates taken in `priority` order while the cell
    /// count stays within `budget`; the rest sit at the center.
    pub fn prioritized(
        center: &InitialConditions,
        span: [f64; 10],
        priority: &[usize],
        budget: usize,
        boxes: &Boxes,
    ) -> Self {
        let mut points = [1usize; 10];
        let mut cells = 1usize;
        for &i in priority {
            if i < 10 && span[i] > 0.0 && cells * 5 <= budget {
                points[i] = 5;
                cells *= 5;
            }
        }
        GridSpec::around(center, span, points, boxes)
    }

    pub fn cells(&self) -> usize {
        self.axes.iter().map(Vec::len).product()
    }

    pub fn validate(&self, boxes: &Boxes, budget: usize) -> Result<()> {
        let bounds = InitialConditions::bounds(boxes);
        for (i, axis) in self.axes.iter().enumerate() {
            if axis.is_empty() {
                return Err(invalid(PARAM_NAMES[i], "grid axis is empty"));
            }
            for &v in axis {
                bounds[i].check(PARAM_NAMES[i], v)?;
            }
        }
        let cells = self
            .axes
            .iter()
            .try_fold(1usize, |acc, a| acc.checked_mul(a.len()));
        match cells {
            Some(n) if n <= budget => Ok(()),
            _ => Err(Error::TooLarge(format!(
                "posterior grid has {} cells, budget is {budget}; use fewer points per axis",
                cells.map_or_else(|| "too many".to_string(), |n| n.to_string())
            ))),
        }
    }

    /// Initial conditions of the cell with flat index `index`, last axis fastest.
    pub fn cell(&self, mut index: usize) -> InitialConditions {
        let mut x = [0.0; 10];
        for i in (0..10).rev() {
            let n = self.axes[i].len();
            x[i] = self.axes[i][index % n];
            index /= n;
        }
        InitialConditions::from_array(x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorGrid {
    pub spec: GridSpec,
    /// Profile objective per cell; infinite where no trajectory is feasible.
    pub eta: Vec<f64>,
    pub weights: Vec<f64>,
    pub map_index: usize,
}

impl PosteriorGrid {
    pub fn map(&self) -> InitialConditions {
        self.spec.cell(self.map_index)
    }

    /// Posterior weights from objective values, relative to the smallest.
    pub fn from_eta(spec: GridSpec, eta: Vec<f64>) -> Result<Self> {
        if eta.len() != spec.cells() {
            return Err(Error::LengthMismatch {
                name: "eta".into(),
                expected: spec.cells(),
                got: eta.len(),
            });
        }
        let (map_index, best) = eta
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_finite())
            .min_by(|a, b| a.1.total_cmp(b.1).then(a.0.cmp(&b.0)))
            .map(|(i, v)| (i, *v))
            .ok_or_else(|| Error::Infeasible("no grid cell admits a feasible trajectory".into()))?;
        let raw: Vec<f64> = eta
            .iter()
            .map(|v| if v.is_finite() { (best - v).exp() } else { 0.0 })
            .collect();
        let total: f64 = raw.iter().sum();
        let weights = raw.iter().map(|w| w / total).collect();
        Ok(PosteriorGrid {
            spec,
            eta,
            weights,
            map_index,
        })
    }
}

/// Evaluate the profile objective on every cell and normalize.
pub fn surrogate_posterior(
    obs: &ObservationSet,
    traits: &ParticipantTraits,
    boxes: &Boxes,
    spec: &GridSpec,
    opts: &EtaOptions,
    cell_budget: usize,
) -> Result<PosteriorGrid> {
    spec.validate(boxes, cell_budget)?;
    let mut eta = Vec::with_capacity(spec.cells());
    for i in 0..spec.cells() {
        match eval_eta(&spec.cell(i), obs, traits, boxes, opts) {
            Ok(v) => eta.push(v.value),
            Err(Error::Infeasible(_)) => eta.push(f64::INFINITY),
            Err(e) => return Err(e),
        }
    }
    PosteriorGrid::from_eta(spec.clone(), eta)
}

/// Lower and upper multiples of `|g - p|` that bracket `-log P(g | p)` for
/// `p` in `[eps, 1 - eps]`.
pub fn surrogate_bound_check(p: f64, g: bool, eps: f64) -> Result<(f64, f64, f64)> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(invalid("eps", format!("{eps} not in (0, 0.5)")));
    }
    if !(p >= eps && p <= 1.0 - eps) {
        return Err(Error::OutOfBox {
            name: "p".into(),
            value: p,
            lo: eps,
            hi: 1.0 - eps,
        });
    }
    let gap = ((if g { 1.0 } else { 0.0 }) - p).abs();
    let lower = -(1.0 - eps).ln() / eps * gap;
    let mid = -(if g { p } else { 1.0 - p }).ln();
    let upper = -eps.ln() / (1.0 - eps) * gap;
    let slack = 1e-12 * (1.0 + upper);
    if !(lower <= mid + slack && mid <= upper + slack) {
        return Err(invalid(
            "surrogate bound",
            format!("violated: {lower} <= {mid} <= {upper}"),
        ));
    }
    Ok((lower, mid, upper))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_indexing_is_row_major() {
        let mut spec = GridSpec::point(&InitialConditions::from_array([
            200.0, 0.0, 0.0, 0.5, 0.5, 2000.0, 1.0, 0.0, 0.0, 0.0,
        ]));
        spec.axes[0] = vec![190.0, 200.0];
        spec.axes[9] = vec![0.0, 1.0, 2.0];
        assert_eq!(spec.cells(), 6);
        assert_eq!(spec.cell(4).to_array()[0], 200.0);
        assert_eq!(spec.cell(4).to_array()[9], 1.0);
    }
}
