//! Dense two-phase primal simplex with bounded variables.
//!
//! Sized for the small trajectory-fit programs solved inside the profile
//! objective: tens of rows, a few hundred columns.

use crate::error::{invalid, Error, Result};
use crate::mip::model::Sense;

/// Sparse coefficients, sense and right-hand side.
pub type Row = (Vec<(usize, f64)>, Sense, f64);

#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    /// Minimized.
    pub cost: Vec<f64>,
    pub lower: Vec<f64>,
    /// May be `f64::INFINITY`.
    pub upper: Vec<f64>,
    pub rows: Vec<Row>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

impl LinearProgram {
    pub fn add_var(&mut self, cost: f64, lower: f64, upper: f64) -> usize {
        self.cost.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.cost.len() - 1
    }

    pub fn add_row(&mut self, terms: Vec<(usize, f64)>, sense: Sense, rhs: f64) {
        self.rows.push((terms, sense, rhs));
    }

    pub fn solve(&self) -> Result<LpSolution> {
        let n = self.cost.len();
        for j in 0..n {
            if !self.lower[j].is_finite() || self.upper[j] < self.lower[j] {
                return Err(invalid(
                    "lp bounds",
                    format!("column {j}: [{}, {}]", self.lower[j], self.upper[j]),
                ));
            }
        }
        let mut t = Tableau::build(self);
        t.run(Phase::One)?;
        if t.phase_one_objective() > 1e-7 * (1.0 + t.rhs_scale) {
            return Err(Error::Infeasible(format!(
                "phase one residual {:.3e}",
                t.phase_one_objective()
            )));
        }
        t.expel_artificials();
        t.run(Phase::Two)?;
        let y = t.values();
        let x: Vec<f64> = (0..n).map(|j| self.lower[j] + y[j]).collect();
        let objective = x.iter().zip(&self.cost).map(|(a, c)| a * c).sum();
        Ok(LpSolution {
            x,
            objective,
            iterations: t.iterations,
        })
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Phase {
    One,
    Two,
}

struct Tableau {
    m: usize,
    /// Structural columns.
    n: usize,
    cols: usize,
    first_artificial: usize,
    tab: Vec<f64>,
    beta: Vec<f64>,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    at_upper: Vec<bool>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    rhs_scale: f64,
    iterations: usize,
}

const TOL: f64 = 1e-9;

impl Tableau {
    fn build(lp: &LinearProgram) -> Tableau {
        let m = lp.rows.len();
        let n = lp.cost.len();
        let slacks = lp.rows.iter().filter(|r| r.1 != Sense::Eq).count();
        let first_artificial = n + slacks;
        let cols = first_artificial + m;
        let mut tab = vec![0.0; m * cols];
        let mut beta = vec![0.0; m];
        let mut upper: Vec<f64> = (0..n).map(|j| lp.upper[j] - lp.lower[j]).collect();
        upper.extend(std::iter::repeat_n(f64::INFINITY, slacks + m));
        let mut slack = n;
        for (i, (terms, sense, rhs)) in lp.rows.iter().enumerate() {
            let row = &mut tab[i * cols..(i + 1) * cols];
            let mut b = *rhs;
            for &(j, a) in terms {
                row[j] += a;
                b -= a * lp.lower[j];
            }
            match sense {
                Sense::Le => {
                    row[slack] = 1.0;
                    slack += 1;
                }
                Sense::Ge => {
                    row[slack] = -1.0;
                    slack += 1;
                }
                Sense::Eq => {}
            }
            if b < 0.0 {
                row.iter_mut().for_each(|v| *v = -*v);
                b = -b;
            }
            row[first_artificial + i] = 1.0;
            beta[i] = b;
        }
        let rhs_scale = beta.iter().cloned().fold(0.0, f64::max);
        let mut cost = lp.cost.clone();
        cost.extend(std::iter::repeat_n(0.0, slacks + m));
        let mut is_basic = vec![false; cols];
        let basis: Vec<usize> = (0..m).map(|i| first_artificial + i).collect();
        for &b in &basis {
            is_basic[b] = true;
        }
        Tableau {
            m,
            n,
            cols,
            first_artificial,
            tab,
            beta,
            basis,
            is_basic,
            at_upper: vec![false; cols],
            upper,
            cost,
            rhs_scale,
            iterations: 0,
        }
    }

    fn phase_cost(&self, phase: Phase, j: usize) -> f64 {
        match phase {
            Phase::One => {
                if j >= self.first_artificial {
                    1.0
                } else {
                    0.0
                }
            }
            Phase::Two => self.cost[j],
        }
    }

    fn reduced_costs(&self, phase: Phase) -> Vec<f64> {
        let mut d: Vec<f64> = (0..self.cols).map(|j| self.phase_cost(phase, j)).collect();
        for i in 0..self.m {
            let cb = self.phase_cost(phase, self.basis[i]);
            if cb != 0.0 {
                let row = &self.tab[i * self.cols..(i + 1) * self.cols];
                for (dj, a) in d.iter_mut().zip(row) {
                    *dj -= cb * a;
                }
            }
        }
        d
    }

    fn phase_one_objective(&self) -> f64 {
        (0..self.m)
            .filter(|&i| self.basis[i] >= self.first_artificial)
            .map(|i| self.beta[i])
            .sum::<f64>()
            + (self.first_artificial..self.cols)
                .filter(|&j| !self.is_basic[j] && self.at_upper[j])
                .map(|j| self.upper[j])
                .sum::<f64>()
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let cols = self.cols;
        let p = self.tab[r * cols + j];
        for v in &mut self.tab[r * cols..(r + 1) * cols] {
            *v /= p;
        }
        let pivot_row: Vec<f64> = self.tab[r * cols..(r + 1) * cols].to_vec();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.tab[i * cols + j];
            if f != 0.0 {
                let row = &mut self.tab[i * cols..(i + 1) * cols];
                for (v, pr) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pr;
                }
                row[j] = 0.0;
            }
        }
        self.is_basic[self.basis[r]] = false;
        self.basis[r] = j;
        self.is_basic[j] = true;
    }

    fn run(&mut self, phase: Phase) -> Result<()> {
        let max_iter = 50 * (self.m + self.cols) + 1000;
        let mut degenerate = 0usize;
        for _ in 0..max_iter {
            let d = self.reduced_costs(phase);
            let bland = degenerate > 50;
            let mut entering: Option<(usize, f64)> = None;
            for j in 0..self.cols {
                if self.is_basic[j] || (phase == Phase::Two && j >= self.first_artificial) {
                    continue;
                }
                let score = if !self.at_upper[j] && d[j] < -TOL && self.upper[j] > 0.0 {
                    -d[j]
                } else if self.at_upper[j] && d[j] > TOL {
                    d[j]
                } else {
                    continue;
                };
                if bland {
                    entering = Some((j, score));
                    break;
                }
                if entering.is_none_or(|(_, s)| score > s) {
                    entering = Some((j, score));
                }
            }
            let Some((j, _)) = entering else {
                return Ok(());
            };
            self.iterations += 1;
            let s = if self.at_upper[j] { -1.0 } else { 1.0 };
            let mut step = self.upper[j];
            let mut leave: Option<(usize, bool)> = None;
            for i in 0..self.m {
                let a = s * self.tab[i * self.cols + j];
                let bi = self.basis[i];
                let limit = if a > TOL {
                    self.beta[i].max(0.0) / a
                } else if a < -TOL && self.upper[bi].is_finite() {
                    (self.upper[bi] - self.beta[i]).max(0.0) / -a
                } else {
                    continue;
                };
                let better = match leave {
                    None => limit < step,
                    Some((li, _)) => {
                        limit < step || (bland && limit == step && self.basis[i] < self.basis[li])
                    }
                };
                if better {
                    step = limit;
                    leave = Some((i, a < 0.0));
                }
            }
            if !step.is_finite() {
                return Err(Error::Infeasible("unbounded linear program".into()));
            }
            degenerate = if step <= TOL { degenerate + 1 } else { 0 };
            for i in 0..self.m {
                self.beta[i] -= s * step * self.tab[i * self.cols + j];
            }
            match leave {
                None => self.at_upper[j] = !self.at_upper[j],
                Some((r, to_upper)) => {
                    let leaving = self.basis[r];
                    let entering_value = if self.at_upper[j] {
                        self.upper[j] - step
                    } else {
                        step
                    };
                    self.at_upper[leaving] = to_upper;
                    self.at_upper[j] = false;
                    self.pivot(r, j);
                    self.beta[r] = entering_value;
                }
            }
        }
        Err(Error::Infeasible(format!(
            "simplex iteration limit {max_iter} reached"
        )))
    }

    /// Pivot zero-valued artificials out of the basis and fix every
    /// artificial at zero.
    fn expel_artificials(&mut self) {
        for r in 0..self.m {
            if self.basis[r] < self.first_artificial {
                continue;
            }
            let candidate = (0..self.first_artificial)
                .filter(|&j| !self.is_basic[j])
                .max_by(|&a, &b| {
                    let va = self.tab[r * self.cols + a].abs();
                    let vb = self.tab[r * self.cols + b].abs();
                    va.total_cmp(&vb)
                })
                .filter(|&j| self.tab[r * self.cols + j].abs() > 1e-7);
            // degenerate pivot: the artificial sits at zero, so nothing moves
            if let Some(j) = candidate {
                let value = if self.at_upper[j] { self.upper[j] } else { 0.0 };
                self.at_upper[j] = false;
                self.pivot(r, j);
                self.beta[r] = value;
            }
        }
        for j in self.first_artificial..self.cols {
            self.upper[j] = 0.0;
            self.at_upper[j] = false;
        }
    }

    fn values(&self) -> Vec<f64> {
        let mut y: Vec<f64> = (0..self.cols)
            .map(|j| if self.at_upper[j] { self.upper[j] } else { 0.0 })
            .collect();
        for i in 0..self.m {
            y[self.basis[i]] = self.beta[i];
        }
        y.truncate(self.n);
        y
    }
}
