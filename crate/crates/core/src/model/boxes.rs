use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closed interval `[lo, hi]` with `lo <= hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(name: &str, lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo > hi {
            return Err(Error::InvalidInterval {
                name: name.to_string(),
                lo,
                hi,
            });
        }
        Ok(Interval { lo, hi })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }

    /// Clamp `x` and bump `count` when the value moved.
    pub fn project(&self, x: f64, count: &mut u32) -> f64 {
        let y = self.clamp(x);
        if y != x {
            *count += 1;
        }
        y
    }

    pub fn check(&self, name: &str, x: f64) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(Error::OutOfBox {
                name: name.to_string(),
                value: x,
                lo: self.lo,
                hi: self.hi,
            })
        }
    }
}

/// Feasible ranges for every state, decision and parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Boxes {
    /// Body weight, lbs.
    pub weight: Interval,
    /// Daily calories, kcal.
    pub calories: Interval,
    /// Motivation values `a1`, `a2`.
    pub motivation: Interval,
    /// Probability margin: probabilities live in `[eps, 1 - eps]`.
    pub eps: f64,
    /// Weekly reward, dollars.
    pub reward: Interval,
    /// Gain constants `k1`, `k2`, `kp`.
    pub gain: Interval,
}

impl Default for Boxes {
    fn default() -> Self {
        Boxes {
            weight: Interval {
                lo: 90.0,
                hi: 400.0,
            },
            calories: Interval {
                lo: 800.0,
                hi: 4000.0,
            },
            motivation: Interval { lo: 0.0, hi: 10.0 },
            eps: 0.05,
            reward: Interval { lo: 0.0, hi: 30.0 },
            gain: Interval { lo: 0.0, hi: 5.0 },
        }
    }
}

impl Boxes {
    /// Boxes for the simulation study. Motivation and gain ranges are widened
    /// so that motivations move planned calories by tens to hundreds of kcal.
    pub fn study() -> Self {
        Boxes {
            motivation: Interval { lo: 0.0, hi: 1.0e8 },
            gain: Interval { lo: 0.0, hi: 1.0e6 },
            ..Boxes::default()
        }
    }

    pub fn probability(&self) -> Interval {
        Interval {
            lo: self.eps,
            hi: 1.0 - self.eps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        Interval::new("W", self.weight.lo, self.weight.hi)?;
        Interval::new("F", self.calories.lo, self.calories.hi)?;
        Interval::new("A", self.motivation.lo, self.motivation.hi)?;
        Interval::new("R", self.reward.lo, self.reward.hi)?;
        Interval::new("K", self.gain.lo, self.gain.hi)?;
        if !(self.eps > 0.0 && self.eps < 0.5) {
            return Err(crate::error::invalid(
                "eps",
                format!("{} not in (0, 0.5)", self.eps),
            ));
        }
        for (name, iv) in [("W", self.weight), ("F", self.calories), ("R", self.reward)] {
            if iv.lo < 0.0 {
                return Err(crate::error::invalid(name, "lower bound must be >= 0"));
            }
        }
        for (name, iv) in [("A", self.motivation), ("K", self.gain)] {
            if iv.lo < 0.0 {
                return Err(crate::error::invalid(name, "lower bound must be >= 0"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_boxes_are_valid() {
        let b = Boxes::default();
        b.validate().unwrap();
        assert_eq!(b.probability(), Interval { lo: 0.05, hi: 0.95 });
        Boxes::study().validate().unwrap();
    }

    #[test]
    fn rejects_reversed_interval_and_bad_eps() {
        assert!(Interval::new("x", 2.0, 1.0).is_err());
        assert!(Interval::new("x", f64::NEG_INFINITY, 1.0).is_err());
        let b = Boxes {
            eps: 0.5,
            ..Boxes::default()
        };
        assert!(b.validate().is_err());
        let b = Boxes {
            weight: Interval { lo: -1.0, hi: 3.0 },
            ..Boxes::default()
        };
        assert!(b.validate().is_err());
    }

    #[test]
    fn project_counts_only_moves() {
        let iv = Interval { lo: 0.0, hi: 1.0 };
        let mut n = 0;
        assert_eq!(iv.project(0.5, &mut n), 0.5);
        assert_eq!(iv.project(2.0, &mut n), 1.0);
        assert_eq!(iv.project(-2.0, &mut n), 0.0);
        assert_eq!(n, 2);
    }
}
