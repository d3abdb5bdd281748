//! Big-M constants and piecewise McCormick envelopes.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::mip::model::{MipModel, Sense, VarKind};
use crate::model::boxes::{Boxes, Interval};

/// Big-M constants for the indicator linking rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BigM {
    /// Weekly weight change.
    pub m1: f64,
    /// `p - B`.
    pub m2: f64,
    /// `z1 = r_c * l2`.
    pub mz1: f64,
    /// `z2 = k2 * l1`.
    pub mz2: f64,
    /// `z3 = k1 * l1`.
    pub mz3: f64,
}

/// Tight big-M constants from the box bounds.
pub fn derive_big_m(boxes: &Boxes) -> Result<BigM> {
    boxes.validate()?;
    let p = boxes.probability();
    let m = BigM {
        m1: boxes.weight.width(),
        m2: p.width(),
        mz1: boxes.reward.hi,
        mz2: boxes.gain.hi,
        mz3: boxes.gain.hi,
    };
    for (name, v) in [
        ("M1", m.m1),
        ("M2", m.m2),
        ("Mz1", m.mz1),
        ("Mz2", m.mz2),
        ("Mz3", m.mz3),
    ] {
        if !v.is_finite() {
            return Err(Error::InvalidParameter {
                name: name.into(),
                detail: "unbounded box".into(),
            });
        }
    }
    Ok(m)
}

impl BigM {
    /// Each constant at least its tight bound and at most ten times it.
    pub fn check_against(&self, boxes: &Boxes) -> Result<()> {
        let tight = derive_big_m(boxes)?;
        for (name, v, t) in [
            ("M1", self.m1, tight.m1),
            ("M2", self.m2, tight.m2),
            ("Mz1", self.mz1, tight.mz1),
            ("Mz2", self.mz2, tight.mz2),
            ("Mz3", self.mz3, tight.mz3),
        ] {
            if v < t || v > 10.0 * t.max(f64::MIN_POSITIVE) {
                return Err(invalid(name, format!("{v} outside [{t}, {}]", 10.0 * t)));
            }
        }
        Ok(())
    }
}

/// Piecewise McCormick relaxation settings for products of two continuous
/// variables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PiecewiseSpec {
    pub segments: usize,
}

impl Default for PiecewiseSpec {
    fn default() -> Self {
        PiecewiseSpec { segments: 8 }
    }
}

/// Partition of the first factor's interval into equal segments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piecewise {
    pub x: Interval,
    pub y: Interval,
    pub segments: usize,
}

impl Piecewise {
    pub fn new(x: Interval, y: Interval, spec: PiecewiseSpec) -> Result<Self> {
        if spec.segments == 0 {
            return Err(invalid("segments", "must be at least 1"));
        }
        Ok(Piecewise {
            x,
            y,
            segments: spec.segments,
        })
    }

    pub fn breakpoint(&self, i: usize) -> f64 {
        if i == self.segments {
            return self.x.hi;
        }
        self.x.lo + self.x.width() * i as f64 / self.segments as f64
    }

    /// Segment containing `x` (the lower one at a shared breakpoint).
    pub fn segment_of(&self, x: f64) -> usize {
        if self.x.width() == 0.0 {
            return 0;
        }
        let s = ((x - self.x.lo) / self.x.width() * self.segments as f64).floor();
        (s.max(0.0) as usize).min(self.segments - 1)
    }

    /// Interval of product values allowed by the envelope of segment `s`.
    pub fn envelope_in(&self, s: usize, x: f64, y: f64) -> (f64, f64) {
        let (xl, xu) = (self.breakpoint(s), self.breakpoint(s + 1));
        let (yl, yu) = (self.y.lo, self.y.hi);
        let lo = (xl * y + yl * x - xl * yl).max(xu * y + yu * x - xu * yu);
        let hi = (xu * y + yl * x - xu * yl).min(xl * y + yu * x - xl * yu);
        (lo, hi)
    }

    pub fn envelope(&self, x: f64, y: f64) -> (f64, f64) {
        self.envelope_in(self.segment_of(x), x, y)
    }

    /// Worst-case gap between the true product and the envelope.
    pub fn error_bound(&self) -> f64 {
        self.x.width() * self.y.width() / (4.0 * self.segments as f64)
    }

    /// Add the disaggregated envelope rows for `z = x * y` to `model`.
    /// Returns the product variable index.
    pub fn add_to(&self, model: &mut MipModel, tag: &str, x: usize, y: usize) -> Result<usize> {
        let (xlo, xhi) = (self.x.lo, self.x.hi);
        let (ylo, yhi) = (self.y.lo, self.y.hi);
        let zb = [xlo * ylo, xlo * yhi, xhi * ylo, xhi * yhi];
        let zlo = zb.iter().cloned().fold(f64::INFINITY, f64::min);
        let zhi = zb.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z = model.add_var(tag, zlo, zhi, VarKind::Continuous)?;
        let mut pick = Vec::new();
        let mut sum_x = vec![(x, -1.0)];
        let mut sum_y = vec![(y, -1.0)];
        let mut sum_z = vec![(z, -1.0)];
        for s in 0..self.segments {
            let (xl, xu) = (self.breakpoint(s), self.breakpoint(s + 1));
            let sb = model.add_var(&format!("{tag}_seg[{s}]"), 0.0, 1.0, VarKind::Binary)?;
            let xs = model.add_var(
                &format!("{tag}_x[{s}]"),
                xlo.min(0.0),
                xhi.max(0.0),
                VarKind::Continuous,
            )?;
            let ys = model.add_var(
                &format!("{tag}_y[{s}]"),
                ylo.min(0.0),
                yhi.max(0.0),
                VarKind::Continuous,
            )?;
            let zs = model.add_var(
                &format!("{tag}_z[{s}]"),
                zlo.min(0.0),
                zhi.max(0.0),
                VarKind::Continuous,
            )?;
            pick.push((sb, 1.0));
            sum_x.push((xs, 1.0));
            sum_y.push((ys, 1.0));
            sum_z.push((zs, 1.0));
            model.add_row(
                format!("{tag}_xlo[{s}]"),
                vec![(xs, 1.0), (sb, -xl)],
                Sense::Ge,
                0.0,
            );
            model.add_row(
                format!("{tag}_xhi[{s}]"),
                vec![(xs, 1.0), (sb, -xu)],
                Sense::Le,
                0.0,
            );
            model.add_row(
                format!("{tag}_ylo[{s}]"),
                vec![(ys, 1.0), (sb, -ylo)],
                Sense::Ge,
                0.0,
            );
            model.add_row(
                format!("{tag}_yhi[{s}]"),
                vec![(ys, 1.0), (sb, -yhi)],
                Sense::Le,
                0.0,
            );
            // z_s >= xl*y_s + ylo*x_s - xl*ylo*s
            model.add_row(
                format!("{tag}_mc1[{s}]"),
                vec![(zs, 1.0), (ys, -xl), (xs, -ylo), (sb, xl * ylo)],
                Sense::Ge,
                0.0,
            );
            // z_s >= xu*y_s + yhi*x_s - xu*yhi*s
            model.add_row(
                format!("{tag}_mc2[{s}]"),
                vec![(zs, 1.0), (ys, -xu), (xs, -yhi), (sb, xu * yhi)],
                Sense::Ge,
                0.0,
            );
            // z_s <= xu*y_s + ylo*x_s - xu*ylo*s
            model.add_row(
                format!("{tag}_mc3[{s}]"),
                vec![(zs, 1.0), (ys, -xu), (xs, -ylo), (sb, xu * ylo)],
                Sense::Le,
                0.0,
            );
            // z_s <= xl*y_s + yhi*x_s - xl*yhi*s
            model.add_row(
                format!("{tag}_mc4[{s}]"),
                vec![(zs, 1.0), (ys, -xl), (xs, -yhi), (sb, xl * yhi)],
                Sense::Le,
                0.0,
            );
        }
        model.add_row(format!("{tag}_pick"), pick, Sense::Eq, 1.0);
        model.add_row(format!("{tag}_xsum"), sum_x, Sense::Eq, 0.0);
        model.add_row(format!("{tag}_ysum"), sum_y, Sense::Eq, 0.0);
        model.add_row(format!("{tag}_zsum"), sum_z, Sense::Eq, 0.0);
        Ok(z)
    }

    /// Values for the auxiliary variables added by [`Piecewise::add_to`] at a
    /// point `(x, y)`, using the exact product for the product variable.
    pub fn assign(&self, tag: &str, x: f64, y: f64, out: &mut Vec<(String, f64)>) {
        let seg = self.segment_of(x);
        let z = x * y;
        out.push((tag.to_string(), z));
        for s in 0..self.segments {
            let on = s == seg;
            out.push((format!("{tag}_seg[{s}]"), if on { 1.0 } else { 0.0 }));
            out.push((format!("{tag}_x[{s}]"), if on { x } else { 0.0 }));
            out.push((format!("{tag}_y[{s}]"), if on { y } else { 0.0 }));
            out.push((format!("{tag}_z[{s}]"), if on { z } else { 0.0 }));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_constants() {
        let m = derive_big_m(&Boxes::default()).unwrap();
        assert_eq!(m.m1, 310.0);
        assert!((m.m2 - 0.9).abs() < 1e-12);
        assert_eq!(m.mz1, 30.0);
        assert_eq!(m.mz2, 5.0);
        assert_eq!(m.mz3, 5.0);
        m.check_against(&Boxes::default()).unwrap();
        let loose = BigM { m1: 1e6, ..m };
        assert!(loose.check_against(&Boxes::default()).is_err());
    }

    #[test]
    fn unbounded_box_is_rejected() {
        let b = Boxes {
            weight: Interval {
                lo: 0.0,
                hi: f64::INFINITY,
            },
            ..Boxes::default()
        };
        assert!(derive_big_m(&b).is_err());
    }

    #[test]
    fn envelope_contains_product_and_respects_error_bound() {
        let pw = Piecewise::new(
            Interval { lo: 0.0, hi: 10.0 },
            Interval { lo: 0.0, hi: 30.0 },
            PiecewiseSpec::default(),
        )
        .unwrap();
        let bound = pw.error_bound();
        let mut worst: f64 = 0.0;
        for i in 0..=200 {
            for j in 0..=200 {
                let x = 10.0 * i as f64 / 200.0;
                let y = 30.0 * j as f64 / 200.0;
                let (lo, hi) = pw.envelope(x, y);
                let z = x * y;
                assert!(lo <= z + 1e-9 && z <= hi + 1e-9);
                worst = worst.max(hi - z).max(z - lo);
            }
        }
        assert!(worst <= bound + 1e-9, "worst {worst} bound {bound}");
    }
}
