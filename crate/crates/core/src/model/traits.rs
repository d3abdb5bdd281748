use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::boxes::Boxes;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sex {
    Male,
    Female,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Demographics {
    pub age_years: f64,
    pub sex: Sex,
    pub height_cm: f64,
    /// Physical activity level, unitless, at least 1.
    pub activity: f64,
}

impl Demographics {
    pub fn validate(&self) -> Result<()> {
        if !(self.age_years > 0.0) {
            return Err(invalid("age", "must be positive"));
        }
        if !(self.height_cm > 0.0) {
            return Err(invalid("height", "must be positive"));
        }
        if !(self.activity >= 1.0) {
            return Err(invalid("activity", "must be >= 1"));
        }
        Ok(())
    }
}

/// Unit conversions used to turn resting energy expenditure into daily
/// weight dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyConstants {
    pub lbs_per_kg: f64,
    pub kcal_per_lb: f64,
}

impl Default for EnergyConstants {
    fn default() -> Self {
        EnergyConstants {
            lbs_per_kg: 2.20462,
            kcal_per_lb: 3500.0,
        }
    }
}

/// Coefficients of `w[d+1] = b*w[d] + c*f[d+1] + k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Physiology {
    pub b: f64,
    pub c: f64,
    pub k: f64,
}

/// Daily weight coefficients from the Mifflin-St Jeor resting expenditure
/// scaled by the activity level.
pub fn mifflin_traits(demo: &Demographics, consts: &EnergyConstants) -> Result<Physiology> {
    demo.validate()?;
    if !(consts.kcal_per_lb > 0.0 && consts.lbs_per_kg > 0.0) {
        return Err(invalid("energy constants", "must be positive"));
    }
    let s = match demo.sex {
        Sex::Male => 5.0,
        Sex::Female => -161.0,
    };
    let pal = demo.activity;
    let rho = consts.kcal_per_lb;
    let b = 1.0 - pal * (10.0 / consts.lbs_per_kg) / rho;
    let c = 1.0 / rho;
    let k = -pal * (6.25 * demo.height_cm - 5.0 * demo.age_years + s) / rho;
    if !(b > 0.0 && b < 1.0) {
        return Err(invalid("b", format!("{b} not in (0, 1)")));
    }
    if !(c > 0.0) {
        return Err(invalid("c", format!("{c} must be positive")));
    }
    Ok(Physiology { b, c, k })
}

/// Fixed per-participant constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParticipantTraits {
    pub b: f64,
    pub c: f64,
    pub k: f64,
    /// Half-width of the uniform calorie execution noise, kcal.
    pub noise_half_width: f64,
    /// Laplace scale of weight measurement noise, lbs.
    pub sigma: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma_p: f64,
    pub gamma_f: f64,
    pub a1_base: f64,
    pub a2_base: f64,
    pub p_base: f64,
}

impl ParticipantTraits {
    pub fn from_physiology(phys: Physiology) -> Self {
        ParticipantTraits {
            b: phys.b,
            c: phys.c,
            k: phys.k,
            noise_half_width: 500.0,
            sigma: 2.0,
            gamma1: 0.8,
            gamma2: 0.8,
            gamma_p: 0.8,
            gamma_f: 0.8,
            a1_base: 0.0,
            a2_base: 0.0,
            p_base: 0.5,
        }
    }

    pub fn physiology(&self) -> Physiology {
        Physiology {
            b: self.b,
            c: self.c,
            k: self.k,
        }
    }

    pub fn validate(&self, boxes: &Boxes) -> Result<()> {
        if !(self.b > 0.0 && self.b < 1.0) {
            return Err(invalid("b", format!("{} not in (0, 1)", self.b)));
        }
        if !(self.c > 0.0) {
            return Err(invalid("c", "must be positive"));
        }
        if !(self.noise_half_width > 0.0) {
            return Err(invalid("A", "must be positive"));
        }
        if !(self.sigma > 0.0) {
            return Err(invalid("sigma", "must be positive"));
        }
        for (name, g) in [
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
            ("gamma_p", self.gamma_p),
            ("gamma_f", self.gamma_f),
        ] {
            if !(g > 0.0 && g < 1.0) {
                return Err(invalid(name, format!("{g} not in (0, 1)")));
            }
        }
        boxes.motivation.check("a1_base", self.a1_base)?;
        boxes.motivation.check("a2_base", self.a2_base)?;
        boxes.probability().check("p_base", self.p_base)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn demo(sex: Sex) -> Demographics {
        Demographics {
            age_years: 40.0,
            sex,
            height_cm: 175.0,
            activity: 1.2,
        }
    }

    #[test]
    fn male_reference_case() {
        let p = mifflin_traits(&demo(Sex::Male), &EnergyConstants::default()).unwrap();
        // -1.2 * (1093.75 - 200 + 5) / 3500
        assert!((p.k - (-0.308_142_857)).abs() < 1e-8, "k = {}", p.k);
        assert!((p.b - 0.998_445).abs() < 1e-6, "b = {}", p.b);
        assert!((p.c - 1.0 / 3500.0).abs() < 1e-15);
    }

    #[test]
    fn female_reference_case() {
        let p = mifflin_traits(&demo(Sex::Female), &EnergyConstants::default()).unwrap();
        // -1.2 * (1093.75 - 200 - 161) / 3500
        assert!((p.k - (-0.251_228_571)).abs() < 1e-8, "k = {}", p.k);
    }

    #[test]
    fn rejects_unit_persistence() {
        // activity chosen so that b would be exactly 1 - 1 = 0 or below
        let pal = 3500.0 / (10.0 / 2.20462);
        let d = Demographics {
            activity: pal,
            ..demo(Sex::Male)
        };
        assert!(mifflin_traits(&d, &EnergyConstants::default()).is_err());
        let d = Demographics {
            activity: 0.0,
            ..demo(Sex::Male)
        };
        assert!(mifflin_traits(&d, &EnergyConstants::default()).is_err());
        let consts = EnergyConstants {
            kcal_per_lb: f64::INFINITY,
            ..EnergyConstants::default()
        };
        assert!(mifflin_traits(&demo(Sex::Male), &consts).is_err());
    }

    #[test]
    fn rejects_bad_demographics() {
        let d = Demographics {
            age_years: 0.0,
            ..demo(Sex::Male)
        };
        assert!(mifflin_traits(&d, &EnergyConstants::default()).is_err());
        let d = Demographics {
            height_cm: -3.0,
            ..demo(Sex::Male)
        };
        assert!(mifflin_traits(&d, &EnergyConstants::default()).is_err());
    }
}
