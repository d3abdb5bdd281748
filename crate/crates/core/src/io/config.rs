//! One TOML document holding every tunable default.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cohort::CohortDistributions;
use crate::error::{Error, Result};
use crate::estimation::SmleConfig;
use crate::incentives::{LossFunction, OptimizerConfig, RewardGrid};
use crate::mip::{IncentiveMipOptions, SmleMipOptions};
use crate::model::{
    mifflin_traits, Boxes, Demographics, DpOptions, EnergyConstants, ParticipantTraits, Sex,
};
use crate::prediction::PredictOptions;
use crate::trial::TrialConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CohortSettings {
    pub size: usize,
    pub distributions: CohortDistributions,
}

impl Default for CohortSettings {
    fn default() -> Self {
        CohortSettings {
            size: 47,
            distributions: CohortDistributions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IncentiveSettings {
    pub loss: LossFunction,
    pub grid: RewardGrid,
    pub optimizer: OptimizerConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MipSettings {
    pub smle: SmleMipOptions,
    pub incentive: IncentiveMipOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    #[serde(default = "Boxes::study")]
    pub boxes: Boxes,
    pub energy: EnergyConstants,
    /// Traits for participants without a cohort record.
    pub participant: ParticipantTraits,
    pub plan_oracle: DpOptions,
    pub estimation: SmleConfig,
    pub prediction: PredictOptions,
    pub incentives: IncentiveSettings,
    pub mip: MipSettings,
    pub cohort: CohortSettings,
    pub trial: TrialConfig,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            seed: 2024,
            boxes: Boxes::study(),
            energy: EnergyConstants::default(),
            participant: reference_traits(),
            plan_oracle: DpOptions::default(),
            estimation: SmleConfig::nominal(),
            prediction: PredictOptions::default(),
            incentives: IncentiveSettings::default(),
            mip: MipSettings::default(),
            cohort: CohortSettings::default(),
            trial: TrialConfig::default(),
        }
    }
}

/// A 40-year-old, 175 cm man at activity 1.2 with the cohort's dynamics
/// constants.
pub fn reference_traits() -> ParticipantTraits {
    let demo = Demographics {
        age_years: 40.0,
        sex: Sex::Male,
        height_cm: 175.0,
        activity: 1.2,
    };
    let physiology = mifflin_traits(&demo, &EnergyConstants::default())
        .expect("reference demographics are valid");
    let d = CohortDistributions::default();
    ParticipantTraits {
        noise_half_width: d.noise_half_width,
        sigma: d.sigma,
        gamma1: d.gamma1,
        gamma2: d.gamma2,
        gamma_p: d.gamma_p,
        gamma_f: d.gamma_f,
        p_base: d.p_base,
        ..ParticipantTraits::from_physiology(physiology)
    }
}

impl Config {
    /// Keys absent from `text` keep the values of [`Config::default`],
    /// including nested tables.
    pub fn from_toml(text: &str) -> Result<Self> {
        let user: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let mut merged = toml::Table::try_from(Config::default()).expect("config serializes");
        merge(&mut merged, user);
        let config: Config = toml::Value::Table(merged)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Config::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.boxes.validate()?;
        self.participant.validate(&self.boxes)?;
        self.incentives.loss.validate()?;
        self.incentives.grid.validate(&self.boxes)?;
        self.cohort.distributions.validate()?;
        self.trial.validate(&self.boxes)
    }

    /// SHA-256 of the canonical TOML rendering.
    pub fn digest(&self) -> String {
        super::sha256_hex(self.to_toml().as_bytes())
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (key, value) in over {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}
