//! Synthetic ground-truth cohorts and the predetermined incentive schedule.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::incentives::Eligibility;
use crate::model::{
    mifflin_traits, Boxes, Demographics, EnergyConstants, InitialConditions, MotivationalState,
    ParticipantTraits, Sex,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Archetype {
    /// Strong early motivation that fades.
    InitialAchiever,
    /// Motivation sustained by continued progress.
    ConstantAchiever,
    /// Little internal or financial response.
    Resistant,
    Generic,
}

/// Inclusive sampling range.
pub type Range = [f64; 2];

fn draw<R: Rng + ?Sized>(rng: &mut R, r: Range) -> f64 {
    if r[1] > r[0] {
        rng.random_range(r[0]..=r[1])
    } else {
        r[0]
    }
}

/// Ranges for one archetype. `offset` is preferred intake minus the
/// maintenance intake at the starting weight, kcal/day.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArchetypeRanges {
    pub a1: Range,
    pub a2: Range,
    pub k1: Range,
    pub k2: Range,
    pub reward_belief: Range,
    pub offset: Range,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CohortDistributions {
    /// Initial achievers, constant achievers, resistant; the rest generic.
    pub archetype_weights: [f64; 3],
    /// Both reward types, calorie only, weight only.
    pub arm_weights: [f64; 3],
    pub age_years: Range,
    pub female_fraction: f64,
    pub height_cm_male: Range,
    pub height_cm_female: Range,
    pub activity: Range,
    pub w00: Range,
    pub p0: Range,
    pub threshold: Range,
    pub kp: Range,
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma_p: f64,
    pub gamma_f: f64,
    pub p_base: f64,
    pub noise_half_width: f64,
    pub sigma: f64,
    pub initial_achiever: ArchetypeRanges,
    pub constant_achiever: ArchetypeRanges,
    pub resistant: ArchetypeRanges,
    pub generic: ArchetypeRanges,
}

impl Default for CohortDistributions {
    fn default() -> Self {
        CohortDistributions {
            archetype_weights: [0.10, 0.73, 0.05],
            arm_weights: [0.10, 0.45, 0.45],
            age_years: [25.0, 65.0],
            female_fraction: 0.6,
            height_cm_male: [165.0, 190.0],
            height_cm_female: [152.0, 175.0],
            activity: [1.2, 1.5],
            w00: [170.0, 280.0],
            p0: [0.5, 0.95],
            threshold: [0.5, 0.9],
            kp: [0.0, 0.02],
            gamma1: 0.7,
            gamma2: 0.8,
            gamma_p: 0.8,
            gamma_f: 0.9,
            p_base: 0.6,
            noise_half_width: 500.0,
            sigma: 2.0,
            initial_achiever: ArchetypeRanges {
                a1: [3.0e5, 5.0e5],
                a2: [1.0e7, 3.0e7],
                k1: [0.0, 5.0e3],
                k2: [0.0, 2.0e5],
                reward_belief: [5.0, 12.0],
                offset: [100.0, 200.0],
            },
            constant_achiever: ArchetypeRanges {
                a1: [0.8e5, 1.6e5],
                a2: [1.0e7, 4.0e7],
                k1: [5.0e4, 1.0e5],
                k2: [1.0e6, 2.0e6],
                reward_belief: [5.0, 12.0],
                offset: [-20.0, 60.0],
            },
            resistant: ArchetypeRanges {
                a1: [0.0, 1.0e4],
                a2: [0.0, 5.0e6],
                k1: [0.0, 0.0],
                k2: [0.0, 2.0e4],
                reward_belief: [0.0, 5.0],
                offset: [0.0, 80.0],
            },
            generic: ArchetypeRanges {
                a1: [0.0, 2.0e5],
                a2: [0.0, 4.0e7],
                k1: [0.0, 5.0e4],
                k2: [0.0, 1.0e6],
                reward_belief: [0.0, 12.0],
                offset: [-40.0, 120.0],
            },
        }
    }
}

impl CohortDistributions {
    fn ranges(&self, a: Archetype) -> &ArchetypeRanges {
        match a {
            Archetype::InitialAchiever => &self.initial_achiever,
            Archetype::ConstantAchiever => &self.constant_achiever,
            Archetype::Resistant => &self.resistant,
            Archetype::Generic => &self.generic,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, w) in [
            ("archetype_weights", self.archetype_weights),
            ("arm_weights", self.arm_weights),
        ] {
            let sum: f64 = w.iter().sum();
            if w.iter().any(|&x| !(x >= 0.0)) || sum > 1.0 + 1e-9 {
                return Err(invalid(
                    name,
                    "weights must be nonnegative with sum at most 1",
                ));
            }
        }
        if (self.arm_weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(invalid("arm_weights", "must sum to 1"));
        }
        if !(0.0..=1.0).contains(&self.female_fraction) {
            return Err(invalid("female_fraction", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortMember {
    pub id: String,
    pub demographics: Demographics,
    pub archetype: Archetype,
    pub truth: InitialConditions,
    pub traits: ParticipantTraits,
    pub eligibility: Eligibility,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSpec {
    pub participants: Vec<CohortMember>,
    /// Weekly amount per eligible reward type, used by the fixed policy and
    /// the run-in.
    pub fixed_schedule: Vec<f64>,
}

impl CohortSpec {
    pub fn validate(&self, boxes: &Boxes) -> Result<()> {
        for m in &self.participants {
            m.truth.validate(boxes)?;
            m.traits.validate(boxes)?;
        }
        for (t, &v) in self.fixed_schedule.iter().enumerate() {
            boxes.reward.check(&format!("fixed_schedule[{t}]"), v)?;
        }
        Ok(())
    }

    /// Offer of the fixed schedule to one participant in week `t`.
    pub fn fixed_offer(&self, member: &CohortMember, t: usize) -> crate::model::Rewards {
        let level = self.fixed_schedule.get(t).copied().unwrap_or(0.0);
        let e = member.eligibility;
        crate::model::Rewards::new(
            if e.weight { level } else { 0.0 },
            if e.calorie { level } else { 0.0 },
        )
    }

    /// Total paid by the fixed schedule over the first `weeks` weeks.
    pub fn fixed_total(&self, weeks: usize) -> f64 {
        (0..weeks)
            .flat_map(|t| {
                self.participants
                    .iter()
                    .map(move |m| self.fixed_offer(m, t).total())
            })
            .sum()
    }
}

/// Predetermined weekly level: nothing at intake, four weeks at $10, then a
/// sparse tail.
pub fn default_fixed_schedule() -> Vec<f64> {
    let mut s = vec![0.0, 10.0, 10.0, 10.0, 10.0];
    s.extend([
        5.0, 0.0, 10.0, 0.0, 5.0, 15.0, 0.0, 5.0, 0.0, 10.0, 0.0, 3.0, 0.0, 15.0, 0.0, 5.0, 0.0,
        0.0, 0.0,
    ]);
    s
}

/// Largest-remainder apportionment of `n` items to `weights`.
pub fn apportion(n: usize, weights: &[f64]) -> Vec<usize> {
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return vec![0; weights.len()];
    }
    let quotas: Vec<f64> = weights.iter().map(|w| w / total * n as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    // stable: earlier entries win ties
    order.sort_by(|&a, &b| {
        (quotas[b] - quotas[b].floor()).total_cmp(&(quotas[a] - quotas[a].floor()))
    });
    let short = n - counts.iter().sum::<usize>();
    for &i in order.iter().take(short) {
        counts[i] += 1;
    }
    counts
}

/// Cohort of `n` participants drawn from `dist`, deterministic in `seed`.
pub fn generate_synthetic_cohort(
    n: usize,
    seed: u64,
    dist: &CohortDistributions,
    boxes: &Boxes,
) -> Result<CohortSpec> {
    if n == 0 {
        return Err(invalid("n", "cohort must contain at least one participant"));
    }
    dist.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rest = 1.0 - dist.archetype_weights.iter().sum::<f64>();
    let mut kinds = Vec::with_capacity(n);
    let kind_counts = apportion(
        n,
        &[
            dist.archetype_weights[0],
            dist.archetype_weights[1],
            dist.archetype_weights[2],
            rest,
        ],
    );
    for (kind, count) in [
        Archetype::InitialAchiever,
        Archetype::ConstantAchiever,
        Archetype::Resistant,
        Archetype::Generic,
    ]
    .into_iter()
    .zip(kind_counts)
    {
        kinds.extend(std::iter::repeat_n(kind, count));
    }
    let arms = [
        Eligibility::BOTH,
        Eligibility {
            weight: false,
            calorie: true,
        },
        Eligibility {
            weight: true,
            calorie: false,
        },
    ];
    let mut eligibilities = Vec::with_capacity(n);
    for (arm, count) in arms.into_iter().zip(apportion(n, &dist.arm_weights)) {
        eligibilities.extend(std::iter::repeat_n(arm, count));
    }
    kinds.shuffle(&mut rng);
    eligibilities.shuffle(&mut rng);
    let mut participants = Vec::with_capacity(n);
    for (i, (archetype, eligibility)) in kinds.into_iter().zip(eligibilities).enumerate() {
        let sex = if rng.random::<f64>() < dist.female_fraction {
            Sex::Female
        } else {
            Sex::Male
        };
        let height = match sex {
            Sex::Male => draw(&mut rng, dist.height_cm_male),
            Sex::Female => draw(&mut rng, dist.height_cm_female),
        };
        let demographics = Demographics {
            age_years: draw(&mut rng, dist.age_years),
            sex,
            height_cm: height,
            activity: draw(&mut rng, dist.activity),
        };
        let physiology = mifflin_traits(&demographics, &EnergyConstants::default())?;
        let traits = ParticipantTraits {
            noise_half_width: dist.noise_half_width,
            sigma: dist.sigma,
            gamma1: dist.gamma1,
            gamma2: dist.gamma2,
            gamma_p: dist.gamma_p,
            gamma_f: dist.gamma_f,
            p_base: dist.p_base,
            ..ParticipantTraits::from_physiology(physiology)
        };
        let w00 = boxes.weight.clamp(draw(&mut rng, dist.w00));
        let maintenance = ((1.0 - traits.b) * w00 - traits.k) / traits.c;
        let r = dist.ranges(archetype);
        let p = boxes.probability();
        let theta0 = MotivationalState {
            a1: boxes.motivation.clamp(draw(&mut rng, r.a1)),
            a2: boxes.motivation.clamp(draw(&mut rng, r.a2)),
            p: p.clamp(draw(&mut rng, dist.p0)),
            threshold: p.clamp(draw(&mut rng, dist.threshold)),
            f_pref: boxes.calories.clamp(maintenance + draw(&mut rng, r.offset)),
            reward_belief: boxes.reward.clamp(draw(&mut rng, r.reward_belief)),
            k1: boxes.gain.clamp(draw(&mut rng, r.k1)),
            k2: boxes.gain.clamp(draw(&mut rng, r.k2)),
            kp: boxes.gain.clamp(draw(&mut rng, dist.kp)),
            week: 0,
        };
        participants.push(CohortMember {
            id: format!("P{:03}", i + 1),
            demographics,
            archetype,
            truth: InitialConditions { w00, theta0 },
            traits,
            eligibility,
        });
    }
    let cohort = CohortSpec {
        participants,
        fixed_schedule: default_fixed_schedule(),
    };
    cohort.validate(boxes)?;
    Ok(cohort)
}

/// Laplace prior matched to the mean and mean absolute deviation of a
/// cohort distribution. Preferred intake is centered on maintenance at the
/// participant's first observed weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopulationPrior {
    /// Centers in [`InitialConditions::to_array`] order; the `f_b` entry is
    /// an offset from maintenance.
    pub center: [f64; 10],
    pub scale: [f64; 10],
}

impl PopulationPrior {
    pub fn from_distributions(dist: &CohortDistributions) -> Self {
        let rest = (1.0 - dist.archetype_weights.iter().sum::<f64>()).max(0.0);
        let mix = [
            (dist.archetype_weights[0], &dist.initial_achiever),
            (dist.archetype_weights[1], &dist.constant_achiever),
            (dist.archetype_weights[2], &dist.resistant),
            (rest, &dist.generic),
        ];
        let total: f64 = mix.iter().map(|(w, _)| w).sum();
        // uniform components: mean is the midpoint, mean absolute deviation a quarter width
        let moments = |pick: &dyn Fn(&ArchetypeRanges) -> Range| {
            let mid = |r: Range| 0.5 * (r[0] + r[1]);
            let c = mix.iter().map(|(w, a)| w * mid(pick(a))).sum::<f64>() / total;
            let s = mix
                .iter()
                .map(|(w, a)| w * ((mid(pick(a)) - c).abs() + 0.25 * (pick(a)[1] - pick(a)[0])))
                .sum::<f64>()
                / total;
            (c, s)
        };
        let single = |r: Range| (0.5 * (r[0] + r[1]), 0.25 * (r[1] - r[0]));
        let parts = [
            single(dist.w00),
            moments(&|a| a.a1),
            moments(&|a| a.a2),
            single(dist.p0),
            single(dist.threshold),
            moments(&|a| a.offset),
            moments(&|a| a.reward_belief),
            moments(&|a| a.k1),
            moments(&|a| a.k2),
            single(dist.kp),
        ];
        PopulationPrior {
            center: parts.map(|(c, _)| c),
            scale: parts.map(|(c, s)| s.max(1e-6 * c.abs().max(1.0))),
        }
    }

    pub fn for_participant(
        &self,
        first_weight: f64,
        traits: &ParticipantTraits,
    ) -> crate::estimation::Prior {
        let mut center = self.center;
        center[5] += ((1.0 - traits.b) * first_weight - traits.k) / traits.c;
        crate::estimation::Prior::Laplace {
            center,
            scale: self.scale,
        }
    }
}
