//! Deterministic respondent that realizes the persuasion/mobilization
//! regression models generatively.
//!
//! The pre-rounding mean for a prompt is
//!
//! ```text
//! mu = intercept + C[country] + l_D*D + l_E*E + l_I*I + l_EI*E*I
//!      + l_DE*D*E + l_DI*D*I + l_DEI*D*E*I + bias[language]
//! ```
//!
//! using the persuasion parameters for persuasion probes and the
//! mobilization parameters otherwise. The country term only applies when
//! the prompt discloses the country. The rating is
//! `clamp(round_half_up(mu + noise), 1, 7)` with Gaussian noise seeded by
//! `(seed, persona_id, probe)`.

use std::collections::BTreeMap;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::country::{Country, Language};
use crate::error::{Error, Result};
use crate::persona::Persona;
use crate::prompt::{DisclosedFeatures, ProbeKind};
use crate::seed;
use crate::stats::{CoefficientTable, Effect, Outcome, Term};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Lambdas {
    pub d: f64,
    pub e: f64,
    pub i: f64,
    pub ei: f64,
    pub de: f64,
    pub di: f64,
    pub dei: f64,
}

impl Lambdas {
    pub fn get(&self, effect: Effect) -> f64 {
        match effect {
            Effect::D => self.d,
            Effect::E => self.e,
            Effect::I => self.i,
            Effect::EI => self.ei,
            Effect::DE => self.de,
            Effect::DI => self.di,
            Effect::DEI => self.dei,
        }
    }

    pub fn set(&mut self, effect: Effect, value: f64) {
        *match effect {
            Effect::D => &mut self.d,
            Effect::E => &mut self.e,
            Effect::I => &mut self.i,
            Effect::EI => &mut self.ei,
            Effect::DE => &mut self.de,
            Effect::DI => &mut self.di,
            Effect::DEI => &mut self.dei,
        } = value;
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OutcomeParams {
    pub intercept: f64,
    #[serde(default)]
    pub country: BTreeMap<Country, f64>,
    #[serde(default)]
    pub lambda: Lambdas,
}

impl OutcomeParams {
    pub fn constant(intercept: f64) -> Self {
        Self {
            intercept,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticRespondentParams {
    pub persuasion: OutcomeParams,
    pub mobilization: OutcomeParams,
    #[serde(default)]
    pub language_bias: BTreeMap<Language, f64>,
    pub noise_sd: f64,
    pub seed: u64,
}

/// Intercept used by [`SyntheticRespondentParams::centred_on`].
pub const DEFAULT_INTERCEPT: f64 = 2.9;

/// Tolerance on the sum-to-zero constraint of the country terms.
pub const COUNTRY_SUM_TOLERANCE: f64 = 1e-9;

impl SyntheticRespondentParams {
    pub fn constant(intercept: f64) -> Self {
        Self {
            persuasion: OutcomeParams::constant(intercept),
            mobilization: OutcomeParams::constant(intercept),
            language_bias: BTreeMap::new(),
            noise_sd: 0.0,
            seed: 0,
        }
    }

    /// Ground truth taken from a coefficient table (for example the human
    /// reference). Country terms are re-centred so they sum to exactly zero;
    /// terms the table lacks are zero.
    pub fn from_table(table: &CoefficientTable, intercepts: (f64, f64), noise_sd: f64, seed: u64) -> Self {
        let outcome = |outcome: Outcome, intercept: f64| {
            let mut p = OutcomeParams::constant(intercept);
            for effect in Effect::ALL {
                if let Some(est) = table.get(Term::Effect(effect), outcome) {
                    p.lambda.set(effect, est.value);
                }
            }
            let terms: Vec<(Country, f64)> = Country::ALL
                .into_iter()
                .filter_map(|c| table.get(Term::Country(c), outcome).map(|e| (c, e.value)))
                .collect();
            if !terms.is_empty() {
                let mean = terms.iter().map(|(_, v)| v).sum::<f64>() / terms.len() as f64;
                p.country = terms.into_iter().map(|(c, v)| (c, v - mean)).collect();
            }
            p
        };
        Self {
            persuasion: outcome(Outcome::Persuasion, intercepts.0),
            mobilization: outcome(Outcome::Mobilization, intercepts.1),
            language_bias: BTreeMap::new(),
            noise_sd,
            seed,
        }
    }

    /// Ground truth from `table` with intercepts that keep typical means
    /// mid-scale, so clamping at 1 and 7 is rare.
    pub fn centred_on(table: &CoefficientTable, noise_sd: f64, seed: u64) -> Self {
        Self::from_table(table, (DEFAULT_INTERCEPT, DEFAULT_INTERCEPT), noise_sd, seed)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.noise_sd.is_finite() || self.noise_sd < 0.0 {
            return Err(Error::Config(format!("noise_sd {} must be finite and >= 0", self.noise_sd)));
        }
        for (name, p) in [("persuasion", &self.persuasion), ("mobilization", &self.mobilization)] {
            let sum: f64 = p.country.values().sum();
            if sum.abs() > COUNTRY_SUM_TOLERANCE {
                return Err(Error::Config(format!("{name} country terms sum to {sum}, not zero")));
            }
        }
        Ok(())
    }

    pub fn outcome(&self, probe: ProbeKind) -> &OutcomeParams {
        if probe.is_persuasion() {
            &self.persuasion
        } else {
            &self.mobilization
        }
    }
}

/// Noise-free mean before rounding and clamping.
pub fn synthetic_mean(
    features: &DisclosedFeatures,
    probe: ProbeKind,
    language: Language,
    params: &SyntheticRespondentParams,
) -> f64 {
    let p = params.outcome(probe);
    let d = features.deprivation;
    let e = features.framing.e();
    let i = features.framing.i();
    let l = &p.lambda;
    let country = features
        .country
        .and_then(|c| p.country.get(&c).copied())
        .unwrap_or(0.0);
    p.intercept
        + country
        + l.d * d
        + l.e * e
        + l.i * i
        + l.ei * e * i
        + l.de * d * e
        + l.di * d * i
        + l.dei * d * e * i
        + params.language_bias.get(&language).copied().unwrap_or(0.0)
}

pub fn round_half_up(x: f64) -> f64 {
    (x + 0.5).floor()
}

fn noise(persona_id: &str, probe: ProbeKind, params: &SyntheticRespondentParams) -> f64 {
    if params.noise_sd == 0.0 {
        return 0.0;
    }
    let mut rng = seed::rng(params.seed, persona_id, probe as u64);
    Normal::new(0.0, params.noise_sd)
        .expect("validated noise sd")
        .sample(&mut rng)
}

pub fn synthetic_rating(
    persona_id: &str,
    features: &DisclosedFeatures,
    probe: ProbeKind,
    language: Language,
    params: &SyntheticRespondentParams,
) -> u8 {
    let mu = synthetic_mean(features, probe, language, params) + noise(persona_id, probe, params);
    round_half_up(mu).clamp(1.0, 7.0) as u8
}

/// Rating for a persona whose nationality is visible to the respondent.
pub fn synthetic_respond(
    persona: &Persona,
    probe: ProbeKind,
    language: Language,
    params: &SyntheticRespondentParams,
) -> u8 {
    let features = DisclosedFeatures {
        country: Some(persona.country),
        deprivation: persona.deprivation(),
        framing: persona.framing,
    };
    synthetic_rating(&persona.id, &features, probe, language, params)
}
