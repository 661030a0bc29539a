//! Simulated participant population.
//!
//! A [`Persona`] carries the demographics and relative-deprivation ratings
//! shown in the questionnaire preamble plus the article version the persona
//! is exposed to. Populations are synthesized per country from seeded
//! streams, then framing conditions are assigned with per-country
//! stratification.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::country::Country;
use crate::error::{Error, Result};
use crate::seed;

pub const RATING_MIN: u8 = 1;
pub const RATING_MAX: u8 = 7;
pub const AGE_MIN: u8 = 18;
pub const AGE_MAX: u8 = 90;

/// Which article version a persona reads: anti-elite framing (`E`) and/or
/// anti-immigrant framing (`I`). Neither flag set is the factual article.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct FramingCondition {
    #[serde(rename = "E")]
    pub anti_elite: bool,
    #[serde(rename = "I")]
    pub anti_immigrant: bool,
}

impl FramingCondition {
    pub const FACTUAL: Self = Self::new(false, false);
    pub const ANTI_ELITE: Self = Self::new(true, false);
    pub const ANTI_IMMIGRANT: Self = Self::new(false, true);
    pub const COMBINED: Self = Self::new(true, true);

    pub const ALL: [Self; 4] = [
        Self::FACTUAL,
        Self::ANTI_ELITE,
        Self::ANTI_IMMIGRANT,
        Self::COMBINED,
    ];

    pub const fn new(anti_elite: bool, anti_immigrant: bool) -> Self {
        Self {
            anti_elite,
            anti_immigrant,
        }
    }

    pub fn index(self) -> usize {
        usize::from(self.anti_elite) + 2 * usize::from(self.anti_immigrant)
    }

    pub fn e(self) -> f64 {
        f64::from(u8::from(self.anti_elite))
    }

    pub fn i(self) -> f64 {
        f64::from(u8::from(self.anti_immigrant))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Female,
    Male,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Persona {
    pub id: String,
    pub country: Country,
    pub age: u8,
    pub gender: Gender,
    /// Ordinal 1..=7.
    pub education: u8,
    pub deprivation_ratings: Vec<u8>,
    pub framing: FramingCondition,
}

impl Persona {
    /// Mean relative-deprivation rating (the regression covariate `D`).
    pub fn deprivation(&self) -> f64 {
        let sum: u32 = self.deprivation_ratings.iter().map(|&r| u32::from(r)).sum();
        f64::from(sum) / self.deprivation_ratings.len() as f64
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.id.is_empty() {
            return Err("empty persona id".into());
        }
        if !(AGE_MIN..=AGE_MAX).contains(&self.age) {
            return Err(format!("age {} outside {AGE_MIN}..={AGE_MAX}", self.age));
        }
        if !(RATING_MIN..=RATING_MAX).contains(&self.education) {
            return Err(format!("education {} outside 1..=7", self.education));
        }
        if self.deprivation_ratings.is_empty() {
            return Err("no deprivation ratings".into());
        }
        if let Some(r) = self
            .deprivation_ratings
            .iter()
            .find(|r| !(RATING_MIN..=RATING_MAX).contains(*r))
        {
            return Err(format!("deprivation rating {r} outside 1..=7"));
        }
        Ok(())
    }
}

/// Sampling parameters for the synthetic demographics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DemographicDistributions {
    pub age_min: u8,
    pub age_max: u8,
    /// Relative weights for female, male, other.
    pub gender_weights: [f64; 3],
    pub education_min: u8,
    pub education_max: u8,
    /// Each deprivation item is `round(N(mean, spread))` clamped to 1..=7.
    pub deprivation_mean: f64,
    pub deprivation_spread: f64,
}

impl Default for DemographicDistributions {
    fn default() -> Self {
        Self {
            age_min: 18,
            age_max: 75,
            gender_weights: [0.49, 0.49, 0.02],
            education_min: 1,
            education_max: 7,
            deprivation_mean: 4.0,
            deprivation_spread: 1.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSpec {
    pub per_country_counts: BTreeMap<Country, u32>,
    pub deprivation_item_count: usize,
    #[serde(default)]
    pub demographic_distributions: DemographicDistributions,
    pub seed: u64,
}

impl Default for PopulationSpec {
    fn default() -> Self {
        Self {
            per_country_counts: Country::ALL
                .into_iter()
                .map(|c| (c, c.study_participants()))
                .collect(),
            deprivation_item_count: 3,
            demographic_distributions: DemographicDistributions::default(),
            seed: 0,
        }
    }
}

impl PopulationSpec {
    /// The original study composition scaled by `fraction` per country
    /// (rounded, at least one persona per country).
    pub fn scaled(fraction: f64, seed: u64) -> Self {
        let mut spec = Self {
            seed,
            ..Self::default()
        };
        for count in spec.per_country_counts.values_mut() {
            *count = ((f64::from(*count) * fraction).round() as u32).max(1);
        }
        spec
    }

    pub fn total(&self) -> u64 {
        self.per_country_counts.values().map(|&n| u64::from(n)).sum()
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.per_country_counts.is_empty() {
            problems.push("per_country_counts is empty".to_string());
        }
        for (country, &n) in &self.per_country_counts {
            if n == 0 {
                problems.push(format!("count for {country} is zero"));
            }
        }
        if self.deprivation_item_count == 0 {
            problems.push("deprivation_item_count must be at least 1".into());
        }
        let d = &self.demographic_distributions;
        if d.age_min < AGE_MIN || d.age_max > AGE_MAX || d.age_min > d.age_max {
            problems.push(format!("age range {}..={} invalid", d.age_min, d.age_max));
        }
        if d.education_min < RATING_MIN || d.education_max > RATING_MAX || d.education_min > d.education_max {
            problems.push("education range invalid".into());
        }
        if d.gender_weights.iter().any(|w| !w.is_finite() || *w < 0.0)
            || d.gender_weights.iter().sum::<f64>() <= 0.0
        {
            problems.push("gender weights must be non-negative with positive sum".into());
        }
        if !d.deprivation_mean.is_finite() || !d.deprivation_spread.is_finite() || d.deprivation_spread < 0.0 {
            problems.push("deprivation mean/spread invalid".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }
}

/// Generate the population described by `spec`, with framing conditions
/// already assigned. Each country draws from its own seeded stream, so
/// changing one country's count leaves the other countries untouched.
pub fn synthesize_population(spec: &PopulationSpec) -> Result<Vec<Persona>> {
    spec.validate()?;
    let dist = &spec.demographic_distributions;
    let deprivation = Normal::new(dist.deprivation_mean, dist.deprivation_spread)
        .map_err(|e| Error::Config(e.to_string()))?;
    let gender_total: f64 = dist.gender_weights.iter().sum();

    let mut personas = Vec::with_capacity(spec.total() as usize);
    for (&country, &count) in &spec.per_country_counts {
        let mut rng = seed::rng(spec.seed, "persona", country as u64);
        for n in 0..count {
            let age = rng.random_range(dist.age_min..=dist.age_max);
            let g = rng.random::<f64>() * gender_total;
            let gender = if g < dist.gender_weights[0] {
                Gender::Female
            } else if g < dist.gender_weights[0] + dist.gender_weights[1] {
                Gender::Male
            } else {
                Gender::Other
            };
            let education = rng.random_range(dist.education_min..=dist.education_max);
            let deprivation_ratings = (0..spec.deprivation_item_count)
                .map(|_| {
                    let x: f64 = deprivation.sample(&mut rng);
                    x.round().clamp(f64::from(RATING_MIN), f64::from(RATING_MAX)) as u8
                })
                .collect();
            personas.push(Persona {
                id: format!("{}-{:05}", country.code(), n),
                country,
                age,
                gender,
                education,
                deprivation_ratings,
                framing: FramingCondition::FACTUAL,
            });
        }
    }
    assign_framing(personas, seed::derive(spec.seed, "framing", 0))
}

/// Assign the four framing conditions in near-equal counts, stratified by
/// country. Within a country each condition gets `n / 4` or `n / 4 + 1`
/// personas; the conditions receiving the remainder rotate from country to
/// country so the global counts also differ by at most one.
pub fn assign_framing(mut personas: Vec<Persona>, seed: u64) -> Result<Vec<Persona>> {
    if personas.is_empty() {
        return Err(Error::Argument("cannot assign framing to an empty population".into()));
    }
    let mut by_country: BTreeMap<Country, Vec<usize>> = BTreeMap::new();
    for (idx, p) in personas.iter().enumerate() {
        by_country.entry(p.country).or_default().push(idx);
    }

    let mut offset = (seed::derive(seed, "framing-offset", 0) % 4) as usize;
    for (country, indices) in by_country {
        let n = indices.len();
        let (base, extra) = (n / 4, n % 4);
        let mut conditions = Vec::with_capacity(n);
        for (k, condition) in FramingCondition::ALL.into_iter().enumerate() {
            let bonus = usize::from((k + 4 - offset) % 4 < extra);
            conditions.extend(std::iter::repeat_n(condition, base + bonus));
        }
        offset = (offset + extra) % 4;
        conditions.shuffle(&mut seed::rng(seed, "framing", country as u64));
        for (idx, condition) in indices.into_iter().zip(conditions) {
            personas[idx].framing = condition;
        }
    }
    Ok(personas)
}

const SCHEMA_VERSION: u32 = 1;

#[derive(Deserialize)]
struct PersonaLine {
    v: u32,
    #[serde(flatten)]
    persona: Persona,
}

#[derive(Serialize)]
struct PersonaLineRef<'a> {
    v: u32,
    #[serde(flatten)]
    persona: &'a Persona,
}

pub fn write_population<W: Write>(personas: &[Persona], mut out: W) -> Result<()> {
    for persona in personas {
        serde_json::to_writer(
            &mut out,
            &PersonaLineRef {
                v: SCHEMA_VERSION,
                persona,
            },
        )?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn save_population(personas: &[Persona], path: impl AsRef<Path>) -> Result<()> {
    let file = File::create(path.as_ref())?;
    write_population(personas, BufWriter::new(file))
}

pub fn load_population(path: impl AsRef<Path>) -> Result<Vec<Persona>> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path)?);
    let mut personas = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: n + 1,
            message,
        };
        let record: PersonaLine = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        if record.v != SCHEMA_VERSION {
            return Err(parse_err(format!("unsupported schema version {}", record.v)));
        }
        record.persona.validate().map_err(parse_err)?;
        personas.push(record.persona);
    }
    Ok(personas)
}

/// SHA-256 over the canonical JSON-lines encoding.
pub fn population_digest(personas: &[Persona]) -> String {
    use sha2::{Digest, Sha256};
    let mut buf = Vec::new();
    write_population(personas, &mut buf).expect("in-memory write");
    hex::encode(Sha256::digest(&buf))
}
