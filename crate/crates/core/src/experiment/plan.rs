//! Prompting-language plans and the language shuffles.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::country::{Country, Language};
use crate::error::{Error, Result};
use crate::persona::Persona;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum LanguageMode {
    /// Everyone prompted in one language.
    Monolingual { language: Language },
    /// Each persona prompted in its country's language.
    Native,
    /// Languages permuted across countries, keeping how many countries use
    /// each language.
    CountryShuffled { seed: u64 },
    /// Native languages permuted across individual personas.
    FullShuffled { seed: u64 },
}

impl LanguageMode {
    pub fn name(&self) -> String {
        match self {
            LanguageMode::Monolingual { language } => format!("monolingual_{}", language.code().to_lowercase()),
            LanguageMode::Native => "native".into(),
            LanguageMode::CountryShuffled { .. } => "country_shuffled".into(),
            LanguageMode::FullShuffled { .. } => "full_shuffled".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LanguagePlan {
    #[serde(flatten)]
    pub mode: LanguageMode,
    #[serde(default = "default_country_languages")]
    pub country_language_map: BTreeMap<Country, Language>,
}

/// Majority language of every country in the study.
pub fn default_country_languages() -> BTreeMap<Country, Language> {
    Country::ALL.into_iter().map(|c| (c, c.native_language())).collect()
}

impl LanguagePlan {
    pub fn new(mode: LanguageMode) -> Self {
        Self {
            mode,
            country_language_map: default_country_languages(),
        }
    }

    pub fn monolingual(language: Language) -> Self {
        Self::new(LanguageMode::Monolingual { language })
    }

    pub fn validate(&self) -> Result<()> {
        if !matches!(self.mode, LanguageMode::Monolingual { .. }) {
            let missing: Vec<&str> = Country::ALL
                .iter()
                .filter(|c| !self.country_language_map.contains_key(c))
                .map(|c| c.code())
                .collect();
            if !missing.is_empty() {
                return Err(Error::Config(format!("no language mapped for {}", missing.join(", "))));
            }
        }
        Ok(())
    }
}

fn mapped(map: &BTreeMap<Country, Language>, country: Country) -> Result<Language> {
    map.get(&country)
        .copied()
        .ok_or_else(|| Error::Config(format!("no language mapped for country {country}")))
}

/// Language for one persona. Full shuffling depends on the whole
/// population, so it is only available through [`resolve_languages`].
pub fn resolve_language(persona: &Persona, plan: &LanguagePlan) -> Result<Language> {
    match plan.mode {
        LanguageMode::Monolingual { language } => Ok(language),
        LanguageMode::Native => mapped(&plan.country_language_map, persona.country),
        LanguageMode::CountryShuffled { seed } => {
            mapped(&shuffle_country_languages(&plan.country_language_map, seed), persona.country)
        }
        LanguageMode::FullShuffled { .. } => Err(Error::Argument(
            "full shuffling assigns languages across the whole population; use resolve_languages".into(),
        )),
    }
}

/// Language for every persona, keyed by persona id.
pub fn resolve_languages(personas: &[Persona], plan: &LanguagePlan) -> Result<BTreeMap<String, Language>> {
    plan.validate()?;
    let per_country = |map: &BTreeMap<Country, Language>| -> Result<BTreeMap<String, Language>> {
        personas
            .iter()
            .map(|p| Ok((p.id.clone(), mapped(map, p.country)?)))
            .collect()
    };
    match plan.mode {
        LanguageMode::Monolingual { language } => Ok(personas.iter().map(|p| (p.id.clone(), language)).collect()),
        LanguageMode::Native => per_country(&plan.country_language_map),
        LanguageMode::CountryShuffled { seed } => {
            per_country(&shuffle_country_languages(&plan.country_language_map, seed))
        }
        LanguageMode::FullShuffled { seed } => {
            let native = per_country(&plan.country_language_map)?;
            Ok(shuffle_full(personas, &native, seed))
        }
    }
}

/// Permutes the languages across countries. The multiset of languages,
/// and so the number of countries per language, is unchanged.
pub fn shuffle_country_languages(map: &BTreeMap<Country, Language>, seed: u64) -> BTreeMap<Country, Language> {
    let mut languages: Vec<Language> = map.values().copied().collect();
    languages.shuffle(&mut seed::rng(seed, "country-languages", 0));
    map.keys().copied().zip(languages).collect()
}

/// Uniformly permutes the native-language assignment across personas,
/// keeping per-language participant counts.
pub fn shuffle_full(personas: &[Persona], native: &BTreeMap<String, Language>, seed: u64) -> BTreeMap<String, Language> {
    let mut languages: Vec<Language> = personas
        .iter()
        .filter_map(|p| native.get(&p.id).copied())
        .collect();
    languages.shuffle(&mut seed::rng(seed, "full-languages", 0));
    personas
        .iter()
        .filter(|p| native.contains_key(&p.id))
        .map(|p| p.id.clone())
        .zip(languages)
        .collect()
}

/// Number of entries per language.
pub fn language_counts<'a, K: 'a>(assignment: impl IntoIterator<Item = (K, &'a Language)>) -> BTreeMap<Language, usize> {
    let mut counts = BTreeMap::new();
    for (_, &l) in assignment {
        *counts.entry(l).or_insert(0) += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::persona::{synthesize_population, PopulationSpec};

    #[test]
    fn resolution_examples() {
        let personas = synthesize_population(&PopulationSpec::scaled(0.01, 3)).unwrap();
        let find = |c: Country| personas.iter().find(|p| p.country == c).unwrap();
        let en = LanguagePlan::monolingual(Language::English);
        assert_eq!(resolve_language(find(Country::Greece), &en).unwrap(), Language::English);
        let native = LanguagePlan::new(LanguageMode::Native);
        assert_eq!(resolve_language(find(Country::Israel), &native).unwrap(), Language::Hebrew);
        assert_eq!(resolve_language(find(Country::Switzerland), &native).unwrap(), Language::German);
    }

    #[test]
    fn unmapped_country_is_a_config_error() {
        let personas = synthesize_population(&PopulationSpec::scaled(0.01, 3)).unwrap();
        let mut plan = LanguagePlan::new(LanguageMode::Native);
        plan.country_language_map.remove(&Country::Norway);
        let norwegian = personas.iter().find(|p| p.country == Country::Norway).unwrap();
        assert!(matches!(resolve_language(norwegian, &plan), Err(Error::Config(_))));
        assert!(matches!(resolve_languages(&personas, &plan), Err(Error::Config(_))));
    }

    #[test]
    fn country_shuffle_keeps_multiplicities() {
        let base = default_country_languages();
        let a = shuffle_country_languages(&base, 1);
        let b = shuffle_country_languages(&base, 2);
        assert_ne!(a, b);
        for m in [&a, &b] {
            assert_eq!(m.len(), 15);
            let counts = language_counts(m.iter());
            assert_eq!(counts[&Language::German], 3);
            assert_eq!(counts[&Language::English], 2);
        }
        let twice = shuffle_country_languages(&a, 9);
        assert_eq!(language_counts(twice.iter()), language_counts(base.iter()));
    }

    #[test]
    fn full_shuffle_of_one_language_is_identity() {
        let personas = synthesize_population(&PopulationSpec::scaled(0.01, 3)).unwrap();
        let native: BTreeMap<String, Language> =
            personas.iter().map(|p| (p.id.clone(), Language::Polish)).collect();
        assert_eq!(shuffle_full(&personas, &native, 5), native);
    }

    #[test]
    fn plan_serializes_with_mode_tag() {
        let plan = LanguagePlan::new(LanguageMode::CountryShuffled { seed: 4 });
        let json = serde_json::to_string(&plan).unwrap();
        assert!(json.starts_with(r#"{"mode":"country_shuffled","seed":4"#), "{json}");
        let back: LanguagePlan = serde_json::from_str(&json).unwrap();
        assert_eq!(back, plan);
        let mono: LanguagePlan = serde_json::from_str(r#"{"mode":"monolingual","language":"EL"}"#).unwrap();
        assert_eq!(mono.mode, LanguageMode::Monolingual { language: Language::Greek });
    }
}
