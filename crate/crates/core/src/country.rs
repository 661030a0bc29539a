//! The fifteen surveyed countries and the twelve prompting languages.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

/// Surveyed country. Codes follow the row labels of the reference
/// coefficient table (`ge` for Germany, `po` for Poland, `uk` for the
/// United Kingdom); ISO 3166 alpha-2 aliases are accepted on input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Country {
    Austria,
    Switzerland,
    Spain,
    France,
    Germany,
    Greece,
    Ireland,
    Israel,
    Italy,
    Netherlands,
    Norway,
    Poland,
    Romania,
    Sweden,
    UnitedKingdom,
}

impl Country {
    /// All countries in reference-table row order.
    pub const ALL: [Country; 15] = [
        Country::Austria,
        Country::Switzerland,
        Country::Spain,
        Country::France,
        Country::Germany,
        Country::Greece,
        Country::Ireland,
        Country::Israel,
        Country::Italy,
        Country::Netherlands,
        Country::Norway,
        Country::Poland,
        Country::Romania,
        Country::Sweden,
        Country::UnitedKingdom,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Country::Austria => "at",
            Country::Switzerland => "ch",
            Country::Spain => "es",
            Country::France => "fr",
            Country::Germany => "ge",
            Country::Greece => "gr",
            Country::Ireland => "ie",
            Country::Israel => "il",
            Country::Italy => "it",
            Country::Netherlands => "nl",
            Country::Norway => "no",
            Country::Poland => "po",
            Country::Romania => "ro",
            Country::Sweden => "se",
            Country::UnitedKingdom => "uk",
        }
    }

    pub fn english_name(self) -> &'static str {
        match self {
            Country::Austria => "Austria",
            Country::Switzerland => "Switzerland",
            Country::Spain => "Spain",
            Country::France => "France",
            Country::Germany => "Germany",
            Country::Greece => "Greece",
            Country::Ireland => "Ireland",
            Country::Israel => "Israel",
            Country::Italy => "Italy",
            Country::Netherlands => "Netherlands",
            Country::Norway => "Norway",
            Country::Poland => "Poland",
            Country::Romania => "Romania",
            Country::Sweden => "Sweden",
            Country::UnitedKingdom => "United Kingdom",
        }
    }

    /// Participants per country in the original study (total 7286).
    pub fn study_participants(self) -> u32 {
        match self {
            Country::Austria => 529,
            Country::France => 528,
            Country::Germany => 414,
            Country::Greece => 548,
            Country::Ireland => 384,
            Country::Israel => 461,
            Country::Italy => 446,
            Country::Netherlands => 377,
            Country::Norway => 433,
            Country::Poland => 549,
            Country::Romania => 659,
            Country::Spain => 469,
            Country::Sweden => 519,
            Country::Switzerland => 512,
            Country::UnitedKingdom => 458,
        }
    }

    /// Majority language.
    pub fn native_language(self) -> Language {
        match self {
            Country::Netherlands => Language::Dutch,
            Country::Ireland | Country::UnitedKingdom => Language::English,
            Country::France => Language::French,
            Country::Austria | Country::Germany | Country::Switzerland => Language::German,
            Country::Greece => Language::Greek,
            Country::Israel => Language::Hebrew,
            Country::Italy => Language::Italian,
            Country::Norway => Language::Norwegian,
            Country::Poland => Language::Polish,
            Country::Romania => Language::Romanian,
            Country::Spain => Language::Spanish,
            Country::Sweden => Language::Swedish,
        }
    }
}

impl fmt::Display for Country {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Country {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        let alias = match lower.as_str() {
            "de" => "ge",
            "pl" => "po",
            "gb" => "uk",
            other => other,
        };
        Country::ALL
            .into_iter()
            .find(|c| c.code() == alias)
            .ok_or_else(|| Error::Config(format!("unknown country code {s:?}")))
    }
}

impl Serialize for Country {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.code())
    }
}

impl<'de> Deserialize<'de> for Country {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Prompting language, keyed by the two-letter codes used for catalogs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Language {
    Dutch,
    English,
    French,
    German,
    Greek,
    Hebrew,
    Italian,
    Norwegian,
    Polish,
    Romanian,
    Spanish,
    Swedish,
}

impl Language {
    pub const ALL: [Language; 12] = [
        Language::Dutch,
        Language::English,
        Language::French,
        Language::German,
        Language::Greek,
        Language::Hebrew,
        Language::Italian,
        Language::Norwegian,
        Language::Polish,
        Language::Romanian,
        Language::Spanish,
        Language::Swedish,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Language::Dutch => "NL",
            Language::English => "EN",
            Language::French => "FR",
            Language::German => "DE",
            Language::Greek => "EL",
            Language::Hebrew => "IW",
            Language::Italian => "IT",
            Language::Norwegian => "NO",
            Language::Polish => "PL",
            Language::Romanian => "RO",
            Language::Spanish => "ES",
            Language::Swedish => "SV",
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Language {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let upper = s.trim().to_ascii_uppercase();
        // HE is the current ISO 639-1 code for Hebrew; IW is the legacy one.
        let upper = if upper == "HE" { "IW".to_string() } else { upper };
        Language::ALL
            .into_iter()
            .find(|l| l.code() == upper)
            .ok_or_else(|| Error::Config(format!("unknown language code {s:?}")))
    }
}

impl Serialize for Language {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.code())
    }
}

impl<'de> Deserialize<'de> for Language {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    #[test]
    fn participant_counts_total_7286() {
        let total: u32 = Country::ALL.iter().map(|c| c.study_participants()).sum();
        assert_eq!(total, 7286);
        assert_eq!(Country::Austria.study_participants(), 529);
    }

    #[test]
    fn language_multiplicities() {
        let mut counts = BTreeMap::new();
        for c in Country::ALL {
            *counts.entry(c.native_language()).or_insert(0) += 1;
        }
        assert_eq!(counts.len(), 12);
        assert_eq!(counts[&Language::German], 3);
        assert_eq!(counts[&Language::English], 2);
        assert_eq!(counts.values().filter(|&&n| n == 1).count(), 10);
    }

    #[test]
    fn codes_round_trip_and_aliases() {
        for c in Country::ALL {
            assert_eq!(c.code().parse::<Country>().unwrap(), c);
        }
        assert_eq!("DE".parse::<Country>().unwrap(), Country::Germany);
        assert_eq!("pl".parse::<Country>().unwrap(), Country::Poland);
        assert!("xx".parse::<Country>().is_err());
        for l in Language::ALL {
            assert_eq!(l.code().parse::<Language>().unwrap(), l);
        }
        assert_eq!("he".parse::<Language>().unwrap(), Language::Hebrew);
    }
}
