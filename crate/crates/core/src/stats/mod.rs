//! Scoring, regression and sign-agreement statistics.
//!
//! Each outcome `Y` in {P, M} is modelled as
//!
//! ```text
//! Y = Ybar + C_i + l_D*D + l_E*E + l_I*I + l_EI*EI + l_DE*DE + l_DI*DI + l_DEI*DEI
//! ```
//!
//! fitted as three nested models (A: country, D, E, I; B: adds the two-way
//! interactions; C: adds DEI), each coefficient being reported from the
//! earliest model that contains it. Country terms use sum-to-zero coding.

mod agreement;
mod design;
mod normal;
mod ols;
mod permutation;
mod scores;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::de::Error as _;
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use agreement::{
    compare_tables, pool_agreements, sign_agreement, sign_agreement_bounds, AgreementEntry, PoolGroup, PoolScope, PoolSelector,
    PooledRate, SignAgreementReport, SIGNIFICANCE_LEVEL,
};
pub use design::{build_design, build_design_matrix, response_vector, Design, ModelKind};
pub use normal::{normal_cdf, normal_pdf, NORMAL_CDF_MAX_ABS_ERROR};
pub use ols::{fit_ols, fit_ols_labeled, OlsFactor, OlsFit};
pub use permutation::{permutation_significance, permutation_test, MIN_PERMUTATIONS};
pub use scores::{compute_scores, read_scores_csv, write_scores_csv, Exclusion, ScoreRecord, ScoreSet};

use crate::country::Country;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Outcome {
    #[serde(rename = "P")]
    Persuasion,
    #[serde(rename = "M")]
    Mobilization,
}

impl Outcome {
    pub const ALL: [Outcome; 2] = [Outcome::Persuasion, Outcome::Mobilization];

    pub fn code(self) -> &'static str {
        match self {
            Outcome::Persuasion => "P",
            Outcome::Mobilization => "M",
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// Framing and deprivation effects, in reporting order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Effect {
    D,
    E,
    I,
    EI,
    DE,
    DI,
    DEI,
}

impl Effect {
    pub const ALL: [Effect; 7] = [Effect::D, Effect::E, Effect::I, Effect::EI, Effect::DE, Effect::DI, Effect::DEI];

    pub fn code(self) -> &'static str {
        match self {
            Effect::D => "D",
            Effect::E => "E",
            Effect::I => "I",
            Effect::EI => "EI",
            Effect::DE => "DE",
            Effect::DI => "DI",
            Effect::DEI => "DEI",
        }
    }

    /// Value of the regressor for a respondent.
    pub fn regressor(self, d: f64, e: f64, i: f64) -> f64 {
        match self {
            Effect::D => d,
            Effect::E => e,
            Effect::I => i,
            Effect::EI => e * i,
            Effect::DE => d * e,
            Effect::DI => d * i,
            Effect::DEI => d * e * i,
        }
    }
}

impl FromStr for Effect {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Effect::ALL
            .into_iter()
            .find(|e| e.code() == s)
            .ok_or_else(|| Error::Argument(format!("unknown effect {s:?}")))
    }
}

/// A non-intercept coefficient. Effects sort before countries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Effect(Effect),
    Country(Country),
}

impl Term {
    /// Column label used in designs and serialized tables, e.g. `C_at`
    /// or `lambda_EI`.
    pub fn name(self) -> String {
        match self {
            Term::Effect(e) => format!("lambda_{}", e.code()),
            Term::Country(c) => format!("C_{}", c.code()),
        }
    }

    /// Name qualified with the outcome, e.g. `C_at_P`.
    pub fn label(self, outcome: Outcome) -> String {
        format!("{}_{}", self.name(), outcome.code())
    }

    /// Short display form: `at`, `E×I`.
    pub fn display(self) -> String {
        match self {
            Term::Effect(e) => e.code().chars().map(String::from).collect::<Vec<_>>().join("×"),
            Term::Country(c) => c.code().to_string(),
        }
    }

    /// The 22 terms per outcome, effects first then countries in table order.
    pub fn standard() -> Vec<Term> {
        Effect::ALL
            .into_iter()
            .map(Term::Effect)
            .chain(Country::ALL.into_iter().map(Term::Country))
            .collect()
    }

    pub fn is_country(self) -> bool {
        matches!(self, Term::Country(_))
    }
}

impl Serialize for Term {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.name())
    }
}

impl<'de> Deserialize<'de> for Term {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(D::Error::custom)
    }
}

impl FromStr for Term {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Some(rest) = s.strip_prefix("lambda_") {
            rest.parse().map(Term::Effect)
        } else if let Some(rest) = s.strip_prefix("C_") {
            rest.parse().map(Term::Country)
        } else {
            Err(Error::Argument(format!("unknown term {s:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefficientEstimate {
    pub value: f64,
    pub se: f64,
}

impl CoefficientEstimate {
    pub fn new(value: f64, se: f64) -> Self {
        Self { value, se }
    }
}

/// Per-outcome intercepts and 22 terms each, serialized as a flat JSON
/// object keyed by labels such as `"C_at_P"`, `"lambda_EI_M"` and
/// `"intercept_P"`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CoefficientTable {
    entries: BTreeMap<(Outcome, Term), CoefficientEstimate>,
    intercepts: BTreeMap<Outcome, CoefficientEstimate>,
}

impl CoefficientTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, term: Term, outcome: Outcome, estimate: CoefficientEstimate) {
        self.entries.insert((outcome, term), estimate);
    }

    pub fn get(&self, term: Term, outcome: Outcome) -> Option<&CoefficientEstimate> {
        self.entries.get(&(outcome, term))
    }

    pub fn set_intercept(&mut self, outcome: Outcome, estimate: CoefficientEstimate) {
        self.intercepts.insert(outcome, estimate);
    }

    pub fn intercept(&self, outcome: Outcome) -> Option<&CoefficientEstimate> {
        self.intercepts.get(&outcome)
    }

    /// Non-intercept coefficients in reporting order: outcome P first, then
    /// effects before countries.
    pub fn iter(&self) -> impl Iterator<Item = (Outcome, Term, &CoefficientEstimate)> {
        self.entries.iter().map(|(&(o, t), e)| (o, t, e))
    }

    /// Number of non-intercept coefficients.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn keys(&self) -> BTreeSet<(Outcome, Term)> {
        self.entries.keys().copied().collect()
    }

    /// Sum of the country values for an outcome.
    pub fn country_sum(&self, outcome: Outcome) -> f64 {
        self.iter()
            .filter(|(o, t, _)| *o == outcome && t.is_country())
            .map(|(_, _, e)| e.value)
            .sum()
    }

    /// Checks every standard error is finite and non-negative.
    pub fn validate(&self) -> Result<()> {
        let bad: Vec<String> = self
            .iter()
            .filter(|(_, _, e)| !e.value.is_finite() || !e.se.is_finite() || e.se < 0.0)
            .map(|(o, t, e)| format!("{} = {} ({})", t.label(o), e.value, e.se))
            .collect();
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(bad))
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes")
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let table: Self = serde_json::from_str(json)?;
        table.validate()?;
        Ok(table)
    }
}

impl Serialize for CoefficientTable {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.entries.len() + self.intercepts.len()))?;
        for outcome in Outcome::ALL {
            if let Some(e) = self.intercepts.get(&outcome) {
                map.serialize_entry(&format!("intercept_{outcome}"), e)?;
            }
            for ((o, term), e) in &self.entries {
                if *o == outcome {
                    map.serialize_entry(&term.label(outcome), e)?;
                }
            }
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for CoefficientTable {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = BTreeMap::<String, CoefficientEstimate>::deserialize(deserializer)?;
        let mut table = CoefficientTable::new();
        for (label, estimate) in raw {
            let (name, outcome) = label
                .rsplit_once('_')
                .ok_or_else(|| D::Error::custom(format!("bad coefficient label {label:?}")))?;
            let outcome = match outcome {
                "P" => Outcome::Persuasion,
                "M" => Outcome::Mobilization,
                _ => return Err(D::Error::custom(format!("bad outcome in label {label:?}"))),
            };
            if name == "intercept" {
                table.set_intercept(outcome, estimate);
            } else {
                let term: Term = name.parse().map_err(D::Error::custom)?;
                table.insert(term, outcome, estimate);
            }
        }
        Ok(table)
    }
}

/// Fits models A, B and C for both outcomes and extracts the reported
/// coefficients.
pub fn analyze(scores: &[ScoreRecord]) -> Result<CoefficientTable> {
    let fitted = FittedModels::new(scores)?;
    let p = response_vector(scores, Outcome::Persuasion);
    let m = response_vector(scores, Outcome::Mobilization);
    Ok(fitted.table(&p, &m))
}

/// The three factored designs for one score set. Designs depend only on
/// the features, so they can be refitted to any response vector.
#[derive(Debug, Clone)]
pub struct FittedModels {
    models: Vec<(Design, OlsFactor)>,
}

impl FittedModels {
    pub fn new(scores: &[ScoreRecord]) -> Result<Self> {
        let models = ModelKind::ALL
            .into_iter()
            .map(|kind| {
                let design = build_design(scores, kind)?;
                let factor = OlsFactor::new(&design.matrix, &design.labels)?;
                Ok((design, factor))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { models })
    }

    pub fn table(&self, persuasion: &nalgebra::DVector<f64>, mobilization: &nalgebra::DVector<f64>) -> CoefficientTable {
        let mut table = CoefficientTable::new();
        for (outcome, y) in [(Outcome::Persuasion, persuasion), (Outcome::Mobilization, mobilization)] {
            let fits: Vec<(&Design, OlsFit)> = self.models.iter().map(|(d, f)| (d, f.fit(y))).collect();
            let fits: Vec<(&Design, &OlsFit)> = fits.iter().map(|(d, f)| (*d, f)).collect();
            extract_into(&mut table, &fits, outcome);
        }
        table
    }
}

/// Coefficients for one outcome from labelled fits of models A, B and C,
/// supplied in any order. Country terms, D, E and I come from A, the
/// two-way interactions from B and DEI from C. The omitted country is
/// minus the sum of the contrasts, with its standard error from the
/// contrast covariance.
pub fn extract_coefficients(fits: &[(&Design, &OlsFit)], outcome: Outcome) -> Result<CoefficientTable> {
    let kinds: BTreeSet<ModelKind> = fits.iter().map(|(d, _)| d.model).collect();
    if kinds.len() != fits.len() || kinds.len() != 3 {
        return Err(Error::Argument("need exactly one fit of each of models A, B and C".into()));
    }
    let mut table = CoefficientTable::new();
    extract_into(&mut table, fits, outcome);
    Ok(table)
}

fn extract_into(table: &mut CoefficientTable, fits: &[(&Design, &OlsFit)], outcome: Outcome) {
    let mut fits = fits.to_vec();
    fits.sort_by_key(|(d, _)| d.model);
    let (first, first_fit) = fits[0];

    table.set_intercept(outcome, first_fit.estimate(0));

    // Contrast columns 1..=L-1 carry the first L-1 countries.
    let levels = &first.countries;
    let contrasts: Vec<usize> = (1..levels.len()).collect();
    for (k, &col) in contrasts.iter().enumerate() {
        table.insert(Term::Country(levels[k]), outcome, first_fit.estimate(col));
    }
    let value = -contrasts.iter().map(|&c| first_fit.coefficients[c]).sum::<f64>();
    let var: f64 = contrasts
        .iter()
        .flat_map(|&a| contrasts.iter().map(move |&b| (a, b)))
        .map(|(a, b)| first_fit.covariance[(a, b)])
        .sum();
    table.insert(
        Term::Country(*levels.last().expect("at least two levels")),
        outcome,
        CoefficientEstimate::new(value, var.max(0.0).sqrt()),
    );

    for effect in Effect::ALL {
        let label = Term::Effect(effect).name();
        if let Some((design, fit)) = fits.iter().find(|(d, _)| d.labels.contains(&label)) {
            let col = design.labels.iter().position(|l| *l == label).expect("label present");
            table.insert(Term::Effect(effect), outcome, fit.estimate(col));
        }
    }
}
