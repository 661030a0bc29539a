//! Sign agreement between two coefficient tables.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{normal_cdf, CoefficientEstimate, CoefficientTable, Outcome, Term};
use crate::error::{Error, Result};

/// Pooled rates with a permutation p-value below this are significant.
pub const SIGNIFICANCE_LEVEL: f64 = 0.05;

/// Probability that an estimate is positive under a normal posterior; a
/// zero standard error is a point mass, and a point mass at zero is split
/// evenly.
fn prob_positive(e: &CoefficientEstimate) -> f64 {
    if e.se > 0.0 {
        normal_cdf(e.value / e.se)
    } else if e.value > 0.0 {
        1.0
    } else if e.value < 0.0 {
        0.0
    } else {
        0.5
    }
}

/// Probability that two estimates share a sign, each treated as a normal
/// posterior centred on its value with its standard error as sd.
pub fn sign_agreement(a: &CoefficientEstimate, b: &CoefficientEstimate) -> f64 {
    let pa = prob_positive(a);
    let pb = prob_positive(b);
    pa * pb + (1.0 - pa) * (1.0 - pb)
}

/// Range of [`sign_agreement`] when every value and standard error is only
/// known to within `half_unit` (e.g. `0.0005` for three printed decimals).
/// The agreement is monotone in each coordinate, so the corners of the box
/// bound it.
pub fn sign_agreement_bounds(a: &CoefficientEstimate, b: &CoefficientEstimate, half_unit: f64) -> (f64, f64) {
    let corners = |e: &CoefficientEstimate| {
        [(-1.0, -1.0), (-1.0, 1.0), (1.0, -1.0), (1.0, 1.0)]
            .map(|(dv, ds)| CoefficientEstimate::new(e.value + dv * half_unit, (e.se + ds * half_unit).max(0.0)))
    };
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for ca in corners(a) {
        for cb in corners(b) {
            let s = sign_agreement(&ca, &cb);
            lo = lo.min(s);
            hi = hi.max(s);
        }
    }
    (lo, hi)
}

/// Arithmetic mean of individual agreements.
pub fn pool_agreements(probabilities: &[f64]) -> Result<f64> {
    if probabilities.is_empty() {
        return Err(Error::Argument("cannot pool an empty set of agreements".into()));
    }
    if let Some(bad) = probabilities.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::Argument(format!("agreement {bad} outside [0, 1]")));
    }
    Ok(probabilities.iter().sum::<f64>() / probabilities.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PoolGroup {
    /// Deprivation and framing terms, seven per outcome.
    Framing,
    /// Country terms, fifteen per outcome.
    Country,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PoolScope {
    Only(Outcome),
    Both,
}

/// A subset of coefficients whose agreements are averaged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PoolSelector {
    pub group: PoolGroup,
    pub scope: PoolScope,
}

impl PoolSelector {
    pub const fn new(group: PoolGroup, scope: PoolScope) -> Self {
        Self { group, scope }
    }

    pub const FRAMING: Self = Self::new(PoolGroup::Framing, PoolScope::Both);
    pub const COUNTRY: Self = Self::new(PoolGroup::Country, PoolScope::Both);
    pub const ALL_TERMS: Self = Self::new(PoolGroup::All, PoolScope::Both);

    pub const ALL: [Self; 9] = {
        const P: PoolScope = PoolScope::Only(Outcome::Persuasion);
        const M: PoolScope = PoolScope::Only(Outcome::Mobilization);
        const B: PoolScope = PoolScope::Both;
        [
            Self::new(PoolGroup::Framing, P),
            Self::new(PoolGroup::Framing, M),
            Self::new(PoolGroup::Framing, B),
            Self::new(PoolGroup::Country, P),
            Self::new(PoolGroup::Country, M),
            Self::new(PoolGroup::Country, B),
            Self::new(PoolGroup::All, P),
            Self::new(PoolGroup::All, M),
            Self::new(PoolGroup::All, B),
        ]
    };

    pub fn contains(self, outcome: Outcome, term: Term) -> bool {
        let group = match self.group {
            PoolGroup::Framing => !term.is_country(),
            PoolGroup::Country => term.is_country(),
            PoolGroup::All => true,
        };
        let scope = match self.scope {
            PoolScope::Only(o) => o == outcome,
            PoolScope::Both => true,
        };
        group && scope
    }

    /// Stable identifier such as `framing_P` or `country_both`.
    pub fn key(self) -> String {
        let group = match self.group {
            PoolGroup::Framing => "framing",
            PoolGroup::Country => "country",
            PoolGroup::All => "all",
        };
        let scope = match self.scope {
            PoolScope::Only(o) => o.code(),
            PoolScope::Both => "both",
        };
        format!("{group}_{scope}")
    }
}

impl fmt::Display for PoolSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.key())
    }
}

impl FromStr for PoolSelector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PoolSelector::ALL
            .into_iter()
            .find(|p| p.key() == s)
            .ok_or_else(|| Error::Argument(format!("unknown pooled metric {s:?}")))
    }
}

impl Serialize for PoolSelector {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.key())
    }
}

impl<'de> Deserialize<'de> for PoolSelector {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementEntry {
    pub outcome: Outcome,
    pub term: Term,
    pub reference: CoefficientEstimate,
    pub model: CoefficientEstimate,
    pub agreement: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PooledRate {
    pub rate: f64,
    pub members: usize,
    #[serde(default)]
    pub p_value: Option<f64>,
}

impl PooledRate {
    pub fn significant(&self) -> bool {
        self.p_value.is_some_and(|p| p < SIGNIFICANCE_LEVEL)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignAgreementReport {
    pub entries: Vec<AgreementEntry>,
    pub pooled: BTreeMap<PoolSelector, PooledRate>,
}

impl SignAgreementReport {
    pub fn agreement(&self, term: Term, outcome: Outcome) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| e.term == term && e.outcome == outcome)
            .map(|e| e.agreement)
    }

    pub fn rate(&self, selector: PoolSelector) -> Option<f64> {
        self.pooled.get(&selector).map(|r| r.rate)
    }

    pub fn set_p_values(&mut self, p_values: &BTreeMap<PoolSelector, f64>) {
        for (selector, p) in p_values {
            if let Some(rate) = self.pooled.get_mut(selector) {
                rate.p_value = Some(*p);
            }
        }
    }

    pub fn from_json(json: &str) -> Result<Self> {
        Ok(serde_json::from_str(json)?)
    }
}

/// Per-coefficient agreements and every pooled rate with members. The two
/// tables must cover the same coefficients.
pub fn compare_tables(reference: &CoefficientTable, model: &CoefficientTable) -> Result<SignAgreementReport> {
    let (rk, mk) = (reference.keys(), model.keys());
    if rk != mk {
        let diff: Vec<String> = rk
            .symmetric_difference(&mk)
            .map(|(o, t)| {
                let side = if rk.contains(&(*o, *t)) { "reference only" } else { "model only" };
                format!("{} ({side})", t.label(*o))
            })
            .collect();
        return Err(Error::Structural(format!("coefficient sets differ: {}", diff.join(", "))));
    }
    let entries: Vec<AgreementEntry> = reference
        .iter()
        .map(|(outcome, term, r)| {
            let m = model.get(term, outcome).expect("key sets equal");
            AgreementEntry {
                outcome,
                term,
                reference: *r,
                model: *m,
                agreement: sign_agreement(r, m),
            }
        })
        .collect();
    let mut pooled = BTreeMap::new();
    for selector in PoolSelector::ALL {
        let members: Vec<f64> = entries
            .iter()
            .filter(|e| selector.contains(e.outcome, e.term))
            .map(|e| e.agreement)
            .collect();
        if !members.is_empty() {
            pooled.insert(
                selector,
                PooledRate {
                    rate: pool_agreements(&members)?,
                    members: members.len(),
                    p_value: None,
                },
            );
        }
    }
    Ok(SignAgreementReport { entries, pooled })
}

/// Pooled rates only, skipping the per-entry bookkeeping.
pub(crate) fn pooled_rates(reference: &CoefficientTable, model: &CoefficientTable, selectors: &[PoolSelector]) -> Vec<f64> {
    selectors
        .iter()
        .map(|sel| {
            let (sum, n) = reference
                .iter()
                .filter(|(o, t, _)| sel.contains(*o, *t))
                .filter_map(|(o, t, r)| model.get(t, o).map(|m| sign_agreement(r, m)))
                .fold((0.0, 0usize), |(s, n), a| (s + a, n + 1));
            if n == 0 {
                f64::NAN
            } else {
                sum / n as f64
            }
        })
        .collect()
}
