//! Bundled reference coefficients.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::stats::{sign_agreement, sign_agreement_bounds, CoefficientEstimate, CoefficientTable, Outcome, Term};

const HUMAN_JSON: &str = include_str!("../../data/reference/human_reference.json");
const HUMAN_SHA256: &str = "063e58de64a766386e2058eb0bbc80d2db5086cd57f6eb19e6621ebc380ebbbe";
const GPT35_JSON: &str = include_str!("../../data/reference/gpt35_reference.json");
const GPT35_SHA256: &str = "68481984727fac0c393c4caf4d8e5307ad5576ba778d8bfe5c8bf666389d45b6";

/// Tolerated drift of the country terms' sum away from zero in a table
/// whose values were rounded before publication.
pub const ROUNDED_COUNTRY_SUM_TOLERANCE: f64 = 0.01;

/// A coefficient table together with how precisely it was recorded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanReference {
    pub source: String,
    /// Values and standard errors were rounded to `decimals` places at the
    /// source, so each is only known to within half a unit of the last
    /// decimal.
    pub rounded_source: bool,
    pub decimals: u32,
    pub coefficients: CoefficientTable,
}

impl HumanReference {
    pub fn table(&self) -> &CoefficientTable {
        &self.coefficients
    }

    pub fn estimate(&self, term: Term, outcome: Outcome) -> Option<CoefficientEstimate> {
        self.coefficients.get(term, outcome).copied()
    }

    /// Half a unit in the last recorded decimal, zero for exact sources.
    pub fn half_unit(&self) -> f64 {
        if self.rounded_source {
            0.5 * 10f64.powi(-(self.decimals as i32))
        } else {
            0.0
        }
    }

    /// Range of agreement values consistent with the rounding of both
    /// tables, for one coefficient.
    pub fn agreement_interval(&self, other: &HumanReference, term: Term, outcome: Outcome) -> Option<(f64, f64)> {
        let a = self.coefficients.get(term, outcome)?;
        let b = other.coefficients.get(term, outcome)?;
        let half_unit = self.half_unit().max(other.half_unit());
        Some(if half_unit > 0.0 {
            sign_agreement_bounds(a, b, half_unit)
        } else {
            let s = sign_agreement(a, b);
            (s, s)
        })
    }

    /// Wraps an exactly known table.
    pub fn exact(source: impl Into<String>, coefficients: CoefficientTable) -> Self {
        Self {
            source: source.into(),
            rounded_source: false,
            decimals: 0,
            coefficients,
        }
    }

    fn validate(&self) -> Result<()> {
        self.coefficients.validate()?;
        let expected = Term::standard().len() * 2;
        if self.coefficients.len() != expected {
            return Err(Error::Integrity(format!(
                "reference holds {} coefficients, expected {expected}",
                self.coefficients.len()
            )));
        }
        let tolerance = if self.rounded_source { ROUNDED_COUNTRY_SUM_TOLERANCE } else { 1e-9 };
        for outcome in Outcome::ALL {
            let sum = self.coefficients.country_sum(outcome);
            if sum.abs() > tolerance {
                return Err(Error::Integrity(format!("{outcome} country terms sum to {sum}")));
            }
        }
        Ok(())
    }
}

/// Hex SHA-256 of `bytes` compared with `expected`.
pub fn verify_checksum(name: &str, bytes: &[u8], expected: &str) -> Result<()> {
    let actual = hex::encode(Sha256::digest(bytes));
    if actual == expected {
        Ok(())
    } else {
        Err(Error::Integrity(format!("{name}: checksum {actual} does not match {expected}")))
    }
}

/// Parses a reference document after checking its checksum.
pub fn parse_reference(name: &str, json: &str, sha256: &str) -> Result<HumanReference> {
    verify_checksum(name, json.as_bytes(), sha256)?;
    let reference: HumanReference = serde_json::from_str(json)?;
    reference.validate()?;
    Ok(reference)
}

/// Human survey coefficients, all 44, as printed.
pub fn load_human_reference() -> Result<HumanReference> {
    parse_reference("human_reference.json", HUMAN_JSON, HUMAN_SHA256)
}

/// Coefficients of the published GPT-3.5 English unmasked run.
pub fn load_published_model_table() -> Result<HumanReference> {
    parse_reference("gpt35_reference.json", GPT35_JSON, GPT35_SHA256)
}
