//! Per-respondent persuasion and mobilization scores.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::country::{Country, Language};
use crate::error::{Error, Result};
use crate::gateway::ResponseRecord;
use crate::persona::Persona;
use crate::prompt::ProbeKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub persona_id: String,
    pub country: Country,
    #[serde(rename = "D")]
    pub d: f64,
    #[serde(rename = "E")]
    pub e: bool,
    #[serde(rename = "I")]
    pub i: bool,
    #[serde(rename = "P")]
    pub p: f64,
    #[serde(rename = "M")]
    pub m: f64,
    pub language_code: Language,
    pub masked: bool,
}

impl ScoreRecord {
    pub fn e_value(&self) -> f64 {
        f64::from(u8::from(self.e))
    }

    pub fn i_value(&self) -> f64 {
        f64::from(u8::from(self.i))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exclusion {
    pub persona_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct ScoreSet {
    /// In population order.
    pub scores: Vec<ScoreRecord>,
    pub excluded: Vec<Exclusion>,
}

/// Averages the two persuasion and three mobilization ratings of every
/// persona. Personas without exactly one record per probe, or whose
/// records disagree on language or masking, are excluded and reported.
pub fn compute_scores(records: &[ResponseRecord], personas: &[Persona]) -> ScoreSet {
    let mut by_persona: BTreeMap<&str, Vec<&ResponseRecord>> = BTreeMap::new();
    for r in records {
        by_persona.entry(r.persona_id.as_str()).or_default().push(r);
    }

    let mut set = ScoreSet::default();
    let exclude = |id: &str, reason: String| {
        log::debug!("excluding {id}: {reason}");
        Exclusion {
            persona_id: id.to_string(),
            reason,
        }
    };
    for persona in personas {
        let Some(rs) = by_persona.remove(persona.id.as_str()) else {
            set.excluded.push(exclude(&persona.id, "no responses".into()));
            continue;
        };
        let mut ratings: BTreeMap<ProbeKind, u8> = BTreeMap::new();
        let mut duplicate = None;
        for r in &rs {
            if ratings.insert(r.probe, r.rating).is_some() {
                duplicate = Some(r.probe);
            }
        }
        if let Some(probe) = duplicate {
            set.excluded.push(exclude(&persona.id, format!("duplicate response for {probe}")));
            continue;
        }
        let missing: Vec<&str> = ProbeKind::ALL
            .iter()
            .filter(|p| !ratings.contains_key(p))
            .map(|p| p.key())
            .collect();
        if !missing.is_empty() {
            set.excluded.push(exclude(&persona.id, format!("missing {}", missing.join(", "))));
            continue;
        }
        let (language, masked) = (rs[0].language_code, rs[0].masked);
        if rs.iter().any(|r| r.language_code != language || r.masked != masked) {
            set.excluded.push(exclude(&persona.id, "inconsistent prompting conditions".into()));
            continue;
        }
        let mean = |probes: &[ProbeKind]| {
            probes.iter().map(|p| f64::from(ratings[p])).sum::<f64>() / probes.len() as f64
        };
        set.scores.push(ScoreRecord {
            persona_id: persona.id.clone(),
            country: persona.country,
            d: persona.deprivation(),
            e: persona.framing.anti_elite,
            i: persona.framing.anti_immigrant,
            p: mean(&[ProbeKind::Persuasion1, ProbeKind::Persuasion2]),
            m: mean(&[ProbeKind::Mobilization1, ProbeKind::Mobilization2, ProbeKind::Mobilization3]),
            language_code: language,
            masked,
        });
    }
    for id in by_persona.keys() {
        set.excluded.push(exclude(id, "not in population".into()));
    }
    set
}

pub fn write_scores_csv<W: Write>(scores: &[ScoreRecord], out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for s in scores {
        writer.serialize(s).map_err(csv_error)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_scores_csv<R: Read>(input: R) -> Result<Vec<ScoreRecord>> {
    csv::Reader::from_reader(input)
        .deserialize()
        .map(|r| r.map_err(csv_error))
        .collect()
}

fn csv_error(e: csv::Error) -> Error {
    Error::Argument(format!("csv: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::persona::{FramingCondition, Gender};

    fn persona(id: &str) -> Persona {
        Persona {
            id: id.into(),
            country: Country::Italy,
            age: 30,
            gender: Gender::Female,
            education: 4,
            deprivation_ratings: vec![1, 2, 6],
            framing: FramingCondition::COMBINED,
        }
    }

    fn records(id: &str, ratings: [u8; 5]) -> Vec<ResponseRecord> {
        ProbeKind::ALL
            .into_iter()
            .zip(ratings)
            .map(|(probe, rating)| ResponseRecord {
                persona_id: id.into(),
                probe,
                rating,
                language_code: Language::English,
                masked: false,
                backend: "test".into(),
                raw: rating.to_string(),
            })
            .collect()
    }

    fn score(ratings: [u8; 5]) -> (f64, f64) {
        let set = compute_scores(&records("it-00001", ratings), &[persona("it-00001")]);
        (set.scores[0].p, set.scores[0].m)
    }

    #[test]
    fn averages() {
        assert_eq!(score([3, 5, 2, 4, 6]), (4.0, 4.0));
        assert_eq!(score([7, 7, 1, 1, 1]), (7.0, 1.0));
        assert_eq!(score([1, 2, 3, 4, 5]), (1.5, 4.0));
    }

    #[test]
    fn carries_features() {
        let set = compute_scores(&records("it-00001", [4; 5]), &[persona("it-00001")]);
        let s = &set.scores[0];
        assert_eq!(s.d, 3.0);
        assert!(s.e && s.i);
        assert_eq!(s.country, Country::Italy);
    }

    #[test]
    fn incomplete_personas_are_excluded() {
        let mut rs = records("it-00001", [4; 5]);
        rs.pop();
        rs.extend(records("it-00002", [4; 5]));
        rs.extend(records("xx-00009", [4; 5]));
        let set = compute_scores(&rs, &[persona("it-00001"), persona("it-00002"), persona("it-00003")]);
        assert_eq!(set.scores.len(), 1);
        assert_eq!(set.scores[0].persona_id, "it-00002");
        let ids: Vec<&str> = set.excluded.iter().map(|e| e.persona_id.as_str()).collect();
        assert_eq!(ids, ["it-00001", "it-00003", "xx-00009"]);
        assert!(set.excluded[0].reason.contains("mobilization_3"));
    }

    #[test]
    fn duplicates_are_excluded() {
        let mut rs = records("it-00001", [4; 5]);
        rs.push(rs[0].clone());
        let set = compute_scores(&rs, &[persona("it-00001")]);
        assert!(set.scores.is_empty());
        assert!(set.excluded[0].reason.contains("duplicate"));
    }

    #[test]
    fn csv_round_trip() {
        let set = compute_scores(&records("it-00001", [1, 2, 3, 4, 6]), &[persona("it-00001")]);
        let mut buf = Vec::new();
        write_scores_csv(&set.scores, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("persona_id,country,D,E,I,P,M,language_code,masked"));
        assert_eq!(read_scores_csv(buf.as_slice()).unwrap(), set.scores);
    }
}
