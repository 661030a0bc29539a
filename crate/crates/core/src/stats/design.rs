//! Design matrices for the nested models.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};

use super::{Effect, Outcome, ScoreRecord, Term};
use crate::country::Country;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
pub enum ModelKind {
    A,
    B,
    C,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::A, ModelKind::B, ModelKind::C];

    /// Framing and deprivation regressors included in the model.
    pub fn effects(self) -> &'static [Effect] {
        match self {
            ModelKind::A => &Effect::ALL[..3],
            ModelKind::B => &Effect::ALL[..6],
            ModelKind::C => &Effect::ALL,
        }
    }
}

/// A model matrix with its column labels. Column 0 is the intercept,
/// columns `1..L` are sum-to-zero contrasts for the first `L-1` of the
/// `L` countries present (the last one is coded -1 throughout), then
/// the effect columns.
#[derive(Debug, Clone)]
pub struct Design {
    pub model: ModelKind,
    pub matrix: DMatrix<f64>,
    pub labels: Vec<String>,
    /// Countries present, in table order.
    pub countries: Vec<Country>,
}

pub fn build_design(scores: &[ScoreRecord], model: ModelKind) -> Result<Design> {
    let countries: Vec<Country> = scores
        .iter()
        .map(|s| s.country)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if countries.len() < 2 {
        return Err(Error::Argument(format!(
            "need at least two countries for country effects, found {}",
            countries.len()
        )));
    }
    let contrasts = countries.len() - 1;
    let effects = model.effects();

    let mut labels = vec!["intercept".to_string()];
    labels.extend(countries[..contrasts].iter().map(|&c| Term::Country(c).name()));
    labels.extend(effects.iter().map(|&e| Term::Effect(e).name()));

    let cols = labels.len();
    let mut matrix = DMatrix::zeros(scores.len(), cols);
    for (row, s) in scores.iter().enumerate() {
        matrix[(row, 0)] = 1.0;
        let level = countries.binary_search(&s.country).expect("country collected above");
        if level == contrasts {
            for k in 0..contrasts {
                matrix[(row, 1 + k)] = -1.0;
            }
        } else {
            matrix[(row, 1 + level)] = 1.0;
        }
        for (k, effect) in effects.iter().enumerate() {
            matrix[(row, 1 + contrasts + k)] = effect.regressor(s.d, s.e_value(), s.i_value());
        }
    }
    Ok(Design {
        model,
        matrix,
        labels,
        countries,
    })
}

pub fn response_vector(scores: &[ScoreRecord], outcome: Outcome) -> DVector<f64> {
    DVector::from_iterator(
        scores.len(),
        scores.iter().map(|s| match outcome {
            Outcome::Persuasion => s.p,
            Outcome::Mobilization => s.m,
        }),
    )
}

/// Matrix, column labels and response for one model and outcome.
pub fn build_design_matrix(
    scores: &[ScoreRecord],
    model: ModelKind,
    outcome: Outcome,
) -> Result<(DMatrix<f64>, Vec<String>, DVector<f64>)> {
    let design = build_design(scores, model)?;
    Ok((design.matrix, design.labels, response_vector(scores, outcome)))
}
