//! Permutation significance of pooled agreement rates.
//!
//! Each replicate shuffles the (P, M) score pairs across respondents while
//! country, D, E and I stay in place, refits every model and recomputes the
//! pooled rates. The designs never change under this shuffle, so they are
//! factored once and only the response side is recomputed.

use std::collections::BTreeMap;

use nalgebra::DVector;
use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::agreement::pooled_rates;
use super::{response_vector, CoefficientTable, FittedModels, Outcome, PoolSelector, ScoreRecord};
use crate::error::{Error, Result};
use crate::seed;

pub const MIN_PERMUTATIONS: usize = 99;

/// Shuffled rates within this distance of the observed rate count as ties.
const TIE_TOLERANCE: f64 = 1e-12;

/// Add-one permutation p-values, `(1 + #{shuffled >= observed}) / (1 + n_perm)`,
/// for several pooled rates from the same set of shuffles.
pub fn permutation_test(
    scores: &[ScoreRecord],
    reference: &CoefficientTable,
    selectors: &[PoolSelector],
    n_perm: usize,
    seed: u64,
) -> Result<BTreeMap<PoolSelector, f64>> {
    if n_perm < MIN_PERMUTATIONS {
        return Err(Error::Argument(format!(
            "n_perm must be at least {MIN_PERMUTATIONS}, got {n_perm}"
        )));
    }
    let fitted = FittedModels::new(scores)?;
    let p = response_vector(scores, Outcome::Persuasion);
    let m = response_vector(scores, Outcome::Mobilization);
    let observed = pooled_rates(reference, &fitted.table(&p, &m), selectors);
    if let Some((sel, _)) = selectors.iter().zip(&observed).find(|(_, r)| r.is_nan()) {
        return Err(Error::Argument(format!("no coefficients shared by both tables for {sel}")));
    }

    let n = scores.len();
    let shuffled: Vec<Vec<f64>> = (0..n_perm as u64)
        .into_par_iter()
        .map(|k| {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut seed::rng(seed, "permutation", k));
            let ps = DVector::from_iterator(n, order.iter().map(|&i| p[i]));
            let ms = DVector::from_iterator(n, order.iter().map(|&i| m[i]));
            pooled_rates(reference, &fitted.table(&ps, &ms), selectors)
        })
        .collect();

    Ok(selectors
        .iter()
        .enumerate()
        .map(|(s, &sel)| {
            let at_least = shuffled.iter().filter(|r| r[s] >= observed[s] - TIE_TOLERANCE).count();
            (sel, (1 + at_least) as f64 / (1 + n_perm) as f64)
        })
        .collect())
}

/// p-value for a single pooled rate.
pub fn permutation_significance(
    scores: &[ScoreRecord],
    reference: &CoefficientTable,
    selector: PoolSelector,
    n_perm: usize,
    seed: u64,
) -> Result<f64> {
    Ok(permutation_test(scores, reference, &[selector], n_perm, seed)?[&selector])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::country::{Country, Language};
    use rand::Rng;

    fn scores(seed: u64, n: usize, signal: f64) -> Vec<ScoreRecord> {
        let mut rng = seed::rng(seed, "test-scores", 0);
        (0..n)
            .map(|k| {
                let country = Country::ALL[k % 4];
                let d: f64 = rng.random_range(1.0..7.0);
                let e = rng.random_bool(0.5);
                let i = rng.random_bool(0.5);
                let c = if country == Country::Austria { signal } else { -signal / 3.0 };
                ScoreRecord {
                    persona_id: format!("{k}"),
                    country,
                    d,
                    e,
                    i,
                    p: 3.0 + c + rng.random_range(-1.0..1.0),
                    m: 3.0 - c + rng.random_range(-1.0..1.0),
                    language_code: Language::English,
                    masked: false,
                }
            })
            .collect()
    }

    #[test]
    fn too_few_permutations() {
        let s = scores(1, 80, 0.0);
        let r = permutation_significance(&s, &CoefficientTable::new(), PoolSelector::ALL_TERMS, 50, 0);
        assert!(matches!(r, Err(Error::Argument(_))));
    }

    #[test]
    fn strong_signal_is_significant() {
        let s = scores(2, 200, 1.5);
        let reference = crate::stats::analyze(&s).unwrap();
        let p = permutation_significance(&s, &reference, PoolSelector::COUNTRY, 99, 5).unwrap();
        assert_eq!(p, 0.01);
    }

    #[test]
    fn deterministic() {
        let s = scores(3, 120, 0.0);
        let reference = crate::stats::analyze(&scores(4, 120, 0.5)).unwrap();
        let a = permutation_test(&s, &reference, &PoolSelector::ALL, 99, 11).unwrap();
        let b = permutation_test(&s, &reference, &PoolSelector::ALL, 99, 11).unwrap();
        assert_eq!(a, b);
        assert!(a.values().all(|p| (0.01..=1.0).contains(p)));
    }
}
