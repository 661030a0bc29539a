//! The three experiments, end to end.
//!
//! * Experiment 1 prompts everyone in English, once with nationality
//!   masked and once unmasked.
//! * Experiment 2 prompts everyone in each of the twelve languages in turn.
//! * Experiment 3 compares native-language prompting with two shuffled
//!   controls, repeated with fresh seeds, alongside an English baseline.

mod plan;
mod run;

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

pub use plan::{
    default_country_languages, language_counts, resolve_language, resolve_languages, shuffle_country_languages,
    shuffle_full, LanguageMode, LanguagePlan,
};
pub use run::{
    analyze_responses, write_analysis_files, Analysis, Condition, ConditionRun, ExperimentContext, ExperimentSettings, ReportDocument, RunManifest, COEFFICIENTS_FILE,
    MANIFEST_FILE, REPORT_FILE, REPORT_SCHEMA_VERSION, RESPONSES_FILE, SCORES_FILE,
};

use crate::country::Language;
use crate::error::{Error, Result};
use crate::persona::{Persona, PopulationSpec};
use crate::seed;
use crate::stats::{PoolSelector, SIGNIFICANCE_LEVEL};

pub const SUMMARY_FILE: &str = "summary.json";

/// Population and repetition presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    /// About a tenth of the study population and ten repetitions.
    Desk,
    /// The study's 7,286 participants and 100 repetitions.
    Full,
}

impl Scale {
    pub fn population(self, seed: u64) -> PopulationSpec {
        match self {
            Scale::Desk => PopulationSpec::scaled(0.1, seed),
            Scale::Full => PopulationSpec {
                seed,
                ..PopulationSpec::default()
            },
        }
    }

    pub fn reps(self) -> usize {
        match self {
            Scale::Desk => 10,
            Scale::Full => 100,
        }
    }
}

/// One row of the masked/unmasked comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskingRow {
    pub metric: PoolSelector,
    pub masked: f64,
    pub masked_p: Option<f64>,
    pub unmasked: f64,
    pub unmasked_p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment1Result {
    pub masked: ReportDocument,
    pub unmasked: ReportDocument,
}

impl Experiment1Result {
    /// Country terms, then framing and deprivation terms, both outcomes
    /// pooled.
    pub fn rows(&self) -> Vec<MaskingRow> {
        [PoolSelector::COUNTRY, PoolSelector::FRAMING]
            .into_iter()
            .map(|metric| MaskingRow {
                metric,
                masked: self.masked.rate(metric),
                masked_p: self.masked.p_value(metric),
                unmasked: self.unmasked.rate(metric),
                unmasked_p: self.unmasked.p_value(metric),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment2Result {
    /// One report per language, in catalog order.
    pub runs: Vec<ReportDocument>,
}

impl Experiment2Result {
    pub fn language(&self, language: Language) -> Option<&ReportDocument> {
        self.runs
            .iter()
            .find(|r| r.language_mode == LanguageMode::Monolingual { language })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    /// Sample standard deviation; zero for a single repetition.
    pub sd: f64,
    pub values: Vec<f64>,
    pub p_values: Vec<f64>,
    /// Median per-repetition p-value below the significance level, i.e.
    /// most repetitions individually significant.
    pub significant: bool,
}

impl MetricSummary {
    pub fn from_values(values: Vec<f64>, p_values: Vec<f64>) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        let significant = !p_values.is_empty() && median(&p_values) < SIGNIFICANCE_LEVEL;
        Self {
            mean,
            sd,
            values,
            p_values,
            significant,
        }
    }
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        (v[mid - 1] + v[mid]) / 2.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionSummary {
    pub mode: String,
    pub reps: usize,
    /// Set when `reps == 1`, where the spread is undefined.
    pub degenerate: bool,
    pub metrics: BTreeMap<PoolSelector, MetricSummary>,
    /// Participants per language, one map per repetition.
    pub language_counts: Vec<BTreeMap<Language, usize>>,
}

impl RepetitionSummary {
    pub fn from_runs(mode: &str, runs: &[ConditionRun]) -> Result<Self> {
        if runs.is_empty() {
            return Err(Error::Argument("no repetitions to summarize".into()));
        }
        let metrics = PoolSelector::ALL
            .into_iter()
            .map(|sel| {
                let values = runs.iter().map(|r| r.document.rate(sel)).collect();
                let p_values = runs.iter().filter_map(|r| r.document.p_value(sel)).collect();
                (sel, MetricSummary::from_values(values, p_values))
            })
            .collect();
        Ok(Self {
            mode: mode.into(),
            reps: runs.len(),
            degenerate: runs.len() == 1,
            metrics,
            language_counts: runs.iter().map(|r| r.language_counts.clone()).collect(),
        })
    }

    pub fn metric(&self, selector: PoolSelector) -> &MetricSummary {
        &self.metrics[&selector]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment3Result {
    pub monolingual: ReportDocument,
    pub native: ReportDocument,
    pub country_shuffled: RepetitionSummary,
    pub full_shuffled: RepetitionSummary,
}

fn write_summary<T: Serialize>(ctx: &ExperimentContext<'_>, experiment: &str, value: &T) -> Result<Option<PathBuf>> {
    match &ctx.settings.out_dir {
        Some(root) => {
            let dir = root.join(experiment);
            std::fs::create_dir_all(&dir)?;
            let path = dir.join(SUMMARY_FILE);
            run::write_json(&path, value)?;
            Ok(Some(path))
        }
        None => Ok(None),
    }
}

/// English prompting with nationality masked, then unmasked.
pub fn run_experiment1(population: &[Persona], ctx: &ExperimentContext<'_>) -> Result<Experiment1Result> {
    run::check_catalogs([Language::English], ctx.catalogs)?;
    let plan = LanguagePlan::monolingual(Language::English);
    let masked = ctx.run_condition(population, &Condition::new("exp1", "masked", plan.clone(), true))?;
    let unmasked = ctx.run_condition(population, &Condition::new("exp1", "unmasked", plan, false))?;
    let result = Experiment1Result {
        masked: masked.document,
        unmasked: unmasked.document,
    };
    write_summary(ctx, "exp1", &result)?;
    Ok(result)
}

/// One unmasked monolingual run per language.
pub fn run_experiment2(population: &[Persona], ctx: &ExperimentContext<'_>) -> Result<Experiment2Result> {
    run::check_catalogs(Language::ALL, ctx.catalogs)?;
    let runs = Language::ALL
        .into_iter()
        .map(|language| {
            let name = language.code().to_lowercase();
            ctx.run_condition(population, &Condition::new("exp2", name, LanguagePlan::monolingual(language), false))
                .map(|r| r.document)
        })
        .collect::<Result<Vec<_>>>()?;
    let result = Experiment2Result { runs };
    write_summary(ctx, "exp2", &result)?;
    Ok(result)
}

/// Native-language prompting once, each shuffled control `reps` times, and
/// an English baseline, all unmasked.
pub fn run_experiment3(population: &[Persona], ctx: &ExperimentContext<'_>) -> Result<Experiment3Result> {
    let reps = ctx.settings.reps;
    if reps == 0 {
        return Err(Error::Argument("reps must be at least 1".into()));
    }
    run::check_catalogs(Language::ALL, ctx.catalogs)?;
    let monolingual = ctx.run_condition(
        population,
        &Condition::new("exp3", "monolingual_en", LanguagePlan::monolingual(Language::English), false),
    )?;
    let native = ctx.run_condition(
        population,
        &Condition::new("exp3", "native", LanguagePlan::new(LanguageMode::Native), false),
    )?;
    let repeat = |mode_name: &str, mode: fn(u64) -> LanguageMode| -> Result<RepetitionSummary> {
        let runs = (0..reps as u64)
            .map(|rep| {
                let seed = seed::derive(ctx.settings.seed, mode_name, rep);
                let name = format!("{mode_name}/rep-{rep:03}");
                ctx.run_condition(population, &Condition::new("exp3", name, LanguagePlan::new(mode(seed)), false))
            })
            .collect::<Result<Vec<_>>>()?;
        RepetitionSummary::from_runs(mode_name, &runs)
    };
    let country_shuffled = repeat("country_shuffled", |seed| LanguageMode::CountryShuffled { seed })?;
    let full_shuffled = repeat("full_shuffled", |seed| LanguageMode::FullShuffled { seed })?;
    let result = Experiment3Result {
        monolingual: monolingual.document,
        native: native.document,
        country_shuffled,
        full_shuffled,
    };
    write_summary(ctx, "exp3", &result)?;
    Ok(result)
}
