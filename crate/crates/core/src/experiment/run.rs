//! One end-to-end pipeline run: plan, dispatch, score, fit, compare.

use std::collections::BTreeMap;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::plan::{language_counts, resolve_languages, LanguageMode, LanguagePlan};
use crate::country::Language;
use crate::error::{Error, Result};
use crate::gateway::{save_records, CollectionPlan, Gateway, ProbeFailure, PromptAssignment, ResponseRecord};
use crate::persona::{population_digest, Persona};
use crate::prompt::CatalogSet;
use crate::seed;
use crate::stats::{
    analyze, compare_tables, compute_scores, permutation_test, write_scores_csv, CoefficientTable, Exclusion,
    PoolSelector, ScoreRecord, ScoreSet, SignAgreementReport,
};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const RESPONSES_FILE: &str = "responses.jsonl";
pub const SCORES_FILE: &str = "scores.csv";
pub const COEFFICIENTS_FILE: &str = "coefficients.json";
pub const REPORT_FILE: &str = "report.json";

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSettings {
    /// Root of every permutation and shuffle seed.
    pub seed: u64,
    pub n_perm: usize,
    /// Repetitions of each shuffled mode.
    pub reps: usize,
    /// Run directories are created under this path when set.
    pub out_dir: Option<PathBuf>,
}

impl Default for ExperimentSettings {
    fn default() -> Self {
        Self {
            seed: 0,
            n_perm: 999,
            reps: 100,
            out_dir: None,
        }
    }
}

/// Everything a run needs besides the population.
pub struct ExperimentContext<'a> {
    pub gateway: &'a Gateway,
    pub catalogs: &'a CatalogSet,
    /// Coefficients the model's are compared with.
    pub reference: &'a CoefficientTable,
    pub settings: ExperimentSettings,
}

/// Provenance of one run, written before any prompt is sent and
/// completed afterwards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub experiment: String,
    pub condition: String,
    pub population_digest: String,
    pub population_size: usize,
    pub plan: LanguagePlan,
    pub masked: bool,
    pub language_counts: BTreeMap<Language, usize>,
    pub backend: String,
    pub seeds: BTreeMap<String, u64>,
    pub n_perm: usize,
    pub started_at: String,
    pub finished_at: Option<String>,
    /// Files written next to the manifest.
    pub outputs: Vec<String>,
    pub responses: Option<usize>,
    pub failed_probes: Option<usize>,
    pub excluded_personas: Option<usize>,
}

/// Contents of `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub schema_version: u32,
    pub experiment: String,
    pub condition: String,
    pub language_mode: LanguageMode,
    pub masked: bool,
    pub scored: usize,
    pub excluded: usize,
    pub failed_probes: usize,
    pub report: SignAgreementReport,
}

impl ReportDocument {
    pub fn rate(&self, selector: PoolSelector) -> f64 {
        self.report.rate(selector).unwrap_or(f64::NAN)
    }

    pub fn p_value(&self, selector: PoolSelector) -> Option<f64> {
        self.report.pooled.get(&selector).and_then(|r| r.p_value)
    }

    pub fn significant(&self, selector: PoolSelector) -> bool {
        self.report.pooled.get(&selector).is_some_and(|r| r.significant())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let doc: Self = serde_json::from_str(&fs::read_to_string(path.as_ref())?)?;
        if doc.schema_version != REPORT_SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "{}: unsupported report schema version {}",
                path.as_ref().display(),
                doc.schema_version
            )));
        }
        Ok(doc)
    }
}

#[derive(Debug, Clone)]
pub struct ConditionRun {
    pub document: ReportDocument,
    pub table: CoefficientTable,
    pub language_counts: BTreeMap<Language, usize>,
    pub excluded: Vec<Exclusion>,
    pub failures: Vec<ProbeFailure>,
    pub dir: Option<PathBuf>,
}

/// A single planned run.
#[derive(Debug, Clone)]
pub struct Condition {
    pub experiment: String,
    /// Relative run directory, e.g. `masked` or `country_shuffled/rep-003`.
    pub name: String,
    pub plan: LanguagePlan,
    pub masked: bool,
}

impl Condition {
    pub fn new(experiment: &str, name: impl Into<String>, plan: LanguagePlan, masked: bool) -> Self {
        Self {
            experiment: experiment.into(),
            name: name.into(),
            plan,
            masked,
        }
    }
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// Languages needed by `plan` must all have catalogs.
pub(crate) fn check_catalogs(languages: impl IntoIterator<Item = Language>, catalogs: &CatalogSet) -> Result<()> {
    let missing: std::collections::BTreeSet<Language> =
        languages.into_iter().filter(|l| !catalogs.contains_key(l)).collect();
    if missing.is_empty() {
        Ok(())
    } else {
        let codes: Vec<&str> = missing.iter().map(|l| l.code()).collect();
        Err(Error::Config(format!("no catalog loaded for {}", codes.join(", "))))
    }
}

/// Scores, coefficients and agreement of one set of responses.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub scores: ScoreSet,
    pub table: CoefficientTable,
    pub report: SignAgreementReport,
}

/// Scores the responses, fits the models and compares the coefficients
/// with `reference`, attaching permutation p-values to every pooled rate.
pub fn analyze_responses(
    records: &[ResponseRecord],
    personas: &[Persona],
    reference: &CoefficientTable,
    n_perm: usize,
    permutation_seed: u64,
) -> Result<Analysis> {
    let scores = compute_scores(records, personas);
    let table = analyze(&scores.scores)?;
    let mut report = compare_tables(reference, &table)?;
    let p_values = permutation_test(&scores.scores, reference, &PoolSelector::ALL, n_perm, permutation_seed)?;
    report.set_p_values(&p_values);
    Ok(Analysis { scores, table, report })
}

/// Writes `scores.csv`, `coefficients.json` and `report.json` into `dir`.
pub fn write_analysis_files(
    dir: &Path,
    scores: &[ScoreRecord],
    table: &CoefficientTable,
    document: &ReportDocument,
) -> Result<()> {
    write_scores_csv(scores, BufWriter::new(fs::File::create(dir.join(SCORES_FILE))?))?;
    fs::write(dir.join(COEFFICIENTS_FILE), table.to_json() + "\n")?;
    write_json(&dir.join(REPORT_FILE), document)
}

impl ExperimentContext<'_> {
    pub fn run_condition(&self, personas: &[Persona], condition: &Condition) -> Result<ConditionRun> {
        let languages = resolve_languages(personas, &condition.plan)?;
        check_catalogs(languages.values().copied(), self.catalogs)?;
        let counts = language_counts(languages.iter());
        let plan: CollectionPlan = languages
            .iter()
            .map(|(id, &language)| {
                (
                    id.clone(),
                    PromptAssignment {
                        language,
                        masked: condition.masked,
                    },
                )
            })
            .collect();

        let permutation_seed = seed::derive(
            self.settings.seed,
            &format!("permutation/{}/{}", condition.experiment, condition.name),
            0,
        );
        let mut seeds = BTreeMap::from([("root".to_string(), self.settings.seed), ("permutation".into(), permutation_seed)]);
        match condition.plan.mode {
            LanguageMode::CountryShuffled { seed } | LanguageMode::FullShuffled { seed } => {
                seeds.insert("language".into(), seed);
            }
            _ => {}
        }

        let dir = self
            .settings
            .out_dir
            .as_ref()
            .map(|root| root.join(&condition.experiment).join(&condition.name));
        let mut manifest = RunManifest {
            schema_version: REPORT_SCHEMA_VERSION,
            experiment: condition.experiment.clone(),
            condition: condition.name.clone(),
            population_digest: population_digest(personas),
            population_size: personas.len(),
            plan: condition.plan.clone(),
            masked: condition.masked,
            language_counts: counts.clone(),
            backend: self.gateway.fingerprint().to_string(),
            seeds,
            n_perm: self.settings.n_perm,
            started_at: now(),
            finished_at: None,
            outputs: [RESPONSES_FILE, SCORES_FILE, COEFFICIENTS_FILE, REPORT_FILE]
                .map(String::from)
                .to_vec(),
            responses: None,
            failed_probes: None,
            excluded_personas: None,
        };
        if let Some(dir) = &dir {
            fs::create_dir_all(dir)?;
            write_json(&dir.join(MANIFEST_FILE), &manifest)?;
        }
        log::info!(
            "{}/{}: {} personas, masked={}",
            condition.experiment,
            condition.name,
            personas.len(),
            condition.masked
        );

        let collection = self.gateway.collect(personas, self.catalogs, &plan)?;
        if let Some(dir) = &dir {
            save_records(&collection.records, dir.join(RESPONSES_FILE))?;
        }
        let analysis = analyze_responses(
            &collection.records,
            personas,
            self.reference,
            self.settings.n_perm,
            permutation_seed,
        )?;
        let Analysis { scores: scored, table, report } = analysis;

        let document = ReportDocument {
            schema_version: REPORT_SCHEMA_VERSION,
            experiment: condition.experiment.clone(),
            condition: condition.name.clone(),
            language_mode: condition.plan.mode,
            masked: condition.masked,
            scored: scored.scores.len(),
            excluded: scored.excluded.len(),
            failed_probes: collection.failures.len(),
            report,
        };
        if let Some(dir) = &dir {
            write_analysis_files(dir, &scored.scores, &table, &document)?;
            manifest.finished_at = Some(now());
            manifest.responses = Some(collection.records.len());
            manifest.failed_probes = Some(collection.failures.len());
            manifest.excluded_personas = Some(scored.excluded.len());
            write_json(&dir.join(MANIFEST_FILE), &manifest)?;
        }
        Ok(ConditionRun {
            document,
            table,
            language_counts: counts,
            excluded: scored.excluded,
            failures: collection.failures,
            dir,
        })
    }
}
