//! End-to-end runs on a small synthetic population.

use std::path::Path;
use std::process::Command;

use cultural_fidelity::experiment::{
    run_experiment2, run_experiment3, ExperimentContext, ExperimentSettings, ReportDocument, RunManifest,
    MANIFEST_FILE, REPORT_FILE, RESPONSES_FILE, SUMMARY_FILE,
};
use cultural_fidelity::gateway::{
    synthetic_mean, BackendConfig, Gateway, PromptAssignment, SyntheticRespondentParams,
};
use cultural_fidelity::persona::synthesize_population;
use cultural_fidelity::prompt::{bundled_catalogs, CatalogSet};
use cultural_fidelity::report::{emit_chart_data, load_human_reference, render_svg, ChartInput};
use cultural_fidelity::prompt::DisclosedFeatures;
use cultural_fidelity::stats::{analyze, compute_scores, CoefficientTable, Effect, Outcome, PoolSelector, Term};
use cultural_fidelity::{Error, Language, Persona, PopulationSpec, ProbeKind};

fn small_population() -> Vec<Persona> {
    synthesize_population(&PopulationSpec::scaled(0.03, 11)).unwrap()
}

fn settings(out_dir: Option<&Path>, reps: usize) -> ExperimentSettings {
    ExperimentSettings {
        seed: 5,
        n_perm: 99,
        reps,
        out_dir: out_dir.map(Path::to_path_buf),
    }
}

fn with_context<T>(reps: usize, out_dir: Option<&Path>, f: impl FnOnce(&ExperimentContext<'_>) -> T) -> T {
    let reference: CoefficientTable = load_human_reference().unwrap().coefficients;
    let catalogs: CatalogSet = bundled_catalogs().unwrap();
    let gateway = Gateway::new(BackendConfig::synthetic(SyntheticRespondentParams::centred_on(&reference, 0.5, 9)))
        .unwrap();
    let ctx = ExperimentContext {
        gateway: &gateway,
        catalogs: &catalogs,
        reference: &reference,
        settings: settings(out_dir, reps),
    };
    f(&ctx)
}

#[test]
fn experiment2_runs_every_language() {
    let dir = tempfile::tempdir().unwrap();
    let personas = small_population();
    let result = with_context(1, Some(dir.path()), |ctx| run_experiment2(&personas, ctx)).unwrap();
    assert_eq!(result.runs.len(), 12);
    for language in Language::ALL {
        let doc = result.language(language).unwrap();
        let run_dir = dir.path().join("exp2").join(language.code().to_lowercase());
        assert_eq!(&ReportDocument::load(run_dir.join(REPORT_FILE)).unwrap(), doc);
        assert_eq!(doc.scored + doc.excluded, personas.len());
    }
    assert!(dir.path().join("exp2").join(SUMMARY_FILE).exists());

    let chart = emit_chart_data(ChartInput::Languages(&result.runs)).unwrap();
    assert_eq!(chart.bars.len(), 24);
    let svg = render_svg(&chart);
    assert!(svg.starts_with("<svg") && !svg.contains("<script"));
}

#[test]
fn experiment3_single_repetition_is_degenerate() {
    let dir = tempfile::tempdir().unwrap();
    let personas = small_population();
    let result = with_context(1, Some(dir.path()), |ctx| run_experiment3(&personas, ctx)).unwrap();
    for summary in [&result.country_shuffled, &result.full_shuffled] {
        assert_eq!(summary.reps, 1);
        assert!(summary.degenerate);
        assert_eq!(summary.metric(PoolSelector::COUNTRY).sd, 0.0);
    }
    // Shuffling people across languages keeps the per-language head count.
    let native_counts = &result.full_shuffled.language_counts[0];
    let manifest: RunManifest = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("exp3/native").join(MANIFEST_FILE)).unwrap(),
    )
    .unwrap();
    assert_eq!(&manifest.language_counts, native_counts);
    assert!(manifest.finished_at.is_some());
    for name in ["monolingual_en", "native", "country_shuffled/rep-000", "full_shuffled/rep-000"] {
        assert!(dir.path().join("exp3").join(name).join(RESPONSES_FILE).exists(), "{name}");
    }

    let chart = emit_chart_data(ChartInput::Schemes(&result)).unwrap();
    assert_eq!(chart.bars.len(), 8);
}

#[test]
fn experiment3_rejects_zero_repetitions() {
    let personas = small_population();
    let err = with_context(0, None, |ctx| run_experiment3(&personas, ctx)).unwrap_err();
    assert!(matches!(err, Error::Argument(_)));
}

#[test]
fn empty_chart_input_is_structural() {
    assert!(matches!(emit_chart_data(ChartInput::Languages(&[])), Err(Error::Structural(_))));
}

fn cli(args: &[&str]) -> std::process::Output {
    let out = Command::new(env!("CARGO_BIN_EXE_cultural-fidelity")).args(args).output().unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

#[test]
fn command_line_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let p = |s: &str| dir.path().join(s).to_str().unwrap().to_string();
    let population = p("population.jsonl");
    cli(&["synth-population", "--scale", "desk", "--seed", "3", "--out", &population]);
    cli(&["run-exp1", "--population", &population, "--n-perm", "99", "--seed", "4", "--out", &p("runs")]);

    let report = p("runs/exp1/unmasked/report.json");
    let text = String::from_utf8(cli(&["report", &report]).stdout).unwrap();
    assert!(text.contains("lambda_D") || text.contains('D'));
    let csv = String::from_utf8(cli(&["report", &report, "--format", "csv"]).stdout).unwrap();
    assert!(csv.starts_with("kind,"));
    let summary = String::from_utf8(cli(&["report", &p("runs/exp1/summary.json")]).stdout).unwrap();
    assert!(!summary.is_empty());

    // Re-analysing the stored responses reproduces the stored report.
    cli(&[
        "analyze",
        "--responses",
        &p("runs/exp1/unmasked/responses.jsonl"),
        "--population",
        &population,
        "--out",
        &p("again"),
        "--n-perm",
        "99",
        "--seed",
        "4",
    ]);
    let original = ReportDocument::load(&report).unwrap();
    let again = ReportDocument::load(p("again/report.json")).unwrap();
    assert_eq!(original.report, again.report);
}

/// With interactions in the generating equation, main effects read from the
/// interaction-free model estimate a projection of the truth, not the truth.
/// The pipeline should recover that projection, computed here by fitting
/// the noise-free means.
#[test]
fn interacting_truth_recovers_the_earliest_model_projection() {
    let reference = load_human_reference().unwrap().coefficients;
    let params = SyntheticRespondentParams::centred_on(&reference, 0.5, 21);
    let personas = synthesize_population(&PopulationSpec { seed: 3, ..PopulationSpec::default() }).unwrap();
    let catalogs = bundled_catalogs().unwrap();
    let plan = personas
        .iter()
        .map(|p| (p.id.clone(), PromptAssignment { language: Language::English, masked: false }))
        .collect();
    let gateway = Gateway::new(BackendConfig::synthetic(params.clone())).unwrap();
    let collection = gateway.collect(&personas, &catalogs, &plan).unwrap();
    let scores = compute_scores(&collection.records, &personas).scores;
    let estimated = analyze(&scores).unwrap();

    let noiseless: Vec<_> = scores
        .iter()
        .zip(&personas)
        .map(|(s, p)| {
            assert_eq!(s.persona_id, p.id);
            let features = DisclosedFeatures { country: Some(p.country), deprivation: p.deprivation(), framing: p.framing };
            let mean = |probe| synthetic_mean(&features, probe, Language::English, &params);
            let mut s = s.clone();
            s.p = mean(ProbeKind::Persuasion1);
            s.m = mean(ProbeKind::Mobilization1);
            s
        })
        .collect();
    let projection = analyze(&noiseless).unwrap();

    let mut within = 0;
    for (outcome, term, est) in estimated.iter() {
        if (est.value - projection.get(term, outcome).unwrap().value).abs() <= 3.0 * est.se {
            within += 1;
        }
    }
    assert!(within >= 42, "{within}/44 within 3 se of the projection");

    // The projection is not the generating value for the main effects.
    let biased = Outcome::ALL.into_iter().any(|outcome| {
        let truth = match outcome {
            Outcome::Persuasion => params.persuasion.lambda.get(Effect::I),
            Outcome::Mobilization => params.mobilization.lambda.get(Effect::I),
        };
        let est = estimated.get(Term::Effect(Effect::I), outcome).unwrap();
        (est.value - truth).abs() > 5.0 * est.se
    });
    assert!(biased);
}
