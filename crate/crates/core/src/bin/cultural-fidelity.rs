use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use cultural_fidelity::experiment::{
    self, analyze_responses, write_analysis_files, ExperimentContext, ExperimentSettings, Experiment1Result,
    Experiment2Result, Experiment3Result, LanguageMode, ReportDocument, RunManifest, Scale,
    MANIFEST_FILE, REPORT_SCHEMA_VERSION,
};
use cultural_fidelity::gateway::{load_records, BackendConfig, BackendKind, Gateway, SyntheticRespondentParams};
use cultural_fidelity::persona::{load_population, save_population, synthesize_population};
use cultural_fidelity::prompt::{bundled_catalogs, load_catalog_dir, CatalogSet};
use cultural_fidelity::report::{
    emit_chart_data, load_human_reference, render_comparison_table, render_language_table, render_masking_table,
    render_scheme_table, render_svg, ChartInput, RenderedTable,
};
use cultural_fidelity::stats::{CoefficientTable, PoolSelector};
use cultural_fidelity::{seed, Error, Language, Persona, Result};

#[derive(Parser)]
#[command(version, about = "Simulate multinational survey respondents and score their cultural fidelity")]
struct Cli {
    /// TOML or JSON configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a persona population as JSON lines.
    SynthPopulation {
        #[arg(long, value_enum)]
        scale: Option<ScaleArg>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// English prompting, nationality masked and unmasked.
    RunExp1(RunArgs),
    /// Monolingual prompting in each of the twelve languages.
    RunExp2(RunArgs),
    /// Native-language prompting against shuffled-language controls.
    RunExp3 {
        #[command(flatten)]
        run: RunArgs,
        /// Repetitions per shuffled mode.
        #[arg(long)]
        reps: Option<usize>,
    },
    /// Score and fit an existing responses file.
    Analyze {
        #[arg(long)]
        responses: PathBuf,
        #[arg(long)]
        population: PathBuf,
        /// Defaults to the directory holding the responses.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        n_perm: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Render a report.json or an experiment summary.json.
    Report {
        input: PathBuf,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
        /// Write into this directory instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Population file; synthesized from the scale preset when absent.
    #[arg(long)]
    population: Option<PathBuf>,
    #[arg(long, value_enum)]
    scale: Option<ScaleArg>,
    #[arg(long, value_enum)]
    backend: Option<BackendArg>,
    #[arg(long)]
    concurrency: Option<usize>,
    /// Requests per second.
    #[arg(long)]
    rate_limit: Option<f64>,
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// Directory with <code>.json catalogs; the bundled catalogs otherwise.
    #[arg(long)]
    catalog_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_perm: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScaleArg {
    Desk,
    Full,
}

impl From<ScaleArg> for Scale {
    fn from(s: ScaleArg) -> Self {
        match s {
            ScaleArg::Desk => Scale::Desk,
            ScaleArg::Full => Scale::Full,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Remote,
    Synthetic,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Format {
    Text,
    Csv,
    Json,
    Svg,
}

/// Everything the configuration file may set. Command-line flags win.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    backend: Option<BackendConfig>,
    scale: Option<Scale>,
    population: Option<PathBuf>,
    population_seed: Option<u64>,
    catalog_dir: Option<PathBuf>,
    seed: Option<u64>,
    n_perm: Option<usize>,
    reps: Option<usize>,
    /// Noise of the default synthetic respondent.
    synthetic_noise_sd: Option<f64>,
}

fn load_config(path: Option<&Path>) -> Result<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = fs::read_to_string(path)?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        Ok(serde_json::from_str(&text)?)
    } else {
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

/// Noise of the default synthetic respondent.
const DEFAULT_NOISE_SD: f64 = 0.5;

struct Setup {
    personas: Vec<Persona>,
    catalogs: CatalogSet,
    gateway: Gateway,
    reference: CoefficientTable,
    settings: ExperimentSettings,
}

fn setup(config: &FileConfig, args: &RunArgs, reps: Option<usize>) -> Result<Setup> {
    let scale: Scale = args.scale.map(Scale::from).or(config.scale).unwrap_or(Scale::Desk);
    let root_seed = args.seed.or(config.seed).unwrap_or(0);
    let personas = match args.population.as_ref().or(config.population.as_ref()) {
        Some(path) => load_population(path)?,
        None => synthesize_population(&scale.population(config.population_seed.unwrap_or(root_seed)))?,
    };
    let catalogs = match args.catalog_dir.as_ref().or(config.catalog_dir.as_ref()) {
        Some(dir) => load_catalog_dir(dir, &Language::ALL)?,
        None => bundled_catalogs()?,
    };
    let reference = load_human_reference()?.coefficients;

    let mut backend = config.backend.clone().unwrap_or_default();
    if let Some(kind) = args.backend {
        backend.kind = match kind {
            BackendArg::Remote => BackendKind::Remote,
            BackendArg::Synthetic => BackendKind::Synthetic,
        };
    }
    if let Some(c) = args.concurrency {
        backend.concurrency = c;
    }
    if let Some(r) = args.rate_limit {
        backend.rate_limit_rps = r;
    }
    if let Some(dir) = &args.cache_dir {
        backend.cache_dir = Some(dir.clone());
    }
    if backend.kind == BackendKind::Synthetic && backend.synthetic.is_none() {
        backend.synthetic = Some(SyntheticRespondentParams::centred_on(
            &reference,
            config.synthetic_noise_sd.unwrap_or(DEFAULT_NOISE_SD),
            seed::derive(root_seed, "synthetic-noise", 0),
        ));
    }
    let gateway = Gateway::new(backend)?;
    let settings = ExperimentSettings {
        seed: root_seed,
        n_perm: args.n_perm.or(config.n_perm).unwrap_or(ExperimentSettings::default().n_perm),
        reps: reps.or(config.reps).unwrap_or(scale.reps()),
        out_dir: Some(args.out.clone()),
    };
    Ok(Setup {
        personas,
        catalogs,
        gateway,
        reference,
        settings,
    })
}

impl Setup {
    fn context(&self) -> ExperimentContext<'_> {
        ExperimentContext {
            gateway: &self.gateway,
            catalogs: &self.catalogs,
            reference: &self.reference,
            settings: self.settings.clone(),
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let config = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::SynthPopulation { scale, seed, out } => {
            let scale = scale.map(Scale::from).or(config.scale).unwrap_or(Scale::Desk);
            let seed = seed.or(config.population_seed).or(config.seed).unwrap_or(0);
            let personas = synthesize_population(&scale.population(seed))?;
            if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent)?;
            }
            save_population(&personas, &out)?;
            println!("wrote {} personas to {}", personas.len(), out.display());
        }
        Command::RunExp1(args) => {
            let s = setup(&config, &args, None)?;
            let result = experiment::run_experiment1(&s.personas, &s.context())?;
            print!("{}", render_masking_table(&result)?.text);
        }
        Command::RunExp2(args) => {
            let s = setup(&config, &args, None)?;
            let result = experiment::run_experiment2(&s.personas, &s.context())?;
            print!("{}", render_language_table(&result)?.text);
        }
        Command::RunExp3 { run, reps } => {
            let s = setup(&config, &run, reps)?;
            let result = experiment::run_experiment3(&s.personas, &s.context())?;
            print!("{}", render_scheme_table(&result)?.text);
        }
        Command::Analyze {
            responses,
            population,
            out,
            n_perm,
            seed,
        } => analyze(&config, &responses, &population, out, n_perm, seed)?,
        Command::Report { input, format, out } => report(&input, format, out.as_deref())?,
    }
    Ok(())
}

fn analyze(
    config: &FileConfig,
    responses: &Path,
    population: &Path,
    out: Option<PathBuf>,
    n_perm: Option<usize>,
    seed: Option<u64>,
) -> Result<()> {
    let records = load_records(responses)?;
    let personas = load_population(population)?;
    let dir = out.unwrap_or_else(|| responses.parent().map(Path::to_path_buf).unwrap_or_default());
    fs::create_dir_all(&dir)?;

    // Prompting conditions come from the run manifest when there is one.
    let manifest_path = responses.with_file_name(MANIFEST_FILE);
    let (experiment, condition, mode, masked) = if manifest_path.exists() {
        let m: RunManifest = serde_json::from_str(&fs::read_to_string(&manifest_path)?)?;
        (m.experiment, m.condition, m.plan.mode, m.masked)
    } else {
        let first = records
            .first()
            .ok_or_else(|| Error::Argument(format!("{} holds no responses", responses.display())))?;
        if records.iter().any(|r| r.language_code != first.language_code || r.masked != first.masked) {
            return Err(Error::Config(format!(
                "mixed prompting conditions and no {MANIFEST_FILE} next to {}",
                responses.display()
            )));
        }
        let mode = LanguageMode::Monolingual {
            language: first.language_code,
        };
        ("analysis".to_string(), "responses".to_string(), mode, first.masked)
    };

    let reference = load_human_reference()?.coefficients;
    let n_perm = n_perm.or(config.n_perm).unwrap_or(ExperimentSettings::default().n_perm);
    let root = seed.or(config.seed).unwrap_or(0);
    let perm_seed = seed::derive(root, &format!("permutation/{experiment}/{condition}"), 0);
    let analysis = analyze_responses(&records, &personas, &reference, n_perm, perm_seed)?;
    let document = ReportDocument {
        schema_version: REPORT_SCHEMA_VERSION,
        experiment,
        condition,
        language_mode: mode,
        masked,
        scored: analysis.scores.scores.len(),
        excluded: analysis.scores.excluded.len(),
        failed_probes: 0,
        report: analysis.report,
    };
    write_analysis_files(&dir, &analysis.scores.scores, &analysis.table, &document)?;
    for e in &analysis.scores.excluded {
        log::warn!("excluded {}: {}", e.persona_id, e.reason);
    }
    println!(
        "scored {} personas; country {:.1}%, framing {:.1}%; wrote {}",
        document.scored,
        100.0 * document.rate(PoolSelector::COUNTRY),
        100.0 * document.rate(PoolSelector::FRAMING),
        dir.display()
    );
    Ok(())
}

/// Any of the documents an experiment run leaves behind.
enum Input {
    Run(ReportDocument),
    Exp1(Experiment1Result),
    Exp2(Experiment2Result),
    Exp3(Experiment3Result),
}

fn read_input(path: &Path) -> Result<Input> {
    let text = fs::read_to_string(path)?;
    if let Ok(doc) = serde_json::from_str::<ReportDocument>(&text) {
        return Ok(Input::Run(doc));
    }
    if let Ok(r) = serde_json::from_str::<Experiment3Result>(&text) {
        return Ok(Input::Exp3(r));
    }
    if let Ok(r) = serde_json::from_str::<Experiment1Result>(&text) {
        return Ok(Input::Exp1(r));
    }
    if let Ok(r) = serde_json::from_str::<Experiment2Result>(&text) {
        return Ok(Input::Exp2(r));
    }
    Err(Error::Config(format!(
        "{} is neither a report.json nor an experiment summary",
        path.display()
    )))
}

fn comparison(doc: &ReportDocument) -> Result<RenderedTable> {
    let mut reference = CoefficientTable::new();
    let mut model = CoefficientTable::new();
    for e in &doc.report.entries {
        reference.insert(e.term, e.outcome, e.reference);
        model.insert(e.term, e.outcome, e.model);
    }
    render_comparison_table(&reference, &model, &doc.report)
}

fn report(input: &Path, format: Format, out: Option<&Path>) -> Result<()> {
    let input = read_input(input)?;
    let (name, body) = match format {
        Format::Text | Format::Csv => {
            let table = match &input {
                Input::Run(doc) => comparison(doc)?,
                Input::Exp1(r) => render_masking_table(r)?,
                Input::Exp2(r) => render_language_table(r)?,
                Input::Exp3(r) => render_scheme_table(r)?,
            };
            if format == Format::Text {
                ("table.txt", table.text)
            } else {
                ("table.csv", table.csv)
            }
        }
        Format::Json | Format::Svg => {
            let chart = match &input {
                Input::Exp2(r) => emit_chart_data(ChartInput::Languages(&r.runs))?,
                Input::Exp3(r) => emit_chart_data(ChartInput::Schemes(r))?,
                Input::Run(_) | Input::Exp1(_) => {
                    return Err(Error::Argument(
                        "charts are drawn from experiment 2 or 3 summaries".into(),
                    ))
                }
            };
            if format == Format::Json {
                ("chart.json", serde_json::to_string_pretty(&chart)? + "\n")
            } else {
                ("chart.svg", render_svg(&chart))
            }
        }
    };
    match out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            fs::write(dir.join(name), body)?;
        }
        None => print!("{body}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
