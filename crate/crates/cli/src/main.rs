//! `procex` command-line tool.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or validation error,
//! 3 provider error (including replay-mode cache misses).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use procex::bpmn::generate_bpmn;
use procex::corpus::{load_dataset, pet_schema, validate, CorpusError, Dataset, Document, SchemaDescriptor};
use procex::eval::{aggregate, ConfusionCounts};
use procex::llm::{CacheMode, ClientConfig, HttpConfig, HttpProvider, LlmClient, Provider};
use procex::pipeline::{
    gold_echo_stub, predictions_from_annotations, run_ablation, run_extract, run_grid, score_document, write_run,
    Baselines, CellOutcome, DocumentRecord, ExperimentConfig, ModelSettings, PipelineError, Predictions,
};
use procex::prompt::{PromptTemplate, ShotStrategy};
use procex::Task;

const BUNDLED_BASELINES: &str = include_str!("../../../data/baselines.json");

#[derive(Debug, Parser)]
#[command(
    name = "procex",
    version,
    about = "Extract process information with LLM prompts, score it, and build BPMN models"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

/// Settings shared by the subcommands. Flags win over environment
/// variables, which win over the config file.
#[derive(Debug, Args)]
struct Common {
    /// TOML file with default settings
    #[arg(long, global = true, env = "PROCEX_CONFIG")]
    config: Option<PathBuf>,
    /// Chat completions URL of an OpenAI-compatible API
    #[arg(long, global = true, env = "PROCEX_ENDPOINT")]
    endpoint: Option<String>,
    /// API key sent with every request
    #[arg(long, global = true, env = "PROCEX_API_KEY", hide_env_values = true)]
    api_key: Option<String>,
    /// Where completions come from; gold-echo answers with the dataset's own annotations
    #[arg(long, global = true, value_enum)]
    provider: Option<ProviderKind>,
    /// Model id [default: gpt-4o]
    #[arg(long, global = true, env = "PROCEX_MODEL")]
    model: Option<String>,
    /// Sampling temperature [default: 0]
    #[arg(long, global = true)]
    temperature: Option<f64>,
    #[arg(long, global = true)]
    max_output_tokens: Option<u32>,
    /// record: use the cache and call the provider on a miss; replay: cache only
    #[arg(long, global = true, env = "PROCEX_MODE")]
    mode: Option<CacheMode>,
    /// Response cache directory [default: .procex-cache]
    #[arg(long, global = true, env = "PROCEX_CACHE_DIR")]
    cache_dir: Option<PathBuf>,
    /// Parallel requests [default: 4]
    #[arg(long, global = true)]
    max_concurrent: Option<usize>,
    /// Minimum delay between request starts, in milliseconds [default: 0]
    #[arg(long, global = true)]
    min_delay_ms: Option<u64>,
    /// Few-shot sampling seed [default: 0]
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Draw shots per document or once per run [default: per-document]
    #[arg(long, global = true, value_enum)]
    shot_strategy: Option<StrategyArg>,
    /// Prompt template file [default: bundled template]
    #[arg(long, global = true)]
    template: Option<PathBuf>,
    /// Schema file overriding the dataset's own
    #[arg(long, global = true)]
    schema: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum ProviderKind {
    Http,
    GoldEcho,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum StrategyArg {
    PerDocument,
    Fixed,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Extract one task from one document or a whole dataset
    Extract {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        task: Task,
        #[arg(long, default_value_t = 0)]
        shots: usize,
        /// Only this document
        #[arg(long)]
        doc: Option<String>,
        /// Mention types for chained per-type prompts (MD only), e.g. Activity,Actor
        #[arg(long, value_delimiter = ',')]
        agents: Option<Vec<String>>,
        /// Runs directory
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a predictions file against gold
    Evaluate {
        #[arg(long)]
        dataset: PathBuf,
        /// predictions.jsonl from a run, or a canonical file with predicted annotations
        #[arg(long)]
        predictions: PathBuf,
        /// Tasks to score for annotation files [default: the dataset's tasks]
        #[arg(long, value_delimiter = ',')]
        tasks: Option<Vec<Task>>,
    },
    /// Score every task and shot count
    Grid {
        #[arg(long)]
        dataset: PathBuf,
        /// [default: the dataset's tasks]
        #[arg(long, value_delimiter = ',')]
        tasks: Option<Vec<Task>>,
        #[arg(long, value_delimiter = ',', default_value = "0,1,3")]
        shots: Vec<usize>,
        /// Reference scores shown as Baseline rows [default: bundled]
        #[arg(long)]
        baselines: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Remove one prompt component at a time
    Ablate {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "MD,RE")]
        tasks: Vec<Task>,
        #[arg(long, default_value_t = 0)]
        shots: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compile an annotated canonical document to BPMN 2.0 XML
    GenerateBpmn {
        /// Canonical dataset file or a single document JSON
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Document id when the file holds several
        #[arg(long)]
        doc: Option<String>,
        /// Build from a run's predictions.jsonl instead of the annotations in --in
        #[arg(long)]
        predictions: Option<PathBuf>,
    },
    /// Inspect the response cache
    Cache {
        #[command(subcommand)]
        action: CacheAction,
    },
}

#[derive(Debug, Subcommand)]
enum CacheAction {
    /// List cached entries
    List,
    /// Delete entries
    Purge {
        /// Only entries created before this unix time
        #[arg(long)]
        older_than: Option<u64>,
    },
}

/// Keys accepted in the `--config` file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
struct FileConfig {
    endpoint: Option<String>,
    api_key: Option<String>,
    provider: Option<ProviderKind>,
    model: Option<String>,
    temperature: Option<f64>,
    max_output_tokens: Option<u32>,
    mode: Option<CacheMode>,
    cache_dir: Option<PathBuf>,
    max_concurrent: Option<usize>,
    min_delay_ms: Option<u64>,
    seed: Option<u64>,
    shot_strategy: Option<StrategyArg>,
    template: Option<PathBuf>,
    schema: Option<PathBuf>,
    baselines: Option<PathBuf>,
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Data(String),
    Provider(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Provider(_) => 3,
        }
    }

    fn report(&self) {
        let (kind, message) = match self {
            Failure::Usage(m) => ("usage", m),
            Failure::Data(m) => ("data", m),
            Failure::Provider(m) => ("provider", m),
        };
        let one_line = message.split_whitespace().collect::<Vec<_>>().join(" ");
        eprintln!("procex: error[{kind}]: {one_line}");
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        if e.is_provider_error() {
            Failure::Provider(e.to_string())
        } else {
            Failure::Data(e.to_string())
        }
    }
}

impl From<CorpusError> for Failure {
    fn from(e: CorpusError) -> Self {
        Failure::Data(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

/// Resolved settings.
struct Settings {
    file: FileConfig,
    provider: ProviderKind,
    endpoint: Option<String>,
    api_key: Option<String>,
    mode: CacheMode,
    cache_dir: PathBuf,
    max_concurrent: usize,
    min_delay: Duration,
    schema: Option<PathBuf>,
    experiment: ExperimentConfig,
}

fn resolve(common: Common) -> Result<Settings, Failure> {
    let file: FileConfig = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
            toml::from_str(&text).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?
        }
        None => FileConfig::default(),
    };
    let template = match common.template.as_ref().or(file.template.as_ref()) {
        Some(path) => PromptTemplate::load(path).map_err(|e| Failure::Data(e.to_string()))?,
        None => PromptTemplate::default(),
    };
    let defaults = ModelSettings::default();
    let strategy = match common.shot_strategy.or(file.shot_strategy) {
        Some(StrategyArg::Fixed) => ShotStrategy::Fixed,
        _ => ShotStrategy::PerDocument,
    };
    Ok(Settings {
        provider: common.provider.or(file.provider).unwrap_or(ProviderKind::Http),
        endpoint: common.endpoint.or(file.endpoint.clone()),
        api_key: common.api_key.or(file.api_key.clone()),
        mode: common.mode.or(file.mode).unwrap_or_default(),
        cache_dir: common
            .cache_dir
            .or(file.cache_dir.clone())
            .unwrap_or_else(|| PathBuf::from(".procex-cache")),
        max_concurrent: common.max_concurrent.or(file.max_concurrent).unwrap_or(4),
        min_delay: Duration::from_millis(common.min_delay_ms.or(file.min_delay_ms).unwrap_or(0)),
        schema: common.schema.or(file.schema.clone()),
        experiment: ExperimentConfig {
            template,
            model: ModelSettings {
                model_id: common.model.or(file.model.clone()).unwrap_or(defaults.model_id),
                temperature: common.temperature.or(file.temperature).unwrap_or(defaults.temperature),
                max_output_tokens: common.max_output_tokens.or(file.max_output_tokens),
            },
            shot_seed: common.seed.or(file.seed).unwrap_or(0),
            shot_strategy: strategy,
        },
        file,
    })
}

impl Settings {
    fn schema(&self) -> Result<Option<SchemaDescriptor>, Failure> {
        self.schema
            .as_deref()
            .map(|p| SchemaDescriptor::load(p).map_err(Failure::from))
            .transpose()
    }

    fn dataset(&self, path: &Path) -> Result<Dataset, Failure> {
        Ok(load_dataset(path, self.schema()?)?)
    }

    fn client(&self, dataset: &Dataset) -> Result<LlmClient, Failure> {
        let provider: Option<Arc<dyn Provider>> = match (self.mode, self.provider) {
            (CacheMode::Replay, _) => None,
            (CacheMode::Record, ProviderKind::GoldEcho) => Some(Arc::new(gold_echo_stub(dataset))),
            (CacheMode::Record, ProviderKind::Http) => match &self.endpoint {
                Some(endpoint) => Some(Arc::new(HttpProvider::new(HttpConfig::new(
                    endpoint,
                    self.api_key.clone(),
                )))),
                None => {
                    return Err(Failure::Usage(
                        "record mode needs --endpoint (or PROCEX_ENDPOINT), --provider gold-echo, or --mode replay"
                            .into(),
                    ))
                }
            },
        };
        Ok(LlmClient::new(
            provider,
            ClientConfig {
                mode: self.mode,
                cache_dir: Some(self.cache_dir.clone()),
                max_concurrent: self.max_concurrent,
                min_delay: self.min_delay,
            },
        ))
    }

    fn out(&self, flag: Option<PathBuf>) -> PathBuf {
        flag.or(self.file.out.clone()).unwrap_or_else(|| PathBuf::from("runs"))
    }

    fn baselines(&self, flag: Option<PathBuf>) -> Result<Baselines, Failure> {
        match flag.or(self.file.baselines.clone()) {
            Some(path) => Baselines::load(&path).map_err(Failure::from),
            None => Baselines::parse(BUNDLED_BASELINES).map_err(Failure::from),
        }
    }
}

fn provider_failure(cells: &[procex::pipeline::CellResult]) -> Option<Failure> {
    let failed: Vec<_> = cells
        .iter()
        .filter_map(|c| match &c.outcome {
            CellOutcome::Failed { error, provider_error } => Some((c, error, *provider_error)),
            CellOutcome::Scored { .. } => None,
        })
        .collect();
    let (cell, error, _) = failed.first()?;
    let message = format!(
        "{} of {} cells failed; first ({} {}-shot): {error}",
        failed.len(),
        cells.len(),
        cell.task,
        cell.shot_count
    );
    Some(if failed.iter().any(|f| f.2) {
        Failure::Provider(message)
    } else {
        Failure::Data(message)
    })
}

fn write_outputs(
    root: &Path,
    manifest: &procex::pipeline::RunManifest,
    records: &[DocumentRecord],
    scores: &serde_json::Value,
    table: &str,
) -> Outcome {
    let dir = write_run(root, manifest, records, scores, table)?;
    print!("{table}");
    println!("run: {}", dir.display());
    Ok(())
}

fn extract(settings: &Settings, args: ExtractArgs) -> Outcome {
    let dataset = settings.dataset(&args.dataset)?;
    let client = settings.client(&dataset)?;
    let report = run_extract(
        &dataset,
        args.task,
        args.shots,
        args.doc.as_deref(),
        args.agents.as_deref(),
        &settings.experiment,
        &client,
    )?;
    let table = report.table(&Baselines::default());
    write_outputs(
        &settings.out(args.out),
        &report.manifest,
        &report.records,
        &report.scores_json(),
        &table,
    )
}

struct ExtractArgs {
    dataset: PathBuf,
    task: Task,
    shots: usize,
    doc: Option<String>,
    agents: Option<Vec<String>>,
    out: Option<PathBuf>,
}

fn is_canonical(text: &str) -> bool {
    text.lines()
        .find(|l| !l.trim().is_empty())
        .and_then(|l| serde_json::from_str::<serde_json::Value>(l).ok())
        .is_some_and(|v| v.get("format_version").is_some())
}

fn evaluate(settings: &Settings, dataset: PathBuf, predictions: PathBuf, tasks: Option<Vec<Task>>) -> Outcome {
    let gold = settings.dataset(&dataset)?;
    let text =
        fs::read_to_string(&predictions).map_err(|e| Failure::Data(format!("{}: {e}", predictions.display())))?;
    let gold_doc = |id: &str| {
        gold.document(id).ok_or_else(|| {
            Failure::Data(format!(
                "predictions name document `{id}`, which is not in {}",
                dataset.display()
            ))
        })
    };
    // Rows keyed by label, in first-seen order.
    let mut rows: Vec<(String, Vec<ConfusionCounts>)> = Vec::new();
    let mut push = |label: String, counts: ConfusionCounts| match rows.iter_mut().find(|(l, _)| *l == label) {
        Some((_, v)) => v.push(counts),
        None => rows.push((label, vec![counts])),
    };
    if is_canonical(&text) {
        let predicted = load_dataset(&predictions, Some(gold.schema.clone()))?;
        for task in tasks.unwrap_or_else(|| gold.schema.tasks.clone()) {
            if !gold.schema.supports(task) {
                return Err(Failure::Data(format!(
                    "{} has no {task} annotations",
                    gold.schema.dataset_name
                )));
            }
            for doc in &predicted.documents {
                let g = gold_doc(&doc.id)?;
                let p = predictions_from_annotations(doc, g, task, &gold.schema);
                push(task.code().to_string(), score_document(task, &p, g, &gold.schema));
            }
        }
    } else {
        for (k, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let record: DocumentRecord = serde_json::from_str(line)
                .map_err(|e| Failure::Data(format!("{}:{}: {e}", predictions.display(), k + 1)))?;
            if tasks.as_ref().is_some_and(|t| !t.contains(&record.task)) {
                continue;
            }
            let g = gold_doc(&record.document_id)?;
            push(
                record.cell.clone(),
                score_document(record.task, &record.predictions, g, &gold.schema),
            );
        }
    }
    println!("{:<28}{:>7}{:>7}{:>7}{:>7}", "Cell", "Docs", "P", "R", "F1");
    for (label, counts) in rows {
        let s = aggregate(&counts);
        println!(
            "{label:<28}{:>7}{:>7.3}{:>7.3}{:>7.3}",
            counts.len(),
            s.precision,
            s.recall,
            s.f1
        );
    }
    Ok(())
}

fn grid(
    settings: &Settings,
    dataset: PathBuf,
    tasks: Option<Vec<Task>>,
    shots: Vec<usize>,
    baselines: Option<PathBuf>,
    out: Option<PathBuf>,
) -> Outcome {
    let dataset = settings.dataset(&dataset)?;
    let baselines = settings.baselines(baselines)?;
    let client = settings.client(&dataset)?;
    let tasks = tasks.unwrap_or_else(|| dataset.schema.tasks.clone());
    let report = run_grid(&dataset, &tasks, &shots, &settings.experiment, &client)?;
    let table = report.table(&baselines);
    write_outputs(
        &settings.out(out),
        &report.manifest,
        &report.records,
        &report.scores_json(),
        &table,
    )?;
    provider_failure(&report.cells).map_or(Ok(()), Err)
}

fn ablate(settings: &Settings, dataset: PathBuf, tasks: Vec<Task>, shots: usize, out: Option<PathBuf>) -> Outcome {
    let dataset = settings.dataset(&dataset)?;
    let client = settings.client(&dataset)?;
    let report = run_ablation(&dataset, &tasks, &settings.experiment, shots, &client)?;
    write_outputs(
        &settings.out(out),
        &report.manifest,
        &report.records,
        &report.scores_json(),
        &report.table(),
    )?;
    let failed: Vec<String> = report
        .tasks
        .iter()
        .flat_map(|t| {
            t.rows
                .iter()
                .filter_map(move |r| r.error.as_ref().map(|e| format!("{} {}: {e}", t.task, r.label)))
        })
        .collect();
    match failed.first() {
        None => Ok(()),
        Some(first) => Err(Failure::Provider(format!(
            "{} variants failed; first {first}",
            failed.len()
        ))),
    }
}

fn generate(
    settings: &Settings,
    input: PathBuf,
    out: PathBuf,
    doc_id: Option<String>,
    predictions: Option<PathBuf>,
) -> Outcome {
    let text = fs::read_to_string(&input).map_err(|e| Failure::Data(format!("{}: {e}", input.display())))?;
    let (schema, documents) = match serde_json::from_str::<Document>(&text) {
        Ok(doc) => (settings.schema()?.unwrap_or_else(pet_schema), vec![doc]),
        Err(_) => {
            let ds = load_dataset(&input, settings.schema()?)?;
            (ds.schema, ds.documents)
        }
    };
    let doc = match (&doc_id, documents.len()) {
        (Some(id), _) => documents
            .iter()
            .find(|d| d.id == *id)
            .ok_or_else(|| Failure::Data(format!("no document `{id}` in {}", input.display())))?,
        (None, 1) => &documents[0],
        (None, n) => {
            return Err(Failure::Usage(format!(
                "{} holds {n} documents; pick one with --doc",
                input.display()
            )))
        }
    };
    let predicted;
    let doc = match &predictions {
        None => doc,
        Some(path) => {
            predicted = predicted_document(path, doc, &schema)?;
            &predicted
        }
    };
    let violations = validate(doc, &schema);
    if !violations.is_empty() {
        let list: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        return Err(Failure::Data(format!(
            "document `{}` is invalid: {}",
            doc.id,
            list.join("; ")
        )));
    }
    let roles = schema
        .bpmn_roles
        .as_ref()
        .ok_or_else(|| Failure::Data(format!("schema {} defines no BPMN roles", schema.dataset_name)))?;
    let (xml, warnings) = generate_bpmn(doc, roles);
    for w in &warnings {
        eprintln!("procex: warning: relation {}: {}", w.relation_id, w.message);
    }
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Failure::Data(format!("{}: {e}", parent.display())))?;
    }
    fs::write(&out, xml).map_err(|e| Failure::Data(format!("{}: {e}", out.display())))?;
    println!("wrote {}", out.display());
    Ok(())
}

/// `gold` annotated with every prediction record for it in `path`.
fn predicted_document(path: &Path, gold: &Document, schema: &SchemaDescriptor) -> Result<Document, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    let mut merged = Predictions::default();
    let mut found = false;
    for (k, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let record: DocumentRecord =
            serde_json::from_str(line).map_err(|e| Failure::Data(format!("{}:{}: {e}", path.display(), k + 1)))?;
        if record.document_id == gold.id {
            found = true;
            merged.extend(record.predictions);
        }
    }
    if !found {
        return Err(Failure::Data(format!(
            "{} has no predictions for `{}`",
            path.display(),
            gold.id
        )));
    }
    Ok(merged.to_document(gold, schema))
}

fn cache(settings: &Settings, action: CacheAction) -> Outcome {
    let cache = procex::llm::ResponseCache::new(&settings.cache_dir);
    let data = |e: procex::llm::LlmError| Failure::Data(e.to_string());
    match action {
        CacheAction::List => {
            let entries = cache.list().map_err(data)?;
            for e in &entries {
                println!(
                    "{}  {}  {}  {} bytes",
                    e.digest, e.created_at, e.model_id, e.prompt_bytes
                );
            }
            eprintln!("{} entries in {}", entries.len(), settings.cache_dir.display());
        }
        CacheAction::Purge { older_than } => {
            let removed = cache.purge(older_than).map_err(data)?;
            println!("removed {removed} entries");
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Outcome {
    let settings = resolve(cli.common)?;
    match cli.command {
        Command::Extract {
            dataset,
            task,
            shots,
            doc,
            agents,
            out,
        } => extract(
            &settings,
            ExtractArgs {
                dataset,
                task,
                shots,
                doc,
                agents,
                out,
            },
        ),
        Command::Evaluate {
            dataset,
            predictions,
            tasks,
        } => evaluate(&settings, dataset, predictions, tasks),
        Command::Grid {
            dataset,
            tasks,
            shots,
            baselines,
            out,
        } => grid(&settings, dataset, tasks, shots, baselines, out),
        Command::Ablate {
            dataset,
            tasks,
            shots,
            out,
        } => ablate(&settings, dataset, tasks, shots, out),
        Command::GenerateBpmn {
            input,
            out,
            doc,
            predictions,
        } => generate(&settings, input, out, doc, predictions),
        Command::Cache { action } => cache(&settings, action),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            f.report();
            ExitCode::from(f.code())
        }
    }
}
