//! Command-line entry point.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 backend error.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use ocean_core::corpus::{audit_anonymization, corpus_stats, split, CorpusStats, Session, DEFAULT_PLACEHOLDER_MARKERS};
use ocean_core::inventory::{Inventory, ScoreScale, ScoringPolicy};
use ocean_core::preference::SftExample;
use ocean_core::extraction::ExtractionRules;
use ocean_core::prompting::{Language, Method, PromptCondition, Role, Templates};
use ocean_core::simulator::SimProfile;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus_io::{load_sessions, save_sessions, sessions_to_jsonl, write_atomic, CorpusIoError};
use crate::experiments::{
    evaluate_cell, mae_table, outlier_markdown, outlier_review, parse_policy, pcc_table, reliability_markdown,
    reliability_run, sweep, write_sweep_outputs, EvalRow, ExperimentError, GridSpec, Harness, ModelSpec,
    PredictionRecord,
};
use crate::gateway::{BackendKind, Gateway, GatewayError};
use crate::prefs::{collect_pairs, export, read_jsonl, ExportError, TrainerMeta};
use crate::synth::{simulate_corpus, SynthSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_BACKEND: i32 = 3;

/// Default seed for every seeded step.
pub const DEFAULT_SEED: u64 = 42;
/// Sampling temperature for repeated administrations against remote models.
pub const RELIABILITY_TEMPERATURE: f64 = 0.7;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Backend(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Backend(_) => EXIT_BACKEND,
        }
    }
}

impl From<CorpusIoError> for CliError {
    fn from(e: CorpusIoError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<GatewayError> for CliError {
    fn from(e: GatewayError) -> Self {
        match e {
            GatewayError::InvalidConfig(m) => CliError::Usage(m),
            other => CliError::Backend(other.to_string()),
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Backend(g) => g.into(),
            ExperimentError::AllSessionsFailed { .. } => CliError::Backend(e.to_string()),
            ExperimentError::Grid(_) | ExperimentError::Condition(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<ExportError> for CliError {
    fn from(e: ExportError) -> Self {
        match e {
            ExportError::Experiment(x) => x.into(),
            other => CliError::Data(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "ocean", version, about = "Big Five prediction from counseling dialogues")]
pub struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Lint a corpus and print its statistics.
    Validate(ValidateArgs),
    /// Run one prediction cell and evaluate it.
    Predict(PredictArgs),
    /// Evaluate prediction records against a corpus.
    Evaluate(EvaluateArgs),
    /// Run every cell of a grid file.
    #[command(alias = "run")]
    Sweep(SweepArgs),
    /// Repeated administrations: alpha, test-retest kappa, per-try PCC.
    Reliability(ReliabilityArgs),
    /// IQR outlier review of session-level MAE.
    Outliers(OutliersArgs),
    /// Build chosen/rejected pairs from several models and export trainer files.
    BuildPrefs(BuildPrefsArgs),
    /// Generate a synthetic corpus for the simulator backend.
    SimulateCorpus(SimulateArgs),
    /// Heuristic scan for identifiers left in utterances.
    AuditAnon(AuditArgs),
    /// Repeat the run recorded in a manifest.
    Rerun(RerunArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Also report a seeded train/validation split of this fraction.
    #[arg(long)]
    pub validation_fraction: Option<f64>,
    #[arg(long)]
    pub group_by_client: bool,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Write the train and validation halves as `train.jsonl` and `validation.jsonl` here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Backend selection shared by several subcommands. Unset flags fall back to
/// the `--config` file, then to built-in defaults.
#[derive(Debug, Clone, Default, Args, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct BackendArgs {
    /// `sim` or `remote`.
    #[arg(long)]
    pub backend: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub max_retries: Option<u32>,
    /// Request timeout in seconds.
    #[arg(long)]
    pub timeout: Option<f64>,
    #[arg(long)]
    pub max_in_flight: Option<usize>,
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    /// Simulator: per-session Gaussian noise on each trait.
    #[arg(long)]
    pub noise_sd: Option<f64>,
    /// Simulator: probability of refusing an item.
    #[arg(long)]
    pub refusal_rate: Option<f64>,
    /// Simulator: shrink noise with the amount of dialogue seen.
    #[arg(long)]
    #[serde(default)]
    pub length_noise: bool,
    /// Parameter count recorded for model-size plots.
    #[arg(long)]
    pub param_count: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionArgs {
    /// baseline_direct, roleplay_only, questionnaire_only or roleplay_and_questionnaire.
    #[arg(long)]
    pub method: Option<String>,
    /// client, counselor, observer or no_role.
    #[arg(long)]
    pub role: Option<String>,
    /// Persona name for the counselor or observer role.
    #[arg(long)]
    pub role_name: Option<String>,
    /// Fraction of each session's utterances given as context.
    #[arg(long)]
    pub granularity: Option<f64>,
    /// strict or prorate.
    #[arg(long)]
    pub score_policy: Option<String>,
    #[arg(long)]
    pub prorate_min: Option<usize>,
    /// Report scores as item means (mean) or sums (sum).
    #[arg(long)]
    pub score_scale: Option<String>,
}

/// Prompt wording and answer-extraction rules.
#[derive(Debug, Clone, Default, Args, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PromptArgs {
    /// Directory of template files; files it lacks come from the bundled set.
    #[arg(long)]
    pub templates: Option<PathBuf>,
    /// Bundled template language: en or zh.
    #[arg(long)]
    pub language: Option<String>,
    /// Extraction rules file replacing the bundled one.
    #[arg(long)]
    pub rules: Option<PathBuf>,
}

impl PromptArgs {
    fn or(&self, file: &PromptArgs) -> PromptArgs {
        PromptArgs {
            templates: self.templates.clone().or_else(|| file.templates.clone()),
            language: self.language.clone().or_else(|| file.language.clone()),
            rules: self.rules.clone().or_else(|| file.rules.clone()),
        }
    }
}

/// Builds the harness for `policy` with the selected templates and rules.
fn harness(policy: ScoringPolicy, p: &PromptArgs) -> Result<Harness, CliError> {
    let language = match p.language.as_deref().unwrap_or("en") {
        "en" => Language::En,
        "zh" => Language::Zh,
        other => return Err(CliError::Usage(format!("unknown language {other:?} (expected en or zh)"))),
    };
    let mut h = Harness::new(policy);
    let bundled = Templates::bundled(language);
    h.templates = match &p.templates {
        None => bundled,
        Some(dir) => {
            if !dir.is_dir() {
                return Err(CliError::Usage(format!("template directory {} does not exist", dir.display())));
            }
            let fallback = Templates::bundled_files(language);
            Templates::from_files(|name| {
                fs::read_to_string(dir.join(name))
                    .ok()
                    .or_else(|| fallback.iter().find(|(n, _)| *n == name).map(|(_, c)| c.to_string()))
            })
            .map_err(|e| CliError::Usage(format!("templates in {}: {e}", dir.display())))?
        }
    };
    if let Some(path) = &p.rules {
        require_file(path, "rules")?;
        let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        h.rules = ExtractionRules::parse(&text).map_err(|e| CliError::Usage(format!("rules {}: {e}", path.display())))?;
    }
    Ok(h)
}

/// Contents of a `--config` file; flags override it.
#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub corpus: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub backend: BackendArgs,
    #[serde(default)]
    pub condition: ConditionArgs,
    #[serde(default)]
    pub prompt: PromptArgs,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// TOML file with the same settings; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub backend: BackendArgs,
    #[command(flatten)]
    pub condition: ConditionArgs,
    #[command(flatten)]
    pub prompt: PromptArgs,
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Prediction record files (JSONL), one table row each.
    #[arg(long, required = true, num_args = 1..)]
    pub records: Vec<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub grid: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Replace every model's backend kind.
    #[arg(long)]
    pub backend: Option<String>,
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    #[command(flatten)]
    pub prompt: PromptArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ReliabilityArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, default_value_t = 10)]
    pub tries: usize,
}

#[derive(Debug, Clone, Args)]
pub struct OutliersArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, required = true, num_args = 1..)]
    pub records: Vec<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BuildPrefsArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Grid with at least two models; its first questionnaire condition is used.
    #[arg(long)]
    pub grid: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    /// Seed written to meta.toml.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[command(flatten)]
    pub prompt: PromptArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Output corpus file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct AuditArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Placeholder marker; repeat for several. Defaults to the built-in set.
    #[arg(long = "marker")]
    pub markers: Vec<String>,
}

#[derive(Debug, Clone, Args)]
pub struct RerunArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output directory; defaults to the one recorded in the manifest.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `argv` (including the program name), runs it and returns the exit code.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let argv: Vec<std::ffi::OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    let args: Vec<String> = argv.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    match dispatch(cli.command, &args) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command, args: &[String]) -> Result<(), CliError> {
    match command {
        Command::Validate(a) => cmd_validate(&a),
        Command::Predict(a) => cmd_predict(&a, args),
        Command::Evaluate(a) => cmd_evaluate(&a),
        Command::Sweep(a) => cmd_sweep(&a, args),
        Command::Reliability(a) => cmd_reliability(&a, args),
        Command::Outliers(a) => cmd_outliers(&a),
        Command::BuildPrefs(a) => cmd_build_prefs(&a, args),
        Command::SimulateCorpus(a) => cmd_simulate(&a),
        Command::AuditAnon(a) => cmd_audit(&a),
        Command::Rerun(a) => cmd_rerun(&a),
    }
}

fn inventory() -> Inventory {
    Inventory::bfi2().expect("bundled key verifies")
}

fn require_file(path: &Path, what: &str) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{what} file {} does not exist", path.display())))
    }
}

fn load_corpus(path: &Path) -> Result<Vec<Session>, CliError> {
    require_file(path, "corpus")?;
    let sessions = load_sessions(path, &inventory())?;
    if sessions.is_empty() {
        return Err(CliError::Data(format!("corpus {} has no sessions", path.display())));
    }
    Ok(sessions)
}

fn write_out(path: &Path, content: &str) -> Result<(), CliError> {
    write_atomic(path, content.as_bytes()).map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Markdown corpus statistics: utterance counts and lengths per speaker.
pub fn stats_table(s: &CorpusStats) -> String {
    let mut t = String::from("| Statistic | Counselor | Client | Total |\n|---|---|---|---|\n");
    let _ = writeln!(t, "| # Utterances | {} | {} | {} |", s.n_utterances_counselor, s.n_utterances_client, s.n_utterances_total);
    let _ = writeln!(
        t,
        "| Avg. utterances per dialogue | {:.2} | {:.2} | {:.2} |",
        s.avg_counselor_utterances_per_dialogue, s.avg_client_utterances_per_dialogue, s.avg_utterances_per_dialogue
    );
    let _ = writeln!(
        t,
        "| Avg. length per utterance | {:.2} | {:.2} | {:.2} |",
        s.avg_length_counselor, s.avg_length_client, s.avg_length_per_utterance
    );
    let _ = writeln!(t, "| # Persons | {} | {} | {} |", s.n_counselors, s.n_clients, s.n_counselors + s.n_clients);
    let _ = writeln!(
        t,
        "| Avg. sessions per person | {:.2} | {:.2} | |",
        s.avg_sessions_per_counselor, s.avg_sessions_per_client
    );
    let _ = writeln!(t, "| # Sessions | | | {} |", s.n_sessions);
    t
}

fn cmd_validate(a: &ValidateArgs) -> Result<(), CliError> {
    let sessions = load_corpus(&a.corpus)?;
    let stats = corpus_stats(&sessions).map_err(|e| CliError::Data(e.to_string()))?;
    print!("{}", stats_table(&stats));
    let with_truth = sessions.iter().filter(|s| s.ground_truth.is_some()).count();
    let with_items = sessions.iter().filter(|s| s.item_ground_truth.is_some()).count();
    println!("\nSessions with ground truth: {with_truth}; with item answers: {with_items}");
    if let Some(frac) = a.validation_fraction {
        let (train, val) =
            split(&sessions, frac, a.seed, a.group_by_client).map_err(|e| CliError::Usage(e.to_string()))?;
        println!("Split (seed {}): {} train, {} validation", a.seed, train.len(), val.len());
        if let Some(out) = &a.out {
            save_sessions(&out.join("train.jsonl"), &train)?;
            save_sessions(&out.join("validation.jsonl"), &val)?;
        }
    }
    Ok(())
}

/// Flags merged with an optional config file.
struct Resolved {
    corpus: PathBuf,
    out: PathBuf,
    seed: u64,
    model: ModelSpec,
    condition: PromptCondition,
    policy: ScoringPolicy,
    scale: ScoreScale,
    cache_dir: Option<PathBuf>,
    prompt: PromptArgs,
}

fn read_config(path: Option<&Path>) -> Result<FileConfig, CliError> {
    let Some(path) = path else { return Ok(FileConfig::default()) };
    require_file(path, "config")?;
    let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
}

fn parse_backend_kind(s: &str) -> Result<BackendKind, CliError> {
    match s {
        "sim" | "simulator" => Ok(BackendKind::Simulator),
        "remote" => Ok(BackendKind::Remote),
        other => Err(CliError::Usage(format!("unknown backend {other:?} (expected sim or remote)"))),
    }
}

fn resolve(run: &RunArgs, default_temperature: Option<f64>) -> Result<Resolved, CliError> {
    let file = read_config(run.config.as_deref())?;
    let b = &run.backend;
    let fb = &file.backend;
    let c = &run.condition;
    let fc = &file.condition;

    let corpus = run.corpus.clone().or(file.corpus).ok_or_else(|| CliError::Usage("--corpus is required".into()))?;
    let out = run.out.clone().or(file.out).ok_or_else(|| CliError::Usage("--out is required".into()))?;
    let seed = run.seed.or(file.seed).unwrap_or(DEFAULT_SEED);

    let kind = parse_backend_kind(b.backend.as_deref().or(fb.backend.as_deref()).unwrap_or("sim"))?;
    let default_model = match kind {
        BackendKind::Simulator => "simulator",
        BackendKind::Remote => "",
    };
    let name = b.model.clone().or_else(|| fb.model.clone()).unwrap_or_else(|| default_model.to_string());
    if name.is_empty() {
        return Err(CliError::Usage("--model is required for the remote backend".into()));
    }
    let sim = SimProfile {
        noise_sd: b.noise_sd.or(fb.noise_sd).unwrap_or(0.0),
        refusal_rate: b.refusal_rate.or(fb.refusal_rate).unwrap_or(0.0),
        length_noise: b.length_noise || fb.length_noise,
        seed,
    };
    let mut model = ModelSpec::simulator(name, sim);
    model.backend = kind;
    model.endpoint = b.endpoint.clone().or_else(|| fb.endpoint.clone());
    model.param_count = b.param_count.or(fb.param_count);
    let remote_default = if kind == BackendKind::Remote { default_temperature } else { None };
    model.temperature = b.temperature.or(fb.temperature).or(remote_default).unwrap_or(0.0);
    if let Some(v) = b.max_retries.or(fb.max_retries) {
        model.max_retries = v;
    }
    if let Some(v) = b.timeout.or(fb.timeout) {
        model.request_timeout = v;
    }
    if let Some(v) = b.max_in_flight.or(fb.max_in_flight) {
        model.max_in_flight = v;
    }
    model.backend_config(None).validate()?;

    let method_s = c.method.as_deref().or(fc.method.as_deref()).unwrap_or("roleplay_and_questionnaire");
    let method = Method::parse(method_s).ok_or_else(|| CliError::Usage(format!("unknown method {method_s:?}")))?;
    let default_role = if method.uses_roleplay() { "client" } else { "no_role" };
    let role_s = c.role.as_deref().or(fc.role.as_deref()).unwrap_or(default_role);
    let role = Role::parse(role_s).ok_or_else(|| CliError::Usage(format!("unknown role {role_s:?}")))?;
    let condition = PromptCondition {
        method,
        role,
        role_name: c.role_name.clone().or_else(|| fc.role_name.clone()),
        granularity: c.granularity.or(fc.granularity).unwrap_or(1.0),
    };
    condition.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let policy = parse_policy(
        c.score_policy.as_deref().or(fc.score_policy.as_deref()).unwrap_or("prorate"),
        c.prorate_min.or(fc.prorate_min).unwrap_or(ScoringPolicy::DEFAULT_PRORATE_MIN),
    )?;
    let scale = match c.score_scale.as_deref().or(fc.score_scale.as_deref()).unwrap_or("mean") {
        "mean" => ScoreScale::Mean,
        "sum" => ScoreScale::Sum,
        other => return Err(CliError::Usage(format!("unknown score scale {other:?}"))),
    };
    let cache_dir = b.cache_dir.clone().or_else(|| fb.cache_dir.clone());
    let prompt = run.prompt.or(&file.prompt);
    Ok(Resolved { corpus, out, seed, model, condition, policy, scale, cache_dir, prompt })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutputEntry {
    pub path: String,
    pub sha256: String,
}

/// Everything needed to repeat a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Arguments after the program name, as given.
    pub args: Vec<String>,
    pub config_sha256: String,
    pub corpus: String,
    pub corpus_sha256: String,
    pub config: serde_json::Value,
    pub outputs: Vec<OutputEntry>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

fn write_manifest(
    out: &Path,
    command: &str,
    args: &[String],
    corpus: &Path,
    config: serde_json::Value,
    outputs: &[PathBuf],
) -> Result<(), CliError> {
    let mut entries = Vec::with_capacity(outputs.len());
    let mut sorted: Vec<&PathBuf> = outputs.iter().collect();
    sorted.sort();
    for p in sorted {
        let rel = p.strip_prefix(out).unwrap_or(p);
        entries.push(OutputEntry { path: rel.to_string_lossy().replace('\\', "/"), sha256: sha256_file(p)? });
    }
    let config_bytes = serde_json::to_vec(&config).expect("config serializes");
    let manifest = Manifest {
        tool: "ocean".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.into(),
        args: args.to_vec(),
        config_sha256: hex::encode(Sha256::digest(&config_bytes)),
        corpus: corpus.display().to_string(),
        corpus_sha256: sha256_file(corpus)?,
        config,
        outputs: entries,
    };
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    write_out(&out.join(MANIFEST_FILE), &text)
}

fn report_calls(calls: usize, hits: usize) {
    eprintln!("backend calls: {calls}, cache hits: {hits}");
}

fn cmd_predict(a: &PredictArgs, args: &[String]) -> Result<(), CliError> {
    let r = resolve(&a.run, None)?;
    let sessions = load_corpus(&r.corpus)?;
    let mut grid = GridSpec {
        methods: vec![r.condition.method],
        roles: vec![r.condition.role],
        role_names: Vec::new(),
        granularities: vec![r.condition.granularity],
        score_policy: match r.policy {
            ScoringPolicy::Strict => "strict".into(),
            ScoringPolicy::Prorate { .. } => "prorate".into(),
        },
        prorate_min: match r.policy {
            ScoringPolicy::Prorate { min_items } => min_items,
            ScoringPolicy::Strict => ScoringPolicy::DEFAULT_PRORATE_MIN,
        },
        models: vec![r.model.clone()],
    };
    if let Some(name) = &r.condition.role_name {
        grid.role_names = vec![name.clone()];
    }
    let harness = harness(r.policy, &r.prompt)?;
    let mut output = sweep(&harness, &grid, &sessions, r.cache_dir.as_deref())?;
    // A named persona expands to both the plain and the named role; keep the requested one.
    output.cells.retain(|c| c.condition == r.condition);
    if let Some(cell) = output.cells.first() {
        if cell.run.is_none() {
            return Err(CliError::Backend(cell.failure.clone().unwrap_or_default()));
        }
    }
    let mut written = write_sweep_outputs(&r.out, &output, &sessions)?;
    if r.scale == ScoreScale::Sum {
        written.push(write_scaled_predictions(&r.out, &output, r.scale)?);
    }
    print!("{}", pcc_table(&output.rows()));
    report_calls(output.backend_calls, output.cache_hits);
    let config = serde_json::json!({
        "grid": grid,
        "seed": r.seed,
        "score_scale": format!("{:?}", r.scale),
        "prompt": r.prompt,
    });
    write_manifest(&r.out, "predict", args, &r.corpus, config, &written)
}

fn write_scaled_predictions(out: &Path, output: &crate::experiments::SweepOutput, scale: ScoreScale) -> Result<PathBuf, CliError> {
    let mut s = String::from("model,condition,session_id,O,C,E,A,N\n");
    for cell in &output.cells {
        for rec in cell.run.iter().flat_map(|r| r.scored()) {
            let p = rec.predicted.expect("scored");
            let v = p.to_array().map(|x| scale.apply(x));
            let _ = writeln!(s, "{},{},{},{},{},{},{},{}", rec.model_name, rec.condition.label(), rec.session_id, v[0], v[1], v[2], v[3], v[4]);
        }
    }
    let path = out.join("plots/predictions_sum.csv");
    write_out(&path, &s)?;
    Ok(path)
}

fn load_records(paths: &[PathBuf]) -> Result<Vec<Vec<PredictionRecord>>, CliError> {
    paths
        .iter()
        .map(|p| {
            require_file(p, "records")?;
            let text = fs::read_to_string(p).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
            read_jsonl(&text).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))
        })
        .collect()
}

fn cmd_evaluate(a: &EvaluateArgs) -> Result<(), CliError> {
    let sessions = load_corpus(&a.corpus)?;
    let mut rows: Vec<EvalRow> = Vec::new();
    for (path, records) in a.records.iter().zip(load_records(&a.records)?) {
        match evaluate_cell(&records, &sessions) {
            Ok(row) => rows.push(row),
            Err(e) => eprintln!("{}: {e}", path.display()),
        }
    }
    if rows.is_empty() {
        return Err(CliError::Data("no record file could be evaluated".into()));
    }
    let pcc = pcc_table(&rows);
    let mae = mae_table(&rows);
    print!("{pcc}\n{mae}");
    if let Some(out) = &a.out {
        write_out(&out.join("tables/eval_pcc.md"), &pcc)?;
        write_out(&out.join("tables/eval_mae.md"), &mae)?;
    }
    Ok(())
}

fn load_grid(path: &Path) -> Result<GridSpec, CliError> {
    require_file(path, "grid")?;
    let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    Ok(GridSpec::parse(&text)?)
}

fn cmd_sweep(a: &SweepArgs, args: &[String]) -> Result<(), CliError> {
    let mut grid = load_grid(&a.grid)?;
    if let Some(kind) = &a.backend {
        let kind = parse_backend_kind(kind)?;
        for m in &mut grid.models {
            m.backend = kind;
        }
    }
    for m in &grid.models {
        m.backend_config(None).validate()?;
    }
    let sessions = load_corpus(&a.corpus)?;
    let harness = harness(grid.policy()?, &a.prompt)?;
    let output = sweep(&harness, &grid, &sessions, a.cache_dir.as_deref())?;
    if output.cells.iter().all(|c| c.run.is_none()) {
        let first = output.cells.first().and_then(|c| c.failure.clone()).unwrap_or_default();
        return Err(CliError::Backend(format!("every cell failed: {first}")));
    }
    let written = write_sweep_outputs(&a.out, &output, &sessions)?;
    print!("{}", pcc_table(&output.rows()));
    report_calls(output.backend_calls, output.cache_hits);
    let config = serde_json::json!({ "grid": grid, "prompt": a.prompt });
    write_manifest(&a.out, "sweep", args, &a.corpus, config, &written)
}

fn cmd_reliability(a: &ReliabilityArgs, args: &[String]) -> Result<(), CliError> {
    let r = resolve(&a.run, Some(RELIABILITY_TEMPERATURE))?;
    let sessions = load_corpus(&r.corpus)?;
    let harness = harness(r.policy, &r.prompt)?;
    let base = r.model.backend_config(r.cache_dir.as_deref());
    let out = reliability_run(&harness, &sessions, &r.condition, &base, a.tries)?;
    let md = reliability_markdown(&out);
    let mut written = Vec::new();
    let p = r.out.join("tables/reliability.md");
    write_out(&p, &md)?;
    written.push(p);
    let mut csv = String::from("try,O,C,E,A,N,avg\n");
    for (i, row) in out.pcc.rows.iter().enumerate() {
        let _ = writeln!(csv, "{},{},{},{},{},{},{}", i + 1, row[0], row[1], row[2], row[3], row[4], row[5]);
    }
    let p = r.out.join("plots/tries.csv");
    write_out(&p, &csv)?;
    written.push(p);
    for (i, t) in out.tries.iter().enumerate() {
        let mut s = String::new();
        for rec in &t.records {
            s.push_str(&serde_json::to_string(rec).expect("record serializes"));
            s.push('\n');
        }
        let p = r.out.join(format!("records/try{:02}.jsonl", i + 1));
        write_out(&p, &s)?;
        written.push(p);
    }
    print!("{md}");
    report_calls(out.backend_calls, 0);
    let config = serde_json::json!({
        "model": r.model,
        "condition": r.condition,
        "tries": a.tries,
        "seed": r.seed,
        "prompt": r.prompt,
    });
    write_manifest(&r.out, "reliability", args, &r.corpus, config, &written)
}

fn cmd_outliers(a: &OutliersArgs) -> Result<(), CliError> {
    let sessions = load_corpus(&a.corpus)?;
    let records: Vec<PredictionRecord> = load_records(&a.records)?.into_iter().flatten().collect();
    let review = outlier_review(&records, &sessions)?;
    let md = outlier_markdown(&review);
    print!("{md}");
    if let Some(out) = &a.out {
        write_out(&out.join("tables/outliers.md"), &md)?;
        let mut json = serde_json::to_string_pretty(&review).expect("review serializes");
        json.push('\n');
        write_out(&out.join("outliers.json"), &json)?;
    }
    Ok(())
}

fn cmd_build_prefs(a: &BuildPrefsArgs, args: &[String]) -> Result<(), CliError> {
    let grid = load_grid(&a.grid)?;
    if grid.models.len() < 2 {
        return Err(CliError::Usage("build-prefs needs at least two models in the grid".into()));
    }
    let condition = grid
        .conditions()
        .into_iter()
        .find(|c| c.method.uses_questionnaire())
        .ok_or_else(|| CliError::Usage("build-prefs needs a questionnaire method in the grid".into()))?;
    let sessions = load_corpus(&a.corpus)?;
    let harness = harness(grid.policy()?, &a.prompt)?;
    let gateways = grid
        .models
        .iter()
        .map(|m| Gateway::new(m.backend_config(a.cache_dir.as_deref())))
        .collect::<Result<Vec<_>, _>>()?;
    let built = collect_pairs(&harness, &sessions, &condition, &gateways)?;
    let sft: Vec<SftExample> = built.pairs.iter().map(SftExample::from_pair).collect();
    let meta = TrainerMeta { seed: a.seed, ..TrainerMeta::default() };
    let files = export(&built.pairs, &sft, &meta, &a.out, &sessions, &harness.inventory, &harness.rules)?;
    println!(
        "pairs: {}; skipped (single model): {}; dropped (no signal): {}; dropped (no parsed answer): {}; skipped (no ground truth): {}",
        built.pairs.len(),
        built.skipped_single,
        built.dropped_no_signal,
        built.dropped_undefined,
        built.skipped_no_truth
    );
    let calls: usize = gateways.iter().map(|g| g.stats().backend_calls()).sum();
    let hits: usize = gateways.iter().map(|g| g.stats().cache_hits()).sum();
    report_calls(calls, hits);
    let config = serde_json::json!({ "grid": grid, "condition": condition, "meta": meta, "prompt": a.prompt });
    write_manifest(&a.out, "build-prefs", args, &a.corpus, config, &[files.dpo, files.sft, files.meta])
}

fn cmd_simulate(a: &SimulateArgs) -> Result<(), CliError> {
    if a.n == 0 {
        return Err(CliError::Usage("--n must be at least 1".into()));
    }
    let sessions = simulate_corpus(&SynthSpec::new(a.n, a.seed), &inventory());
    match &a.out {
        Some(path) => save_sessions(path, &sessions)?,
        None => print!("{}", sessions_to_jsonl(&sessions)),
    }
    Ok(())
}

fn cmd_audit(a: &AuditArgs) -> Result<(), CliError> {
    let sessions = load_corpus(&a.corpus)?;
    let markers: Vec<&str> = if a.markers.is_empty() {
        DEFAULT_PLACEHOLDER_MARKERS.to_vec()
    } else {
        a.markers.iter().map(String::as_str).collect()
    };
    let mut total = 0;
    for s in &sessions {
        for f in audit_anonymization(s, &markers) {
            total += 1;
            println!("{}\t{}\t{:?}\t{}", s.session_id, f.utterance_index, f.kind, f.excerpt);
        }
    }
    eprintln!("{total} finding(s) in {} session(s); no findings does not certify anonymity", sessions.len());
    Ok(())
}

fn cmd_rerun(a: &RerunArgs) -> Result<(), CliError> {
    require_file(&a.manifest, "manifest")?;
    let text = fs::read_to_string(&a.manifest).map_err(|e| CliError::Usage(e.to_string()))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("manifest: {e}")))?;
    let mut args = manifest.args;
    if let Some(out) = &a.out {
        let out = out.display().to_string();
        match args.iter().position(|x| x == "--out") {
            Some(i) if i + 1 < args.len() => args[i + 1] = out,
            _ => args.extend(["--out".to_string(), out]),
        }
    }
    let argv = std::iter::once("ocean".to_string()).chain(args.iter().cloned());
    let cli = Cli::try_parse_from(argv).map_err(|e| CliError::Usage(format!("manifest arguments: {e}")))?;
    if matches!(cli.command, Command::Rerun(_)) {
        return Err(CliError::Usage("a manifest cannot point at another rerun".into()));
    }
    dispatch(cli.command, &args)
}
