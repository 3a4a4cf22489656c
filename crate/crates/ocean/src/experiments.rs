//! Experiment cells, evaluation tables, sweeps, outlier review and
//! repeated-administration reliability runs.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ocean_core::corpus::Session;
use ocean_core::extraction::{
    assemble_sheet, parse_choice, parse_direct, DirectResponse, ExtractionRules, ItemResponse, ParsedDirect,
};
use ocean_core::inventory::{Inventory, ResponseSheet, ScoringPolicy, ITEM_COUNT};
use ocean_core::metrics::{
    cronbach_alpha, iqr_outliers, mae, mean_of, pearson, test_retest, try_table, CorrelationResult, KappaWeighting,
    MetricsError, OutlierReport, ReliabilityReport, TryTable,
};
use ocean_core::prompting::{Method, PromptBundle, PromptCondition, Role, Templates};
use ocean_core::simulator::SimProfile;
use ocean_core::traits::{Domain, TraitScores};
use serde::{Deserialize, Serialize};

use crate::corpus_io::write_atomic;
use crate::gateway::{run_batch, BackendConfig, BackendKind, Gateway, GatewayError};

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("cell {label}: every session failed (first: {first_reason})")]
    AllSessionsFailed { label: String, first_reason: String },
    #[error("cell {label}: {scored} scored records, need at least 3")]
    TooFewScored { label: String, scored: usize },
    #[error("invalid condition: {0}")]
    Condition(String),
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("backend: {0}")]
    Backend(#[from] GatewayError),
    #[error("statistics: {0}")]
    Metrics(#[from] MetricsError),
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io { path: path.to_path_buf(), source }
}

/// Shared, read-only inputs of every cell.
#[derive(Debug, Clone)]
pub struct Harness {
    pub inventory: Inventory,
    pub templates: Templates,
    pub rules: ExtractionRules,
    pub policy: ScoringPolicy,
}

impl Harness {
    pub fn new(policy: ScoringPolicy) -> Self {
        Harness {
            inventory: Inventory::bfi2().expect("bundled key verifies"),
            templates: Templates::english(),
            rules: ExtractionRules::default(),
            policy,
        }
    }
}

/// Outcome for one session in one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub session_id: String,
    pub model_name: String,
    pub condition: PromptCondition,
    /// Present only when scoring succeeded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted: Option<TraitScores>,
    /// Items answered with a parseable choice (0 for direct methods).
    pub answered: usize,
    /// Items asked (60 for questionnaire methods, 0 for direct methods).
    pub asked: usize,
    pub refusal_count: usize,
    pub unparseable_count: usize,
    /// Direct ratings only: whether any value was clamped into [1, 5].
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub clamped: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skip_reason: Option<String>,
}

/// A session left out of evaluation, with the reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkipEntry {
    pub model_name: String,
    pub condition: String,
    pub session_id: String,
    pub reason: String,
}

/// Everything produced by one cell.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CellRun {
    pub records: Vec<PredictionRecord>,
    pub item_responses: Vec<ItemResponse>,
    pub direct_responses: Vec<DirectResponse>,
    pub skips: Vec<SkipEntry>,
}

impl CellRun {
    pub fn scored(&self) -> impl Iterator<Item = &PredictionRecord> {
        self.records.iter().filter(|r| r.predicted.is_some())
    }
}

/// Prompts, calls, parses and scores one (condition, backend) cell.
///
/// Sessions whose prompts cannot be built or whose answers cannot be scored
/// become skip entries. The cell fails only when no session produced any
/// backend answer at all.
pub fn run_cell(
    harness: &Harness,
    sessions: &[Session],
    condition: &PromptCondition,
    gateway: &Gateway,
) -> Result<CellRun, ExperimentError> {
    condition.validate().map_err(|e| ExperimentError::Condition(e.to_string()))?;
    let label = condition.label();
    let model = gateway.config().model_name.clone();
    let per_session = if condition.method.uses_questionnaire() { ITEM_COUNT } else { 1 };

    let mut bundles: Vec<PromptBundle> = Vec::with_capacity(sessions.len() * per_session);
    let mut prompt_errors: HashMap<usize, String> = HashMap::new();
    let mut ranges = Vec::with_capacity(sessions.len());
    for (si, session) in sessions.iter().enumerate() {
        let start = bundles.len();
        let built: Result<Vec<PromptBundle>, _> = if condition.method.uses_questionnaire() {
            harness.inventory.items().iter().map(|item| harness.templates.build_item_prompt(session, condition, item)).collect()
        } else {
            harness.templates.build_direct_prompt(session, condition).map(|b| vec![b])
        };
        match built {
            Ok(b) => bundles.extend(b),
            Err(e) => {
                prompt_errors.insert(si, format!("prompt: {e}"));
            }
        }
        ranges.push(start..bundles.len());
    }

    let completions = run_batch(gateway, &bundles);
    let mut out = CellRun::default();
    let mut any_answer = false;
    let mut first_reason = None;
    let skip = |out: &mut CellRun, session: &Session, reason: String| {
        out.skips.push(SkipEntry {
            model_name: model.clone(),
            condition: label.clone(),
            session_id: session.session_id.clone(),
            reason,
        });
    };

    for (si, session) in sessions.iter().enumerate() {
        let mut record = PredictionRecord {
            session_id: session.session_id.clone(),
            model_name: model.clone(),
            condition: condition.clone(),
            predicted: None,
            answered: 0,
            asked: 0,
            refusal_count: 0,
            unparseable_count: 0,
            clamped: false,
            skip_reason: None,
        };
        if let Some(reason) = prompt_errors.get(&si) {
            first_reason.get_or_insert_with(|| reason.clone());
            record.skip_reason = Some(reason.clone());
            skip(&mut out, session, reason.clone());
            out.records.push(record);
            continue;
        }
        let range = ranges[si].clone();
        let mut backend_failures = Vec::new();
        if condition.method.uses_questionnaire() {
            record.asked = range.len();
            let mut responses = Vec::with_capacity(range.len());
            for i in range {
                let idx = bundles[i].item_index.expect("item prompts carry an index");
                match &completions[i] {
                    Ok(c) => responses.push(ItemResponse {
                        session_id: session.session_id.clone(),
                        item_index: idx,
                        raw_text: c.text.clone(),
                        parsed: parse_choice(&c.text, &harness.rules),
                        model_name: model.clone(),
                        condition: condition.clone(),
                    }),
                    Err(e) => backend_failures.push(format!("item {idx}: {e}")),
                }
            }
            any_answer |= !responses.is_empty();
            let assembled = assemble_sheet(&responses).expect("one response per item");
            record.answered = assembled.sheet.len();
            record.refusal_count = assembled.refused.len();
            record.unparseable_count = assembled.unparseable.len();
            match harness.inventory.score_responses(&assembled.sheet, harness.policy) {
                Ok(scores) => record.predicted = Some(scores),
                Err(e) => record.skip_reason = Some(format!("scoring: {e}")),
            }
            out.item_responses.extend(responses);
        } else {
            let i = range.start;
            match &completions[i] {
                Ok(c) => {
                    any_answer = true;
                    let parsed = parse_direct(&c.text, &harness.rules);
                    match parsed {
                        ParsedDirect::Scores { scores, clamped } => {
                            record.predicted = Some(scores);
                            record.clamped = clamped;
                        }
                        ParsedDirect::Refusal => {
                            record.refusal_count = 1;
                            record.skip_reason = Some("direct answer refused".into());
                        }
                        ParsedDirect::Unparseable => {
                            record.unparseable_count = 1;
                            record.skip_reason = Some("direct answer unparseable".into());
                        }
                    }
                    out.direct_responses.push(DirectResponse {
                        session_id: session.session_id.clone(),
                        raw_text: c.text.clone(),
                        parsed,
                        model_name: model.clone(),
                        condition: condition.clone(),
                    });
                }
                Err(e) => backend_failures.push(format!("direct: {e}")),
            }
        }
        if !backend_failures.is_empty() {
            let reason = format!("backend: {}", backend_failures.join("; "));
            first_reason.get_or_insert_with(|| reason.clone());
            if record.predicted.is_none() && record.skip_reason.is_none() {
                record.skip_reason = Some(reason.clone());
            }
            skip(&mut out, session, reason);
        }
        if record.predicted.is_none() {
            if let Some(reason) = &record.skip_reason {
                if !out.skips.last().is_some_and(|s| s.session_id == session.session_id && &s.reason == reason) {
                    skip(&mut out, session, reason.clone());
                }
            }
        }
        out.records.push(record);
    }

    if !sessions.is_empty() && !any_answer {
        return Err(ExperimentError::AllSessionsFailed {
            label,
            first_reason: first_reason.unwrap_or_else(|| "no answers".into()),
        });
    }
    Ok(out)
}

/// Correlation and MAE for one dimension; `None` entries print as blank cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionResult {
    pub correlation: Option<CorrelationResult>,
    pub mae: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// One evaluated row: a (method, role, model, granularity) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub model_name: String,
    pub condition: PromptCondition,
    pub n_scored: usize,
    pub n_excluded: usize,
    /// In O, C, E, A, N order.
    pub dimensions: Vec<DimensionResult>,
    /// Mean of the five r values, when all five exist.
    pub avg_r: Option<f64>,
    pub avg_mae: Option<f64>,
}

impl EvalRow {
    pub fn r_values(&self) -> Option<[f64; 5]> {
        let mut out = [0.0; 5];
        for (k, d) in self.dimensions.iter().enumerate() {
            out[k] = d.correlation?.r;
        }
        Some(out)
    }
}

/// Predicted and true scores of every scored record with ground truth.
fn scored_pairs<'a>(records: &'a [PredictionRecord], sessions: &'a [Session]) -> Vec<(&'a PredictionRecord, TraitScores, TraitScores)> {
    let truth: HashMap<&str, &Session> = sessions.iter().map(|s| (s.session_id.as_str(), s)).collect();
    records
        .iter()
        .filter_map(|r| {
            let p = r.predicted?;
            let t = truth.get(r.session_id.as_str())?.ground_truth?;
            Some((r, p, t))
        })
        .collect()
}

/// Per-dimension Pearson correlation and MAE of one cell's predictions.
pub fn evaluate_cell(records: &[PredictionRecord], sessions: &[Session]) -> Result<EvalRow, ExperimentError> {
    let first = records.first().ok_or_else(|| ExperimentError::TooFewScored { label: "(empty)".into(), scored: 0 })?;
    let pairs = scored_pairs(records, sessions);
    if pairs.len() < 3 {
        return Err(ExperimentError::TooFewScored { label: first.condition.label(), scored: pairs.len() });
    }
    let dimensions: Vec<DimensionResult> = Domain::ALL
        .iter()
        .map(|d| {
            let p: Vec<f64> = pairs.iter().map(|(_, p, _)| p.get(*d)).collect();
            let t: Vec<f64> = pairs.iter().map(|(_, _, t)| t.get(*d)).collect();
            let m = mae(&p, &t).ok();
            match pearson(&p, &t) {
                Ok(c) => DimensionResult { correlation: Some(c), mae: m, note: None },
                Err(e) => DimensionResult { correlation: None, mae: m, note: Some(e.to_string()) },
            }
        })
        .collect();
    let rs: Option<Vec<f64>> = dimensions.iter().map(|d| d.correlation.map(|c| c.r)).collect();
    let maes: Option<Vec<f64>> = dimensions.iter().map(|d| d.mae).collect();
    Ok(EvalRow {
        model_name: first.model_name.clone(),
        condition: first.condition.clone(),
        n_scored: pairs.len(),
        n_excluded: records.len() - pairs.len(),
        dimensions,
        avg_r: rs.as_deref().and_then(mean_of),
        avg_mae: maes.as_deref().and_then(mean_of),
    })
}

fn role_cell(c: &PromptCondition) -> String {
    match (&c.role, &c.role_name) {
        (Role::NoRole, _) => "-".into(),
        (r, Some(name)) => format!("{} ({name})", r.as_str()),
        (r, None) => r.as_str().into(),
    }
}

fn r_cell(d: &DimensionResult) -> String {
    match d.correlation {
        Some(c) => format!("{:.3}{}", c.r, c.stars),
        None => String::new(),
    }
}

/// Markdown correlation table: one row per cell, stars appended to r.
pub fn pcc_table(rows: &[EvalRow]) -> String {
    let mut s = String::from("| Method | Role | Model | Granularity | O | C | E | A | N | Avg. | n |\n");
    s.push_str("|---|---|---|---|---|---|---|---|---|---|---|\n");
    for row in rows {
        let c = &row.condition;
        let _ = write!(s, "| {} | {} | {} | {:.2} |", c.method.display_name(), role_cell(c), row.model_name, c.granularity);
        for d in &row.dimensions {
            let _ = write!(s, " {} |", r_cell(d));
        }
        let avg = row.avg_r.map(|a| format!("{a:.3}")).unwrap_or_default();
        let _ = writeln!(s, " {avg} | {} |", row.n_scored);
    }
    s.push_str("\nSignificance: * p < 0.05, ** p < 0.01, *** p < 0.001.\n");
    s
}

/// Markdown MAE table in the same row layout.
pub fn mae_table(rows: &[EvalRow]) -> String {
    let mut s = String::from("| Method | Role | Model | Granularity | O | C | E | A | N | Avg. | n |\n");
    s.push_str("|---|---|---|---|---|---|---|---|---|---|---|\n");
    for row in rows {
        let c = &row.condition;
        let _ = write!(s, "| {} | {} | {} | {:.2} |", c.method.display_name(), role_cell(c), row.model_name, c.granularity);
        for d in &row.dimensions {
            let _ = write!(s, " {} |", d.mae.map(|m| format!("{m:.3}")).unwrap_or_default());
        }
        let avg = row.avg_mae.map(|a| format!("{a:.3}")).unwrap_or_default();
        let _ = writeln!(s, " {avg} | {} |", row.n_scored);
    }
    s
}

/// One model entry of a grid file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub name: String,
    pub backend: BackendKind,
    /// Parameter count metadata for model-size plots.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub param_count: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    #[serde(default = "default_timeout")]
    pub request_timeout: f64,
    #[serde(default)]
    pub noise_sd: f64,
    #[serde(default)]
    pub refusal_rate: f64,
    #[serde(default)]
    pub length_noise: bool,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_retries() -> u32 {
    3
}
fn default_in_flight() -> usize {
    8
}
fn default_timeout() -> f64 {
    60.0
}
fn default_seed() -> u64 {
    42
}
fn default_granularities() -> Vec<f64> {
    vec![1.0]
}
fn default_policy() -> String {
    "prorate".into()
}
fn default_prorate_min() -> usize {
    ScoringPolicy::DEFAULT_PRORATE_MIN
}

impl ModelSpec {
    pub fn simulator(name: impl Into<String>, sim: SimProfile) -> Self {
        ModelSpec {
            name: name.into(),
            backend: BackendKind::Simulator,
            param_count: None,
            endpoint: None,
            temperature: 0.0,
            max_retries: default_retries(),
            max_in_flight: default_in_flight(),
            request_timeout: default_timeout(),
            noise_sd: sim.noise_sd,
            refusal_rate: sim.refusal_rate,
            length_noise: sim.length_noise,
            seed: sim.seed,
        }
    }

    pub fn backend_config(&self, cache_dir: Option<&Path>) -> BackendConfig {
        let sim = SimProfile {
            noise_sd: self.noise_sd,
            refusal_rate: self.refusal_rate,
            length_noise: self.length_noise,
            seed: self.seed,
        };
        BackendConfig {
            kind: self.backend,
            endpoint_url: self.endpoint.clone(),
            model_name: self.name.clone(),
            temperature: self.temperature,
            max_retries: self.max_retries,
            request_timeout: self.request_timeout,
            max_in_flight: self.max_in_flight,
            cache_dir: cache_dir.map(Path::to_path_buf),
            retry_base: 1.0,
            sim,
            nonce: None,
        }
    }
}

/// Declarative experiment grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub methods: Vec<Method>,
    /// Roles for role-play methods; other methods always use `no_role`.
    #[serde(default)]
    pub roles: Vec<Role>,
    /// Persona names tried with the counselor and observer roles.
    #[serde(default)]
    pub role_names: Vec<String>,
    #[serde(default = "default_granularities")]
    pub granularities: Vec<f64>,
    /// `strict` or `prorate`.
    #[serde(default = "default_policy")]
    pub score_policy: String,
    #[serde(default = "default_prorate_min")]
    pub prorate_min: usize,
    #[serde(rename = "model")]
    pub models: Vec<ModelSpec>,
}

impl GridSpec {
    pub fn parse(text: &str) -> Result<Self, ExperimentError> {
        let g: GridSpec = toml::from_str(text).map_err(|e| ExperimentError::Grid(e.to_string()))?;
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Grid(m));
        if self.methods.is_empty() {
            return bad("no methods".into());
        }
        if self.models.is_empty() {
            return bad("no [[model]] entries".into());
        }
        if self.methods.iter().any(|m| m.uses_roleplay()) && !self.roles.iter().any(|r| *r != Role::NoRole) {
            return bad("role-play methods need at least one role".into());
        }
        if let Some(g) = self.granularities.iter().find(|g| !(**g > 0.0 && **g <= 1.0)) {
            return bad(format!("granularity {g} outside (0, 1]"));
        }
        let mut names: Vec<&str> = self.models.iter().map(|m| m.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return bad("duplicate model names".into());
        }
        self.policy()?;
        Ok(())
    }

    pub fn policy(&self) -> Result<ScoringPolicy, ExperimentError> {
        parse_policy(&self.score_policy, self.prorate_min)
    }

    /// All conditions in grid order: method, role (then named personas), granularity.
    pub fn conditions(&self) -> Vec<PromptCondition> {
        let mut out = Vec::new();
        for &method in &self.methods {
            let mut roles: Vec<(Role, Option<String>)> = Vec::new();
            if method.uses_roleplay() {
                for &role in self.roles.iter().filter(|r| **r != Role::NoRole) {
                    roles.push((role, None));
                    if matches!(role, Role::Counselor | Role::Observer) {
                        roles.extend(self.role_names.iter().map(|n| (role, Some(n.clone()))));
                    }
                }
            } else {
                roles.push((Role::NoRole, None));
            }
            for (role, name) in roles {
                for &g in &self.granularities {
                    out.push(PromptCondition { method, role, role_name: name.clone(), granularity: g });
                }
            }
        }
        out
    }
}

pub fn parse_policy(name: &str, prorate_min: usize) -> Result<ScoringPolicy, ExperimentError> {
    match name {
        "strict" => Ok(ScoringPolicy::Strict),
        "prorate" => Ok(ScoringPolicy::Prorate { min_items: prorate_min }),
        other => Err(ExperimentError::Grid(format!("unknown score policy {other:?}"))),
    }
}

/// File-name-safe form of a label.
pub fn file_stem(model: &str, condition: &PromptCondition) -> String {
    format!("{model}__{}", condition.label())
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '_') { c } else { '_' })
        .collect()
}

fn jsonl<T: Serialize>(items: &[T]) -> String {
    let mut s = String::new();
    for it in items {
        s.push_str(&serde_json::to_string(it).expect("record serializes"));
        s.push('\n');
    }
    s
}

fn write_file(path: &Path, content: &str) -> Result<(), ExperimentError> {
    write_atomic(path, content.as_bytes()).map_err(io_err(path))
}

/// Result of one cell within a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct CellOutcome {
    pub model: ModelSpec,
    pub condition: PromptCondition,
    pub run: Option<CellRun>,
    pub row: Option<EvalRow>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub cells: Vec<CellOutcome>,
    /// Live backend invocations across all cells.
    pub backend_calls: usize,
    pub cache_hits: usize,
}

impl SweepOutput {
    pub fn rows(&self) -> Vec<EvalRow> {
        self.cells.iter().filter_map(|c| c.row.clone()).collect()
    }
}

/// Runs every (model, condition) cell of `grid` and evaluates it. Cell
/// failures are recorded in the outcome instead of stopping the sweep.
pub fn sweep(
    harness: &Harness,
    grid: &GridSpec,
    sessions: &[Session],
    cache_dir: Option<&Path>,
) -> Result<SweepOutput, ExperimentError> {
    let mut cells = Vec::new();
    let (mut calls, mut hits) = (0, 0);
    for model in &grid.models {
        let gateway = Gateway::new(model.backend_config(cache_dir))?;
        for condition in grid.conditions() {
            let outcome = match run_cell(harness, sessions, &condition, &gateway) {
                Ok(run) => match evaluate_cell(&run.records, sessions) {
                    Ok(row) => CellOutcome { model: model.clone(), condition, run: Some(run), row: Some(row), failure: None },
                    Err(e) => CellOutcome {
                        model: model.clone(),
                        condition,
                        run: Some(run),
                        row: None,
                        failure: Some(e.to_string()),
                    },
                },
                Err(e) => CellOutcome { model: model.clone(), condition, run: None, row: None, failure: Some(e.to_string()) },
            };
            if let Some(f) = &outcome.failure {
                log::warn!("{} {}: {f}", model.name, outcome.condition.label());
            }
            cells.push(outcome);
        }
        calls += gateway.stats().backend_calls();
        hits += gateway.stats().cache_hits();
    }
    Ok(SweepOutput { cells, backend_calls: calls, cache_hits: hits })
}

/// Writes tables, plot data, records and the skip log under `out`.
pub fn write_sweep_outputs(out: &Path, output: &SweepOutput, sessions: &[Session]) -> Result<Vec<PathBuf>, ExperimentError> {
    let mut written = Vec::new();
    let rows = output.rows();
    let mut put = |rel: &str, content: String| -> Result<(), ExperimentError> {
        let p = out.join(rel);
        write_file(&p, &content)?;
        written.push(p);
        Ok(())
    };

    let mut pcc = pcc_table(&rows);
    let failures: Vec<&CellOutcome> = output.cells.iter().filter(|c| c.failure.is_some()).collect();
    if !failures.is_empty() {
        pcc.push_str("\nFailed cells:\n\n");
        for c in failures {
            let _ = writeln!(pcc, "- {} {}: {}", c.model.name, c.condition.label(), c.failure.as_deref().unwrap_or(""));
        }
    }
    put("tables/pcc.md", pcc)?;
    put("tables/mae.md", mae_table(&rows))?;

    let mut gran = String::from("model,method,role,granularity,dimension,r\n");
    let mut sizes = String::from("model_name,param_count,condition,avg_r\n");
    let mut errors = String::from("model,condition,session_id,dimension,abs_error\n");
    for cell in &output.cells {
        let c = &cell.condition;
        if let Some(row) = &cell.row {
            for (d, dim) in Domain::ALL.iter().zip(&row.dimensions) {
                let r = dim.correlation.map(|c| c.r.to_string()).unwrap_or_default();
                let _ = writeln!(gran, "{},{},{},{},{},{r}", cell.model.name, c.method, role_csv(c), c.granularity, d.letter());
            }
            let _ = writeln!(
                sizes,
                "{},{},{},{}",
                cell.model.name,
                cell.model.param_count.map(|p| p.to_string()).unwrap_or_default(),
                c.label(),
                row.avg_r.map(|a| a.to_string()).unwrap_or_default()
            );
        }
        if let Some(run) = &cell.run {
            for (rec, p, t) in scored_pairs(&run.records, sessions) {
                for d in Domain::ALL {
                    let _ = writeln!(
                        errors,
                        "{},{},{},{},{}",
                        cell.model.name,
                        c.label(),
                        rec.session_id,
                        d.letter(),
                        (p.get(d) - t.get(d)).abs()
                    );
                }
            }
        }
    }
    put("plots/granularity.csv", gran)?;
    put("plots/model_size.csv", sizes)?;
    put("plots/mae.csv", errors)?;

    let mut skips = String::new();
    for cell in &output.cells {
        let stem = file_stem(&cell.model.name, &cell.condition);
        match &cell.run {
            Some(run) => {
                put(&format!("records/{stem}.jsonl"), jsonl(&run.records))?;
                if cell.condition.method.uses_questionnaire() {
                    put(&format!("records/{stem}.items.jsonl"), jsonl(&run.item_responses))?;
                } else {
                    put(&format!("records/{stem}.direct.jsonl"), jsonl(&run.direct_responses))?;
                }
                for s in &run.skips {
                    let _ = writeln!(skips, "{}\t{}\t{}\t{}", s.model_name, s.condition, s.session_id, s.reason);
                }
            }
            None => {
                let _ = writeln!(
                    skips,
                    "{}\t{}\t*\t{}",
                    cell.model.name,
                    cell.condition.label(),
                    cell.failure.as_deref().unwrap_or("")
                );
            }
        }
    }
    put("skips.log", skips)?;
    Ok(written)
}

fn role_csv(c: &PromptCondition) -> String {
    match &c.role_name {
        Some(n) => format!("{}:{n}", c.role.as_str()).replace(',', " "),
        None => c.role.as_str().into(),
    }
}

/// A session flagged by the outlier review.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlaggedSession {
    pub session_id: String,
    pub client_id: String,
    pub mae: f64,
}

/// How many flagged sessions belong to one client.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientShare {
    pub client_id: String,
    pub count: usize,
    /// Fraction of all flagged sessions.
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlierReview {
    pub report: OutlierReport,
    /// Session ids in the order their MAE values were analysed.
    pub session_ids: Vec<String>,
    pub session_mae: Vec<f64>,
    pub flagged: Vec<FlaggedSession>,
    /// Sorted by count (descending), then client id.
    pub by_client: Vec<ClientShare>,
}

/// IQR outliers of session-level average MAE, grouped by client.
/// A session scored in several records contributes the mean of its MAEs.
pub fn outlier_review(records: &[PredictionRecord], sessions: &[Session]) -> Result<OutlierReview, ExperimentError> {
    let mut per_session: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for (rec, p, t) in scored_pairs(records, sessions) {
        let err: Vec<f64> = Domain::ALL.iter().map(|d| (p.get(*d) - t.get(*d)).abs()).collect();
        per_session.entry(rec.session_id.as_str()).or_default().push(mean_of(&err).expect("five values"));
    }
    let session_ids: Vec<String> = per_session.keys().map(|s| s.to_string()).collect();
    let session_mae: Vec<f64> = per_session.values().map(|v| mean_of(v).expect("non-empty")).collect();
    let report = iqr_outliers(&session_mae)?;
    let clients: HashMap<&str, &str> = sessions.iter().map(|s| (s.session_id.as_str(), s.client_id.as_str())).collect();
    let flagged: Vec<FlaggedSession> = report
        .outlier_indices
        .iter()
        .map(|&i| FlaggedSession {
            session_id: session_ids[i].clone(),
            client_id: clients.get(session_ids[i].as_str()).copied().unwrap_or_default().to_string(),
            mae: session_mae[i],
        })
        .collect();
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for f in &flagged {
        *counts.entry(f.client_id.as_str()).or_default() += 1;
    }
    let mut by_client: Vec<ClientShare> = counts
        .into_iter()
        .map(|(c, n)| ClientShare { client_id: c.to_string(), count: n, share: n as f64 / flagged.len() as f64 })
        .collect();
    by_client.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.client_id.cmp(&b.client_id)));
    Ok(OutlierReview { report, session_ids, session_mae, flagged, by_client })
}

/// Markdown summary of an outlier review.
pub fn outlier_markdown(review: &OutlierReview) -> String {
    let r = &review.report;
    let mut s = format!(
        "Sessions: {}\nQ1 = {:.4}, Q3 = {:.4}, IQR = {:.4}, fences = [{:.4}, {:.4}]\nOutliers: {}\n\n",
        review.session_ids.len(),
        r.q1,
        r.q3,
        r.iqr,
        r.lower_fence,
        r.upper_fence,
        review.flagged.len()
    );
    s.push_str("| Session | Client | MAE |\n|---|---|---|\n");
    for f in &review.flagged {
        let _ = writeln!(s, "| {} | {} | {:.3} |", f.session_id, f.client_id, f.mae);
    }
    s.push_str("\n| Client | Outliers | Share |\n|---|---|---|\n");
    for c in &review.by_client {
        let _ = writeln!(s, "| {} | {} | {:.1}% |", c.client_id, c.count, 100.0 * c.share);
    }
    s
}

/// Output of a repeated-administration run.
#[derive(Debug, Clone, PartialEq)]
pub struct ReliabilityOutput {
    pub report: ReliabilityReport,
    pub alpha_per_try: Vec<f64>,
    /// Per-try PCC rows with mean and std rows.
    pub pcc: TryTable,
    pub tries: Vec<CellRun>,
    pub backend_calls: usize,
}

/// Keyed item values of every complete sheet, one row per session.
fn keyed_matrix(inventory: &Inventory, sheets: &[ResponseSheet]) -> Vec<Vec<f64>> {
    sheets
        .iter()
        .filter(|s| s.len() == ITEM_COUNT)
        .map(|s| {
            inventory
                .items()
                .iter()
                .map(|it| f64::from(it.keyed_value(s.get(it.index).expect("complete sheet"))))
                .collect()
        })
        .collect()
}

/// Administers the questionnaire `n_tries` times and reports internal
/// consistency, test-retest agreement and the per-try correlation table.
pub fn reliability_run(
    harness: &Harness,
    sessions: &[Session],
    condition: &PromptCondition,
    base: &BackendConfig,
    n_tries: usize,
) -> Result<ReliabilityOutput, ExperimentError> {
    if n_tries < 2 {
        return Err(ExperimentError::Condition("reliability needs at least 2 tries".into()));
    }
    if !condition.method.uses_questionnaire() {
        return Err(ExperimentError::Condition("reliability needs a questionnaire method".into()));
    }
    let mut tries = Vec::with_capacity(n_tries);
    let mut runs = Vec::with_capacity(n_tries);
    let mut alphas = Vec::with_capacity(n_tries);
    let mut pcc_rows = Vec::with_capacity(n_tries);
    let mut calls = 0;
    for t in 0..n_tries {
        let gateway = Gateway::new(base.for_try(t))?;
        let run = run_cell(harness, sessions, condition, &gateway)?;
        calls += gateway.stats().backend_calls();
        let mut by_session: BTreeMap<String, Vec<&ItemResponse>> =
            sessions.iter().map(|s| (s.session_id.clone(), Vec::new())).collect();
        for r in &run.item_responses {
            by_session.entry(r.session_id.clone()).or_default().push(r);
        }
        let sheets: BTreeMap<String, ResponseSheet> = by_session
            .into_iter()
            .map(|(id, rs)| (id, assemble_sheet(rs).expect("one response per item").sheet))
            .collect();
        let matrix = keyed_matrix(&harness.inventory, &sheets.values().cloned().collect::<Vec<_>>());
        alphas.push(cronbach_alpha(&matrix)?);
        let row = evaluate_cell(&run.records, sessions)?;
        let r = row.r_values().ok_or({
            ExperimentError::Metrics(MetricsError::DegenerateInput("a dimension has no correlation"))
        })?;
        pcc_rows.push(r);
        runs.push(sheets);
        tries.push(run);
    }
    let kappa = test_retest(&runs, &harness.inventory, KappaWeighting::Linear)?;
    let report = ReliabilityReport {
        cronbach_alpha: mean_of(&alphas).expect("n_tries >= 2"),
        kappa_per_domain: kappa.kappa_per_domain,
        kappa_avg: kappa.kappa_avg,
    };
    Ok(ReliabilityOutput { report, alpha_per_try: alphas, pcc: try_table(&pcc_rows)?, tries, backend_calls: calls })
}

/// Markdown per-try correlation table with mean and std rows.
pub fn try_table_markdown(table: &TryTable) -> String {
    let mut s = String::from("| Try | O | C | E | A | N | Avg. |\n|---|---|---|---|---|---|---|\n");
    let row = |s: &mut String, name: &str, v: &[f64; 6]| {
        let _ = write!(s, "| {name} |");
        for x in v {
            let _ = write!(s, " {x:.3} |");
        }
        s.push('\n');
    };
    for (i, r) in table.rows.iter().enumerate() {
        row(&mut s, &(i + 1).to_string(), r);
    }
    row(&mut s, "Mean", &table.mean);
    row(&mut s, "Std", &table.std);
    s
}

/// Markdown reliability summary.
pub fn reliability_markdown(out: &ReliabilityOutput) -> String {
    let r = &out.report;
    let mut s = format!("Cronbach's alpha (mean over {} tries): {:.4}\n\n", out.alpha_per_try.len(), r.cronbach_alpha);
    s.push_str("| Kappa | O | C | E | A | N | Avg. |\n|---|---|---|---|---|---|---|\n| linear |");
    for k in r.kappa_per_domain {
        let _ = write!(s, " {k:.4} |");
    }
    let _ = writeln!(s, " {:.4} |\n", r.kappa_avg);
    s.push_str(&try_table_markdown(&out.pcc));
    s
}
