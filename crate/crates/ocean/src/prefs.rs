//! Preference-pair collection across models and export to trainer files.
//!
//! `dpo.jsonl` holds `{"prompt": [{"role", "content"}...], "chosen", "rejected"}`
//! per line, `sft.jsonl` holds `{"prompt", "completion"}`, and `meta.toml`
//! carries fine-tuning hyperparameter slots for an external trainer.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use ocean_core::corpus::Session;
use ocean_core::extraction::{parse_choice, ExtractionRules, ItemResponse, ParsedChoice};
use ocean_core::inventory::Inventory;
use ocean_core::preference::{build_pairs, choice_error, true_choice, ItemError, PairBuild, PreferencePair, SftExample};
use ocean_core::prompting::{ChatMessage, PromptCondition};
use serde::{Deserialize, Serialize};

use crate::corpus_io::write_atomic;
use crate::experiments::{run_cell, ExperimentError, Harness};
use crate::gateway::Gateway;

#[derive(Debug, thiserror::Error)]
pub enum ExportError {
    #[error("nothing to export")]
    Empty,
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("pair {index} ({session_id}, item {item}): {reason}")]
    Verification { index: usize, session_id: String, item: u8, reason: String },
    #[error("{file} does not round-trip: {reason}")]
    RoundTrip { file: String, reason: String },
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
}

/// One line of `dpo.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DpoLine {
    pub prompt: Vec<ChatMessage>,
    pub chosen: String,
    pub rejected: String,
}

/// One line of `sft.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SftLine {
    pub prompt: Vec<ChatMessage>,
    pub completion: String,
}

/// Fine-tuning hyperparameters handed to the external trainer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainerMeta {
    pub seed: u64,
    pub optimizer: String,
    pub learning_rate: f64,
    pub train_epochs: u32,
    pub per_device_train_batch_size: u32,
    pub gradient_accumulation_steps: u32,
    pub warmup_ratio: f64,
    pub lr_scheduler_type: String,
    pub precision: String,
    /// Left empty for the trainer to fill in.
    pub base_model: String,
    pub gpus: String,
}

impl Default for TrainerMeta {
    fn default() -> Self {
        TrainerMeta {
            seed: 42,
            optimizer: "AdamW".into(),
            learning_rate: 1e-6,
            train_epochs: 3,
            per_device_train_batch_size: 1,
            gradient_accumulation_steps: 2,
            warmup_ratio: 0.1,
            lr_scheduler_type: "cosine".into(),
            precision: "bfloat16".into(),
            base_model: String::new(),
            gpus: String::new(),
        }
    }
}

/// Runs every gateway on one questionnaire condition and selects pairs.
pub fn collect_pairs(
    harness: &Harness,
    sessions: &[Session],
    condition: &PromptCondition,
    gateways: &[Gateway],
) -> Result<PairBuild, ExportError> {
    let mut responses: Vec<ItemResponse> = Vec::new();
    for g in gateways {
        responses.extend(run_cell(harness, sessions, condition, g)?.item_responses);
    }
    Ok(build_pairs(&responses, sessions, &harness.inventory, |session, idx| {
        let item = harness.inventory.item(idx).expect("responses carry inventory items");
        harness
            .templates
            .build_item_prompt(session, condition, item)
            .map(|b| b.messages)
            .unwrap_or_default()
    }))
}

/// Re-derives both errors from the raw texts and checks the pair invariants.
pub fn verify_pairs(
    pairs: &[PreferencePair],
    sessions: &[Session],
    inventory: &Inventory,
    rules: &ExtractionRules,
) -> Result<(), ExportError> {
    let by_id: HashMap<&str, &Session> = sessions.iter().map(|s| (s.session_id.as_str(), s)).collect();
    for (index, p) in pairs.iter().enumerate() {
        let fail = |reason: String| ExportError::Verification {
            index,
            session_id: p.session_id.clone(),
            item: p.item_index,
            reason,
        };
        let session = by_id.get(p.session_id.as_str()).ok_or_else(|| fail("unknown session".into()))?;
        let truth = true_choice(p.item_index, session, inventory).map_err(|e| fail(e.to_string()))?;
        let chosen = choice_error(parse_choice(&p.chosen, rules), truth);
        let rejected = choice_error(parse_choice(&p.rejected, rules), truth);
        if (chosen, rejected) != (p.chosen_error, p.rejected_error) {
            return Err(fail(format!("stored errors {:?}/{:?}, re-derived {chosen:?}/{rejected:?}", p.chosen_error, p.rejected_error)));
        }
        if chosen > rejected {
            return Err(fail(format!("chosen error {chosen:?} exceeds rejected {rejected:?}")));
        }
        if chosen == ItemError::Undefined {
            return Err(fail("chosen answer has no parsed choice".into()));
        }
        if p.chosen == p.rejected {
            return Err(fail("chosen and rejected texts are identical".into()));
        }
    }
    Ok(())
}

fn to_jsonl<T: Serialize>(items: &[T]) -> String {
    let mut s = String::new();
    for it in items {
        s.push_str(&serde_json::to_string(it).expect("line serializes"));
        s.push('\n');
    }
    s
}

/// Parses a JSONL file into typed lines.
pub fn read_jsonl<T: for<'de> Deserialize<'de>>(text: &str) -> Result<Vec<T>, String> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| format!("line {}: {e}", i + 1)))
        .collect()
}

/// Paths written by [`export`].
#[derive(Debug, Clone, PartialEq)]
pub struct ExportedFiles {
    pub dpo: PathBuf,
    pub sft: PathBuf,
    pub meta: PathBuf,
}

/// Writes `dpo.jsonl`, `sft.jsonl` and `meta.toml` under `out_dir` after
/// verifying every pair, then re-reads both JSONL files and checks that
/// they re-serialize to the same bytes.
pub fn export(
    pairs: &[PreferencePair],
    sft: &[SftExample],
    meta: &TrainerMeta,
    out_dir: &Path,
    sessions: &[Session],
    inventory: &Inventory,
    rules: &ExtractionRules,
) -> Result<ExportedFiles, ExportError> {
    if pairs.is_empty() {
        return Err(ExportError::Empty);
    }
    verify_pairs(pairs, sessions, inventory, rules)?;
    for (i, ex) in sft.iter().enumerate() {
        if !matches!(parse_choice(&ex.completion, rules), ParsedChoice::Choice(_)) {
            return Err(ExportError::Verification {
                index: i,
                session_id: String::new(),
                item: 0,
                reason: "SFT completion does not parse to a choice".into(),
            });
        }
    }
    let dpo: Vec<DpoLine> = pairs
        .iter()
        .map(|p| DpoLine { prompt: p.prompt.clone(), chosen: p.chosen.clone(), rejected: p.rejected.clone() })
        .collect();
    let sft_lines: Vec<SftLine> =
        sft.iter().map(|s| SftLine { prompt: s.prompt.clone(), completion: s.completion.clone() }).collect();

    let files = ExportedFiles { dpo: out_dir.join("dpo.jsonl"), sft: out_dir.join("sft.jsonl"), meta: out_dir.join("meta.toml") };
    let write = |path: &Path, content: &str| {
        write_atomic(path, content.as_bytes()).map_err(|source| ExportError::Io { path: path.to_path_buf(), source })
    };
    write(&files.dpo, &to_jsonl(&dpo))?;
    write(&files.sft, &to_jsonl(&sft_lines))?;
    write(&files.meta, &toml::to_string(meta).expect("meta serializes"))?;

    check_round_trip::<DpoLine>(&files.dpo, &dpo)?;
    check_round_trip::<SftLine>(&files.sft, &sft_lines)?;
    Ok(files)
}

fn check_round_trip<T>(path: &Path, expected: &[T]) -> Result<(), ExportError>
where
    T: Serialize + for<'de> Deserialize<'de> + PartialEq,
{
    let file = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|source| ExportError::Io { path: path.to_path_buf(), source })?;
    let parsed: Vec<T> = read_jsonl(&text).map_err(|reason| ExportError::RoundTrip { file: file.clone(), reason })?;
    if parsed != expected {
        return Err(ExportError::RoundTrip { file, reason: "parsed lines differ from the exported values".into() });
    }
    if to_jsonl(&parsed) != text {
        return Err(ExportError::RoundTrip { file, reason: "re-serialized bytes differ".into() });
    }
    Ok(())
}
