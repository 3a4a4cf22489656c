//! Chosen/rejected pair selection from several models' answers to the same item.
//!
//! The error of one answer is its absolute Likert distance to the item's ground
//! truth. When only domain scores are known, the ground-truth answer is the
//! target choice reconstructed from them. Refusals and unparseable answers have
//! an undefined error that ranks below every numeric one.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::Session;
use crate::extraction::{ItemResponse, ParsedChoice};
use crate::inventory::{target_choice_for_item, Inventory, LikertChoice};
use crate::prompting::ChatMessage;

/// Distance between an answer and the ground truth. `Value` sorts before `Undefined`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemError {
    Value(u8),
    Undefined,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PreferenceError {
    #[error("session {0} has no ground truth")]
    MissingGroundTruth(String),
    #[error("session {session} has no answer for item {item}")]
    MissingItemAnswer { session: String, item: u8 },
    #[error("item {0} is not part of the inventory")]
    UnknownItem(u8),
}

/// The ground-truth answer to `item` for `session`.
pub fn true_choice(item_index: u8, session: &Session, inventory: &Inventory) -> Result<LikertChoice, PreferenceError> {
    let item = inventory.item(item_index).ok_or(PreferenceError::UnknownItem(item_index))?;
    if let Some(answers) = &session.item_ground_truth {
        let v = answers.get(&item_index).copied().ok_or_else(|| PreferenceError::MissingItemAnswer {
            session: session.session_id.clone(),
            item: item_index,
        })?;
        return LikertChoice::new(v).map_err(|_| PreferenceError::MissingItemAnswer {
            session: session.session_id.clone(),
            item: item_index,
        });
    }
    match &session.ground_truth {
        Some(gt) => Ok(target_choice_for_item(item, gt)),
        None => Err(PreferenceError::MissingGroundTruth(session.session_id.clone())),
    }
}

/// Error of a parsed answer against `truth`.
pub fn choice_error(parsed: ParsedChoice, truth: LikertChoice) -> ItemError {
    match parsed {
        ParsedChoice::Choice(c) => ItemError::Value(c.value().abs_diff(truth.value())),
        ParsedChoice::Refusal | ParsedChoice::Unparseable => ItemError::Undefined,
    }
}

/// Error of `response` against the ground truth stored in `session`.
pub fn item_error(response: &ItemResponse, session: &Session, inventory: &Inventory) -> Result<ItemError, PreferenceError> {
    let truth = true_choice(response.item_index, session, inventory)?;
    Ok(choice_error(response.parsed, truth))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferencePair {
    pub prompt: Vec<ChatMessage>,
    pub chosen: String,
    pub rejected: String,
    pub chosen_error: ItemError,
    pub rejected_error: ItemError,
    pub session_id: String,
    pub item_index: u8,
    /// Models that produced the chosen and the rejected answer.
    pub source_models: (String, String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SftExample {
    pub prompt: Vec<ChatMessage>,
    pub completion: String,
}

impl SftExample {
    pub fn from_pair(pair: &PreferencePair) -> Self {
        SftExample { prompt: pair.prompt.clone(), completion: pair.chosen.clone() }
    }
}

/// Pairs plus counts of the (session, item) groups that yielded none.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PairBuild {
    pub pairs: Vec<PreferencePair>,
    /// Fewer than two distinct models answered.
    pub skipped_single: usize,
    /// Best and worst answers had equal error and the same parsed choice.
    pub dropped_no_signal: usize,
    /// Even the best answer had no numeric error.
    pub dropped_undefined: usize,
    /// Session unknown or lacking ground truth.
    pub skipped_no_truth: usize,
}

struct Candidate<'a> {
    response: &'a ItemResponse,
    error: ItemError,
}

fn rank_key<'a>(c: &Candidate<'a>) -> (ItemError, usize, &'a str) {
    (c.error, c.response.raw_text.chars().count(), c.response.model_name.as_str())
}

/// Selects one chosen/rejected pair per (session, item).
///
/// The chosen answer has the smallest error, the rejected answer the largest.
/// Within equal error the shorter raw text wins, then the smaller model name.
/// Only the first answer of each model is considered. Output is ordered by
/// session id, then item index. `prompt_for` supplies the item prompt.
pub fn build_pairs<F>(responses: &[ItemResponse], sessions: &[Session], inventory: &Inventory, mut prompt_for: F) -> PairBuild
where
    F: FnMut(&Session, u8) -> Vec<ChatMessage>,
{
    let by_id: BTreeMap<&str, &Session> = sessions.iter().map(|s| (s.session_id.as_str(), s)).collect();
    let mut groups: BTreeMap<(&str, u8), Vec<&ItemResponse>> = BTreeMap::new();
    for r in responses {
        let group = groups.entry((r.session_id.as_str(), r.item_index)).or_default();
        if !group.iter().any(|g| g.model_name == r.model_name) {
            group.push(r);
        }
    }

    let mut out = PairBuild::default();
    for ((session_id, item_index), group) in groups {
        if group.len() < 2 {
            out.skipped_single += 1;
            continue;
        }
        let Some(session) = by_id.get(session_id) else {
            out.skipped_no_truth += 1;
            continue;
        };
        let Ok(truth) = true_choice(item_index, session, inventory) else {
            out.skipped_no_truth += 1;
            continue;
        };
        let mut cands: Vec<Candidate> =
            group.into_iter().map(|r| Candidate { response: r, error: choice_error(r.parsed, truth) }).collect();
        cands.sort_by(|a, b| rank_key(a).cmp(&rank_key(b)));

        let chosen = &cands[0];
        let worst = cands.last().map(|c| c.error).unwrap_or(ItemError::Undefined);
        let rejected = cands[1..].iter().find(|c| c.error == worst).unwrap_or(&cands[1]);

        if chosen.error == ItemError::Undefined {
            out.dropped_undefined += 1;
            continue;
        }
        if (chosen.error == rejected.error && chosen.response.parsed == rejected.response.parsed)
            || chosen.response.raw_text == rejected.response.raw_text
        {
            out.dropped_no_signal += 1;
            continue;
        }
        out.pairs.push(PreferencePair {
            prompt: prompt_for(session, item_index),
            chosen: chosen.response.raw_text.clone(),
            rejected: rejected.response.raw_text.clone(),
            chosen_error: chosen.error,
            rejected_error: rejected.error,
            session_id: String::from(session_id),
            item_index,
            source_models: (chosen.response.model_name.clone(), rejected.response.model_name.clone()),
        });
    }
    out
}
