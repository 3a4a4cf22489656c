//! The 60-item BFI-2 instrument and its scoring rules.
//!
//! Item stems are compiled in. The domain/reverse key ships as a separate
//! tab-separated file (`data/bfi2.key`) whose SHA-256 is pinned in
//! [`BFI2_KEY_SHA256`] and checked every time an [`Inventory`] is built.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::traits::{Domain, TraitScores};

pub const ITEM_COUNT: usize = 60;
pub const ITEMS_PER_DOMAIN: usize = 12;

/// Bundled key file: `index<TAB>domain<TAB>R|+`, one line per item.
pub const BFI2_KEY: &str = include_str!("../data/bfi2.key");
pub const BFI2_KEY_SHA256: &str =
    "d8b5757ed54a1d1af34f58691f1fc1fc2e5f479a7ddb1dcad1a2ed8531dadedd";

/// Item stems, completing "I am someone who ...". Index `i` holds item `i + 1`.
pub const ITEM_TEXTS: [&str; ITEM_COUNT] = [
    "Is outgoing, sociable",
    "Is compassionate, has a soft heart",
    "Tends to be disorganized",
    "Is relaxed, handles stress well",
    "Has few artistic interests",
    "Has an assertive personality",
    "Is respectful, treats others with respect",
    "Tends to be lazy",
    "Stays optimistic after experiencing a setback",
    "Is curious about many different things",
    "Rarely feels excited or eager",
    "Tends to find fault with others",
    "Is dependable, steady",
    "Is moody, has up and down mood swings",
    "Is inventive, finds clever ways to do things",
    "Tends to be quiet",
    "Feels little sympathy for others",
    "Is systematic, likes to keep things in order",
    "Can be tense",
    "Is fascinated by art, music, or literature",
    "Is dominant, acts as a leader",
    "Starts arguments with others",
    "Has difficulty getting started on tasks",
    "Feels secure, comfortable with self",
    "Avoids intellectual, philosophical discussions",
    "Is less active than other people",
    "Has a forgiving nature",
    "Can be somewhat careless",
    "Is emotionally stable, not easily upset",
    "Has little creativity",
    "Is sometimes shy, introverted",
    "Is helpful and unselfish with others",
    "Keeps things neat and tidy",
    "Worries a lot",
    "Values art and beauty",
    "Finds it hard to influence people",
    "Is sometimes rude to others",
    "Is efficient, gets things done",
    "Often feels sad",
    "Is complex, a deep thinker",
    "Is full of energy",
    "Is suspicious of others’ intentions",
    "Is reliable, can always be counted on",
    "Keeps their emotions under control",
    "Has difficulty imagining things",
    "Is talkative",
    "Can be cold and uncaring",
    "Leaves a mess, doesn’t clean up",
    "Rarely feels anxious or afraid",
    "Thinks poetry and plays are boring",
    "Prefers to have others take charge",
    "Is polite, courteous to others",
    "Is persistent, works until the task is finished",
    "Tends to feel depressed, blue",
    "Has little interest in abstract ideas",
    "Shows a lot of enthusiasm",
    "Assumes the best about people",
    "Sometimes behaves irresponsibly",
    "Is temperamental, gets emotional easily",
    "Is original, comes up with new ideas",
];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InventoryError {
    #[error("key file checksum mismatch: expected {expected}, found {found}")]
    KeyFileCorrupt { expected: String, found: String },
    #[error("key file line {line}: {reason}")]
    KeyFileMalformed { line: usize, reason: String },
    #[error("item index {0} is outside 1..=60")]
    ItemOutOfRange(usize),
    #[error("Likert value {0} is outside 1..=5")]
    ChoiceOutOfRange(u8),
    #[error("incomplete sheet: domain {domain} has {answered} answered items, fewer than required")]
    IncompleteSheet { domain: Domain, answered: usize },
}

/// A 1–5 Likert answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct LikertChoice(u8);

impl LikertChoice {
    pub fn new(value: u8) -> Result<Self, InventoryError> {
        if (1..=5).contains(&value) {
            Ok(LikertChoice(value))
        } else {
            Err(InventoryError::ChoiceOutOfRange(value))
        }
    }

    pub fn value(self) -> u8 {
        self.0
    }

    /// The option label shown in prompts, e.g. `Agree (a little)`.
    pub fn label(self) -> &'static str {
        OPTION_LABELS[usize::from(self.0) - 1]
    }

    pub fn all() -> impl Iterator<Item = LikertChoice> {
        (1..=5).map(LikertChoice)
    }
}

impl TryFrom<u8> for LikertChoice {
    type Error = InventoryError;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        LikertChoice::new(value)
    }
}

impl From<LikertChoice> for u8 {
    fn from(c: LikertChoice) -> u8 {
        c.0
    }
}

impl fmt::Display for LikertChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub const OPTION_LABELS: [&str; 5] = [
    "Disagree (strongly)",
    "Disagree (a little)",
    "Neutral (no opinion)",
    "Agree (a little)",
    "Agree (strongly)",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InventoryItem {
    pub index: u8,
    pub text: String,
    pub domain: Domain,
    pub reverse_keyed: bool,
}

impl InventoryItem {
    /// Keyed contribution of `choice` to this item's domain score.
    pub fn keyed_value(&self, choice: LikertChoice) -> u8 {
        keyed_value(self, choice)
    }
}

/// Returns `choice` unchanged for forward items and `6 - choice` for reverse-keyed ones.
pub fn keyed_value(item: &InventoryItem, choice: LikertChoice) -> u8 {
    if item.reverse_keyed {
        6 - choice.value()
    } else {
        choice.value()
    }
}

/// Round half away from zero.
pub(crate) fn round_half_away(x: f64) -> f64 {
    libm::round(x)
}

/// The Likert answer a respondent with `traits` would give to `item` if
/// every answer tracked the domain score exactly.
pub fn target_choice_for_item(item: &InventoryItem, traits: &TraitScores) -> LikertChoice {
    let d = traits.get(item.domain);
    let raw = if item.reverse_keyed { 6.0 - d } else { d };
    let v = round_half_away(raw).clamp(1.0, 5.0);
    LikertChoice(v as u8)
}

/// A possibly partial set of answers keyed by item index (1..=60).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ResponseSheet {
    answers: BTreeMap<u8, LikertChoice>,
}

impl ResponseSheet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, index: u8, choice: LikertChoice) -> Result<Option<LikertChoice>, InventoryError> {
        if !(1..=ITEM_COUNT as u8).contains(&index) {
            return Err(InventoryError::ItemOutOfRange(usize::from(index)));
        }
        Ok(self.answers.insert(index, choice))
    }

    pub fn get(&self, index: u8) -> Option<LikertChoice> {
        self.answers.get(&index).copied()
    }

    pub fn len(&self) -> usize {
        self.answers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.answers.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u8, LikertChoice)> + '_ {
        self.answers.iter().map(|(k, v)| (*k, *v))
    }

    /// Builds a sheet from raw values; every value must be a valid Likert choice.
    pub fn from_values<I: IntoIterator<Item = (u8, u8)>>(values: I) -> Result<Self, InventoryError> {
        let mut sheet = ResponseSheet::new();
        for (idx, v) in values {
            sheet.insert(idx, LikertChoice::new(v)?)?;
        }
        Ok(sheet)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "policy")]
#[derive(Default)]
pub enum ScoringPolicy {
    /// All 60 items must be answered.
    #[default]
    Strict,
    /// Each domain needs at least `min_items` answers; the mean is taken over those.
    Prorate { min_items: usize },
}

impl ScoringPolicy {
    pub const DEFAULT_PRORATE_MIN: usize = 10;

    pub fn prorate() -> Self {
        ScoringPolicy::Prorate { min_items: Self::DEFAULT_PRORATE_MIN }
    }
}


/// Output scale for domain scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreScale {
    /// Item mean, 1–5.
    #[default]
    Mean,
    /// Sum over the 12 items, 12–60 (prorated when items are missing).
    Sum,
}

impl ScoreScale {
    pub fn apply(self, mean_score: f64) -> f64 {
        match self {
            ScoreScale::Mean => mean_score,
            ScoreScale::Sum => mean_score * ITEMS_PER_DOMAIN as f64,
        }
    }
}

/// The loaded instrument: item texts joined with the verified key.
#[derive(Debug, Clone, PartialEq)]
pub struct Inventory {
    items: Vec<InventoryItem>,
}

impl Inventory {
    /// The bundled BFI-2 instrument.
    pub fn bfi2() -> Result<Self, InventoryError> {
        Self::from_key_file(BFI2_KEY, BFI2_KEY_SHA256)
    }

    /// Parses a key file after verifying its SHA-256 against `expected_sha256` (lowercase hex).
    pub fn from_key_file(key: &str, expected_sha256: &str) -> Result<Self, InventoryError> {
        let found = sha256_hex(key.as_bytes());
        if !found.eq_ignore_ascii_case(expected_sha256) {
            return Err(InventoryError::KeyFileCorrupt {
                expected: expected_sha256.to_string(),
                found,
            });
        }
        let mut slots: [Option<(Domain, bool)>; ITEM_COUNT] = [None; ITEM_COUNT];
        for (n, line) in key.lines().enumerate() {
            let line_no = n + 1;
            if line.trim().is_empty() {
                continue;
            }
            let malformed = |reason: &str| InventoryError::KeyFileMalformed {
                line: line_no,
                reason: reason.to_string(),
            };
            let mut fields = line.split('\t');
            let (Some(idx), Some(dom), Some(rev), None) =
                (fields.next(), fields.next(), fields.next(), fields.next())
            else {
                return Err(malformed("expected three tab-separated fields"));
            };
            let idx: usize = idx.trim().parse().map_err(|_| malformed("bad index"))?;
            if !(1..=ITEM_COUNT).contains(&idx) {
                return Err(malformed("index outside 1..=60"));
            }
            let mut chars = dom.trim().chars();
            let domain = match (chars.next(), chars.next()) {
                (Some(c), None) => Domain::from_letter(c).ok_or_else(|| malformed("bad domain"))?,
                _ => return Err(malformed("bad domain")),
            };
            let reverse = match rev.trim() {
                "R" => true,
                "+" => false,
                _ => return Err(malformed("reverse flag must be R or +")),
            };
            if slots[idx - 1].replace((domain, reverse)).is_some() {
                return Err(malformed("duplicate index"));
            }
        }
        let mut items = Vec::with_capacity(ITEM_COUNT);
        for (i, slot) in slots.iter().enumerate() {
            let (domain, reverse_keyed) = slot.ok_or(InventoryError::KeyFileMalformed {
                line: 0,
                reason: alloc::format!("item {} missing", i + 1),
            })?;
            items.push(InventoryItem {
                index: (i + 1) as u8,
                text: ITEM_TEXTS[i].to_string(),
                domain,
                reverse_keyed,
            });
        }
        for domain in Domain::ALL {
            let count = items.iter().filter(|it| it.domain == domain).count();
            if count != ITEMS_PER_DOMAIN {
                return Err(InventoryError::KeyFileMalformed {
                    line: 0,
                    reason: alloc::format!("domain {domain} has {count} items, expected 12"),
                });
            }
        }
        Ok(Inventory { items })
    }

    pub fn items(&self) -> &[InventoryItem] {
        &self.items
    }

    pub fn item(&self, index: u8) -> Option<&InventoryItem> {
        let i = usize::from(index);
        if (1..=ITEM_COUNT).contains(&i) {
            Some(&self.items[i - 1])
        } else {
            None
        }
    }

    pub fn domain_items(&self, domain: Domain) -> impl Iterator<Item = &InventoryItem> {
        self.items.iter().filter(move |it| it.domain == domain)
    }

    /// Mean keyed value per domain over the answered items.
    pub fn score_responses(&self, sheet: &ResponseSheet, policy: ScoringPolicy) -> Result<TraitScores, InventoryError> {
        let mut sums = [0u32; 5];
        let mut counts = [0usize; 5];
        for (idx, choice) in sheet.iter() {
            let item = self.item(idx).ok_or(InventoryError::ItemOutOfRange(usize::from(idx)))?;
            let d = item.domain.index();
            sums[d] += u32::from(item.keyed_value(choice));
            counts[d] += 1;
        }
        let required = match policy {
            ScoringPolicy::Strict => ITEMS_PER_DOMAIN,
            ScoringPolicy::Prorate { min_items } => min_items.clamp(1, ITEMS_PER_DOMAIN),
        };
        let mut out = [0.0; 5];
        for domain in Domain::ALL {
            let d = domain.index();
            if counts[d] < required {
                return Err(InventoryError::IncompleteSheet { domain, answered: counts[d] });
            }
            out[d] = f64::from(sums[d]) / counts[d] as f64;
        }
        Ok(TraitScores::from_array(out))
    }

    /// The full sheet of [`target_choice_for_item`] answers for `traits`.
    pub fn target_sheet(&self, traits: &TraitScores) -> ResponseSheet {
        let mut sheet = ResponseSheet::new();
        for item in &self.items {
            sheet
                .insert(item.index, target_choice_for_item(item, traits))
                .expect("inventory indices are 1..=60");
        }
        sheet
    }
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest.iter() {
        let _ = fmt::Write::write_fmt(&mut s, format_args!("{b:02x}"));
    }
    s
}
