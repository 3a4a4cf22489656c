//! Reading Likert choices, direct trait ratings and refusals out of
//! free-text completions.
//!
//! Choice parsing is total. Rules are tried in a fixed order and the first
//! match wins:
//!
//! 1. any refusal phrase anywhere in the text → [`ParsedChoice::Refusal`];
//! 2. a choice keyword (`choice`, `option`, `select`, `选择`) followed within
//!    [`KEYWORD_WINDOW`] characters by a standalone digit 1–5;
//! 3. a line starting with a digit 1–5, then `.` or `、`, that also names an
//!    option label (Disagree / Neutral / Agree or the Chinese equivalents);
//! 4. the first standalone digit 1–5 of the first sentence;
//!
//! and otherwise [`ParsedChoice::Unparseable`]. Digits may be ASCII or fullwidth.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::inventory::{LikertChoice, ResponseSheet};
use crate::prompting::PromptCondition;
use crate::traits::TraitScores;

/// Characters after a choice keyword searched for the digit.
pub const KEYWORD_WINDOW: usize = 12;

/// Bundled rule file.
pub const DEFAULT_RULES: &str = include_str!("../data/extraction.rules");

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExtractionError {
    #[error("rules line {line}: {reason}")]
    BadRules { line: usize, reason: String },
    #[error("item {0} answered more than once")]
    DuplicateItem(u8),
    #[error("no responses")]
    EmptyInput,
}

/// Phrase lists driving [`parse_choice`] and [`parse_direct`]. All entries are
/// stored lowercased.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractionRules {
    pub refusal: Vec<String>,
    pub keyword: Vec<String>,
    pub option_label: Vec<String>,
}

impl Default for ExtractionRules {
    fn default() -> Self {
        Self::parse(DEFAULT_RULES).expect("bundled rules parse")
    }
}

impl ExtractionRules {
    /// Parses the sectioned one-pattern-per-line format: `[refusal]`,
    /// `[keyword]` and `[option_label]` headers, `#` comments.
    pub fn parse(text: &str) -> Result<Self, ExtractionError> {
        let mut rules = ExtractionRules { refusal: Vec::new(), keyword: Vec::new(), option_label: Vec::new() };
        let mut section: Option<&str> = None;
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = match name {
                    "refusal" | "keyword" | "option_label" => Some(name),
                    _ => {
                        return Err(ExtractionError::BadRules {
                            line: n + 1,
                            reason: alloc::format!("unknown section `{name}`"),
                        })
                    }
                };
                continue;
            }
            let target = match section {
                Some("refusal") => &mut rules.refusal,
                Some("keyword") => &mut rules.keyword,
                Some(_) => &mut rules.option_label,
                None => {
                    return Err(ExtractionError::BadRules { line: n + 1, reason: "pattern before any section".to_string() })
                }
            };
            target.push(line.to_lowercase());
        }
        Ok(rules)
    }

    pub fn is_refusal(&self, text: &str) -> bool {
        let lower = text.to_lowercase();
        self.refusal.iter().any(|p| lower.contains(p.as_str()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParsedChoice {
    Choice(LikertChoice),
    Refusal,
    Unparseable,
}

impl ParsedChoice {
    pub fn choice(self) -> Option<LikertChoice> {
        match self {
            ParsedChoice::Choice(c) => Some(c),
            _ => None,
        }
    }
}

/// Value of an ASCII or fullwidth decimal digit.
fn digit_value(c: char) -> Option<u8> {
    match c {
        '0'..='9' => Some(c as u8 - b'0'),
        '０'..='９' => Some((c as u32 - '０' as u32) as u8),
        _ => None,
    }
}

/// Likert value of the digit at `i` if it is 1–5 and not part of a longer number.
fn standalone_likert(chars: &[char], i: usize) -> Option<LikertChoice> {
    let v = digit_value(chars[i])?;
    let before = i.checked_sub(1).map(|j| chars[j]);
    let after = chars.get(i + 1).copied();
    let joined = |c: Option<char>| c.is_some_and(|c| digit_value(c).is_some());
    // Either digit of "4.5" belongs to a decimal, not a choice.
    let is_digit_at = |j: Option<usize>| j.and_then(|j| chars.get(j)).is_some_and(|c| digit_value(*c).is_some());
    let decimal = (after == Some('.') && is_digit_at(Some(i + 2))) || (before == Some('.') && is_digit_at(i.checked_sub(2)));
    if joined(before) || joined(after) || decimal {
        return None;
    }
    LikertChoice::new(v).ok()
}

fn find_all(haystack: &[char], needle: &[char]) -> Vec<usize> {
    if needle.is_empty() || needle.len() > haystack.len() {
        return Vec::new();
    }
    (0..=haystack.len() - needle.len()).filter(|&i| haystack[i..i + needle.len()] == *needle).collect()
}

fn keyword_rule(chars: &[char], rules: &ExtractionRules) -> Option<LikertChoice> {
    let mut hits: Vec<(usize, usize)> = Vec::new();
    for kw in &rules.keyword {
        let kw: Vec<char> = kw.chars().collect();
        hits.extend(find_all(chars, &kw).into_iter().map(|p| (p, p + kw.len())));
    }
    hits.sort_unstable();
    for (_, end) in hits {
        let stop = (end + KEYWORD_WINDOW).min(chars.len());
        for i in end..stop {
            if let Some(c) = standalone_likert(chars, i) {
                return Some(c);
            }
        }
    }
    None
}

fn option_line_rule(lower: &str, rules: &ExtractionRules) -> Option<LikertChoice> {
    for line in lower.lines() {
        let chars: Vec<char> = line.trim_start().chars().collect();
        if chars.len() < 2 {
            continue;
        }
        let Some(v) = digit_value(chars[0]) else { continue };
        if digit_value(chars[1]).is_some() || !matches!(chars[1], '.' | '、' | '．') {
            continue;
        }
        let rest: String = chars[2..].iter().collect();
        if rules.option_label.iter().any(|w| rest.contains(w.as_str())) {
            if let Ok(c) = LikertChoice::new(v) {
                return Some(c);
            }
        }
    }
    None
}

fn first_sentence_rule(chars: &[char]) -> Option<LikertChoice> {
    for i in 0..chars.len() {
        let c = chars[i];
        let terminator = match c {
            '!' | '?' | '。' | '！' | '？' | '\n' => true,
            // A period between digits is a decimal point.
            '.' => !(i > 0
                && digit_value(chars[i - 1]).is_some()
                && chars.get(i + 1).is_some_and(|n| digit_value(*n).is_some())),
            _ => false,
        };
        if terminator {
            break;
        }
        if let Some(choice) = standalone_likert(chars, i) {
            return Some(choice);
        }
    }
    None
}

/// Parses one questionnaire answer; see the module docs for rule order.
pub fn parse_choice(text: &str, rules: &ExtractionRules) -> ParsedChoice {
    if rules.is_refusal(text) {
        return ParsedChoice::Refusal;
    }
    let lower = text.to_lowercase();
    let chars: Vec<char> = lower.chars().collect();
    keyword_rule(&chars, rules)
        .or_else(|| option_line_rule(&lower, rules))
        .or_else(|| first_sentence_rule(&chars))
        .map_or(ParsedChoice::Unparseable, ParsedChoice::Choice)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParsedDirect {
    /// Five ratings clamped to `[1, 5]`; `clamped` records whether any moved.
    Scores { scores: TraitScores, clamped: bool },
    Refusal,
    Unparseable,
}

/// Reads a number at `chars[*i..]`: optional sign, digits, optional fraction.
fn read_number(chars: &[char], i: &mut usize) -> Option<f64> {
    let start = *i;
    let mut s = String::new();
    if let Some(&c) = chars.get(*i) {
        if c == '-' || c == '+' {
            s.push(c);
            *i += 1;
        }
    }
    let mut digits = 0;
    while let Some(&c) = chars.get(*i) {
        match digit_value(c) {
            Some(d) => {
                s.push((b'0' + d) as char);
                digits += 1;
                *i += 1;
            }
            None if c == '.' && !s.contains('.') && chars.get(*i + 1).is_some_and(|n| digit_value(*n).is_some()) => {
                s.push('.');
                *i += 1;
            }
            None => break,
        }
    }
    if digits == 0 {
        *i = start;
        return None;
    }
    s.parse().ok()
}

fn skip_ws(chars: &[char], i: &mut usize) {
    while chars.get(*i).is_some_and(|c| c.is_whitespace()) {
        *i += 1;
    }
}

fn labeled_scores_at(chars: &[char], start: usize) -> Option<[f64; 5]> {
    let mut i = start;
    let mut out = [0.0; 5];
    for (k, label) in ['O', 'C', 'E', 'A', 'N'].into_iter().enumerate() {
        if k > 0 {
            let before = i;
            while chars.get(i).is_some_and(|c| c.is_whitespace() || matches!(c, ',' | ';' | '，' | '；')) {
                i += 1;
            }
            if i == before {
                return None;
            }
        }
        if chars.get(i) != Some(&label) {
            return None;
        }
        i += 1;
        skip_ws(chars, &mut i);
        if chars.get(i) != Some(&'=') {
            return None;
        }
        i += 1;
        skip_ws(chars, &mut i);
        out[k] = read_number(chars, &mut i)?;
    }
    Some(out)
}

/// Parses a direct `O=<x> C=<x> E=<x> A=<x> N=<x>` rating line.
pub fn parse_direct(text: &str, rules: &ExtractionRules) -> ParsedDirect {
    if rules.is_refusal(text) {
        return ParsedDirect::Refusal;
    }
    let chars: Vec<char> = text.chars().collect();
    for (i, c) in chars.iter().enumerate() {
        if *c != 'O' {
            continue;
        }
        if i > 0 && chars[i - 1].is_alphanumeric() {
            continue;
        }
        if let Some(values) = labeled_scores_at(&chars, i) {
            let (scores, clamped) = TraitScores::from_array(values).clamped();
            return ParsedDirect::Scores { scores, clamped };
        }
    }
    ParsedDirect::Unparseable
}

/// One model answer to one questionnaire item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemResponse {
    pub session_id: String,
    pub item_index: u8,
    pub raw_text: String,
    pub parsed: ParsedChoice,
    pub model_name: String,
    pub condition: PromptCondition,
}

/// One model answer to a direct rating prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectResponse {
    pub session_id: String,
    pub raw_text: String,
    pub parsed: ParsedDirect,
    pub model_name: String,
    pub condition: PromptCondition,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AssembledSheet {
    pub sheet: ResponseSheet,
    pub refused: Vec<u8>,
    pub unparseable: Vec<u8>,
}

/// Collects one session's item responses into a sheet; refusals and
/// unparseable answers are listed separately in ascending item order.
pub fn assemble_sheet<'a, I>(responses: I) -> Result<AssembledSheet, ExtractionError>
where
    I: IntoIterator<Item = &'a ItemResponse>,
{
    let mut out = AssembledSheet::default();
    let mut seen = [false; 61];
    for r in responses {
        let idx = usize::from(r.item_index);
        if idx == 0 || idx > 60 {
            continue;
        }
        if core::mem::replace(&mut seen[idx], true) {
            return Err(ExtractionError::DuplicateItem(r.item_index));
        }
        match r.parsed {
            ParsedChoice::Choice(c) => {
                out.sheet.insert(r.item_index, c).expect("index checked above");
            }
            ParsedChoice::Refusal => out.refused.push(r.item_index),
            ParsedChoice::Unparseable => out.unparseable.push(r.item_index),
        }
    }
    out.refused.sort_unstable();
    out.unparseable.sort_unstable();
    Ok(out)
}

/// Share of responses classified as refusals. Unparseable answers are not refusals.
pub fn rejection_rate<'a, I>(responses: I) -> Result<f64, ExtractionError>
where
    I: IntoIterator<Item = &'a ParsedChoice>,
{
    let (mut total, mut refused) = (0usize, 0usize);
    for p in responses {
        total += 1;
        if *p == ParsedChoice::Refusal {
            refused += 1;
        }
    }
    if total == 0 {
        return Err(ExtractionError::EmptyInput);
    }
    Ok(refused as f64 / total as f64)
}
