//! Counseling sessions and the pure corpus operations: truncation, splitting,
//! descriptive statistics and a heuristic anonymization audit.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::inventory::{Inventory, ResponseSheet, ScoringPolicy};
use crate::traits::{Domain, TraitScores};

/// Maximum per-dimension difference tolerated between stored ground truth
/// and the score recomputed from item answers.
pub const GROUND_TRUTH_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    Counselor,
    Client,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Utterance {
    pub speaker: Speaker,
    pub text: String,
}

impl Utterance {
    pub fn new(speaker: Speaker, text: impl Into<String>) -> Self {
        Utterance { speaker, text: text.into() }
    }

    pub fn counselor(text: impl Into<String>) -> Self {
        Self::new(Speaker::Counselor, text)
    }

    pub fn client(text: impl Into<String>) -> Self {
        Self::new(Speaker::Client, text)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Session {
    pub session_id: String,
    pub client_id: String,
    pub counselor_id: String,
    pub utterances: Vec<Utterance>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<TraitScores>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub item_ground_truth: Option<BTreeMap<u8, u8>>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SessionError {
    #[error("session has no utterances")]
    NoUtterances,
    #[error("utterance {0} is empty")]
    EmptyUtterance(usize),
    #[error("ground truth invalid: {0}")]
    GroundTruthRange(#[from] crate::traits::TraitOutOfRange),
    #[error("item ground truth invalid: {0}")]
    ItemGroundTruth(String),
    #[error("ground truth for {domain} differs from item answers by {delta}")]
    InconsistentGroundTruth { domain: Domain, delta: f64 },
}

impl Session {
    /// Checks the per-record invariants: non-empty utterances, trait range, and
    /// agreement between `ground_truth` and scored `item_ground_truth`.
    pub fn validate(&self, inventory: &Inventory) -> Result<(), SessionError> {
        if self.utterances.is_empty() {
            return Err(SessionError::NoUtterances);
        }
        if let Some(i) = self.utterances.iter().position(|u| u.text.trim().is_empty()) {
            return Err(SessionError::EmptyUtterance(i));
        }
        if let Some(gt) = &self.ground_truth {
            gt.validate()?;
        }
        if let Some(items) = &self.item_ground_truth {
            let sheet = ResponseSheet::from_values(items.iter().map(|(k, v)| (*k, *v)))
                .map_err(|e| SessionError::ItemGroundTruth(e.to_string()))?;
            if let Some(gt) = &self.ground_truth {
                let scored = inventory
                    .score_responses(&sheet, ScoringPolicy::Strict)
                    .map_err(|e| SessionError::ItemGroundTruth(e.to_string()))?;
                for domain in Domain::ALL {
                    let delta = (scored.get(domain) - gt.get(domain)).abs();
                    if delta > GROUND_TRUTH_TOLERANCE {
                        return Err(SessionError::InconsistentGroundTruth { domain, delta });
                    }
                }
            }
        }
        Ok(())
    }

    /// The item answers as a sheet, when present and valid.
    pub fn item_sheet(&self) -> Option<ResponseSheet> {
        let items = self.item_ground_truth.as_ref()?;
        ResponseSheet::from_values(items.iter().map(|(k, v)| (*k, *v))).ok()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CorpusError {
    #[error("fraction {0} is outside the allowed range")]
    InvalidFraction(f64),
    #[error("corpus is empty")]
    EmptyCorpus,
}

/// Keeps the first `max(1, ceil(fraction * n))` utterances.
pub fn truncate(session: &Session, fraction: f64) -> Result<Session, CorpusError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(CorpusError::InvalidFraction(fraction));
    }
    let keep = truncated_len(session.utterances.len(), fraction);
    let mut out = session.clone();
    out.utterances.truncate(keep);
    Ok(out)
}

/// Number of utterances kept out of `n` at `fraction`.
pub fn truncated_len(n: usize, fraction: f64) -> usize {
    // The 1e-9 slack keeps 0.3 * 10 (= 3.0000000000000004) at 3.
    let k = libm::ceil(fraction * n as f64 - 1e-9) as usize;
    k.clamp(1, n.max(1)).min(n)
}

/// Deterministic seeded split into (train, validation). Both halves keep the
/// input order.
///
/// With `group_by_client`, whole clients are moved to validation in shuffled
/// order until the validation set reaches the target size, so the two halves
/// share no client; the validation size may then overshoot the target.
pub fn split(
    sessions: &[Session],
    validation_fraction: f64,
    seed: u64,
    group_by_client: bool,
) -> Result<(Vec<Session>, Vec<Session>), CorpusError> {
    if !(validation_fraction > 0.0 && validation_fraction < 1.0) {
        return Err(CorpusError::InvalidFraction(validation_fraction));
    }
    let n = sessions.len();
    let target = libm::round(validation_fraction * n as f64) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_validation = alloc::vec![false; n];

    if group_by_client {
        let mut clients: Vec<&str> = sessions
            .iter()
            .map(|s| s.client_id.as_str())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        clients.shuffle(&mut rng);
        let mut taken = 0;
        for client in clients {
            if taken >= target {
                break;
            }
            for (i, s) in sessions.iter().enumerate() {
                if s.client_id == client {
                    in_validation[i] = true;
                    taken += 1;
                }
            }
        }
    } else {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        for &i in order.iter().take(target) {
            in_validation[i] = true;
        }
    }

    let mut train = Vec::with_capacity(n - target.min(n));
    let mut validation = Vec::with_capacity(target);
    for (s, v) in sessions.iter().zip(in_validation) {
        if v {
            validation.push(s.clone());
        } else {
            train.push(s.clone());
        }
    }
    Ok((train, validation))
}

/// Descriptive statistics in the layout of a dialogue-corpus summary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub n_sessions: usize,
    pub n_clients: usize,
    pub n_counselors: usize,
    pub n_utterances_total: usize,
    pub n_utterances_counselor: usize,
    pub n_utterances_client: usize,
    pub n_chars_counselor: usize,
    pub n_chars_client: usize,
    pub avg_utterances_per_dialogue: f64,
    pub avg_counselor_utterances_per_dialogue: f64,
    pub avg_client_utterances_per_dialogue: f64,
    pub avg_length_per_utterance: f64,
    pub avg_length_counselor: f64,
    pub avg_length_client: f64,
    pub avg_sessions_per_client: f64,
    pub avg_sessions_per_counselor: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn corpus_stats(sessions: &[Session]) -> Result<CorpusStats, CorpusError> {
    if sessions.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    let mut clients = BTreeSet::new();
    let mut counselors = BTreeSet::new();
    let (mut n_co, mut n_cl, mut ch_co, mut ch_cl) = (0usize, 0usize, 0usize, 0usize);
    for s in sessions {
        clients.insert(s.client_id.as_str());
        counselors.insert(s.counselor_id.as_str());
        for u in &s.utterances {
            let len = u.text.chars().count();
            match u.speaker {
                Speaker::Counselor => {
                    n_co += 1;
                    ch_co += len;
                }
                Speaker::Client => {
                    n_cl += 1;
                    ch_cl += len;
                }
            }
        }
    }
    let n = sessions.len();
    let total = n_co + n_cl;
    Ok(CorpusStats {
        n_sessions: n,
        n_clients: clients.len(),
        n_counselors: counselors.len(),
        n_utterances_total: total,
        n_utterances_counselor: n_co,
        n_utterances_client: n_cl,
        n_chars_counselor: ch_co,
        n_chars_client: ch_cl,
        avg_utterances_per_dialogue: ratio(total, n),
        avg_counselor_utterances_per_dialogue: ratio(n_co, n),
        avg_client_utterances_per_dialogue: ratio(n_cl, n),
        avg_length_per_utterance: ratio(ch_co + ch_cl, total),
        avg_length_counselor: ratio(ch_co, n_co),
        avg_length_client: ratio(ch_cl, n_cl),
        avg_sessions_per_client: ratio(n, clients.len()),
        avg_sessions_per_counselor: ratio(n, counselors.len()),
    })
}

/// Placeholder markers assumed to indicate already-scrubbed text.
pub const DEFAULT_PLACEHOLDER_MARKERS: [&str; 6] = ["[NAME]", "[PHONE]", "[EMAIL]", "[ADDRESS]", "[ID]", "[LOCATION]"];

/// Shortest digit run flagged as a possible phone or ID number.
pub const MIN_DIGIT_RUN: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FindingKind {
    DigitRun,
    EmailLike,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnonFinding {
    pub utterance_index: usize,
    pub kind: FindingKind,
    pub excerpt: String,
}

fn is_any_digit(c: char) -> bool {
    c.is_ascii_digit() || ('０'..='９').contains(&c)
}

/// Flags utterances that carry none of `markers` but contain a long digit
/// run or an `@`-token. An empty result is not a guarantee of anonymity.
pub fn audit_anonymization(session: &Session, markers: &[&str]) -> Vec<AnonFinding> {
    let mut findings = Vec::new();
    for (i, u) in session.utterances.iter().enumerate() {
        if markers.iter().any(|m| !m.is_empty() && u.text.contains(m)) {
            continue;
        }
        let mut run = String::new();
        let flush = |run: &mut String, findings: &mut Vec<AnonFinding>| {
            if run.chars().count() >= MIN_DIGIT_RUN {
                findings.push(AnonFinding {
                    utterance_index: i,
                    kind: FindingKind::DigitRun,
                    excerpt: run.clone(),
                });
            }
            run.clear();
        };
        for c in u.text.chars() {
            if is_any_digit(c) {
                run.push(c);
            } else {
                flush(&mut run, &mut findings);
            }
        }
        flush(&mut run, &mut findings);
        for token in u.text.split_whitespace() {
            if let Some(at) = token.find('@') {
                if at > 0 && at + 1 < token.len() {
                    findings.push(AnonFinding {
                        utterance_index: i,
                        kind: FindingKind::EmailLike,
                        excerpt: token.to_string(),
                    });
                }
            }
        }
    }
    findings
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use alloc::vec;

    fn session(n: usize) -> Session {
        Session {
            session_id: "s".into(),
            client_id: "c".into(),
            counselor_id: "t".into(),
            utterances: (0..n)
                .map(|i| {
                    if i % 2 == 0 {
                        Utterance::counselor(format!("u{i}"))
                    } else {
                        Utterance::client(format!("u{i}"))
                    }
                })
                .collect(),
            ground_truth: None,
            item_ground_truth: None,
        }
    }

    #[test]
    fn truncate_examples() {
        assert_eq!(truncate(&session(10), 1.0).unwrap().utterances.len(), 10);
        let t = truncate(&session(10), 0.3).unwrap();
        assert_eq!(t.utterances, session(10).utterances[..3].to_vec());
        assert_eq!(truncate(&session(7), 0.3).unwrap().utterances.len(), 3);
        assert_eq!(truncate(&session(5), 0.01).unwrap().utterances.len(), 1);
    }

    #[test]
    fn truncate_rejects_bad_fraction() {
        for f in [0.0, -0.1, 1.01, f64::NAN] {
            assert!(matches!(truncate(&session(3), f), Err(CorpusError::InvalidFraction(_))));
        }
    }

    #[test]
    fn truncated_len_matches_exact_ceiling() {
        // Brute-force oracle: ceil(t * n / 10) in integer arithmetic for fraction t/10.
        for n in 1..=100usize {
            for tenth in 1..=10usize {
                let expected = (tenth * n).div_ceil(10).max(1);
                let fraction = tenth as f64 / 10.0;
                assert_eq!(truncated_len(n, fraction), expected, "n={n} fraction={fraction}");
            }
        }
    }

    fn sessions(n: usize) -> Vec<Session> {
        (0..n)
            .map(|i| {
                let mut s = session(2);
                s.session_id = format!("s{i}");
                s.client_id = format!("c{}", i / 3);
                s
            })
            .collect()
    }

    #[test]
    fn split_sizes_and_determinism() {
        let all = sessions(10);
        let (train, val) = split(&all, 0.3, 42, false).unwrap();
        assert_eq!((train.len(), val.len()), (7, 3));
        assert_eq!(split(&all, 0.3, 42, false).unwrap(), (train.clone(), val.clone()));
        let ids: BTreeSet<_> = train.iter().chain(val.iter()).map(|s| s.session_id.clone()).collect();
        assert_eq!(ids.len(), 10);
    }

    #[test]
    fn split_reported_corpus_sizes() {
        let all = sessions(853);
        let (train, val) = split(&all, 0.284, 42, false).unwrap();
        assert_eq!((val.len(), train.len()), (242, 611));
    }

    #[test]
    fn split_by_client_is_client_disjoint() {
        let all = sessions(30);
        let (train, val) = split(&all, 0.3, 7, true).unwrap();
        let tc: BTreeSet<_> = train.iter().map(|s| &s.client_id).collect();
        let vc: BTreeSet<_> = val.iter().map(|s| &s.client_id).collect();
        assert!(tc.is_disjoint(&vc));
        assert_eq!(train.len() + val.len(), 30);
        assert!(val.len() >= 9);
    }

    #[test]
    fn split_rejects_bad_fraction() {
        assert!(split(&sessions(4), 0.0, 1, false).is_err());
        assert!(split(&sessions(4), 1.0, 1, false).is_err());
    }

    #[test]
    fn stats_examples() {
        let mut s = session(0);
        s.utterances = vec![
            Utterance::counselor("ab"),
            Utterance::counselor("cd"),
            Utterance::client("efg"),
            Utterance::client("hijk"),
        ];
        let st = corpus_stats(&[s]).unwrap();
        assert_eq!(st.avg_utterances_per_dialogue, 4.0);
        assert_eq!(st.avg_length_per_utterance, 2.75);
        assert_eq!(st.n_utterances_total, st.n_utterances_counselor + st.n_utterances_client);
        assert!(matches!(corpus_stats(&[]), Err(CorpusError::EmptyCorpus)));
    }

    #[test]
    fn stats_count_characters_not_bytes() {
        let mut s = session(0);
        s.utterances = vec![Utterance::client("你好")];
        assert_eq!(corpus_stats(&[s]).unwrap().avg_length_per_utterance, 2.0);
    }

    #[test]
    fn audit_examples() {
        let mut s = session(0);
        s.utterances = vec![Utterance::client("call me at 13812345678")];
        let f = audit_anonymization(&s, &DEFAULT_PLACEHOLDER_MARKERS);
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].kind, FindingKind::DigitRun);
        assert_eq!(f[0].excerpt, "13812345678");

        s.utterances = vec![Utterance::client("I met [NAME] yesterday")];
        assert!(audit_anonymization(&s, &["[NAME]"]).is_empty());

        s.utterances = vec![Utterance::client("hello there")];
        assert!(audit_anonymization(&s, &DEFAULT_PLACEHOLDER_MARKERS).is_empty());

        s.utterances = vec![Utterance::counselor("mail a.b@example.com please"), Utterance::client("born 1990")];
        let f = audit_anonymization(&s, &DEFAULT_PLACEHOLDER_MARKERS);
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].kind, FindingKind::EmailLike);
        assert_eq!(f[0].utterance_index, 0);
    }

    #[test]
    fn validate_catches_inconsistent_ground_truth() {
        let inv = Inventory::bfi2().unwrap();
        let mut s = session(2);
        s.item_ground_truth = Some((1..=60).map(|i| (i, 3)).collect());
        let mut gt = TraitScores::uniform(3.0);
        s.ground_truth = Some(gt);
        assert!(s.validate(&inv).is_ok());
        gt.extraversion = 4.0;
        s.ground_truth = Some(gt);
        assert!(matches!(
            s.validate(&inv),
            Err(SessionError::InconsistentGroundTruth { domain: Domain::Extraversion, .. })
        ));
    }

    #[test]
    fn validate_catches_empty_text() {
        let inv = Inventory::bfi2().unwrap();
        let mut s = session(2);
        s.utterances[1].text = "  ".into();
        assert_eq!(s.validate(&inv), Err(SessionError::EmptyUtterance(1)));
        s.utterances.clear();
        assert_eq!(s.validate(&inv), Err(SessionError::NoUtterances));
    }
}
