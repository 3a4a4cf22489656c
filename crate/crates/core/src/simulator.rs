//! Deterministic stand-in for a chat model answering questionnaire items.
//!
//! Synthetic dialogues carry cue tags such as `[cue O=3.12 C=2.50 E=4.01 A=3.33 N=2.76]`
//! inside client utterances. The simulator reads the cues visible in a prompt,
//! perturbs the estimate with seeded Gaussian noise and answers every item the
//! way a respondent with that trait profile would.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::extraction::{parse_direct, ExtractionRules, ParsedDirect};
use crate::inventory::{target_choice_for_item, Inventory, InventoryItem, LikertChoice, ITEMS_PER_DOMAIN};
use crate::traits::{Domain, TraitScores};

/// Latent value assumed when a prompt carries no cue.
pub const NEUTRAL_LATENT: f64 = 3.0;

/// Opening of a cue tag.
pub const CUE_OPEN: &str = "[cue ";

/// Canned refusals; all are recognised by the default extraction rules.
pub const REFUSAL_TEXTS: [&str; 3] = [
    "As an AI model, I have no personality, so I cannot answer this question.",
    "As an AI model, I do not have a personality and am unable to answer.",
    "As an AI model I can't answer questions about my own feelings.",
];

/// Answer phrasings the simulator rotates through.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phrasing {
    /// `My choice is 4. Agree (a little). Reason: simulated.`
    Statement,
    /// `I would select option 4, Agree (a little). Reason: simulated.`
    Selection,
    /// `4. Agree (a little)` on its own line, reason below.
    OptionLine,
}

impl Phrasing {
    pub const ALL: [Phrasing; 3] = [Phrasing::Statement, Phrasing::Selection, Phrasing::OptionLine];
}

/// ASCII digits or their fullwidth forms (U+FF10..U+FF19).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DigitWidth {
    Ascii,
    Fullwidth,
}

impl DigitWidth {
    pub const ALL: [DigitWidth; 2] = [DigitWidth::Ascii, DigitWidth::Fullwidth];
}

fn render_digit(v: u8, width: DigitWidth) -> char {
    match width {
        DigitWidth::Ascii => (b'0' + v) as char,
        DigitWidth::Fullwidth => char::from_u32(0xFF10 + v as u32).unwrap_or('?'),
    }
}

/// Renders `choice` in one of the simulator's answer styles.
pub fn render_answer(choice: LikertChoice, phrasing: Phrasing, width: DigitWidth) -> String {
    let d = render_digit(choice.value(), width);
    let label = choice.label();
    match phrasing {
        Phrasing::Statement => format!("My choice is {d}. {label}. Reason: simulated."),
        Phrasing::Selection => format!("I would select option {d}, {label}. Reason: simulated."),
        Phrasing::OptionLine => format!("{d}. {label}\nReason: simulated."),
    }
}

/// Parameters of one simulated respondent model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimProfile {
    /// Standard deviation of the per-session, per-domain Gaussian perturbation.
    pub noise_sd: f64,
    /// Probability that any single answer is a refusal.
    pub refusal_rate: f64,
    /// Divide `noise_sd` by the square root of the number of cues seen.
    pub length_noise: bool,
    pub seed: u64,
}

impl Default for SimProfile {
    fn default() -> Self {
        SimProfile { noise_sd: 0.0, refusal_rate: 0.0, length_noise: false, seed: 42 }
    }
}

impl SimProfile {
    pub fn new(noise_sd: f64, refusal_rate: f64, seed: u64) -> Self {
        SimProfile { noise_sd, refusal_rate, length_noise: false, seed }
    }

    pub fn is_valid(&self) -> bool {
        self.noise_sd.is_finite() && self.noise_sd >= 0.0 && (0.0..=1.0).contains(&self.refusal_rate)
    }

    /// Effective noise for a prompt that exposed `cues` cue tags.
    pub fn effective_sd(&self, cues: usize) -> f64 {
        if self.length_noise {
            self.noise_sd / libm::sqrt(cues.max(1) as f64)
        } else {
            self.noise_sd
        }
    }
}

fn hash_u64(seed: u64, salt: &str, tag: &str, extra: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((salt.len() as u64).to_le_bytes());
    h.update(salt.as_bytes());
    h.update((tag.len() as u64).to_le_bytes());
    h.update(tag.as_bytes());
    h.update(extra.to_le_bytes());
    let out = h.finalize();
    let mut b = [0u8; 8];
    b.copy_from_slice(&out[..8]);
    u64::from_le_bytes(b)
}

fn unit_interval(x: u64) -> f64 {
    (x >> 11) as f64 / (1u64 << 53) as f64
}

/// Offset spreading a domain's items evenly over one Likert step, so that the
/// mean of the rounded answers tracks a fractional latent score.
pub fn item_offset(item: &InventoryItem) -> f64 {
    let rank = ((item.index as usize).saturating_sub(1) / Domain::ALL.len()) % ITEMS_PER_DOMAIN;
    (rank as f64 + 0.5) / ITEMS_PER_DOMAIN as f64 - 0.5
}

/// The answer a respondent whose domain scores are exactly `latent` gives to `item`.
pub fn profile_choice(item: &InventoryItem, latent: &TraitScores) -> LikertChoice {
    let mut shifted = *latent;
    shifted.set(item.domain, latent.get(item.domain) + item_offset(item));
    target_choice_for_item(item, &shifted)
}

/// Latent scores after the seeded per-session perturbation.
pub fn perturbed_latent(latent: &TraitScores, sd: f64, seed: u64, salt: &str) -> TraitScores {
    let mut out = *latent;
    if sd == 0.0 {
        return out;
    }
    for d in Domain::ALL {
        let mut rng = ChaCha8Rng::seed_from_u64(hash_u64(seed, salt, "noise", d.index() as u64));
        let z: f64 = StandardNormal.sample(&mut rng);
        out.set(d, latent.get(d) + sd * z);
    }
    out
}

/// Whether the answer keyed by (`salt`, `tag`, `extra`) is a refusal.
pub fn refuses(profile: &SimProfile, salt: &str, tag: &str, extra: u64) -> bool {
    profile.refusal_rate > 0.0 && unit_interval(hash_u64(profile.seed, salt, tag, extra)) < profile.refusal_rate
}

/// Simulated free-text answer to `item`.
pub fn simulate_item_answer(item: &InventoryItem, latent: &TraitScores, cues: usize, profile: &SimProfile, salt: &str) -> String {
    let idx = item.index as u64;
    if refuses(profile, salt, "refusal", idx) {
        let k = hash_u64(profile.seed, salt, "refusal-text", idx) as usize % REFUSAL_TEXTS.len();
        return String::from(REFUSAL_TEXTS[k]);
    }
    let noisy = perturbed_latent(latent, profile.effective_sd(cues), profile.seed, salt);
    let choice = profile_choice(item, &noisy);
    let style = hash_u64(profile.seed, salt, "style", idx);
    let phrasing = Phrasing::ALL[(style % 3) as usize];
    let width = DigitWidth::ALL[((style >> 8) % 2) as usize];
    render_answer(choice, phrasing, width)
}

/// Simulated answer to the direct five-score request.
pub fn simulate_direct_answer(latent: &TraitScores, cues: usize, profile: &SimProfile, salt: &str) -> String {
    if refuses(profile, salt, "direct-refusal", 0) {
        return String::from(REFUSAL_TEXTS[0]);
    }
    let (s, _) = perturbed_latent(latent, profile.effective_sd(cues), profile.seed, salt).clamped();
    let [o, c, e, a, n] = s.to_array();
    format!("O={o:.2} C={c:.2} E={e:.2} A={a:.2} N={n:.2}")
}

/// Renders a cue tag for `latent`, two decimals per domain.
pub fn format_cue(latent: &TraitScores) -> String {
    let [o, c, e, a, n] = latent.to_array();
    format!("{CUE_OPEN}O={o:.2} C={c:.2} E={e:.2} A={a:.2} N={n:.2}]")
}

/// Every cue tag found in `text`, in order.
pub fn parse_cues(text: &str, rules: &ExtractionRules) -> Vec<TraitScores> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(pos) = rest.find(CUE_OPEN) {
        let body = &rest[pos + CUE_OPEN.len()..];
        let end = body.find(']').unwrap_or(body.len());
        if let ParsedDirect::Scores { scores, .. } = parse_direct(&body[..end], rules) {
            out.push(scores);
        }
        rest = &body[end..];
    }
    out
}

/// Mean of all cues across `texts` and the number of cues seen.
/// Falls back to [`NEUTRAL_LATENT`] when none is present.
pub fn estimate_latent<'a, I>(texts: I, rules: &ExtractionRules) -> (TraitScores, usize)
where
    I: IntoIterator<Item = &'a str>,
{
    let cues: Vec<TraitScores> = texts.into_iter().flat_map(|t| parse_cues(t, rules)).collect();
    if cues.is_empty() {
        return (TraitScores::uniform(NEUTRAL_LATENT), 0);
    }
    let first = cues[0].to_array();
    let mut acc = [0.0; 5];
    for c in &cues {
        for (k, v) in c.to_array().iter().enumerate() {
            acc[k] += v - first[k];
        }
    }
    let n = cues.len() as f64;
    let mean = core::array::from_fn(|k| first[k] + acc[k] / n);
    (TraitScores::from_array(mean), cues.len())
}

/// Finds the questionnaire item quoted in `text`, preferring the longest match.
pub fn identify_item<'a>(text: &str, inventory: &'a Inventory) -> Option<&'a InventoryItem> {
    let lower = text.to_lowercase();
    inventory
        .items()
        .iter()
        .filter(|item| lower.contains(&item.text.to_lowercase()))
        .max_by_key(|item| item.text.len())
}
