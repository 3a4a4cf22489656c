//! Seeded synthetic counseling corpora for exercising the pipeline offline.
//!
//! Each client gets a latent trait profile drawn uniformly from
//! `[LATENT_MIN, LATENT_MAX]` and rounded to two decimals. Every client
//! utterance carries a cue tag with that profile, which the simulator backend
//! reads back. Ground truth is the scored answer sheet the simulator would
//! produce without noise, so noiseless runs recover it exactly.

use std::collections::BTreeMap;

use ocean_core::corpus::{Session, Utterance};
use ocean_core::inventory::{Inventory, ResponseSheet, ScoringPolicy};
use ocean_core::simulator::{format_cue, profile_choice};
use ocean_core::traits::TraitScores;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const LATENT_MIN: f64 = 1.5;
pub const LATENT_MAX: f64 = 4.5;

const COUNSELOR_LINES: [&str; 8] = [
    "How have things been since we last talked?",
    "What was that like for you?",
    "Can you tell me more about that?",
    "How did you respond when that happened?",
    "What would you like to be different?",
    "It sounds like that was difficult.",
    "What helps you when you feel this way?",
    "Let's look at that a little more closely.",
];

const CLIENT_LINES: [&str; 8] = [
    "Work has been busy and I keep thinking about it at night.",
    "I spent the weekend with friends, which was nice.",
    "I'm not sure, I usually just get on with things.",
    "My family keeps asking how I'm doing.",
    "I tried the exercise we discussed.",
    "Sometimes I feel like nobody notices the effort.",
    "I started a new project and planned it carefully.",
    "It was fine, I guess. A bit tiring.",
];

/// Shape of a generated corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub n_sessions: usize,
    pub seed: u64,
    /// Inclusive range of sessions per client.
    pub sessions_per_client: (usize, usize),
    /// Inclusive range of counselor/client exchanges per session.
    pub exchanges: (usize, usize),
}

impl SynthSpec {
    pub fn new(n_sessions: usize, seed: u64) -> Self {
        SynthSpec { n_sessions, seed, sessions_per_client: (1, 4), exchanges: (6, 20) }
    }
}

fn draw_latent(rng: &mut ChaCha8Rng) -> TraitScores {
    TraitScores::from_array(std::array::from_fn(|_| {
        let v: f64 = rng.random_range(LATENT_MIN..=LATENT_MAX);
        (v * 100.0).round() / 100.0
    }))
}

/// Generates `spec.n_sessions` sessions; identical specs give identical corpora.
pub fn simulate_corpus(spec: &SynthSpec, inventory: &Inventory) -> Vec<Session> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = Vec::with_capacity(spec.n_sessions);
    let mut client = 0usize;
    while out.len() < spec.n_sessions {
        let latent = draw_latent(&mut rng);
        let items: BTreeMap<u8, u8> =
            inventory.items().iter().map(|it| (it.index, profile_choice(it, &latent).value())).collect();
        let sheet = ResponseSheet::from_values(items.iter().map(|(k, v)| (*k, *v))).expect("choices in range");
        let truth = inventory.score_responses(&sheet, ScoringPolicy::Strict).expect("complete sheet");
        let cue = format_cue(&latent);
        let count = rng.random_range(spec.sessions_per_client.0..=spec.sessions_per_client.1);
        for _ in 0..count {
            if out.len() == spec.n_sessions {
                break;
            }
            let exchanges = rng.random_range(spec.exchanges.0..=spec.exchanges.1);
            let mut utterances = Vec::with_capacity(2 * exchanges);
            for _ in 0..exchanges {
                utterances.push(Utterance::counselor(COUNSELOR_LINES[rng.random_range(0..COUNSELOR_LINES.len())]));
                let line = CLIENT_LINES[rng.random_range(0..CLIENT_LINES.len())];
                utterances.push(Utterance::client(format!("{line} {cue}")));
            }
            out.push(Session {
                session_id: format!("syn{:05}", out.len() + 1),
                client_id: format!("client{:04}", client + 1),
                counselor_id: format!("counselor{}", client % 3 + 1),
                utterances,
                ground_truth: Some(truth),
                item_ground_truth: Some(items.clone()),
            });
        }
        client += 1;
    }
    out
}
