//! The five Big Five domains and a profile of scores over them.

use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One of the five BFI-2 domains.
///
/// Declaration order (O, C, E, A, N) is the column order of every table this
/// crate renders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Domain {
    #[serde(rename = "O")]
    OpenMindedness,
    #[serde(rename = "C")]
    Conscientiousness,
    #[serde(rename = "E")]
    Extraversion,
    #[serde(rename = "A")]
    Agreeableness,
    #[serde(rename = "N")]
    NegativeEmotionality,
}

impl Domain {
    pub const ALL: [Domain; 5] = [
        Domain::OpenMindedness,
        Domain::Conscientiousness,
        Domain::Extraversion,
        Domain::Agreeableness,
        Domain::NegativeEmotionality,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn letter(self) -> char {
        match self {
            Domain::OpenMindedness => 'O',
            Domain::Conscientiousness => 'C',
            Domain::Extraversion => 'E',
            Domain::Agreeableness => 'A',
            Domain::NegativeEmotionality => 'N',
        }
    }

    pub fn from_letter(c: char) -> Option<Domain> {
        Some(match c {
            'O' => Domain::OpenMindedness,
            'C' => Domain::Conscientiousness,
            'E' => Domain::Extraversion,
            'A' => Domain::Agreeableness,
            'N' => Domain::NegativeEmotionality,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Domain::OpenMindedness => "Open Mindedness",
            Domain::Conscientiousness => "Conscientiousness",
            Domain::Extraversion => "Extraversion",
            Domain::Agreeableness => "Agreeableness",
            Domain::NegativeEmotionality => "Negative Emotionality",
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{domain} score {value} is outside [1, 5]")]
pub struct TraitOutOfRange {
    pub domain: Domain,
    pub value: f64,
}

/// A trait profile on the 1–5 mean-item scale.
///
/// Serialized with the single-letter keys `O`, `C`, `E`, `A`, `N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraitScores {
    #[serde(rename = "O")]
    pub open_mindedness: f64,
    #[serde(rename = "C")]
    pub conscientiousness: f64,
    #[serde(rename = "E")]
    pub extraversion: f64,
    #[serde(rename = "A")]
    pub agreeableness: f64,
    #[serde(rename = "N")]
    pub negative_emotionality: f64,
}

impl TraitScores {
    pub const MIN: f64 = 1.0;
    pub const MAX: f64 = 5.0;

    pub fn from_array(values: [f64; 5]) -> Self {
        TraitScores {
            open_mindedness: values[0],
            conscientiousness: values[1],
            extraversion: values[2],
            agreeableness: values[3],
            negative_emotionality: values[4],
        }
    }

    /// All five dimensions set to `value`.
    pub fn uniform(value: f64) -> Self {
        Self::from_array([value; 5])
    }

    pub fn to_array(&self) -> [f64; 5] {
        [
            self.open_mindedness,
            self.conscientiousness,
            self.extraversion,
            self.agreeableness,
            self.negative_emotionality,
        ]
    }

    pub fn get(&self, domain: Domain) -> f64 {
        self.to_array()[domain.index()]
    }

    pub fn set(&mut self, domain: Domain, value: f64) {
        let mut values = self.to_array();
        values[domain.index()] = value;
        *self = Self::from_array(values);
    }

    /// Checks every dimension lies in `[1, 5]`.
    pub fn validate(&self) -> Result<(), TraitOutOfRange> {
        for domain in Domain::ALL {
            let value = self.get(domain);
            if !(Self::MIN..=Self::MAX).contains(&value) {
                return Err(TraitOutOfRange { domain, value });
            }
        }
        Ok(())
    }

    /// Clamps each dimension into `[1, 5]`; returns the clamped profile and
    /// whether anything moved.
    pub fn clamped(&self) -> (Self, bool) {
        let mut changed = false;
        let values = self.to_array().map(|v| {
            let c = v.clamp(Self::MIN, Self::MAX);
            if c != v {
                changed = true;
            }
            c
        });
        (Self::from_array(values), changed)
    }
}
