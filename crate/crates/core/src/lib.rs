//! Core logic for predicting Big Five traits from counseling dialogues.
//!
//! Everything here is allocation-only and free of IO: inventory scoring,
//! corpus validation and splitting, prompt assembly, answer extraction,
//! statistics, a deterministic answer simulator and preference-pair selection.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod corpus;
pub mod extraction;
pub mod inventory;
pub mod metrics;
pub mod preference;
pub mod prompting;
pub mod simulator;
pub mod special;
pub mod traits;

pub use inventory::{Inventory, InventoryItem, LikertChoice, ResponseSheet, ScoreScale, ScoringPolicy};
pub use traits::{Domain, TraitScores};
