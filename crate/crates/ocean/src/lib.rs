//! IO, backends, experiment orchestration and exports around `ocean-core`.

pub mod cli;
pub mod corpus_io;
pub mod gateway;
pub mod experiments;
pub mod prefs;
pub mod synth;
