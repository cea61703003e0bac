//! Scene sampling, event extraction, counterfactual analysis, question
//! programs and dataset curation on top of `causim-physics`.

pub mod baselines;
pub mod catalog;
pub mod counterfactual;
pub mod curation;
pub mod describe;
pub mod dsl;
pub mod events;
pub mod questions;
pub mod seed;
pub mod stats;
pub mod video;
