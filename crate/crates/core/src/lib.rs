//! In-hospital mortality prediction from hourly vitals, clinical notes and an
//! expert summary of those notes.

pub mod cli;
pub mod cohort;
pub mod featurizer;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod temporal;
pub mod trainer;
