#![allow(clippy::needless_range_loop)]

pub mod ablation;
pub mod backend;
pub mod dataset;
pub mod distribution;
pub mod estimator;
pub mod explanation;
pub mod generation;
pub mod label;
pub mod metrics;
pub mod prompt;
pub mod proxy;
pub mod selection;
pub mod variability;
