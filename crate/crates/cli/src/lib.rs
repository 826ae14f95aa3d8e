pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod ternary;

pub use commands::run;
