//! Command-line driver for ULARMA models: ingestion, persistence and the
//! fit / select / forecast / diagnose / simulate / mc workflows.

pub mod commands;
pub mod data;
pub mod error;
pub mod model_file;
